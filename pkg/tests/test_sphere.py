import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from combilab.clcd import ClcdQuery, clcd_search, difference_vector
from combilab.errors import DomainError
from combilab.sphere import (
    PartitionParams,
    compressibility_distance,
    find_separated_sets,
    is_almost_constant,
    round_to_net,
    sample_non_almost_constant,
)


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


class TestPartitionParams:
    def test_open_interval_enforced(self):
        with pytest.raises(DomainError):
            PartitionParams(0.0, 0.5)
        with pytest.raises(DomainError):
            PartitionParams(0.5, 1.0)
        p = PartitionParams(0.25, 0.25)
        assert p.delta == p.rho == 0.25


class TestAlmostConstant:
    def test_uniform_direction(self):
        n = 16
        flag, lam = is_almost_constant(np.full(n, 1 / math.sqrt(n)), PartitionParams(0.1, 0.1))
        assert flag
        assert lam == pytest.approx(1 / math.sqrt(n), abs=1e-12)

    def test_basis_vector_large_n(self):
        v = np.zeros(100)
        v[0] = 1.0
        flag, lam = is_almost_constant(v, PartitionParams(0.05, 0.1))
        assert flag
        assert lam == pytest.approx(0.0, abs=1e-12)

    def test_two_level_vector_is_not(self):
        v = np.array([1.0, 1.0, -1.0, -1.0]) / 2
        flag, lam = is_almost_constant(v, PartitionParams(0.1, 0.1))
        assert not flag and lam is None

    def test_rejects_non_unit(self):
        with pytest.raises(DomainError):
            is_almost_constant(np.ones(4), PartitionParams(0.1, 0.1))
        with pytest.raises(DomainError):
            is_almost_constant(np.array([]), PartitionParams(0.1, 0.1))

    def test_witness_covers_enough_coordinates(self):
        rng = np.random.default_rng(2)
        p = PartitionParams(0.4, 0.6)
        hits = 0
        for _ in range(50):
            v = unit(rng.standard_normal(12))
            flag, lam = is_almost_constant(v, p)
            if not flag:
                continue
            hits += 1
            within = np.sum(np.abs(v - lam) <= p.rho / math.sqrt(12) + 1e-12)
            assert within >= math.ceil((1 - p.delta) * 12 - 1e-9)
        assert hits > 0

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_monotone_in_parameters(self, seed):
        v = unit(np.random.default_rng(seed).standard_normal(10))
        tight, _ = is_almost_constant(v, PartitionParams(0.2, 0.2))
        loose, _ = is_almost_constant(v, PartitionParams(0.35, 0.5))
        if tight:
            assert loose


class TestSeparatedSets:
    def test_two_level_split(self):
        v = np.array([1.0, 1.0, -1.0, -1.0]) / 2
        got = find_separated_sets(v, PartitionParams(0.5, 0.5))
        assert got is not None
        s1, s2 = got
        assert s1 == frozenset({0, 1})
        assert s2 == frozenset({2, 3})
        n = 4
        for i in s1:
            for j in s2:
                assert 0.5 / math.sqrt(2 * n) <= abs(v[i] - v[j]) <= 6 / math.sqrt(0.5 * n)

    def test_constant_vector_fails(self):
        v = np.full(9, 1 / 3.0)
        assert find_separated_sets(v, PartitionParams(0.25, 0.25)) is None

    def test_first_set_holds_smallest_index(self):
        v = np.array([-1.0, -1.0, 1.0, 1.0]) / 2
        got = find_separated_sets(v, PartitionParams(0.5, 0.5))
        assert got is not None
        assert 0 in got[0]

    def test_generated_vectors_pass_postcondition(self):
        p = PartitionParams(0.25, 0.25)
        rng = np.random.default_rng(77)
        n = 32
        lo = p.rho / math.sqrt(2 * n)
        hi = 6 / math.sqrt(p.delta * n)
        need = p.delta * n / 8
        for _ in range(100):
            v = sample_non_almost_constant(n, p, rng)
            got = find_separated_sets(v, p)
            assert got is not None
            s1, s2 = got
            assert len(s1) >= need - 1e-9 and len(s2) >= need - 1e-9
            assert not (s1 & s2)
            diffs = np.abs(v[sorted(s1)][:, None] - v[sorted(s2)][None, :])
            assert diffs.min() >= lo - 1e-12
            assert diffs.max() <= hi + 1e-12

    def test_difference_norm_lower_bound(self):
        # the two separated groups alone force a difference-vector norm of
        # at least sqrt(|s1| |s2|) * rho / sqrt(2n)
        p = PartitionParams(0.25, 0.25)
        rng = np.random.default_rng(78)
        n = 24
        for _ in range(100):
            v = sample_non_almost_constant(n, p, rng)
            got = find_separated_sets(v, p)
            assert got is not None
            s1, s2 = got
            floor = math.sqrt(len(s1) * len(s2)) * p.rho / math.sqrt(2 * n)
            assert difference_vector(v).norm >= floor - 1e-12


def test_clcd_lower_bound_for_non_almost_constant():
    # gamma below delta*rho/12 makes the denominator search land above
    # sqrt(delta n)/7 for every non-almost-constant unit vector
    p = PartitionParams(0.25, 0.25)
    n = 24
    gamma = 0.005
    assert gamma < p.delta * p.rho / 12
    q = ClcdQuery(cap=20.0, slope=gamma, horizon=1e4)
    floor = math.sqrt(p.delta * n) / 7
    rng = np.random.default_rng(6001)
    for _ in range(20):
        v = sample_non_almost_constant(n, p, rng)
        res = clcd_search(difference_vector(v), q)
        got = res.value if res.is_finite else q.horizon
        assert got >= floor - 1e-9


class TestCompressibility:
    def test_sparse_vector_at_zero_distance(self):
        x = np.zeros(10)
        x[0] = 1.0
        assert compressibility_distance(x, 0.1) == pytest.approx(0.0, abs=1e-12)

    def test_flat_vector_far_from_sparse(self):
        x = np.full(100, 0.1)
        assert compressibility_distance(x, 0.01) == pytest.approx(
            math.sqrt(2 - 2 * 0.1), abs=1e-12
        )

    def test_full_budget_distance_zero(self):
        rng = np.random.default_rng(3)
        x = unit(rng.standard_normal(7))
        assert compressibility_distance(x, 1.0) == pytest.approx(0.0, abs=1e-9)

    def test_empty_budget(self):
        x = unit(np.ones(3))
        assert compressibility_distance(x, 0.01) == pytest.approx(math.sqrt(2))

    def test_nonincreasing_in_delta(self):
        rng = np.random.default_rng(14)
        x = unit(rng.standard_normal(40))
        deltas = [0.02, 0.1, 0.3, 0.6, 1.0]
        dists = [compressibility_distance(x, d) for d in deltas]
        assert all(a >= b - 1e-12 for a, b in zip(dists, dists[1:]))

    def test_matches_direct_minimization(self):
        # distance to the best renormalized k-sparse projection
        rng = np.random.default_rng(15)
        x = unit(rng.standard_normal(8))
        k = 2
        a = np.sort(np.abs(x))[::-1]
        t = float(np.linalg.norm(a[:k]))
        assert compressibility_distance(x, 0.25) == pytest.approx(
            math.sqrt(2 - 2 * t), abs=1e-12
        )


class TestRoundToNet:
    def test_identity(self):
        x = np.array([0.3, -0.1, 0.5])
        w = round_to_net(x, x, 0.4)
        assert np.array_equal(w, x)

    def test_small_imbalance_rounds_to_base(self):
        x = np.array([1.0, 2.0, 3.0, 4.0])
        v = x + np.array([0.1, 0.1, 0.0, 0.0])
        w = round_to_net(v, x, 0.5)
        # k = 0.2*2/0.5 = 0.8 floors to zero placed entries
        assert np.array_equal(w, x)
        assert abs((v - w).sum()) <= 0.5 / 2 + 1e-12

    def test_precondition_enforced(self):
        with pytest.raises(DomainError):
            round_to_net([1.0, 0.0], [0.0, 0.0], 0.5)
        with pytest.raises(DomainError):
            round_to_net([1.0], [1.0], 0.0)

    def test_random_inputs_meet_both_guarantees(self):
        rng = np.random.default_rng(1000)
        for _ in range(1000):
            n = int(rng.integers(2, 40))
            x = rng.standard_normal(n)
            beta = float(rng.uniform(0.05, 2.0))
            step = rng.standard_normal(n)
            step *= rng.uniform(0, beta) / max(np.linalg.norm(step), 1e-12)
            v = x + step
            w = round_to_net(v, x, beta)
            assert float(np.linalg.norm(v - w)) <= 2 * beta + 1e-9
            assert abs(float((v - w).sum())) <= beta / math.sqrt(n) + 1e-9


def test_sampler_rejects_almost_constant():
    p = PartitionParams(0.25, 0.25)
    rng = np.random.default_rng(9)
    v = sample_non_almost_constant(16, p, rng)
    assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)
    assert not is_almost_constant(v, p)[0]


def test_sampler_gives_up_when_everything_is_constant():
    # delta, rho near 1 classify every unit vector as almost-constant
    p = PartitionParams(0.99, 0.99)
    rng = np.random.default_rng(10)
    with pytest.raises(DomainError):
        sample_non_almost_constant(3, p, rng, max_tries=5)
