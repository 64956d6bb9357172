"""Experiment-runner tests.

Each runner is exercised end to end on a seeded configuration and checked
against an oracle computed in the test where one exists: an exhaustive
determinant scan for the census, the exact support-sum law for the
small-ball rows, and the projection identity for the distance records.
The flat-file layer and the shared helpers get direct unit tests.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import binomtest

from combilab.anticonc import exact_law_W, levy_exact
from combilab.clcd import difference_vector
from combilab.errors import DomainError, ResourceLimitError
from combilab.harness.config import (
    ExperimentConfig,
    SummaryRow,
    TrialRecord,
    default_eps_grid,
    proportion_row,
    wilson_ci,
)
from combilab.harness.experiments import (
    _fitted_constant,
    _slope,
    run_distance_experiment,
    run_inequality_suite,
    run_singularity_census,
    run_smallball_validation,
    run_tail_experiment,
)
from combilab.harness.io import (
    RECORD_COLUMNS,
    SUMMARY_COLUMNS,
    fmt17,
    records_csv,
    summary_csv,
    summary_path_for,
    write_run,
)


def alternating_unit(n: int) -> np.ndarray:
    v = np.array([1.0 if i % 2 == 0 else -1.0 for i in range(n)])
    return v / np.linalg.norm(v)


def tail_cfg(**kw) -> ExperimentConfig:
    base = dict(
        experiment="tail", n=4, d=2, trials=200, seed=3,
        eps_grid=(0.0, 0.25, 0.5, 0.75, 1.0),
    )
    base.update(kw)
    return ExperimentConfig(**base)


def distance_cfg(**kw) -> ExperimentConfig:
    base = dict(
        experiment="distance", n=4, d=2, trials=150, seed=5,
        eps_grid=(0.0, 0.5, 1.0),
    )
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.fixture(scope="module")
def census4():
    cfg = ExperimentConfig("singularity", n=4, trials=1)
    return run_singularity_census(4, "exhaustive", cfg)


class TestExperimentConfig:
    def test_rejects_undersized_inputs(self):
        with pytest.raises(DomainError):
            ExperimentConfig("tail", n=1)
        with pytest.raises(DomainError):
            ExperimentConfig("tail", n=4, trials=0)
        with pytest.raises(DomainError):
            ExperimentConfig("tail", n=4, threads=0)

    def test_eps_grid_must_be_sorted_and_nonnegative(self):
        with pytest.raises(DomainError):
            ExperimentConfig("tail", n=4, eps_grid=(0.5, 0.25))
        with pytest.raises(DomainError):
            ExperimentConfig("tail", n=4, eps_grid=(-0.1, 0.5))

    def test_unknown_format_rejected(self):
        with pytest.raises(DomainError):
            ExperimentConfig("tail", n=4, fmt="yaml")

    def test_weight_defaults_to_half_the_dimension(self):
        assert ExperimentConfig("tail", n=8).resolved_d() == 4
        assert ExperimentConfig("tail", n=8, d=3).resolved_d() == 3
        with pytest.raises(DomainError):
            ExperimentConfig("tail", n=7).resolved_d()
        with pytest.raises(DomainError):
            ExperimentConfig("tail", n=4, d=5).resolved_d()

    def test_row_count_defaults_to_the_dimension(self):
        assert ExperimentConfig("tail", n=6).resolved_m() == 6
        assert ExperimentConfig("tail", n=6, m=2).resolved_m() == 2
        with pytest.raises(DomainError):
            ExperimentConfig("tail", n=6, m=0).resolved_m()

    def test_default_grid_spans_the_unit_interval(self):
        grid = default_eps_grid()
        assert grid[0] == 0.0
        assert grid[-1] == pytest.approx(1.0)
        assert len(grid) == 21
        assert np.allclose(np.diff(grid), 0.05)

    def test_as_dict_keeps_every_field(self):
        cfg = ExperimentConfig("tail", n=4, d=2, constants={"C": 2.0})
        d = cfg.as_dict()
        assert d["experiment"] == "tail"
        assert d["n"] == 4 and d["d"] == 2
        assert d["constants"] == {"C": 2.0}
        assert isinstance(d["eps_grid"], list)


class TestWilsonInterval:
    def test_matches_reference_implementation(self):
        # z is pinned at 1.96, scipy uses the exact quantile; agreement to
        # a few 1e-6 is all that difference allows
        for k, t in [(0, 10), (3, 17), (10, 10), (250, 1000), (1, 2)]:
            low, high = wilson_ci(k, t)
            ref = binomtest(k, t).proportion_ci(confidence_level=0.95, method="wilson")
            assert low == pytest.approx(ref.low, abs=2e-4)
            assert high == pytest.approx(ref.high, abs=2e-4)

    def test_degenerate_counts_pin_an_endpoint(self):
        low, _ = wilson_ci(0, 25)
        _, high = wilson_ci(25, 25)
        assert low == pytest.approx(0.0, abs=1e-12)
        assert high == pytest.approx(1.0, abs=1e-12)

    @given(st.integers(1, 400), st.data())
    def test_interval_contains_the_point_estimate(self, trials, data):
        # containment up to one rounding step: center and half-width come
        # from different expressions, so the endpoints can miss p by an ulp
        successes = data.draw(st.integers(0, trials))
        low, high = wilson_ci(successes, trials)
        p = successes / trials
        assert 0.0 <= low <= high <= 1.0
        assert low <= p + 1e-12
        assert p <= high + 1e-12

    def test_rejects_impossible_counts(self):
        with pytest.raises(DomainError):
            wilson_ci(5, 0)
        with pytest.raises(DomainError):
            wilson_ci(-1, 10)
        with pytest.raises(DomainError):
            wilson_ci(11, 10)

    def test_proportion_row_wraps_the_interval(self):
        row = proportion_row("x", 4, 0.5, 3, 12)
        assert row.estimate == 0.25
        assert row.ci_low <= 0.25 <= row.ci_high
        assert row.trials == 12


class TestFlatFiles:
    def test_cell_formatting(self):
        assert fmt17(None) == ""
        assert fmt17("mismatch") == "mismatch"
        assert fmt17(7) == "7"
        assert fmt17(0.1) == "0.10000000000000001"
        assert fmt17(0.5) == "0.5"

    @given(st.floats(allow_nan=False, allow_infinity=False))
    def test_float_cells_round_trip(self, x):
        assert float(fmt17(x)) == x

    def test_records_table_layout(self):
        cfg = ExperimentConfig("tail", n=4, d=2, trials=2)
        recs = [TrialRecord(0, "smin", 0.5), TrialRecord(1, "smin", 0.25, "mismatch")]
        rows = list(csv.reader(io.StringIO(records_csv(cfg, recs, 2))))
        assert tuple(rows[0]) == RECORD_COLUMNS
        assert rows[1] == ["tail", "4", "2", "0", "smin", "0.5", ""]
        assert rows[2][6] == "mismatch"

    def test_missing_weight_leaves_the_cell_empty(self):
        cfg = ExperimentConfig("clcd", n=3, trials=1)
        text = records_csv(cfg, [TrialRecord(0, "x", 1.0)], None)
        rows = list(csv.reader(io.StringIO(text)))
        assert rows[1][2] == ""

    def test_summary_table_layout(self):
        rows_in = [
            SummaryRow("tail", 4, 0.5, 0.25, 0.1, 0.4, 100),
            SummaryRow("tail", 4, "slope", 1.5, None, None, 100),
        ]
        rows = list(csv.reader(io.StringIO(summary_csv(rows_in))))
        assert tuple(rows[0]) == SUMMARY_COLUMNS
        assert rows[1] == [
            "tail", "4", "0.5", "0.25",
            "0.10000000000000001", "0.40000000000000002", "100",
        ]
        assert rows[2] == ["tail", "4", "slope", "1.5", "", "", "100"]

    def test_summary_file_sits_next_to_the_records(self):
        assert summary_path_for(Path("out.csv")) == Path("out.summary.csv")
        assert summary_path_for(Path("runs/a.json")) == Path("runs/a.summary.json")
        assert summary_path_for(Path("bare")) == Path("bare.summary.csv")

    def test_write_run_csv_to_files(self, tmp_path):
        cfg = ExperimentConfig("tail", n=4, d=2, trials=1, out=str(tmp_path / "r.csv"))
        msg = write_run(
            cfg,
            [TrialRecord(0, "smin", 1.0)],
            [SummaryRow("tail", 4, 0.0, 0.0, 0.0, 0.1, 1)],
            2,
        )
        assert "r.csv" in msg and "r.summary.csv" in msg
        assert (tmp_path / "r.csv").read_text().splitlines()[0] == ",".join(RECORD_COLUMNS)
        assert (tmp_path / "r.summary.csv").read_text().splitlines()[0] == ",".join(SUMMARY_COLUMNS)

    def test_write_run_csv_to_stdout_separates_the_tables(self):
        cfg = ExperimentConfig("tail", n=4, d=2, trials=1)
        text = write_run(cfg, [TrialRecord(0, "smin", 1.0)], [], 2)
        rec_part, sum_part = text.split("\n\n", 1)
        assert rec_part.splitlines()[0] == ",".join(RECORD_COLUMNS)
        assert sum_part.splitlines()[0] == ",".join(SUMMARY_COLUMNS)

    def test_write_run_json_document(self, tmp_path):
        cfg = ExperimentConfig("tail", n=4, d=2, trials=1, fmt="json")
        doc = json.loads(
            write_run(
                cfg,
                [TrialRecord(0, "smin", 1.0)],
                [SummaryRow("tail", 4, "slope", 2.0, None, None, 1)],
                2,
            )
        )
        assert set(doc) == {"config", "records", "summary"}
        assert doc["config"]["n"] == 4
        assert doc["records"][0]["statistic"] == "smin"
        assert doc["summary"][0]["ci_low"] is None

        out = tmp_path / "run.json"
        cfg2 = ExperimentConfig("tail", n=4, d=2, trials=1, fmt="json", out=str(out))
        msg = write_run(cfg2, [], [], 2)
        assert msg == f"wrote {out}\n"
        assert json.loads(out.read_text())["config"]["format"] == "json"


class TestHelpers:
    def test_slope_recovers_an_exact_line(self):
        assert _slope([0.0, 1.0, 2.0], [1.0, 3.0, 5.0]) == pytest.approx(2.0)

    def test_slope_degenerate_inputs(self):
        assert _slope([1.0], [2.0]) == 0.0
        assert _slope([3.0, 3.0], [0.0, 5.0]) == 0.0

    def test_slope_agrees_with_polyfit(self):
        rng = np.random.default_rng(9)
        xs = rng.uniform(0.0, 1.0, 12)
        ys = rng.uniform(-2.0, 2.0, 12)
        assert _slope(xs, ys) == pytest.approx(np.polyfit(xs, ys, 1)[0], rel=1e-9)

    def test_fitted_constant_is_the_binding_one(self):
        freqs = (0.5, 0.1)
        gs = (1.0, 4.0)
        c = _fitted_constant((1.0, 2.0), freqs, gs)
        assert c == pytest.approx(math.log(20.0) / 4.0)
        for f, g in zip(freqs, gs):
            assert 2.0 * math.exp(-c * g) >= f * (1.0 - 1e-12)

    def test_fitted_constant_none_when_unconstrained(self):
        assert _fitted_constant((1.0, 2.0), (0.0, 0.0), (1.0, 4.0)) is None


class TestTailExperiment:
    def test_records_cover_every_trial(self):
        records, _ = run_tail_experiment(tail_cfg(trials=50))
        smin = [r for r in records if r.statistic == "smin"]
        exact = [r for r in records if r.statistic == "singular_exact"]
        assert [r.trial for r in smin] == list(range(50))
        assert [r.trial for r in exact] == list(range(50))
        assert len(records) == 100

    def test_float_threshold_agrees_with_exact_arithmetic(self):
        # nonsingular 0/1 matrices at n = 4 keep their smallest singular
        # value far above the threshold, so the counters must coincide
        records, _ = run_tail_experiment(tail_cfg())
        assert all(r.flag == "" for r in records if r.statistic == "singular_exact")

    def test_tail_probabilities_nondecreasing(self):
        _, summary = run_tail_experiment(tail_cfg())
        ests = [s.estimate for s in summary if s.eps != "slope"]
        assert all(a <= b + 1e-12 for a, b in zip(ests, ests[1:]))

    def test_zero_eps_row_counts_the_exact_singulars(self):
        cfg = tail_cfg()
        records, summary = run_tail_experiment(cfg)
        k = sum(r.value for r in records if r.statistic == "singular_exact")
        row0 = next(s for s in summary if s.eps == 0.0)
        assert row0.estimate == pytest.approx(k / cfg.trials)

    def test_slope_row_closes_the_summary(self):
        _, summary = run_tail_experiment(tail_cfg())
        row = summary[-1]
        assert row.eps == "slope"
        assert row.ci_low is None and row.ci_high is None

    def test_singularity_rate_matches_the_exhaustive_census(self, census4):
        cfg = tail_cfg(trials=300)
        _, summary = run_tail_experiment(cfg)
        row0 = next(s for s in summary if s.eps == 0.0)
        p = float(census4[0].fraction)
        se = math.sqrt(p * (1.0 - p) / cfg.trials)
        assert abs(row0.estimate - p) <= 4.0 * se

    def test_thread_count_does_not_change_the_output(self):
        assert run_tail_experiment(tail_cfg(trials=64, threads=1)) == run_tail_experiment(
            tail_cfg(trials=64, threads=4)
        )


class TestSingularityCensus:
    def test_two_by_two_exact_fraction(self):
        cfg = ExperimentConfig("singularity", n=2, trials=1)
        result, records, summary = run_singularity_census(2, "exhaustive", cfg)
        assert result.fraction == Fraction(1, 2)
        assert (result.singular, result.total) == (2, 4)
        assert records[0] == TrialRecord(0, "singular_count", 2.0)
        assert records[1] == TrialRecord(0, "total_count", 4.0)
        assert summary == [SummaryRow("singularity", 2, "exact", 0.5, 0.5, 0.5, 4)]

    def test_four_by_four_matches_a_determinant_scan(self, census4):
        result = census4[0]
        rows = []
        for support in itertools.combinations(range(4), 2):
            r = np.zeros(4)
            r[list(support)] = 1.0
            rows.append(r)
        singular = sum(
            round(float(np.linalg.det(np.stack(combo)))) == 0
            for combo in itertools.product(rows, repeat=4)
        )
        assert result.total == 6**4
        assert result.singular == singular
        assert result.fraction == Fraction(singular, 6**4)

    def test_four_by_four_fraction_pinned(self, census4):
        assert census4[0].fraction == Fraction(7, 9)

    def test_montecarlo_tracks_the_exhaustive_value(self, census4):
        exact = float(census4[0].fraction)
        cfg = ExperimentConfig("singularity", n=4, trials=400, seed=11)
        result, records, summary = run_singularity_census(4, "montecarlo", cfg)
        assert result.fraction is None
        assert result.mode == "montecarlo"
        assert len(records) == 400
        assert all(r.statistic == "singular_exact" for r in records)
        se = math.sqrt(exact * (1.0 - exact) / 400)
        assert abs(result.estimate - exact) <= 4.0 * se
        assert summary[0].eps == "montecarlo"
        assert summary[0].ci_low <= result.estimate <= summary[0].ci_high

    def test_montecarlo_is_thread_invariant(self):
        cfg1 = ExperimentConfig("singularity", n=4, trials=60, seed=2, threads=1)
        cfg4 = ExperimentConfig("singularity", n=4, trials=60, seed=2, threads=4)
        assert run_singularity_census(4, "montecarlo", cfg1) == run_singularity_census(
            4, "montecarlo", cfg4
        )

    def test_exhaustive_cap_enforced(self):
        cfg = ExperimentConfig("singularity", n=30, trials=1)
        with pytest.raises(ResourceLimitError) as exc:
            run_singularity_census(30, "exhaustive", cfg)
        assert exc.value.cap == 100_000_000

    def test_unknown_mode_rejected(self):
        cfg = ExperimentConfig("singularity", n=4, trials=1)
        with pytest.raises(DomainError):
            run_singularity_census(4, "sample", cfg)

    def test_odd_dimension_needs_an_explicit_weight(self):
        cfg = ExperimentConfig("singularity", n=3, trials=1)
        with pytest.raises(DomainError):
            run_singularity_census(3, "montecarlo", cfg)
        cfg_d = ExperimentConfig("singularity", n=3, d=1, trials=64, seed=2)
        result, _, _ = run_singularity_census(3, "montecarlo", cfg_d)
        assert 0.0 <= result.estimate <= 1.0


class TestDistanceExperiment:
    def test_normal_projection_identity(self):
        """|<last row, unit normal>| equals the distance whenever the
        leading rows span a full hyperplane."""
        records, _ = run_distance_experiment(distance_cfg())
        dist = {r.trial: r.value for r in records if r.statistic == "distance"}
        dots = [(r.trial, r.value) for r in records if r.statistic == "normal_dot"]
        assert dots
        for trial, dot in dots:
            assert dot == pytest.approx(dist[trial], abs=1e-9)

    def test_zero_distance_marks_exactly_the_singular_draws(self):
        records, _ = run_distance_experiment(distance_cfg(trials=200))
        dist = {r.trial: (r.value, r.flag) for r in records if r.statistic == "distance"}
        sing = {r.trial: bool(r.value) for r in records if r.statistic == "singular_exact"}
        checked = 0
        for trial, (value, flag) in dist.items():
            if flag == "degenerate":
                continue
            assert (value <= 1e-9) == sing[trial]
            checked += 1
        assert checked > 0

    def test_distance_levy_rows_nondecreasing(self):
        _, summary = run_distance_experiment(distance_cfg())
        levy = [
            s.estimate
            for s in summary
            if s.experiment == "distance" and s.eps != "degenerate"
        ]
        assert all(a <= b + 1e-12 for a, b in zip(levy, levy[1:]))

    def test_degenerate_row_counts_the_flags(self):
        cfg = distance_cfg()
        records, summary = run_distance_experiment(cfg)
        k = sum(1 for r in records if r.statistic == "distance" and r.flag == "degenerate")
        row = next(s for s in summary if s.eps == "degenerate")
        assert row.estimate == pytest.approx(k / cfg.trials)

    def test_relation_rows_scale_by_inverse_delta(self):
        cfg = distance_cfg(delta=0.25, rho=0.25)
        records, summary = run_distance_experiment(cfg)
        dists = np.array([r.value for r in records if r.statistic == "distance"])
        smins = np.array([r.value for r in records if r.statistic == "smin"])
        for eps in cfg.eps_grid:
            right = next(
                s for s in summary if s.experiment == "distance_via_right" and s.eps == eps
            )
            assert right.estimate == pytest.approx(4.0 * float(np.mean(dists <= eps)))
            left = next(
                s for s in summary if s.experiment == "distance_via_left" and s.eps == eps
            )
            expected = float(np.mean(smins <= eps * 0.25 / 2.0))
            assert left.estimate == pytest.approx(expected)


class TestSmallballValidation:
    def test_summary_shapes_and_the_exact_rows(self):
        cfg = ExperimentConfig(
            "smallball", n=8, trials=10_000, seed=21,
            eps_grid=(0.0, 0.25, 0.5), alpha=4.0, gamma=0.1,
        )
        v = alternating_unit(8)
        records, summary, info = run_smallball_validation(cfg, v=v)

        assert [r.statistic for r in records] == ["clcd_value", "b_max"]
        assert records[0].flag == "finite"
        expected_bmax = float(np.linalg.norm(difference_vector(v).entries)) / math.sqrt(8)
        assert records[1].value == pytest.approx(expected_bmax)

        names = [s.experiment for s in summary]
        assert names == ["smallball", "smallball_cstar", "smallball_bound", "smallball_exact"] * 3
        assert info["exact_available"]
        assert not info["upper_bound_on_bound"]

    def test_empirical_levy_tracks_the_exact_law(self):
        cfg = ExperimentConfig(
            "smallball", n=8, trials=10_000, seed=21,
            eps_grid=(0.0, 0.25, 0.5), alpha=4.0, gamma=0.1,
        )
        v = alternating_unit(8)
        _, summary, _ = run_smallball_validation(cfg, v=v)
        law = exact_law_W(v, 4)
        for eps in cfg.eps_grid:
            emp = next(
                s for s in summary if s.experiment == "smallball" and s.eps == eps
            ).estimate
            exact_row = next(
                s for s in summary if s.experiment == "smallball_exact" and s.eps == eps
            ).estimate
            assert exact_row == pytest.approx(levy_exact(law, eps))
            assert abs(emp - exact_row) <= 0.02

    def test_cstar_rows_follow_the_arithmetic(self):
        cfg = ExperimentConfig(
            "smallball", n=8, trials=2000, seed=7,
            eps_grid=(0.25,), alpha=4.0, gamma=0.1,
        )
        _, summary, info = run_smallball_validation(cfg, v=alternating_unit(8))
        ball = next(s for s in summary if s.experiment == "smallball")
        cstar = next(s for s in summary if s.experiment == "smallball_cstar")
        bound = next(s for s in summary if s.experiment == "smallball_bound")
        denom = 0.25 + info["mid_unit"] + info["exp_unit"]
        assert cstar.estimate == pytest.approx(ball.estimate / denom)
        assert info["cstar_by_eps"][0.25] == pytest.approx(cstar.estimate)
        assert bound.estimate == pytest.approx(denom)
        assert bound.ci_low is None and bound.ci_high is None

    def test_constant_direction_zeroes_the_middle_term(self):
        cfg = ExperimentConfig(
            "smallball", n=8, trials=500, seed=3,
            eps_grid=(0.0, 0.5), alpha=4.0, gamma=0.1,
        )
        v = np.full(8, 1.0 / math.sqrt(8.0))
        records, summary, info = run_smallball_validation(cfg, v=v)
        assert records[0].value == math.inf
        assert info["clcd"].provably_infinite
        assert records[1].value == 0.0
        assert info["mid_unit"] == 0.0
        assert info["exp_unit"] == pytest.approx(math.exp(-4.0))
        # the support sum is deterministic, so every window catches all mass
        for s in summary:
            if s.experiment in ("smallball", "smallball_exact"):
                assert s.estimate == 1.0
        row = next(
            s for s in summary if s.experiment == "smallball_cstar" and s.eps == 0.5
        )
        assert row.estimate == pytest.approx(1.0 / (0.5 + math.exp(-4.0)))

    def test_default_vector_is_sampled_on_the_sphere(self):
        cfg = ExperimentConfig("smallball", n=10, trials=50, seed=2, eps_grid=(0.5,))
        _, _, info = run_smallball_validation(cfg)
        assert info["v"].shape == (10,)
        assert np.linalg.norm(info["v"]) == pytest.approx(1.0)

    def test_rejects_a_vector_of_the_wrong_length(self):
        cfg = ExperimentConfig("smallball", n=8, trials=10)
        with pytest.raises(DomainError):
            run_smallball_validation(cfg, v=np.ones(5))


class TestInequalitySuite:
    def test_all_checks_pass_on_a_seeded_run(self):
        cfg = ExperimentConfig("verify", n=16, trials=2000, seed=0)
        report = run_inequality_suite(cfg)
        assert [c.name for c in report.checks] == [
            "image_concentration",
            "restricted_norm",
            "invertibility_single_vector",
            "row_combination_anticoncentration",
        ]
        assert report.passed
        for line in report.lines():
            assert line.startswith("PASS ")
            assert ": " in line and "=" in line

    def test_concentration_check_needs_the_half_weight_regime(self):
        cfg = ExperimentConfig("verify", n=16, d=3, trials=10)
        with pytest.raises(DomainError):
            run_inequality_suite(cfg)
