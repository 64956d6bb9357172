"""Monte Carlo and exhaustive experiment runners.

Each trial owns an independent substream keyed by (master seed, trial
index), so results are reproducible and independent of the thread count;
aggregation only ever merges per-trial outputs back in index order.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from ..anticonc import (
    BoundParams,
    SampleSet,
    empirical_atom_max,
    exact_law_W,
    expected_square_W,
    levy_empirical,
    levy_exact,
    smallball_bound,
)
from ..clcd import ClcdQuery
from ..combi import (
    enumerate_fixed_weight,
    sample_bits_batch,
    sample_row_regular,
    sample_supports,
    substream,
)
from ..errors import DomainError, ResourceLimitError
from ..spectral import (
    DEFAULT_OPTIONS,
    is_singular_exact,
    restricted_operator_norm,
    row_span_distance,
    smallest_singular_value,
)
from ..sphere import PartitionParams, sample_non_almost_constant
from .config import ExperimentConfig, SummaryRow, TrialRecord, proportion_row

CENSUS_CAP = 100_000_000
SLOPE_RANGE = (0.1, 0.8)
EXACT_LAW_MAX_N = 24
INVERTIBILITY_TRIALS = 100_000
_SUPPORT_CHUNK = 2_000_000  # support cells per batch; bounds peak memory


def _map_trials(trials: int, threads: int, fn: Callable[[int], object]) -> list:
    if threads <= 1:
        return [fn(i) for i in range(trials)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(trials)))


def _slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.size < 2:
        return 0.0
    xc = x - x.mean()
    den = float(xc @ xc)
    if den == 0.0:
        return 0.0
    return float(xc @ (y - y.mean())) / den


def run_tail_experiment(cfg: ExperimentConfig) -> tuple[list[TrialRecord], list[SummaryRow]]:
    """Smallest-singular-value tail of the random row-regular square matrix.

    Per trial: draw the matrix, record its smallest singular value and the
    exact singularity decision. Summary: empirical P{s_n <= eps/sqrt(n)}
    per grid eps (eps = 0 via the floating singularity threshold, checked
    against the exact counter), plus the least-squares slope of probability
    against eps over the linear range.
    """
    n = cfg.n
    d = cfg.resolved_d()

    def one(i: int):
        q = sample_row_regular(n, n, d, substream(cfg.seed, i))
        arr = q.to_array()
        smin = smallest_singular_value(arr)
        exact = is_singular_exact(q)
        thresh = DEFAULT_OPTIONS.singularity_threshold(arr)
        return smin, exact, smin <= thresh

    outcomes = _map_trials(cfg.trials, cfg.threads, one)
    records: list[TrialRecord] = []
    smins = np.empty(cfg.trials)
    exact_flags = np.empty(cfg.trials, dtype=bool)
    float_flags = np.empty(cfg.trials, dtype=bool)
    for i, (smin, exact, below) in enumerate(outcomes):
        smins[i] = smin
        exact_flags[i] = exact
        float_flags[i] = below
        records.append(TrialRecord(i, "smin", smin))
        records.append(
            TrialRecord(i, "singular_exact", float(exact), "" if exact == below else "mismatch")
        )
    summary: list[SummaryRow] = []
    root = math.sqrt(n)
    probs = []
    for eps in cfg.eps_grid:
        if eps == 0.0:
            k = int(float_flags.sum())
        else:
            k = int(np.sum(smins <= eps / root))
        summary.append(proportion_row("tail", n, eps, k, cfg.trials))
        probs.append(k / cfg.trials)
    lo, hi = SLOPE_RANGE
    pts = [(e, p) for e, p in zip(cfg.eps_grid, probs) if lo - 1e-12 <= e <= hi + 1e-12]
    slope = _slope([e for e, _ in pts], [p for _, p in pts])
    summary.append(SummaryRow("tail", n, "slope", slope, None, None, cfg.trials))
    return records, summary


@dataclass(frozen=True)
class CensusResult:
    n: int
    d: int
    mode: str
    singular: int
    total: int
    fraction: Optional[Fraction]
    estimate: float
    ci: tuple[float, float]


def run_singularity_census(
    n: int, mode: str, cfg: ExperimentConfig
) -> tuple[CensusResult, list[TrialRecord], list[SummaryRow]]:
    """Singularity probability of the n x n row-regular matrix.

    Exhaustive mode enumerates all C(n,d)^n matrices (capped at 10^8) and
    returns the exact rational; Monte Carlo estimates it with a Wilson
    interval. Both decide singularity exactly.
    """
    d = cfg.d if cfg.d is not None else None
    if d is None:
        if n % 2 != 0:
            raise DomainError(f"n must be even when d is unspecified, got n={n}")
        d = n // 2
    if mode == "exhaustive":
        per_row = math.comb(n, d)
        total = per_row**n
        if total > CENSUS_CAP:
            raise ResourceLimitError(
                f"C({n},{d})^{n} = {total} exceeds the exhaustive cap {CENSUS_CAP}",
                size=total,
                cap=CENSUS_CAP,
            )
        rows = [fv.to_array(dtype=np.int64) for fv in enumerate_fixed_weight(n, d)]
        singular = 0
        for combo in itertools.product(range(per_row), repeat=n):
            mat = np.stack([rows[j] for j in combo])
            if is_singular_exact(mat):
                singular += 1
        frac = Fraction(singular, total)
        est = float(frac)
        result = CensusResult(n, d, "exhaustive", singular, total, frac, est, (est, est))
        records = [
            TrialRecord(0, "singular_count", float(singular)),
            TrialRecord(0, "total_count", float(total)),
        ]
        summary = [SummaryRow("singularity", n, "exact", est, est, est, total)]
        return result, records, summary
    if mode != "montecarlo":
        raise DomainError(f"mode must be exhaustive or montecarlo, got {mode!r}")

    def one(i: int) -> bool:
        return is_singular_exact(sample_row_regular(n, n, d, substream(cfg.seed, i)))

    flags = _map_trials(cfg.trials, cfg.threads, one)
    records = [
        TrialRecord(i, "singular_exact", float(v)) for i, v in enumerate(flags)
    ]
    k = sum(flags)
    row = proportion_row("singularity", n, "montecarlo", k, cfg.trials)
    result = CensusResult(
        n, d, "montecarlo", k, cfg.trials, None, row.estimate, (row.ci_low, row.ci_high)
    )
    return result, records, [row]


def run_distance_experiment(cfg: ExperimentConfig) -> tuple[list[TrialRecord], list[SummaryRow]]:
    """Distance from the last row to the span of the others, with the
    normal-projection identity and the invertibility-via-distance relation.

    Per trial: distance, |<last row, normal>| when the span is a full
    hyperplane (degenerate trials flagged and excluded from normal-based
    statistics), the smallest singular value, and the exact singularity
    flag. Summary: empirical Levy function of the distance per eps, plus
    both sides of the relation P{s_n <= eps rho / sqrt(n)} <= (1/delta)
    P{dist <= eps} as informational rows.
    """
    n = cfg.n
    d = cfg.resolved_d()

    def one(i: int):
        q = sample_row_regular(n, n, d, substream(cfg.seed, i))
        arr = q.to_array()
        dist, normal = row_span_distance(arr)
        dot = None if normal is None else float(abs(arr[-1] @ normal))
        return dist, dot, smallest_singular_value(arr), is_singular_exact(q)

    outcomes = _map_trials(cfg.trials, cfg.threads, one)
    records: list[TrialRecord] = []
    dists = np.empty(cfg.trials)
    smins = np.empty(cfg.trials)
    degenerate = 0
    for i, (dist, dot, smin, singular) in enumerate(outcomes):
        dists[i] = dist
        smins[i] = smin
        flag = "" if dot is not None else "degenerate"
        degenerate += dot is None
        records.append(TrialRecord(i, "distance", dist, flag))
        if dot is not None:
            records.append(TrialRecord(i, "normal_dot", dot))
        records.append(TrialRecord(i, "smin", smin))
        records.append(TrialRecord(i, "singular_exact", float(singular)))
    samples = SampleSet.from_values(dists, seed=cfg.seed, substreams=(0, cfg.trials))
    summary: list[SummaryRow] = []
    root = math.sqrt(n)
    for eps in cfg.eps_grid:
        frac = empirical_atom_max(samples) if eps == 0.0 else levy_empirical(samples, eps)
        k = int(round(frac * cfg.trials))
        summary.append(proportion_row("distance", n, eps, k, cfg.trials))
    for eps in cfg.eps_grid:
        k_left = int(np.sum(smins <= eps * cfg.rho / root))
        summary.append(proportion_row("distance_via_left", n, eps, k_left, cfg.trials))
        k_right = int(np.sum(dists <= eps))
        base = proportion_row("distance_via_right", n, eps, k_right, cfg.trials)
        scale = 1.0 / cfg.delta
        summary.append(
            SummaryRow(
                "distance_via_right",
                n,
                eps,
                base.estimate * scale,
                base.ci_low * scale,
                base.ci_high * scale,
                cfg.trials,
            )
        )
    summary.append(proportion_row("distance", n, "degenerate", degenerate, cfg.trials))
    return records, summary


def _batched_support_sums(
    v: np.ndarray, d: int, count: int, stream, rows_per_item: int = 1
) -> np.ndarray:
    """sum of v over each sampled support, drawn in memory-bounded batches;
    returns shape (count,) or (count, rows_per_item)."""
    n = v.size
    total_rows = count * rows_per_item
    per_batch = max(1, _SUPPORT_CHUNK // max(d, 1))
    pieces = []
    done = 0
    sub = 0
    while done < total_rows:
        take = min(per_batch, total_rows - done)
        supports = sample_supports(n, d, take, stream.child(sub))
        pieces.append(v[supports].sum(axis=1))
        done += take
        sub += 1
    flat = np.concatenate(pieces)
    if rows_per_item == 1:
        return flat
    return flat.reshape(count, rows_per_item)


def run_smallball_validation(
    cfg: ExperimentConfig, v: Optional[np.ndarray] = None
) -> tuple[list[TrialRecord], list[SummaryRow], dict]:
    """Small-ball bound against the empirical law of the support statistic.

    Draws cfg.trials samples of W = sum of v over a uniform weight-d
    support, estimates the Levy function per grid eps, evaluates the
    three-term bound once (its eps-free terms do not move), and reports per
    eps the smallest constant that would make the bound hold. For n <= 24
    the exact law is computed as well and reported alongside.
    """
    n = cfg.n
    d = cfg.resolved_d()
    part = PartitionParams(cfg.delta, cfg.rho)
    if v is None:
        v = sample_non_almost_constant(n, part, substream(cfg.seed, 0).generator())
    v = np.asarray(v, dtype=float).ravel()
    if v.size != n:
        raise DomainError(f"v has length {v.size}, expected n = {n}")
    alpha = cfg.alpha if cfg.alpha is not None else n / 2.0
    gamma = cfg.gamma if cfg.gamma is not None else 0.1
    c_const = float(cfg.constants.get("C", 1.0))
    params = BoundParams(C=c_const, alpha=alpha, gamma=gamma, **{
        k: val for k, val in cfg.constants.items() if k != "C"
    })
    query = ClcdQuery(cap=alpha, slope=gamma, horizon=cfg.horizon)
    bound0 = smallball_bound("plain", 0.0, params, v=v, query=query)
    mid_unit = bound0.denominator_term / c_const
    exp_unit = bound0.exponential_term / c_const

    w = _batched_support_sums(v, d, cfg.trials, substream(cfg.seed, 1))
    samples = SampleSet.from_values(w, seed=cfg.seed, substreams=(1, 2))
    exact = exact_law_W(v, d) if n <= EXACT_LAW_MAX_N else None

    records = [
        TrialRecord(0, "clcd_value", bound0.clcd.value if bound0.clcd.is_finite else math.inf,
                    bound0.clcd.status),
        TrialRecord(0, "b_max", bound0.b_max),
    ]
    summary: list[SummaryRow] = []
    cstar_by_eps = {}
    for eps in cfg.eps_grid:
        frac = empirical_atom_max(samples) if eps == 0.0 else levy_empirical(samples, eps)
        k = int(round(frac * cfg.trials))
        summary.append(proportion_row("smallball", n, eps, k, cfg.trials))
        denom = eps + mid_unit + exp_unit
        base = proportion_row("smallball_cstar", n, eps, k, cfg.trials)
        cstar = frac / denom
        cstar_by_eps[eps] = cstar
        summary.append(
            SummaryRow("smallball_cstar", n, eps, cstar,
                       base.ci_low / denom, base.ci_high / denom, cfg.trials)
        )
        summary.append(
            SummaryRow("smallball_bound", n, eps, c_const * denom, None, None, cfg.trials)
        )
        if exact is not None:
            le = levy_exact(exact, eps)
            summary.append(SummaryRow("smallball_exact", n, eps, le, le, le, exact.n_atoms))
    info = {
        "v": v,
        "alpha": alpha,
        "gamma": gamma,
        "clcd": bound0.clcd,
        "mid_unit": mid_unit,
        "exp_unit": exp_unit,
        "upper_bound_on_bound": bound0.upper_bound_on_bound,
        "cstar_by_eps": cstar_by_eps,
        "exact_available": exact is not None,
    }
    return records, summary, info


@dataclass(frozen=True)
class SuiteCheck:
    name: str
    passed: bool
    details: dict


@dataclass(frozen=True)
class SuiteReport:
    checks: tuple[SuiteCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list[str]:
        out = []
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            detail = ", ".join(f"{k}={v}" for k, v in sorted(c.details.items()))
            out.append(f"{status} {c.name}: {detail}")
        return out


def _fitted_constant(ts, freqs, gs) -> Optional[float]:
    """Largest c with 2 exp(-c g(t)) >= freq(t) on the whole grid; the
    tightest exponential of the given shape still dominating the data.
    Grid points with zero frequency impose no constraint."""
    best = None
    for t, f, g in zip(ts, freqs, gs):
        if f <= 0.0 or g <= 0.0:
            continue
        c = math.log(2.0 / f) / g
        best = c if best is None else min(best, c)
    return best


def run_inequality_suite(cfg: ExperimentConfig) -> SuiteReport:
    """Monte Carlo checks of the concentration and invertibility bounds.

    (a) image-norm concentration: exact second-moment formula within 3
        standard errors, the all-ones direction exactly deterministic, and
        the deviation tail fitted with the largest constant that keeps the
        exponential bound above every observed frequency;
    (b) restricted operator norm: tail frequencies nonincreasing on the t
        grid, fitted constant reported;
    (c) invertibility on one vector: frequency of a tiny image at
        n in {16,32,64} (10^5 trials each) nonincreasing in n and zero at
        n = 64;
    (d) anti-concentration of a fixed row combination: frequency below the
        stated exponential bound at each n, nonincreasing in n.
    """
    checks = [
        _check_image_concentration(cfg),
        _check_restricted_norm(cfg),
        _check_invertibility(cfg),
        _check_anticoncentration(cfg),
    ]
    return SuiteReport(tuple(checks))


def _check_image_concentration(cfg: ExperimentConfig) -> SuiteCheck:
    n = cfg.n
    d = cfg.resolved_d()
    m = cfg.resolved_m()
    if d * 2 != n:
        raise DomainError("the concentration check runs in the half-weight regime d = n/2")
    part = PartitionParams(cfg.delta, cfg.rho)
    v = sample_non_almost_constant(n, part, substream(cfg.seed, 10).generator())
    r = abs(float(v.sum()))
    w = _batched_support_sums(v, d, cfg.trials, substream(cfg.seed, 100), rows_per_item=m)
    sq = (w * w).sum(axis=1)
    exact_mean = m * expected_square_W(v, d)
    se = float(sq.std(ddof=1)) / math.sqrt(cfg.trials)
    mean_ok = abs(float(sq.mean()) - exact_mean) <= 3.0 * se

    ones = np.full(n, 1.0 / math.sqrt(n))
    w1 = _batched_support_sums(ones, d, min(cfg.trials, 200), substream(cfg.seed, 10_000),
                               rows_per_item=m)
    sq1 = (w1 * w1).sum(axis=1)
    det_val = m * d * d / n
    det_ok = bool(np.all(np.abs(sq1 - det_val) <= 1e-9 * det_val))

    sigma = float(sq.std(ddof=1))
    scale = r * r + 1.0
    ts = [sigma * f for f in (0.5, 1.0, 2.0, 4.0, 8.0)]
    dev = np.abs(sq - exact_mean)
    freqs = [float(np.mean(dev >= t)) for t in ts]
    gs = [min(t * t / (scale * scale * n), t / scale) for t in ts]
    c1 = _fitted_constant(ts, freqs, gs)
    return SuiteCheck(
        "image_concentration",
        mean_ok and det_ok,
        {
            "mean_ok": mean_ok,
            "deterministic_ok": det_ok,
            "exact_mean": round(exact_mean, 6),
            "fitted_c1": None if c1 is None else round(c1, 6),
            "trials": cfg.trials,
        },
    )


def _check_restricted_norm(cfg: ExperimentConfig) -> SuiteCheck:
    n = cfg.n
    d = cfg.resolved_d()
    trials = min(cfg.trials, 2000)

    def one(i: int) -> float:
        q = sample_row_regular(n, n, d, substream(cfg.seed, 1_000_000 + i))
        return restricted_operator_norm(q)

    norms = np.asarray(_map_trials(trials, cfg.threads, one))
    root = math.sqrt(n)
    ts = (1.05, 1.15, 1.3, 1.5)
    freqs = [float(np.mean(norms >= t * root)) for t in ts]
    monotone = all(a >= b for a, b in zip(freqs, freqs[1:]))
    c3 = _fitted_constant(ts, freqs, [t * t * n for t in ts])
    return SuiteCheck(
        "restricted_norm",
        monotone,
        {
            "freqs": "/".join(f"{f:.4g}" for f in freqs),
            "fitted_c3": None if c3 is None else round(c3, 6),
            "trials": trials,
        },
    )


def _check_invertibility(cfg: ExperimentConfig) -> SuiteCheck:
    freqs = {}
    for j, n in enumerate((16, 32, 64)):
        d = n // 2
        part = PartitionParams(cfg.delta, cfg.rho)
        v = sample_non_almost_constant(
            n, part, substream(cfg.seed, 2_000_000 + j).generator()
        )
        w = _batched_support_sums(
            v, d, INVERTIBILITY_TRIALS, substream(cfg.seed, 2_100_000 + j * 1000),
            rows_per_item=n,
        )
        sq = (w * w).sum(axis=1)
        freqs[n] = float(np.mean(sq <= n / 25.0))
    ordered = [freqs[16], freqs[32], freqs[64]]
    ok = ordered[0] >= ordered[1] >= ordered[2] and ordered[2] == 0.0
    return SuiteCheck(
        "invertibility_single_vector",
        ok,
        {"freq16": ordered[0], "freq32": ordered[1], "freq64": ordered[2],
         "trials": INVERTIBILITY_TRIALS},
    )


def _check_anticoncentration(cfg: ExperimentConfig) -> SuiteCheck:
    trials = min(cfg.trials, 10_000)
    freqs = {}
    bounds = {}
    for j, n in enumerate((16, 32, 64)):
        d = n // 2
        g = substream(cfg.seed, 3_000_000 + j).generator()
        x = g.standard_normal(n)
        x /= np.linalg.norm(x)
        stream = substream(cfg.seed, 3_100_000 + j * 1000)
        hits = 0
        done = 0
        sub = 0
        per = max(1, _SUPPORT_CHUNK // (n * n))
        thresh = math.sqrt(n) / 90.0
        while done < trials:
            take = min(per, trials - done)
            bits = sample_bits_batch(n, d, take * n, stream.child(sub)).reshape(take, n, n)
            y = np.einsum("i,cij->cj", x, bits)
            hits += int(np.sum(np.linalg.norm(y, axis=1) <= thresh))
            done += take
            sub += 1
        freqs[n] = hits / trials
        bounds[n] = math.exp(-n / 3000.0)
    below = all(freqs[n] <= bounds[n] for n in freqs)
    trend = freqs[16] >= freqs[32] >= freqs[64]
    return SuiteCheck(
        "row_combination_anticoncentration",
        below and trend,
        {"freq16": freqs[16], "freq32": freqs[32], "freq64": freqs[64],
         "bound16": round(bounds[16], 6), "trials": trials},
    )
