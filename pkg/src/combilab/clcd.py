"""Combinatorial least common denominator: difference vectors, lattice
distance, and a certified infimum search.

For a target vector t (a difference vector D(v), or the tensor of two of
them) and parameters (cap, slope), the quantity of interest is

    inf { theta > 0 : dist(theta t, Z^N) < min(slope * theta * ||t||, cap) }.

The map theta -> dist(theta t, Z^N) is ||t||-Lipschitz, so a walk whose step
never exceeds margin/((1+slope)||t||) cannot step over an admissible point;
the first sign change is then sharpened by bisection. The returned value is
always admissible (the defining inequality holds at it within the recorded
numeric slack), and no admissible theta exists below it at the certified
resolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, ResourceLimitError

# C(40,2)^2: default ceiling on materialized tensor differences
DEFAULT_TENSOR_CAP = 608_400

STATUS_FINITE = "finite"
STATUS_INFINITE = "infinite-within-horizon"


@dataclass(frozen=True)
class DifferenceVector:
    """All pairwise differences v_i - v_j, pairs (i,j) with i<j in
    lexicographic order; length C(n,2)."""

    n: int
    entries: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.entries))


@dataclass(frozen=True)
class TensorDifference:
    """Entries (a_i - a_j)(v_k - v_l), ordered ((i,j),(k,l)) lexicographic."""

    n_a: int
    n_v: int
    entries: np.ndarray
    norm_a: float
    norm_v: float

    @property
    def norm(self) -> float:
        # identical to ||entries|| but free of roundoff accumulation
        return self.norm_a * self.norm_v


@dataclass(frozen=True)
class ClcdQuery:
    """Search parameters: cap is alpha (plain) or L (tensor), slope is gamma
    or u. The horizon bounds the scan; the slack realizes the strict
    inequality in floating point and is recorded with results."""

    cap: float
    slope: float
    horizon: float = 1e6
    bracket_tol: float = 1e-9
    slack: float = 1e-12

    def __post_init__(self):
        if self.cap <= 0:
            raise DomainError("cap must be positive")
        if not (0.0 < self.slope < 1.0):
            raise DomainError("slope must lie in (0, 1)")
        if self.horizon <= 0:
            raise DomainError("horizon must be positive")
        if self.bracket_tol <= 0 or self.slack < 0:
            raise DomainError("bracket_tol must be positive and slack nonnegative")

    def halved(self) -> "ClcdQuery":
        return ClcdQuery(self.cap / 2, self.slope / 2, self.horizon, self.bracket_tol, self.slack)


@dataclass(frozen=True)
class ClcdResult:
    """Outcome of a denominator search.

    status is "finite" (value, witness and certified_gap are set) or
    "infinite-within-horizon". ``provably_infinite`` marks the zero-target
    case where the admissible set is empty for every horizon. For finite
    results the witness is the integer vector nearest value * target and
    satisfies the defining inequality within ``slack``.
    """

    status: str
    value: Optional[float]
    witness: Optional[np.ndarray]
    certified_gap: float
    horizon: float
    slack: float
    provably_infinite: bool = False
    evaluations: int = 0

    @property
    def is_finite(self) -> bool:
        return self.status == STATUS_FINITE


def difference_vector(v) -> DifferenceVector:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size < 2:
        raise DomainError("need a 1-D vector with at least two coordinates")
    i, j = np.triu_indices(v.size, k=1)
    return DifferenceVector(v.size, v[i] - v[j])


def tensor_difference(a, v, cap: int = DEFAULT_TENSOR_CAP) -> TensorDifference:
    """Materialize D(a) (x) D(v); its norm factors as ||D(a)|| * ||D(v)||."""
    da = difference_vector(a)
    dv = difference_vector(v)
    size = da.entries.size * dv.entries.size
    if size > cap:
        raise ResourceLimitError(
            f"tensor difference has {size} entries, exceeding cap {cap}",
            size=size,
            cap=cap,
        )
    entries = np.outer(da.entries, dv.entries).ravel()
    return TensorDifference(da.n, dv.n, entries, da.norm, dv.norm)


def lattice_distance(w) -> float:
    """Euclidean distance to the nearest integer point; half-integer
    coordinates round to even, so the result is deterministic."""
    w = np.asarray(w, dtype=float)
    return float(np.linalg.norm(w - np.rint(w)))


def _target_entries(target) -> np.ndarray:
    if isinstance(target, DifferenceVector) or isinstance(target, TensorDifference):
        return target.entries
    t = np.asarray(target, dtype=float)
    if t.ndim != 1:
        raise DomainError("target must be a 1-D vector")
    if not np.all(np.isfinite(t)):
        raise DomainError("target must be finite")
    return t


def clcd_search(target, q: ClcdQuery) -> ClcdResult:
    """Certified infimum of admissible theta for the given target.

    A zero target is reported infinite immediately: min(0, cap) = 0 and the
    defining inequality is strict, so the admissible set is empty. For
    nonzero targets no theta below 0.5/max|t_k| can be admissible (there
    dist(theta t, Z^N) = theta ||t|| exceeds both branches of the min), and
    the Lipschitz walk starts at that point.
    """
    t = _target_entries(target)
    norm_t = float(np.linalg.norm(t))
    if norm_t == 0.0:
        return ClcdResult(
            status=STATUS_INFINITE,
            value=None,
            witness=None,
            certified_gap=q.bracket_tol,
            horizon=q.horizon,
            slack=q.slack,
            provably_infinite=True,
        )

    lam = (1.0 + q.slope) * norm_t
    evals = 0

    def margin(theta: float) -> float:
        x = theta * t
        d = float(np.linalg.norm(x - np.rint(x)))
        return d - min(q.slope * theta * norm_t, q.cap)

    theta = 0.5 / float(np.max(np.abs(t)))
    if theta > q.horizon:
        # the whole horizon sits below the exact-rounding point, where the
        # margin is strictly positive; nothing admissible this side of it
        return ClcdResult(
            status=STATUS_INFINITE,
            value=None,
            witness=None,
            certified_gap=q.bracket_tol,
            horizon=q.horizon,
            slack=q.slack,
        )

    m = margin(theta)
    evals += 1
    bracket = None
    if m < q.slack:
        # cannot occur for exact arithmetic; keep a degenerate bracket anyway
        bracket = (theta * (1 - 1e-12), theta)
    else:
        while True:
            step = max((m - q.slack) / lam, q.bracket_tol, theta * 1e-12)
            nxt = theta + step
            if nxt >= q.horizon:
                nxt = q.horizon
            m2 = margin(nxt)
            evals += 1
            if m2 < q.slack:
                bracket = (theta, nxt)
                break
            theta, m = nxt, m2
            if theta >= q.horizon:
                break

    if bracket is None:
        return ClcdResult(
            status=STATUS_INFINITE,
            value=None,
            witness=None,
            certified_gap=q.bracket_tol,
            horizon=q.horizon,
            slack=q.slack,
            evaluations=evals,
        )

    lo, hi = bracket
    while hi - lo > q.bracket_tol:
        mid = 0.5 * (lo + hi)
        if margin(mid) < q.slack:
            hi = mid
        else:
            lo = mid
        evals += 1
    value = hi
    witness = np.rint(value * t)
    return ClcdResult(
        status=STATUS_FINITE,
        value=value,
        witness=witness,
        certified_gap=hi - lo,
        horizon=q.horizon,
        slack=q.slack,
        evaluations=evals,
    )


def margin_grid(target, q: ClcdQuery, thetas: np.ndarray) -> np.ndarray:
    """Vectorized defining margin at many theta values (reference scans)."""
    t = _target_entries(target)
    norm_t = float(np.linalg.norm(t))
    thetas = np.asarray(thetas, dtype=float)
    out = np.empty_like(thetas)
    chunk = max(1, int(4_000_000 // max(t.size, 1)))
    for s in range(0, thetas.size, chunk):
        block = thetas[s : s + chunk]
        x = block[:, None] * t[None, :]
        d = np.linalg.norm(x - np.rint(x), axis=1)
        out[s : s + chunk] = d - np.minimum(q.slope * block * norm_t, q.cap)
    return out


def reference_scan(
    target, q: ClcdQuery, theta_max: float, step: float = 1e-6
) -> Optional[float]:
    """Dense scan oracle: smallest grid theta in (0, theta_max] whose margin
    is below the slack, or None. Independent of the adaptive walk; used to
    cross-check search soundness."""
    n_pts = int(math.floor(theta_max / step))
    if n_pts <= 0:
        return None
    t = _target_entries(target)
    norm_t = float(np.linalg.norm(t))
    chunk = max(1, int(8_000_000 // max(t.size, 1)))
    for s in range(1, n_pts + 1, chunk):
        idx = np.arange(s, min(s + chunk, n_pts + 1), dtype=float)
        block = idx * step
        x = block[:, None] * t[None, :]
        d = np.linalg.norm(x - np.rint(x), axis=1)
        marg = d - np.minimum(q.slope * block * norm_t, q.cap)
        hits = np.nonzero(marg < q.slack)[0]
        if hits.size:
            return float(block[hits[0]])
    return None


def stability_floor(v, w, q: ClcdQuery) -> float:
    """Certified lower bound for the perturbed denominator.

    Under the hypothesis ||v - w|| < slope * ||D(v)|| / (5 sqrt(n)), the
    denominator of w at halved parameters (cap/2, slope/2) is at least
    min(denominator of v at (cap, slope), cap / (4 sqrt(n) ||v - w||)).
    When the search for v exhausts its horizon, the horizon itself is the
    certified stand-in for the first term.
    """
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    if v.shape != w.shape:
        raise DomainError("v and w must have the same shape")
    n = v.size
    dv = difference_vector(v)
    diff = float(np.linalg.norm(v - w))
    limit = q.slope * dv.norm / (5.0 * math.sqrt(n))
    if not diff < limit:
        raise DomainError(
            f"perturbation too large: ||v-w|| = {diff:.6g} but the stability "
            f"hypothesis needs < {limit:.6g}"
        )
    res = clcd_search(dv, q)
    base = res.value if res.is_finite else q.horizon
    if diff == 0.0:
        return float(base)
    return float(min(base, q.cap / (4.0 * math.sqrt(n) * diff)))
