"""Unit-sphere decomposition predicates and the rounding-net primitive.

Classifies unit vectors as almost-constant or not, splits non-constant
vectors into well-separated coordinate groups, measures distance to the
sparse set, and rounds vectors onto a structured net while keeping the
inner product with the all-ones direction small.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, PostconditionError

UNIT_TOL = 1e-9

# float slop applied before ceil/floor so thresholds that are exact integers
# in real arithmetic do not flip to the neighbouring integer
_COUNT_GUARD = 1e-9


@dataclass(frozen=True)
class PartitionParams:
    """Sphere-partition thresholds: fraction of coordinates allowed to
    stray (delta) and the stray radius scale (rho), both in (0, 1)."""

    delta: float
    rho: float

    def __post_init__(self):
        if not (0.0 < self.delta < 1.0):
            raise DomainError(f"delta must lie in (0,1), got {self.delta!r}")
        if not (0.0 < self.rho < 1.0):
            raise DomainError(f"rho must lie in (0,1), got {self.rho!r}")


def _check_unit(v: np.ndarray, who: str) -> None:
    nrm = float(np.linalg.norm(v))
    if abs(nrm - 1.0) > UNIT_TOL:
        raise DomainError(f"{who} must be a unit vector, got norm {nrm!r}")


def is_almost_constant(v, p: PartitionParams) -> tuple[bool, Optional[float]]:
    """Whether some level lambda has at least ceil((1-delta)n) coordinates
    within rho/sqrt(n) of it.

    Sorts the coordinates and slides a window of width 2*rho/sqrt(n); the
    witness is the midpoint of the tightest interval enclosing the first
    maximal window (ties go to the smallest midpoint). Returns (False, None)
    when no window is large enough.
    """
    v = np.asarray(v, dtype=float).ravel()
    n = v.size
    if n == 0:
        raise DomainError("need a nonempty vector")
    _check_unit(v, "v")
    need = math.ceil((1.0 - p.delta) * n - _COUNT_GUARD)
    width = 2.0 * p.rho / math.sqrt(n)
    s = np.sort(v, kind="stable")
    # ends[i] = one past the last coordinate reachable from s[i]
    ends = np.searchsorted(s, s + width, side="right")
    counts = ends - np.arange(n)
    best = int(np.argmax(counts))  # argmax takes the first, smallest midpoint
    if counts[best] < need:
        return False, None
    lam = 0.5 * (s[best] + s[ends[best] - 1])
    return True, float(lam)


def find_separated_sets(
    v, p: PartitionParams
) -> Optional[tuple[frozenset[int], frozenset[int]]]:
    """Split the coordinates into two groups separated by a gap.

    Keeps only indices with |v_k| <= 3/sqrt(delta n), then cuts at the
    widest coordinate gap that leaves at least delta*n/8 indices on each
    side. Succeeds only when the cut gap is at least rho/sqrt(2n) and the
    construction passes its own output check: every cross-pair difference
    must lie in [rho/sqrt(2n), 6/sqrt(delta n)]. Returns None on failure,
    which is expected for almost-constant inputs. The first returned set
    contains the smallest participating index.
    """
    v = np.asarray(v, dtype=float).ravel()
    n = v.size
    if n == 0:
        raise DomainError("need a nonempty vector")
    bound = 3.0 / math.sqrt(p.delta * n)
    keep = np.nonzero(np.abs(v) <= bound)[0]
    m = keep.size
    need = math.ceil(p.delta * n / 8.0 - _COUNT_GUARD)
    need = max(need, 1)
    if m < 2 * need:
        return None
    order = keep[np.argsort(v[keep], kind="stable")]
    s = v[order]
    gaps = np.diff(s)
    # cut positions i split into left s[:i+1] / right s[i+1:]
    lo, hi = need - 1, m - need - 1
    if lo > hi:
        return None
    window = gaps[lo : hi + 1]
    cut = lo + int(np.argmax(window))
    min_gap = p.rho / math.sqrt(2.0 * n)
    if gaps[cut] < min_gap:
        return None
    left = frozenset(int(i) for i in order[: cut + 1])
    right = frozenset(int(i) for i in order[cut + 1 :])
    if not _separation_holds(v, left, right, min_gap, 6.0 / math.sqrt(p.delta * n)):
        return None
    if min(left) < min(right):
        return left, right
    return right, left


def _separation_holds(
    v: np.ndarray, a: frozenset, b: frozenset, lo: float, hi: float
) -> bool:
    """All |v_i - v_j|, i in a, j in b, lie in [lo, hi]. Both groups are
    contiguous in sorted order, so the extremes decide."""
    va = v[sorted(a)]
    vb = v[sorted(b)]
    if va.max() < vb.min():
        closest = vb.min() - va.max()
        farthest = vb.max() - va.min()
    elif vb.max() < va.min():
        closest = va.min() - vb.max()
        farthest = va.max() - vb.min()
    else:
        return False
    return closest >= lo and farthest <= hi


def compressibility_distance(x, delta: float) -> float:
    """Euclidean distance from unit x to the unit vectors supported on at
    most floor(delta*n) coordinates: sqrt(2 - 2t), t the norm of the
    floor(delta*n) largest-magnitude coordinates. An empty support budget
    gives sqrt(2).
    """
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    if n == 0:
        raise DomainError("need a nonempty vector")
    _check_unit(x, "x")
    k = math.floor(delta * n + _COUNT_GUARD)
    if k <= 0:
        return math.sqrt(2.0)
    k = min(k, n)
    a = np.abs(x)
    top = np.partition(a, n - k)[n - k :]
    t = float(np.linalg.norm(top))
    return math.sqrt(max(0.0, 2.0 - 2.0 * t))


def round_to_net(v, x, beta: float) -> np.ndarray:
    """Round v near x to w = x + y with y constant on its support, so that
    ||v - w|| <= 2*beta and |<v - w, 1>| <= beta/sqrt(n).

    y places floor(k) entries of beta*s/sqrt(n) at the front, where
    k = |<v - x, 1>|*sqrt(n)/beta and s is the sign of the inner product.
    Requires ||v - x|| <= beta; both guarantees are checked before
    returning.
    """
    v = np.asarray(v, dtype=float).ravel()
    x = np.asarray(x, dtype=float).ravel()
    if v.shape != x.shape or v.size == 0:
        raise DomainError("v and x must be nonempty vectors of the same length")
    if beta <= 0:
        raise DomainError(f"beta must be positive, got {beta!r}")
    n = v.size
    diff = v - x
    dn = float(np.linalg.norm(diff))
    if dn > beta * (1.0 + 1e-12):
        raise DomainError(f"||v - x|| = {dn!r} exceeds beta = {beta!r}")
    ip = float(diff.sum())
    s = 1.0 if ip >= 0 else -1.0
    k = abs(ip) * math.sqrt(n) / beta
    kk = min(int(math.floor(k + 1e-12)), n)
    y = np.zeros(n)
    y[:kk] = beta * s / math.sqrt(n)
    w = x + y
    slack = 1e-9 * max(1.0, beta)
    if float(np.linalg.norm(v - w)) > 2.0 * beta + slack:
        raise PostconditionError("rounded point left the 2*beta ball")
    if abs(float((v - w).sum())) > beta / math.sqrt(n) + slack:
        raise PostconditionError("rounded point kept a large all-ones component")
    return w


def sample_non_almost_constant(
    n: int, p: PartitionParams, rng: np.random.Generator, max_tries: int = 1000
) -> np.ndarray:
    """Uniform unit vector conditioned on not being almost-constant,
    by rejection from the rotation-invariant gaussian draw."""
    for _ in range(max_tries):
        g = rng.standard_normal(n)
        nrm = float(np.linalg.norm(g))
        if nrm == 0.0:
            continue
        u = g / nrm
        flag, _ = is_almost_constant(u, p)
        if not flag:
            return u
    raise DomainError(
        f"no non-almost-constant draw in {max_tries} tries at n={n}; "
        f"loosen delta={p.delta}, rho={p.rho}"
    )
