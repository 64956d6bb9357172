"""Dense spectral kernels: extreme singular values, exact singularity, and
row-to-span distances for small-to-medium matrices.

Floating-point results come from LAPACK factorizations (full SVD at desk
scale, inverse iteration on the normal equations beyond it). The singularity
decision is a separate, exact code path over the integers: the censuses that
consume it must be bit-exact, so it never touches floating point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .combi import RowRegularMatrix
from .errors import ConvergenceError, DomainError

# Largest prime below 2**31 - 68; with operands reduced mod p, the int64
# outer-product update in _rank_mod_p cannot overflow (p**2 < 2**62).
_RANK_PRIME = 2_147_483_629

_FULL_SVD_MAX_N = 256


@dataclass(frozen=True)
class DenseMatrix:
    """Row-major real matrix with finite entries."""

    entries: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.entries, dtype=float)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DomainError(f"expected a 2-D matrix, got shape {np.shape(self.entries)}")
        if not np.all(np.isfinite(arr)):
            raise DomainError("matrix entries must be finite")
        object.__setattr__(self, "entries", arr)

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def n(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class SpectralOptions:
    """Tolerances for the floating-point spectral routines.

    ``singularity_rtol`` scales the Hilbert-Schmidt norm to produce the
    floating-point rank threshold.
    """

    rel_tol: float = 1e-10
    max_iter: int = 10_000
    singularity_rtol: float = 1e-8

    def __post_init__(self):
        if self.rel_tol <= 0:
            raise DomainError("rel_tol must be positive")
        if self.max_iter < 1:
            raise DomainError("max_iter must be at least 1")
        if self.singularity_rtol <= 0:
            raise DomainError("singularity_rtol must be positive")

    def singularity_threshold(self, a: np.ndarray) -> float:
        return self.singularity_rtol * float(np.linalg.norm(a))


DEFAULT_OPTIONS = SpectralOptions()


def _as_array(a) -> np.ndarray:
    if isinstance(a, DenseMatrix):
        return a.entries
    if isinstance(a, RowRegularMatrix):
        return a.to_array()
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2:
        raise DomainError(f"expected a 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("matrix entries must be finite")
    return arr


def smallest_singular_value(a, opts: SpectralOptions = DEFAULT_OPTIONS) -> float:
    """min over unit v of ||Av||, i.e. the smallest of the n singular values.

    For m < n the rank argument gives 0 without computation. Raises
    ConvergenceError (carrying the best known bracket) if neither the direct
    factorization nor inverse iteration settles within tolerance.
    """
    arr = _as_array(a)
    m, n = arr.shape
    if m < n:
        return 0.0
    if n <= _FULL_SVD_MAX_N:
        return float(_svdvals(arr)[-1])
    return _smallest_sv_inverse_iteration(arr, opts)


def _svdvals(arr: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.svd(arr, compute_uv=False)
    except np.linalg.LinAlgError:
        # gesdd occasionally fails on hard cases; gesvd is slower but sturdier
        from scipy import linalg as sla

        try:
            return sla.svd(arr, compute_uv=False, lapack_driver="gesvd")
        except Exception as exc:  # pragma: no cover - LAPACK-level failure
            hs = float(np.linalg.norm(arr))
            raise ConvergenceError(
                "SVD did not converge", bracket=(0.0, hs)
            ) from exc


def _smallest_sv_inverse_iteration(arr: np.ndarray, opts: SpectralOptions) -> float:
    """Inverse iteration on A^T A via a QR factorization of A."""
    n = arr.shape[1]
    r = np.linalg.qr(arr, mode="r")
    diag = np.abs(np.diag(r))
    scale = float(np.max(diag)) if diag.size else 0.0
    if scale == 0.0 or np.min(diag) <= 1e-300 * scale:
        # R is numerically singular; the smallest singular value is
        # indistinguishable from 0 at working precision.
        return float(_svdvals(arr)[-1])
    g = np.random.Generator(np.random.Philox(key=[0xC0FFEE, n]))
    x = g.standard_normal(n)
    x /= np.linalg.norm(x)
    prev = np.inf
    from scipy.linalg import solve_triangular

    for _ in range(opts.max_iter):
        y = solve_triangular(r, x, trans="T", lower=False)
        z = solve_triangular(r, y, lower=False)
        nz = float(np.linalg.norm(z))
        x = z / nz
        # Rayleigh quotient of (A^T A)^{-1} converges to 1/s_min^2
        est = 1.0 / np.sqrt(nz)
        if abs(est - prev) <= opts.rel_tol * max(est, 1e-300):
            return float(est)
        prev = est
    raise ConvergenceError(
        f"inverse iteration did not converge in {opts.max_iter} steps",
        bracket=(0.0, float(prev)),
    )


def is_singular_exact(a) -> bool:
    """Exact rank decision for a square integer matrix; no floating point.

    Fast path: full rank modulo a fixed prime certifies nonsingularity.
    Otherwise fraction-free (Bareiss) elimination over arbitrary-precision
    integers decides; intermediate values cannot overflow.
    """
    arr = _as_integer_array(a)
    m, n = arr.shape
    if m != n:
        raise DomainError(f"exact singularity is defined for square matrices, got {m}x{n}")
    if _rank_mod_p(arr % _RANK_PRIME, _RANK_PRIME) == n:
        return False
    return _bareiss_det_is_zero(arr)


def _as_integer_array(a) -> np.ndarray:
    if isinstance(a, RowRegularMatrix):
        return a.to_array(dtype=np.int64)
    if isinstance(a, DenseMatrix):
        arr = a.entries
    else:
        arr = np.asarray(a)
    if arr.ndim != 2:
        raise DomainError(f"expected a 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or np.any(arr != np.rint(arr)):
        raise DomainError("exact singularity requires integer entries")
    return np.rint(arr).astype(np.int64)


def _rank_mod_p(a: np.ndarray, p: int) -> int:
    """Row rank of ``a`` over GF(p); vectorized elimination, int64 exact."""
    a = a.astype(np.int64) % p
    m, n = a.shape
    rank = 0
    for col in range(n):
        if rank == m:
            break
        pivots = np.nonzero(a[rank:, col])[0]
        if pivots.size == 0:
            continue
        pr = rank + int(pivots[0])
        if pr != rank:
            a[[rank, pr]] = a[[pr, rank]]
        inv = pow(int(a[rank, col]), p - 2, p)
        a[rank] = (a[rank] * inv) % p
        below = a[rank + 1 :, col]
        nz = np.nonzero(below)[0]
        if nz.size:
            rows = rank + 1 + nz
            a[rows] = (a[rows] - np.outer(a[rows, col], a[rank])) % p
        rank += 1
    return rank


def _bareiss_det_is_zero(arr: np.ndarray) -> bool:
    n = arr.shape[0]
    m = [[int(x) for x in row] for row in arr]
    prev = 1
    for k in range(n - 1):
        if m[k][k] == 0:
            for r in range(k + 1, n):
                if m[r][k] != 0:
                    m[k], m[r] = m[r], m[k]
                    for c in range(n):
                        m[k][c] = -m[k][c]
                    break
            else:
                return True  # zero column below the pivot: rank deficient
        pkk = m[k][k]
        for i in range(k + 1, n):
            mik = m[i][k]
            row_i, row_k = m[i], m[k]
            for j in range(k + 1, n):
                row_i[j] = (pkk * row_i[j] - mik * row_k[j]) // prev
            row_i[k] = 0
        prev = pkk
    return m[n - 1][n - 1] == 0


def restricted_operator_norm(a, opts: SpectralOptions = DEFAULT_OPTIONS) -> float:
    """sup of ||Av|| over unit v with coordinates summing to zero.

    Equals the largest singular value of A P, P the orthogonal projection
    onto the mean-zero hyperplane; applying P subtracts each row's mean.
    """
    arr = _as_array(a)
    centered = arr - arr.mean(axis=1, keepdims=True)
    return float(_svdvals(centered)[0])


def row_span_distance(
    a, opts: SpectralOptions = DEFAULT_OPTIONS
) -> tuple[float, np.ndarray | None]:
    """Distance from the last row to the span of the first n-1 rows.

    Returns ``(distance, normal)``. The unit normal is reported only when
    the leading rows span a full hyperplane (dimension n-1); its sign is
    fixed so the largest-magnitude component is positive. When the span is
    degenerate the normal is None and the distance is still computed by
    orthogonal projection.
    """
    arr = _as_array(a)
    m, n = arr.shape
    if m != n:
        raise DomainError(f"expected a square matrix, got {m}x{n}")
    if n < 2:
        raise DomainError("need at least two rows")
    head, last = arr[:-1], arr[-1]
    _, svals, vt = np.linalg.svd(head, full_matrices=True)
    tol = opts.singularity_threshold(head)
    rank = int(np.sum(svals > tol))
    basis = vt[:rank]
    residual = last - basis.T @ (basis @ last)
    distance = float(np.linalg.norm(residual))
    if rank < n - 1:
        return distance, None
    normal = vt[n - 1]
    k = int(np.argmax(np.abs(normal)))
    if normal[k] < 0:
        normal = -normal
    return distance, normal
