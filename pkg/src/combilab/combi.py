"""Seedable sampling and enumeration of fixed-weight 0/1 vectors.

Randomness is organized around value-like substreams: a substream is the pair
(master seed, stream index), and every sampling operation is a pure function
of its inputs including the substream. Running trial i on substream i gives
bit-identical results no matter how trials are scheduled across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import DomainError, ResourceLimitError

DEFAULT_ENUMERATION_CAP = 10_000_000

_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngSubstream:
    """A reproducible, index-addressed random stream.

    Distinct indices under the same seed yield statistically independent
    streams (the pair is the 128-bit key of a counter-based generator), and
    the same (seed, index) always reproduces the same sequence.
    """

    seed: int
    index: int

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this substream."""
        key = [self.seed & _U64, self.index & _U64]
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, offset: int) -> "RngSubstream":
        return RngSubstream(self.seed, self.index + offset)


def substream(seed: int, index: int) -> RngSubstream:
    """Address substream ``index`` of the family keyed by ``seed``."""
    return RngSubstream(int(seed), int(index))


@dataclass(frozen=True)
class FixedWeightVector:
    """A 0/1 vector of length n with exactly d ones.

    ``bits`` is stored as a tuple so instances are hashable and comparable;
    n and d are fixed at construction.
    """

    n: int
    d: int
    bits: tuple[int, ...]

    def __post_init__(self):
        if self.n <= 0:
            raise DomainError(f"dimension must be positive, got n={self.n}")
        if not (0 <= self.d <= self.n):
            raise DomainError(f"weight must satisfy 0 <= d <= n, got d={self.d}, n={self.n}")
        if len(self.bits) != self.n:
            raise DomainError(f"bit sequence has length {len(self.bits)}, expected {self.n}")
        if any(b not in (0, 1) for b in self.bits):
            raise DomainError("bits must be 0 or 1")
        if sum(self.bits) != self.d:
            raise DomainError(f"bit sequence has weight {sum(self.bits)}, expected {self.d}")

    @classmethod
    def from_support(cls, n: int, support) -> "FixedWeightVector":
        bits = [0] * n
        for i in support:
            bits[int(i)] = 1
        return cls(n, len(set(map(int, support))), tuple(bits))

    @classmethod
    def from_mask(cls, n: int, mask: int) -> "FixedWeightVector":
        """Decode an integer whose binary digits, MSB first, are the bits."""
        bits = tuple((mask >> (n - 1 - i)) & 1 for i in range(n))
        return cls(n, mask.bit_count(), bits)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(i for i, b in enumerate(self.bits) if b)

    def to_array(self, dtype=float) -> np.ndarray:
        return np.array(self.bits, dtype=dtype)


@dataclass(frozen=True)
class RowRegularMatrix:
    """An m x n 0/1 matrix whose rows all have weight exactly d."""

    m: int
    n: int
    d: int
    rows: tuple[FixedWeightVector, ...]

    def __post_init__(self):
        if len(self.rows) != self.m:
            raise DomainError(f"expected {self.m} rows, got {len(self.rows)}")
        for r in self.rows:
            if r.n != self.n or r.d != self.d:
                raise DomainError("all rows must share the matrix dimension and weight")

    @classmethod
    def from_bits(cls, bits: np.ndarray, d: int) -> "RowRegularMatrix":
        arr = np.asarray(bits)
        m, n = arr.shape
        rows = tuple(FixedWeightVector(n, d, tuple(int(b) for b in row)) for row in arr)
        return cls(m, n, d, rows)

    def to_array(self, dtype=float) -> np.ndarray:
        return np.array([r.bits for r in self.rows], dtype=dtype)


def sample_fixed_weight(n: int, d: int, rng: RngSubstream) -> FixedWeightVector:
    """Draw a uniform weight-d vector of length n.

    Pure function of (n, d, rng): calling it twice on the same substream
    returns the same vector. Uses a Fisher-Yates shuffle of the index array
    and keeps the first d positions, so every support is exactly uniform.
    """
    _check_weight(n, d)
    g = rng.generator()
    support = g.permutation(n)[:d]
    return FixedWeightVector.from_support(n, support)


def sample_row_regular(m: int, n: int, d: int, rng: RngSubstream) -> RowRegularMatrix:
    """Draw an m x n matrix with independent uniform weight-d rows.

    Requires 1 <= m <= n. Rows are drawn from a single pass over the
    substream, each an independent Fisher-Yates draw.
    """
    if not (1 <= m <= n):
        raise DomainError(f"row count must satisfy 1 <= m <= n, got m={m}, n={n}")
    _check_weight(n, d)
    bits = _sample_bits(m, n, d, rng.generator())
    return RowRegularMatrix.from_bits(bits, d)


def sample_supports(n: int, d: int, count: int, rng: RngSubstream) -> np.ndarray:
    """Vectorized kernel: ``count`` independent uniform d-subsets of [n].

    Returns a (count, d) integer array of support indices, column order
    arbitrary. This is the bulk path behind the Monte Carlo experiments; a
    row of the result has the same law as ``sample_fixed_weight``'s support.
    """
    _check_weight(n, d)
    if count < 0:
        raise DomainError("count must be nonnegative")
    g = rng.generator()
    perms = np.tile(np.arange(n), (count, 1))
    g.permuted(perms, axis=1, out=perms)
    return perms[:, :d]


def sample_bits_batch(n: int, d: int, count: int, rng: RngSubstream) -> np.ndarray:
    """``count`` independent uniform weight-d rows as a (count, n) 0/1 array."""
    supports = sample_supports(n, d, count, rng)
    bits = np.zeros((count, n), dtype=np.int8)
    np.put_along_axis(bits, supports, 1, axis=1)
    return bits


def _sample_bits(m: int, n: int, d: int, g: np.random.Generator) -> np.ndarray:
    perms = np.tile(np.arange(n), (m, 1))
    g.permuted(perms, axis=1, out=perms)
    bits = np.zeros((m, n), dtype=np.int8)
    np.put_along_axis(bits, perms[:, :d], 1, axis=1)
    return bits


def iter_fixed_weight_masks(n: int, d: int, cap: int = DEFAULT_ENUMERATION_CAP) -> Iterator[int]:
    """All weight-d masks of n bits in increasing integer order.

    Interpreting each mask MSB-first as a bit tuple, the order is
    lexicographic on tuples: (0,...,0,1,1) first, (1,1,0,...,0) last.
    Successor via Gosper's hack, constant work per item.
    """
    _check_weight(n, d)
    total = math.comb(n, d)
    if total > cap:
        raise ResourceLimitError(
            f"C({n},{d}) = {total} exceeds enumeration cap {cap}", size=total, cap=cap
        )
    if d == 0:
        yield 0
        return
    limit = 1 << n
    val = (1 << d) - 1
    while val < limit:
        yield val
        low = val & -val
        ripple = val + low
        val = ripple | (((val ^ ripple) >> 2) // low)


def enumerate_fixed_weight(
    n: int, d: int, cap: int = DEFAULT_ENUMERATION_CAP
) -> Iterator[FixedWeightVector]:
    """Enumerate all C(n,d) weight-d vectors exactly once.

    Order matches ``iter_fixed_weight_masks``: bit tuples ascend
    lexicographically, e.g. (n=2, d=1) gives (0,1) then (1,0). Raises a
    resource error naming C(n,d) when the count exceeds ``cap``.
    """
    for mask in iter_fixed_weight_masks(n, d, cap=cap):
        yield FixedWeightVector.from_mask(n, mask)


def _check_weight(n: int, d: int) -> None:
    if n <= 0:
        raise DomainError(f"dimension must be positive, got n={n}")
    if d < 0 or d > n:
        raise DomainError(f"weight must satisfy 0 <= d <= n, got d={d}, n={n}")
