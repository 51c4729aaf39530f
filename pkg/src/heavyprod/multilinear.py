"""Subset enumeration and the multilinear form of (z_1 + ... + z_d)^r.

Subsets of [d] are ordered by size, then lexicographically on their sorted
members. Over ±1 inputs z_i^2 = 1, so every power of the coordinate sum
reduces to a multilinear polynomial whose coefficient on z_M depends only
on |M|.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .vectors import DimensionError, SignVector

DEFAULT_SUBSET_BUDGET = 50_000_000


class SubsetBudgetError(ValueError):
    pass


def _colex(combo_rows: np.ndarray, d: int) -> np.ndarray:
    """Lexicographic rank among size-m subsets for each row of an (N, m) array."""
    n_rows, m = combo_rows.shape
    if m == 0:
        return np.zeros(n_rows, dtype=np.int64)
    # lex rank = C(d, m) - 1 - colex rank of the reflected combination
    reflected = (d - 1 - combo_rows)[:, ::-1]
    table = np.array([[math.comb(a, b) for b in range(m + 1)] for a in range(d + 1)], dtype=np.int64)
    colex = np.zeros(n_rows, dtype=np.int64)
    for i in range(m):
        colex += table[reflected[:, i], i + 1]
    return math.comb(d, m) - 1 - colex


class SubsetIndex:
    """All subsets of [d] of size at most ``max_size`` with rank/unrank."""

    def __init__(self, d: int, max_size: int, budget: int = DEFAULT_SUBSET_BUDGET):
        if d < 1:
            raise ValueError("d must be positive")
        if not 0 <= max_size <= d:
            raise ValueError(f"max_size must lie in [0, {d}], got {max_size}")
        self.d = d
        self.max_size = max_size
        self.offsets = [0]
        for m in range(max_size + 1):
            self.offsets.append(self.offsets[-1] + math.comb(d, m))
        self.total = self.offsets[-1]
        if self.total > budget:
            raise SubsetBudgetError(f"{self.total} subsets exceeds budget {budget}")
        self._members: Optional[list] = None

    def __len__(self) -> int:
        return self.total

    def size_slice(self, m: int) -> slice:
        return slice(self.offsets[m], self.offsets[m + 1])

    def rank(self, subset: Sequence[int]) -> int:
        s = sorted(subset)
        if len(set(s)) != len(s) or any(not 0 <= i < self.d for i in s):
            raise ValueError(f"not a subset of [{self.d}]: {subset}")
        if len(s) > self.max_size:
            raise ValueError(f"subset larger than {self.max_size}")
        m = len(s)
        within = math.comb(self.d, m) - 1
        for i, c in enumerate(reversed(s)):
            within -= math.comb(self.d - 1 - c, i + 1)
        return self.offsets[m] + within

    def unrank(self, k: int) -> tuple:
        if not 0 <= k < self.total:
            raise IndexError(k)
        m = next(m for m in range(self.max_size + 1) if k < self.offsets[m + 1])
        k -= self.offsets[m]
        out = []
        x = 0
        for i in range(m):
            while True:
                block = math.comb(self.d - 1 - x, m - i - 1)
                if k < block:
                    break
                k -= block
                x += 1
            out.append(x)
            x += 1
        return tuple(out)

    def members(self, m: int) -> np.ndarray:
        """(C(d, m), m) array of size-m subsets in rank order."""
        if self._members is None:
            self._members = [None] * (self.max_size + 1)
        if self._members[m] is None:
            count = math.comb(self.d, m)
            flat = np.fromiter(
                itertools.chain.from_iterable(itertools.combinations(range(self.d), m)),
                dtype=np.int16 if self.d < 2**15 else np.int64,
                count=count * m,
            )
            self._members[m] = flat.reshape(count, m)
        return self._members[m]

    def sizes(self) -> np.ndarray:
        return np.repeat(np.arange(self.max_size + 1), np.diff(self.offsets))

    def rank_rows(self, rows: np.ndarray) -> np.ndarray:
        """Vectorised rank for an (N, m) array of sorted subsets of one size."""
        m = rows.shape[1]
        return self.offsets[m] + _colex(rows.astype(np.int64), self.d)


@lru_cache(maxsize=16)
def subset_index(d: int, max_size: int) -> SubsetIndex:
    return SubsetIndex(d, max_size)


def build_subset_index(d: int, max_size: int, budget: int = DEFAULT_SUBSET_BUDGET) -> SubsetIndex:
    return SubsetIndex(d, max_size, budget)


# -- coefficients ----------------------------------------------------------


@dataclass(frozen=True)
class CoeffTable:
    d: int
    r: int
    q: tuple  # q[m] = coefficient of any size-m monomial

    def column(self, idx: SubsetIndex) -> np.ndarray:
        """Per-subset coefficients c_s = q[|M_s|] as an object array."""
        return np.array([self.q[m] for m in idx.sizes()], dtype=object)

    def nonzero_sizes(self) -> list:
        return [m for m, c in enumerate(self.q) if c]


@lru_cache(maxsize=64)
def coefficients(d: int, r: int) -> CoeffTable:
    """Multilinear coefficients of (z_1+...+z_d)^r by size.

    Multiplying by the coordinate sum sends z_S to z_{S+i} or z_{S-i}, so a
    size-m monomial collects m contributions from size m-1 and d-m from
    size m+1.
    """
    if d < 1 or r < 0:
        raise ValueError("need d >= 1 and r >= 0")
    top = min(r, d)
    q = [1] + [0] * top
    for _ in range(r):
        q = [
            (m * q[m - 1] if m >= 1 else 0) + ((d - m) * q[m + 1] if m + 1 <= top else 0)
            for m in range(top + 1)
        ]
    return CoeffTable(d, r, tuple(q))


# -- subset products -------------------------------------------------------


def split_symmetric_difference(subset: Sequence[int], half_index: SubsetIndex) -> tuple:
    """Ranks of the prefix/suffix halves of ``subset`` in ``half_index``.

    The halves are disjoint, so their symmetric difference is ``subset``.
    """
    s = sorted(subset)
    cut = (len(s) + 1) // 2
    return half_index.rank(s[:cut]), half_index.rank(s[cut:])


def split_ranks(idx: SubsetIndex, half_index: SubsetIndex, sizes: Optional[Sequence[int]] = None):
    """Vectorised split ranks for every subset in ``idx`` (or only the given sizes).

    Returns (columns, rank_a, rank_b) where ``columns`` are the covered
    positions in ``idx``.
    """
    if sizes is None:
        sizes = range(idx.max_size + 1)
    cols, ra, rb = [], [], []
    for m in sizes:
        rows = idx.members(m)
        cut = (m + 1) // 2
        sl = idx.size_slice(m)
        cols.append(np.arange(sl.start, sl.stop, dtype=np.int64))
        ra.append(half_index.rank_rows(rows[:, :cut]))
        rb.append(half_index.rank_rows(rows[:, cut:]))
    if not cols:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, empty
    return np.concatenate(cols), np.concatenate(ra), np.concatenate(rb)


def half_products(signs: np.ndarray, half_index: SubsetIndex) -> np.ndarray:
    """(n, u) int8 table of x_N for every subset N of the half index."""
    n = signs.shape[0]
    out = np.empty((n, half_index.total), dtype=np.int8)
    out[:, 0] = 1
    for m in range(1, half_index.max_size + 1):
        rows = half_index.members(m)
        prefix = half_index.rank_rows(rows[:, :-1]) if m > 1 else np.zeros(len(rows), dtype=np.int64)
        out[:, half_index.size_slice(m)] = out[:, prefix] * signs[:, rows[:, -1]]
    return out


def subset_products(
    signs: np.ndarray, idx: SubsetIndex, sizes: Optional[Sequence[int]] = None
) -> np.ndarray:
    """(n, len(columns)) int8 table of x_M, one column per covered subset.

    Each x_M is read off as x_{N_a} * x_{N_b} for the split M = N_a + N_b,
    so only the half-size products are built from scratch.
    """
    half = subset_index(idx.d, (idx.max_size + 1) // 2)
    table = half_products(np.asarray(signs, dtype=np.int8), half)
    _, ra, rb = split_ranks(idx, half, sizes)
    return np.ascontiguousarray(table[:, ra] * table[:, rb])


def amplified_eval(x: SignVector, y: SignVector, coeffs: CoeffTable, idx: SubsetIndex) -> int:
    """sum_s c_s x_{M_s} y_{M_s}; equals <x, y>^r exactly."""
    if x.dim != y.dim:
        raise DimensionError(f"dimension mismatch: {x.dim} vs {y.dim}")
    if idx.max_size != min(coeffs.r, coeffs.d) or idx.d != coeffs.d:
        raise ValueError("subset index does not match coefficient table")
    z = (x.signs() * y.signs())[None, :]
    prods = subset_products(z, idx)[0]
    total = 0
    for m, c in enumerate(coeffs.q):
        if c:
            total += c * int(prods[idx.size_slice(m)].sum(dtype=np.int64))
    return total
