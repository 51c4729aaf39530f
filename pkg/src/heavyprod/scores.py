"""Group-pair scores C = U V^T with exact integer arithmetic.

U[i, s] = sum over x in A_i of a^x * x_{M_s}, and V[j, s] = c_s * W[j, s] with
W the same moment matrix for B. Three routes build the moment matrices
(naive triple loop, per-group P^i products, and a cached subset-product
table) and they agree exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .multilinear import SubsetIndex, half_products, split_ranks, subset_index
from .partition import Grouping, index_bits
from .vectors import SignVector, subset_product, unpack_signs

INT64_LIMIT = 2**63
FLOAT64_EXACT = 2**53
FLOAT32_EXACT = 2**24
BACKENDS = ("exact", "int64", "strassen", "blas")


class BackendRefused(ArithmeticError):
    pass


# -- signs -----------------------------------------------------------------


def sign_key_bits(n: int) -> int:
    """Key width covering A keys [0, n) and B keys [n, 2n)."""
    return index_bits(2 * n)


def pairwise_signs(mask: int, flip: int, keys: np.ndarray) -> np.ndarray:
    """(-1)^(<mask, bin(key)> xor flip) for each key, as int8."""
    parity = (np.bitwise_count(np.asarray(keys, dtype=np.int64) & mask) & 1) ^ (flip & 1)
    return (1 - 2 * parity.astype(np.int8)).astype(np.int8)


@dataclass(frozen=True)
class SignAssignment:
    a: np.ndarray
    b: np.ndarray

    @classmethod
    def from_bits(cls, bits, n_a: int, n_b: int) -> "SignAssignment":
        n = max(n_a, n_b)
        width = sign_key_bits(n)
        bits = [int(x) for x in bits]
        if len(bits) != width + 1:
            raise ValueError(f"expected {width + 1} sign bits, got {len(bits)}")
        mask = sum(b << j for j, b in enumerate(bits[:width]))
        a = pairwise_signs(mask, bits[width], np.arange(n_a))
        b = pairwise_signs(mask, bits[width], n + np.arange(n_b))
        return cls(a, b)

    def negate_a(self) -> "SignAssignment":
        return SignAssignment(-self.a, self.b)


# -- moment matrices -------------------------------------------------------


def build_moments_naive(
    vectors: list, grouping: Grouping, signs: np.ndarray, idx: SubsetIndex
) -> np.ndarray:
    subsets = [idx.unrank(s) for s in range(idx.total)]
    out = np.zeros((grouping.h, idx.total), dtype=np.int64)
    for i, members in enumerate(grouping.groups):
        for x in members:
            vec: SignVector = vectors[x]
            ax = int(signs[x])
            for s, subset in enumerate(subsets):
                out[i, s] += ax * subset_product(vec, subset)
    return out


def build_moments_fast(
    rows: np.ndarray,
    d: int,
    grouping: Grouping,
    signs: np.ndarray,
    idx: SubsetIndex,
    half_idx: Optional[SubsetIndex] = None,
) -> np.ndarray:
    """Read each U[i, s] off P^i = L^i (L~^i)^T at the split ranks of M_s."""
    if half_idx is None:
        half_idx = subset_index(d, (idx.max_size + 1) // 2)
    if half_idx.max_size < (idx.max_size + 1) // 2:
        raise ValueError("half index too small for the requested subsets")
    L_all = half_products(unpack_signs(rows, d), half_idx).astype(np.int64)
    _, ra, rb = split_ranks(idx, half_idx)
    out = np.zeros((grouping.h, idx.total), dtype=np.int64)
    for i, members in enumerate(grouping.groups):
        if members.size == 0:
            continue
        L = L_all[members].T  # (u, g_i)
        L_signed = L * signs[members].astype(np.int64)
        P = L @ L_signed.T
        out[i] = P[ra, rb]
    return out


def build_moments_cached(table: np.ndarray, grouping: Grouping, signs: np.ndarray) -> np.ndarray:
    """U = S @ table, with S the signed h x n group indicator.

    ``table`` holds x_M per element (rows) and subset (columns). Returns int8
    when every group has at most 127 members.
    """
    n = table.shape[0]
    narrow = grouping.sizes().max(initial=0) <= 127
    dtype = np.int8 if narrow else np.int32
    S = sp.csr_matrix(
        (signs.astype(dtype), (grouping.assignment, np.arange(n))), shape=(grouping.h, n)
    )
    src = table if narrow else table.astype(np.int32)
    return np.asarray(S @ src)


# -- matrix products -------------------------------------------------------


def _absmax(m: np.ndarray) -> int:
    if m.size == 0:
        return 0
    if m.dtype == object:
        return max(abs(int(x)) for x in m.flat)
    return max(int(m.max()), -int(m.min()))


def as_coefficients(c) -> np.ndarray:
    """Coefficient vector as int64 when safely narrow, else as Python ints."""
    if isinstance(c, np.ndarray) and c.dtype == np.int64:
        return c
    c = list(c)
    if all(-(2**62) < int(x) < 2**62 for x in c):
        return np.asarray(c, dtype=np.int64)
    return np.asarray([int(x) for x in c], dtype=object)


def _abs_sum(c: np.ndarray) -> int:
    if c.dtype == object or c.size == 0:
        return sum(abs(int(x)) for x in c)
    return int(np.abs(c).astype(object).sum()) if np.abs(c).max() >= 2**40 else int(np.abs(c).sum())


def score_bound(U: np.ndarray, W: np.ndarray, c) -> int:
    """A priori bound on every |C[i, j]| and every partial sum forming it."""
    return _absmax(U) * _absmax(W) * _abs_sum(as_coefficients(c))


def _strassen_levels(m: int, k: int, n: int, leaf: int) -> int:
    levels = 0
    while min(m, k, n) > leaf:
        m, k, n = (m + 1) // 2, (k + 1) // 2, (n + 1) // 2
        levels += 1
    return levels


def strassen(A: np.ndarray, B: np.ndarray, leaf: int = 64) -> np.ndarray:
    m, k = A.shape
    k2, n = B.shape
    if k != k2:
        raise ValueError("inner dimensions differ")
    if min(m, k, n) <= leaf:
        return A @ B
    pm, pk, pn = m + (m & 1), k + (k & 1), n + (n & 1)
    if (pm, pk, pn) != (m, k, n):
        Ap = np.zeros((pm, pk), dtype=A.dtype)
        Ap[:m, :k] = A
        Bp = np.zeros((pk, pn), dtype=B.dtype)
        Bp[:k, :n] = B
        A, B = Ap, Bp
    hm, hk, hn = pm // 2, pk // 2, pn // 2
    A11, A12, A21, A22 = A[:hm, :hk], A[:hm, hk:], A[hm:, :hk], A[hm:, hk:]
    B11, B12, B21, B22 = B[:hk, :hn], B[:hk, hn:], B[hk:, :hn], B[hk:, hn:]
    M1 = strassen(A11 + A22, B11 + B22, leaf)
    M2 = strassen(A21 + A22, B11, leaf)
    M3 = strassen(A11, B12 - B22, leaf)
    M4 = strassen(A22, B21 - B11, leaf)
    M5 = strassen(A11 + A12, B22, leaf)
    M6 = strassen(A21 - A11, B11 + B12, leaf)
    M7 = strassen(A12 - A22, B21 + B22, leaf)
    C = np.empty((pm, pn), dtype=M1.dtype)
    C[:hm, :hn] = M1 + M4 - M5 + M7
    C[:hm, hn:] = M3 + M5
    C[hm:, :hn] = M2 + M4
    C[hm:, hn:] = M1 - M2 + M3 + M6
    return C[:m, :n]


def _scaled(W: np.ndarray, c, dtype) -> np.ndarray:
    return W.astype(dtype) * np.asarray(c).astype(dtype)[None, :]


def matmul_exact(U, W, c) -> np.ndarray:
    V = _scaled(W, c, object)
    return np.dot(U.astype(object), V.T)


def matmul_int64(U, W, c) -> np.ndarray:
    bound = score_bound(U, W, c)
    if bound >= INT64_LIMIT:
        raise BackendRefused(f"int64 guard: bound {bound} >= 2^63")
    return U.astype(np.int64) @ _scaled(W, c, np.int64).T


def matmul_strassen(U, W, c, leaf: int = 64) -> np.ndarray:
    levels = _strassen_levels(U.shape[0], U.shape[1], W.shape[0], leaf)
    bound = score_bound(U, W, c) << (levels + 2 if levels else 0)
    if bound >= INT64_LIMIT:
        raise BackendRefused(f"strassen guard: bound {bound} >= 2^63 at {levels} levels")
    return strassen(U.astype(np.int64), _scaled(W, c, np.int64).T, leaf)


def _coefficient_runs(c: np.ndarray) -> list:
    if c.size == 0:
        return []
    if c.dtype == object:
        breaks = [s for s in range(1, c.size) if c[s] != c[s - 1]]
    else:
        breaks = (np.flatnonzero(np.diff(c)) + 1).tolist()
    starts = [0] + breaks
    ends = breaks + [c.size]
    return [(lo, hi, int(c[lo])) for lo, hi in zip(starts, ends)]


def matmul_blas(U, W, c) -> np.ndarray:
    """Floating-point GEMM per run of equal coefficients, each run guarded so
    every partial sum is an exactly representable integer."""
    total_bound = score_bound(U, W, c)
    if total_bound >= INT64_LIMIT:
        raise BackendRefused(f"blas guard: combined bound {total_bound} >= 2^63")
    runs = [run for run in _coefficient_runs(c) if run[2] != 0]
    peak = _absmax(U) * _absmax(W) * max((hi - lo for lo, hi, _ in runs), default=0)
    if peak < FLOAT32_EXACT:
        dtype = np.float32
    elif peak < FLOAT64_EXACT:
        dtype = np.float64
    else:
        raise BackendRefused(f"blas guard: run bound {peak} >= 2^53")
    Uf, Wf = U.astype(dtype), W.astype(dtype)
    out = np.zeros((U.shape[0], W.shape[0]), dtype=np.int64)
    for lo, hi, coef in runs:
        out += coef * (Uf[:, lo:hi] @ Wf[:, lo:hi].T).astype(np.int64)
    return out


_KERNELS = {
    "exact": matmul_exact,
    "int64": matmul_int64,
    "strassen": matmul_strassen,
    "blas": matmul_blas,
}


@dataclass
class ScoreMatrix:
    values: np.ndarray  # (h_a, h_b) exact integers, int64 or object
    backend: str
    requested: str
    bound: int
    fallback_reason: Optional[str] = None

    @property
    def fell_back(self) -> bool:
        return self.fallback_reason is not None


def score_matrix(U: np.ndarray, W: np.ndarray, c, backend: str = "blas") -> ScoreMatrix:
    """C = U (c * W)^T exactly, falling back to arbitrary precision when the
    requested fixed-width backend cannot guarantee exactness."""
    if backend not in _KERNELS:
        raise ValueError(f"unknown backend {backend!r}; choose from {BACKENDS}")
    c = as_coefficients(c)
    if U.shape[1] != W.shape[1] or U.shape[1] != len(c):
        raise ValueError("moment matrices and coefficients are not conformable")
    bound = score_bound(U, W, c)
    try:
        values = _KERNELS[backend](U, W, c)
        return ScoreMatrix(values, backend, backend, bound)
    except BackendRefused as exc:
        values = matmul_exact(U, W, c)
        return ScoreMatrix(values, "exact", backend, bound, str(exc))


def coefficient_vector(coeffs, idx: SubsetIndex, sizes=None) -> np.ndarray:
    """c_s = q[|M_s|] for the columns of the given size classes, in index order."""
    sizes = range(idx.max_size + 1) if sizes is None else sizes
    parts = [np.full(math.comb(idx.d, m), coeffs.q[m], dtype=object) for m in sizes]
    return as_coefficients(np.concatenate(parts) if parts else np.zeros(0, dtype=object))
