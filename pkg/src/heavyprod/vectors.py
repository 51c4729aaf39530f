"""Bit-packed ±1 vectors and exact inner products.

Bit 1 encodes +1, bit 0 encodes -1. Bits are packed little-endian within
each byte and padding bits past ``dim`` are always zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class DimensionError(ValueError):
    """Raised when vectors of different dimension are combined."""


def nbytes_for(dim: int) -> int:
    return (dim + 7) // 8


def _pad_mask(dim: int) -> int:
    rem = dim % 8
    return 0xFF if rem == 0 else (1 << rem) - 1


@dataclass(frozen=True)
class SignVector:
    dim: int
    bits: bytes

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if len(self.bits) != nbytes_for(self.dim):
            raise ValueError(
                f"expected {nbytes_for(self.dim)} bytes for dim {self.dim}, got {len(self.bits)}"
            )
        if self.bits[-1] & ~_pad_mask(self.dim) & 0xFF:
            raise ValueError("padding bits beyond dim must be zero")

    @classmethod
    def from_signs(cls, signs: Iterable[int]) -> "SignVector":
        arr = np.asarray(list(signs) if not isinstance(signs, np.ndarray) else signs)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("need a non-empty 1-d sequence of ±1 entries")
        if not np.all((arr == 1) | (arr == -1)):
            raise ValueError("entries must be +1 or -1")
        return cls(arr.size, pack_rows((arr > 0)[None, :])[0].tobytes())

    @classmethod
    def from_row(cls, row: np.ndarray, dim: int) -> "SignVector":
        return cls(dim, bytes(np.asarray(row, dtype=np.uint8)))

    def entry(self, i: int) -> int:
        if not 0 <= i < self.dim:
            raise IndexError(f"index {i} out of range for dim {self.dim}")
        return 1 if (self.bits[i >> 3] >> (i & 7)) & 1 else -1

    def signs(self) -> np.ndarray:
        return unpack_signs(np.frombuffer(self.bits, dtype=np.uint8)[None, :], self.dim)[0]

    def negate(self) -> "SignVector":
        flipped = bytearray(b ^ 0xFF for b in self.bits)
        flipped[-1] &= _pad_mask(self.dim)
        return SignVector(self.dim, bytes(flipped))

    def as_int(self) -> int:
        return int.from_bytes(self.bits, "little")

    def __len__(self) -> int:
        return self.dim


def inner_product(x: SignVector, y: SignVector) -> int:
    """Exact <x, y> as d - 2 * hamming(x, y)."""
    if x.dim != y.dim:
        raise DimensionError(f"dimension mismatch: {x.dim} vs {y.dim}")
    return x.dim - 2 * (x.as_int() ^ y.as_int()).bit_count()


def subset_product(x: SignVector, subset: Sequence[int]) -> int:
    """Product of the entries of ``x`` at the positions in ``subset``."""
    negatives = 0
    for i in subset:
        if not 0 <= i < x.dim:
            raise IndexError(f"index {i} out of range for dim {x.dim}")
        negatives += x.entry(i) < 0
    return -1 if negatives & 1 else 1


# -- array helpers ---------------------------------------------------------
# Rows of an (n, nbytes) uint8 array are packed vectors; these are what the
# batch code paths operate on.


def pack_rows(bits: np.ndarray) -> np.ndarray:
    """Pack an (n, d) boolean array (True = +1) into (n, ceil(d/8)) uint8."""
    return np.packbits(np.asarray(bits, dtype=bool), axis=1, bitorder="little")


def unpack_signs(packed: np.ndarray, dim: int) -> np.ndarray:
    """Unpack rows into an (n, dim) int8 array of ±1 entries."""
    bits = np.unpackbits(packed, axis=1, count=dim, bitorder="little")
    return (2 * bits.astype(np.int8) - 1).astype(np.int8)


def stack(vectors: Sequence[SignVector]) -> np.ndarray:
    if not vectors:
        raise ValueError("cannot stack an empty sequence")
    dim = vectors[0].dim
    if any(v.dim != dim for v in vectors):
        raise DimensionError("all vectors must share one dimension")
    return np.frombuffer(b"".join(v.bits for v in vectors), dtype=np.uint8).reshape(
        len(vectors), nbytes_for(dim)
    ).copy()


def inner_products(rows_a: np.ndarray, rows_b: np.ndarray, dim: int, chunk: int = 256) -> np.ndarray:
    """All pairwise inner products between packed row sets, as int32 (na, nb)."""
    if rows_a.shape[1] != rows_b.shape[1]:
        raise DimensionError("packed widths differ")
    out = np.empty((rows_a.shape[0], rows_b.shape[0]), dtype=np.int32)
    for lo in range(0, rows_a.shape[0], chunk):
        xor = rows_a[lo : lo + chunk, None, :] ^ rows_b[None, :, :]
        ham = np.bitwise_count(xor).sum(axis=2, dtype=np.int32)
        out[lo : lo + chunk] = dim - 2 * ham
    return out


def paired_inner_products(rows_a: np.ndarray, rows_b: np.ndarray, dim: int) -> np.ndarray:
    """Row-wise <a_i, b_i> for equally long packed row sets."""
    ham = np.bitwise_count(rows_a ^ rows_b).sum(axis=1, dtype=np.int64)
    return dim - 2 * ham
