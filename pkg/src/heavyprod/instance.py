"""Planted instances: two sets of n sign vectors with k correlated pairs.

Binary layout (all integers little-endian)::

    b"HIP1" | u32 version=1 | u64 n | u32 d | u32 k
    n rows of A, ceil(d/8) bytes each
    n rows of B, ceil(d/8) bytes each
    k records of (u64 a_index, u64 b_index)
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .vectors import SignVector, nbytes_for, pack_rows, paired_inner_products

MAGIC = b"HIP1"
VERSION = 1
_HEADER = struct.Struct("<4sIQII")
HEADER_SIZE = _HEADER.size  # 24
_PAIR = struct.Struct("<QQ")


class FormatError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class PlantSpec:
    k: int = 0
    match_prob: float = 0.96
    seed: int = 0
    # exact-threshold mode: resample b until <a, b> >= min_inner
    min_inner: Optional[int] = None

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("k must be non-negative")
        if not 0.5 < self.match_prob <= 1.0:
            raise ValueError("match_prob must lie in (1/2, 1]")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def expected_inner(self, d: int) -> float:
        return d * (2 * self.match_prob - 1)


@dataclass(eq=False)
class Instance:
    n: int
    d: int
    a_rows: np.ndarray  # (n, ceil(d/8)) uint8
    b_rows: np.ndarray
    truth: tuple = field(default_factory=tuple)  # ((a_idx, b_idx), ...)

    def __post_init__(self):
        width = nbytes_for(self.d)
        for name in ("a_rows", "b_rows"):
            rows = np.ascontiguousarray(getattr(self, name), dtype=np.uint8)
            if rows.shape != (self.n, width):
                raise ValueError(f"{name} must have shape {(self.n, width)}, got {rows.shape}")
            if self.d % 8 and rows.size and (rows[:, -1] >> (self.d % 8)).any():
                raise ValueError(f"{name} has nonzero padding bits")
            setattr(self, name, rows)
        self.truth = tuple((int(a), int(b)) for a, b in self.truth)
        a_idx = [a for a, _ in self.truth]
        b_idx = [b for _, b in self.truth]
        if len(set(a_idx)) != len(a_idx) or len(set(b_idx)) != len(b_idx):
            raise ValueError("each vector may take part in at most one planted pair")
        if any(not (0 <= i < self.n) for i in a_idx + b_idx):
            raise ValueError("truth index out of range")

    @property
    def k(self) -> int:
        return len(self.truth)

    @property
    def A(self) -> list[SignVector]:
        return [SignVector.from_row(r, self.d) for r in self.a_rows]

    @property
    def B(self) -> list[SignVector]:
        return [SignVector.from_row(r, self.d) for r in self.b_rows]

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return (
            self.n == other.n
            and self.d == other.d
            and self.truth == other.truth
            and np.array_equal(self.a_rows, other.a_rows)
            and np.array_equal(self.b_rows, other.b_rows)
        )

    def to_bytes(self) -> bytes:
        parts = [_HEADER.pack(MAGIC, VERSION, self.n, self.d, self.k)]
        parts.append(self.a_rows.tobytes())
        parts.append(self.b_rows.tobytes())
        parts.extend(_PAIR.pack(a, b) for a, b in self.truth)
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Instance":
        if len(data) < HEADER_SIZE:
            raise FormatError("truncated header", len(data))
        magic, version, n, d, k = _HEADER.unpack_from(data, 0)
        if magic != MAGIC:
            raise FormatError(f"bad magic {magic!r}", 0)
        if version != VERSION:
            raise FormatError(f"unsupported version {version}", 4)
        if d < 1:
            raise FormatError("dimension must be positive", 16)
        width = nbytes_for(d)
        body = n * width
        expected = HEADER_SIZE + 2 * body + k * _PAIR.size
        if len(data) < expected:
            raise FormatError(f"truncated file, expected {expected} bytes", len(data))
        if len(data) > expected:
            raise FormatError("trailing bytes after truth section", expected)
        rows = np.frombuffer(data, dtype=np.uint8, count=2 * body, offset=HEADER_SIZE)
        rows = rows.reshape(2 * n, width).copy()
        off = HEADER_SIZE + 2 * body
        truth = [_PAIR.unpack_from(data, off + i * _PAIR.size) for i in range(k)]
        try:
            return cls(n, d, rows[:n], rows[n:], tuple(truth))
        except ValueError as exc:
            raise FormatError(str(exc), off) from None


def file_size(n: int, d: int, k: int) -> int:
    return HEADER_SIZE + 2 * n * nbytes_for(d) + k * _PAIR.size


def save(inst: Instance, path) -> None:
    Path(path).write_bytes(inst.to_bytes())


def load(path) -> Instance:
    return Instance.from_bytes(Path(path).read_bytes())


def manifest(inst: Instance, spec: Optional[PlantSpec] = None, path=None) -> dict:
    """Bookkeeping record for benches: sizes, generator settings, sha256 of the file bytes."""
    return {
        "n": inst.n,
        "d": inst.d,
        "k": inst.k,
        "seed": None if spec is None else spec.seed,
        "match_prob": None if spec is None else spec.match_prob,
        "file": None if path is None else str(path),
        "sha256": hashlib.sha256(inst.to_bytes()).hexdigest(),
    }


def write_manifest(inst: Instance, path, spec: Optional[PlantSpec] = None, data_path=None) -> None:
    Path(path).write_text(json.dumps(manifest(inst, spec, data_path), indent=2) + "\n")


# -- generation ------------------------------------------------------------
# Each vector draws from its own Philox stream keyed by (seed, side, index),
# so output does not depend on generation order.

_SIDE_A, _SIDE_B, _SIDE_PLAN = 0, 1, 2


def _stream(seed: int, side: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(side, index))))


def _uniform_rows(seed: int, side: int, count: int, d: int) -> np.ndarray:
    bits = np.empty((count, d), dtype=bool)
    for i in range(count):
        bits[i] = _stream(seed, side, i).integers(0, 2, d, dtype=np.uint8).astype(bool)
    return bits


def correlated_bits(a_bits: np.ndarray, match_prob: float, rng: np.random.Generator) -> np.ndarray:
    """Copy of ``a_bits`` where each coordinate independently flips w.p. 1 - match_prob."""
    flips = rng.random(a_bits.shape) >= match_prob
    return a_bits ^ flips


def generate(n: int, d: int, spec: PlantSpec) -> Instance:
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    if spec.k > n:
        raise ValueError(f"cannot plant k={spec.k} pairs among n={n} vectors")
    if spec.min_inner is not None and spec.min_inner > d:
        raise ValueError(f"min_inner={spec.min_inner} exceeds d={d}")
    a_bits = _uniform_rows(spec.seed, _SIDE_A, n, d)
    b_bits = _uniform_rows(spec.seed, _SIDE_B, n, d)

    plan = _stream(spec.seed, _SIDE_PLAN, 0)
    a_idx = np.sort(plan.choice(n, spec.k, replace=False))
    b_idx = plan.choice(n, spec.k, replace=False)
    truth = []
    for ai, bi in zip(a_idx.tolist(), b_idx.tolist()):
        rng = _stream(spec.seed, _SIDE_PLAN, 1 + bi)
        while True:
            cand = correlated_bits(a_bits[ai], spec.match_prob, rng)
            if spec.min_inner is None or d - 2 * int(np.count_nonzero(cand ^ a_bits[ai])) >= spec.min_inner:
                break
        b_bits[bi] = cand
        truth.append((ai, bi))
    return Instance(n, d, pack_rows(a_bits), pack_rows(b_bits), tuple(truth))


def planted_inner_products(inst: Instance) -> np.ndarray:
    if not inst.truth:
        return np.zeros(0, dtype=np.int64)
    a = np.array([p[0] for p in inst.truth])
    b = np.array([p[1] for p in inst.truth])
    return paired_inner_products(inst.a_rows[a], inst.b_rows[b], inst.d)

