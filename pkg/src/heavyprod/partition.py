"""Pairwise-independent grouping by a random affine map over GF(2).

An element index i is hashed to M * bin(i) + c, where M is a uniformly random
(log2 h) x (bits of n) binary matrix and c a random offset. For distinct
indices the collision probability is exactly 1/h.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


def index_bits(n: int) -> int:
    """Bits needed to write every index in [0, n)."""
    return max(1, (n - 1).bit_length())


def log2_exact(h: int) -> int:
    if h < 1 or h & (h - 1):
        raise ValueError(f"group count must be a power of two, got {h}")
    return h.bit_length() - 1


def seed_bits(n: int, h: int) -> int:
    return log2_exact(h) * (index_bits(n) + 1)


@dataclass(frozen=True)
class HashSeed:
    rows: tuple  # out_bits ints, each an in_bits-wide mask
    offset: int
    in_bits: int

    @property
    def out_bits(self) -> int:
        return len(self.rows)

    @classmethod
    def from_bits(cls, bits: Sequence[int], n: int, h: int) -> "HashSeed":
        out_bits, in_bits = log2_exact(h), index_bits(n)
        bits = [int(b) for b in bits]
        if len(bits) != out_bits * (in_bits + 1) or any(b not in (0, 1) for b in bits):
            raise ValueError(f"expected {out_bits * (in_bits + 1)} bits for n={n}, h={h}")
        rows = tuple(
            sum(b << j for j, b in enumerate(bits[k * in_bits : (k + 1) * in_bits])) for k in range(out_bits)
        )
        offset = sum(b << k for k, b in enumerate(bits[out_bits * in_bits :]))
        return cls(rows, offset, in_bits)

    @classmethod
    def random(cls, n: int, h: int, rng: np.random.Generator) -> "HashSeed":
        return cls.from_bits(rng.integers(0, 2, seed_bits(n, h)), n, h)

    def group_of(self, i: int) -> int:
        g = self.offset
        for k, row in enumerate(self.rows):
            g ^= ((row & i).bit_count() & 1) << k
        return g


@dataclass(frozen=True)
class Grouping:
    h: int
    assignment: np.ndarray  # group id for each element index

    @property
    def groups(self) -> list:
        order = np.argsort(self.assignment, kind="stable")
        cuts = np.searchsorted(self.assignment[order], np.arange(1, self.h))
        return np.split(order, cuts)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.h)

    def members(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == i)


def assign(n: int, h: int, seed: HashSeed) -> Grouping:
    out_bits = log2_exact(h)
    if seed.out_bits != out_bits:
        raise ValueError(f"seed has {seed.out_bits} output bits, h={h} needs {out_bits}")
    if index_bits(n) > seed.in_bits:
        raise ValueError(f"seed reads {seed.in_bits} index bits, n={n} needs {index_bits(n)}")
    if any(row >> seed.in_bits for row in seed.rows) or seed.offset >> out_bits:
        raise ValueError("malformed hash seed")
    idx = np.arange(n, dtype=np.int64)
    groups = np.full(n, seed.offset, dtype=np.int64)
    for k, row in enumerate(seed.rows):
        parity = np.bitwise_count(idx & row) & 1
        groups ^= parity.astype(np.int64) << k
    return Grouping(h, groups)


def planted_collision_rate(groupings: Iterable[tuple], truth: Sequence[tuple]) -> float:
    """Fraction of (A-grouping, B-grouping) trials where two planted pairs share a cell."""
    hits = trials = 0
    for ga, gb in groupings:
        trials += 1
        cells = {(int(ga.assignment[a]), int(gb.assignment[b])) for a, b in truth}
        hits += len(cells) < len(truth)
    if trials == 0:
        raise ValueError("need at least one trial")
    return hits / trials
