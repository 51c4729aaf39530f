"""Heavy inner-product detection by group scoring.

Both sides are hashed into h groups once per run. Each repetition draws
fresh pairwise-independent signs, scores every group pair exactly and flags
cells with |C| >= 2 theta. Flagged cells are then searched exhaustively, so
every reported pair is verified and false positives cannot occur.

The randomized and deterministic drivers differ only in where their bits
come from: a seeded generator, or bits harvested from vectors of A that have
no heavy partner in B.
"""

from __future__ import annotations

import json
import math
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .instance import Instance
from .multilinear import coefficients, subset_index, subset_products
from .params import Params, threshold_for
from .partition import HashSeed, assign, seed_bits
from .scores import (
    SignAssignment,
    build_moments_cached,
    build_moments_fast,
    build_moments_naive,
    coefficient_vector,
    score_matrix,
    sign_key_bits,
)
from .vectors import SignVector, inner_products, unpack_signs

MOMENT_PATHS = ("cached", "fast", "naive")


class InsufficientRandomness(RuntimeError):
    pass


class RngBits:
    """Bit source backed by a seeded generator."""

    def __init__(self, seed: int):
        self.rng = np.random.default_rng(seed)

    def take(self, count: int) -> np.ndarray:
        return self.rng.integers(0, 2, count, dtype=np.uint8)


@dataclass
class BitPool:
    bits: np.ndarray
    cursor: int = 0
    sources: tuple = ()  # indices of the A vectors the bits came from

    def __len__(self) -> int:
        return int(self.bits.size)

    @property
    def remaining(self) -> int:
        return len(self) - self.cursor

    def take(self, count: int) -> np.ndarray:
        if count > self.remaining:
            raise InsufficientRandomness(
                f"bit pool exhausted: asked for {count}, {self.remaining} left"
            )
        out = self.bits[self.cursor : self.cursor + count]
        self.cursor += count
        return out


@dataclass
class DetectionReport:
    found: list  # sorted (a_index, b_index, inner_product)
    flagged: dict  # cell -> number of repetitions that flagged it
    reps_run: int
    candidate_cells: int
    skipped_cells: int
    params: Params
    timings: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def pairs(self) -> list:
        return [(a, b) for a, b, _ in self.found]

    def to_dict(self, include_timings: bool = True) -> dict:
        out = {
            "found": [list(p) for p in self.found],
            "flagged": {",".join(map(str, cell)): n for cell, n in sorted(self.flagged.items())},
            "reps_run": self.reps_run,
            "candidate_cells": self.candidate_cells,
            "skipped_cells": self.skipped_cells,
            "params": self.params.to_dict(),
            "diagnostics": self.diagnostics,
        }
        if include_timings:
            out["timings"] = self.timings
        return out

    def to_json(self, include_timings: bool = True) -> str:
        return json.dumps(self.to_dict(include_timings), sort_keys=True)


def solve_group_pair(rows_a: np.ndarray, rows_b: np.ndarray, rho, d: int) -> list:
    """All (q, l, <a_q, b_l>) in one cell meeting ceil(rho d), exhaustively."""
    if rows_a.shape[0] == 0 or rows_b.shape[0] == 0:
        return []
    threshold = threshold_for(rho, d)
    ips = inner_products(rows_a, rows_b, d)
    qq, ll = np.nonzero(ips >= threshold)
    return [(int(q), int(l), int(ips[q, l])) for q, l in zip(qq, ll)]


def default_cap(k: int, n: int) -> int:
    return 32 * max(k, 1) * math.ceil(math.log2(max(n, 2)))


def draw_partition(bits, n_a: int, n_b: int, h: int):
    """Hash both sides into h groups; the A seed is read first, then the B seed."""
    n = max(n_a, n_b)
    width = seed_bits(n, h)
    ga = assign(n_a, h, HashSeed.from_bits(bits.take(width), n, h))
    gb = assign(n_b, h, HashSeed.from_bits(bits.take(width), n, h))
    return ga, gb


def _flag_mask(values: np.ndarray, p: Params) -> np.ndarray:
    cutoff = p.flag_cutoff
    if values.dtype == object:
        return np.abs(values) >= cutoff
    if cutoff >= 2**63:
        return np.zeros(values.shape, dtype=bool)
    return np.abs(values) >= cutoff


def _moments(path, rows, d, table, grouping, signs, idx, cols):
    if path == "cached":
        return build_moments_cached(table, grouping, signs)
    if path == "fast":
        return build_moments_fast(rows, d, grouping, signs, idx)[:, cols]
    vectors = [SignVector.from_row(r, d) for r in rows]
    return build_moments_naive(vectors, grouping, signs, idx)[:, cols]


def detect_sets(
    rows_a: np.ndarray,
    rows_b: np.ndarray,
    d: int,
    p: Params,
    bits,
    *,
    k: int = 1,
    cap: Optional[int] = None,
    backend: str = "blas",
    moments: str = "cached",
    repartition: bool = False,
) -> DetectionReport:
    """Core loop over packed row sets; |A| and |B| may differ."""
    if moments not in MOMENT_PATHS:
        raise ValueError(f"unknown moment path {moments!r}")
    n_a, n_b = rows_a.shape[0], rows_b.shape[0]
    n = max(n_a, n_b)
    if p.d != d:
        raise ValueError(f"params derived for d={p.d}, data has d={d}")
    if p.n != n:
        raise ValueError(f"params derived for n={p.n}, data has max(|A|, |B|)={n}")
    timings = Counter()
    t_start = time.perf_counter()

    t0 = time.perf_counter()
    ga, gb = draw_partition(bits, n_a, n_b, p.h)
    timings["partition"] += time.perf_counter() - t0

    t0 = time.perf_counter()
    coeffs = coefficients(d, p.r)
    idx = subset_index(d, min(p.r, d))
    sizes = coeffs.nonzero_sizes()
    c = coefficient_vector(coeffs, idx, sizes)
    cols = np.concatenate([np.arange(idx.offsets[m], idx.offsets[m + 1]) for m in sizes])
    table_a = table_b = None
    if moments == "cached":
        table_a = subset_products(unpack_signs(rows_a, d), idx, sizes)
        table_b = subset_products(unpack_signs(rows_b, d), idx, sizes)
    timings["subset_tables"] += time.perf_counter() - t0

    flagged = Counter()
    cell_members = {}
    used = Counter()
    fallbacks = []
    max_bound = 0
    width = sign_key_bits(n) + 1
    for rep in range(p.reps):
        if repartition and rep > 0:
            t0 = time.perf_counter()
            ga, gb = draw_partition(bits, n_a, n_b, p.h)
            timings["partition"] += time.perf_counter() - t0
        signs = SignAssignment.from_bits(bits.take(width), n_a, n_b)

        t0 = time.perf_counter()
        U = _moments(moments, rows_a, d, table_a, ga, signs.a, idx, cols)
        W = _moments(moments, rows_b, d, table_b, gb, signs.b, idx, cols)
        timings["moments"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        sm = score_matrix(U, W, c, backend)
        timings["scores"] += time.perf_counter() - t0
        used[sm.backend] += 1
        max_bound = max(max_bound, sm.bound)
        if sm.fell_back:
            fallbacks.append({"rep": rep, "reason": sm.fallback_reason})

        ii, jj = np.nonzero(_flag_mask(sm.values, p))
        for i, j in zip(ii.tolist(), jj.tolist()):
            cell = (rep, i, j) if repartition else (i, j)
            flagged[cell] += 1
            if cell not in cell_members:
                cell_members[cell] = (ga.members(i), gb.members(j))

    t0 = time.perf_counter()
    cap = default_cap(k, n) if cap is None else cap
    order = sorted(flagged, key=lambda cell: (-flagged[cell], cell))
    chosen, skipped = order[:cap], order[cap:]
    threshold = p.threshold
    found = set()
    cell_products = 0
    for cell in chosen:
        mem_a, mem_b = cell_members[cell]
        cell_products += mem_a.size * mem_b.size
        for q, l, ip in solve_group_pair(rows_a[mem_a], rows_b[mem_b], p.rho, d):
            if ip < threshold:
                raise AssertionError("unverified pair reached the report")
            found.add((int(mem_a[q]), int(mem_b[l]), ip))
    timings["brute_force"] += time.perf_counter() - t0
    timings["total"] = time.perf_counter() - t_start

    sizes_a, sizes_b = ga.sizes(), gb.sizes()
    diagnostics = {
        "backend_requested": backend,
        "backends_used": dict(used),
        "fallbacks": fallbacks,
        "max_score_bound": str(max_bound),
        "moment_path": moments,
        "t_effective": int(cols.size),
        "flag_cutoff": str(p.flag_cutoff),
        "max_group_size": [int(sizes_a.max()), int(sizes_b.max())],
        "cap": cap,
        "cell_products": int(cell_products),
        "repartition": repartition,
    }
    return DetectionReport(
        found=sorted(found),
        flagged=dict(flagged),
        reps_run=p.reps,
        candidate_cells=len(chosen),
        skipped_cells=len(skipped),
        params=p,
        timings={key: round(val, 6) for key, val in timings.items()},
        diagnostics=diagnostics,
    )


def find_correlated(inst: Instance, p: Params, seed: int = 0, k: Optional[int] = None, **options) -> DetectionReport:
    """Randomized detector. ``k`` defaults to the number of planted pairs the
    instance records (the problem statement supplies k as an input)."""
    k = inst.k if k is None else k
    return detect_sets(inst.a_rows, inst.b_rows, inst.d, p, RngBits(seed), k=k, **options)


def find_random_bits(inst: Instance, rho, need: int) -> BitPool:
    """Harvest bits from vectors of A that have no heavy partner in B."""
    threshold = threshold_for(rho, inst.d)
    chunks, sources, have = [], [], 0
    for i in range(inst.n):
        if have >= need:
            break
        ips = inner_products(inst.a_rows[i : i + 1], inst.b_rows, inst.d)
        if (ips >= threshold).any():
            continue
        chunks.append(np.unpackbits(inst.a_rows[i], count=inst.d, bitorder="little"))
        sources.append(i)
        have += inst.d
    if have < need:
        raise InsufficientRandomness(f"only {have} bits available from A, need {need}")
    return BitPool(np.concatenate(chunks).astype(np.uint8), 0, tuple(sources))


def bits_needed(p: Params, n: int) -> int:
    return p.reps * (sign_key_bits(n) + 1) + 2 * seed_bits(n, p.h)


def find_correlated_deterministic(inst: Instance, p: Params, k: Optional[int] = None, **options) -> DetectionReport:
    t0 = time.perf_counter()
    need = bits_needed(p, inst.n)
    if options.get("repartition"):
        need += (p.reps - 1) * 2 * seed_bits(inst.n, p.h)
    pool = find_random_bits(inst, p.rho, need)
    harvest = time.perf_counter() - t0
    k = inst.k if k is None else k
    report = detect_sets(inst.a_rows, inst.b_rows, inst.d, p, pool, k=k, **options)
    report.timings["find_random_bits"] = round(harvest, 6)
    report.diagnostics["bit_pool"] = {"bits": len(pool), "used": pool.cursor, "sources": list(pool.sources)}
    return report
