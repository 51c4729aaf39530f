"""Brute-force references.

Nothing here imports the detector or the score machinery; these functions
are what the fast paths are checked against.
"""

from __future__ import annotations

import itertools
from collections import Counter

import numpy as np

from .instance import Instance
from .params import threshold_for
from .vectors import inner_products, nbytes_for, unpack_signs


def heavy_pairs(rows_a: np.ndarray, rows_b: np.ndarray, d: int, threshold: int) -> list:
    ips = inner_products(rows_a, rows_b, d)
    ii, jj = np.nonzero(ips >= threshold)
    return sorted(zip(ii.tolist(), jj.tolist()))


def brute_force(inst: Instance, rho) -> list:
    """Every (i, j) with <a_i, b_j> >= ceil(rho d), sorted."""
    return heavy_pairs(inst.a_rows, inst.b_rows, inst.d, threshold_for(rho, inst.d))


def tail_probe(d: int, v: int, samples: int, seed: int = 0, chunk: int = 1 << 18) -> float:
    """Monte-Carlo estimate of Pr[|<x, y>| >= v] for independent uniform x, y."""
    rng = np.random.default_rng(seed)
    width = nbytes_for(d)
    pad = (1 << (d % 8)) - 1 if d % 8 else 0xFF
    hits = 0
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        x = rng.integers(0, 256, (m, width), dtype=np.uint8)
        y = rng.integers(0, 256, (m, width), dtype=np.uint8)
        x[:, -1] &= pad
        y[:, -1] &= pad
        ip = d - 2 * np.bitwise_count(x ^ y).sum(axis=1, dtype=np.int64)
        hits += int(np.count_nonzero(np.abs(ip) >= v))
        done += m
    return hits / samples


def symbolic_coefficients(d: int, r: int) -> dict:
    """Expand (z_1+...+z_d)^r term by term, reducing exponents mod 2.

    Returns {frozenset(M): coefficient} over all multilinear monomials that
    survive. Exponential in r; meant for d, r <= 6.
    """
    terms = Counter()
    for seq in itertools.product(range(d), repeat=r):
        odd = frozenset(i for i, cnt in Counter(seq).items() if cnt % 2)
        terms[odd] += 1
    return dict(terms)


def double_sum_scores(
    rows_a: np.ndarray,
    rows_b: np.ndarray,
    d: int,
    groups_a: np.ndarray,
    groups_b: np.ndarray,
    h: int,
    signs_a: np.ndarray,
    signs_b: np.ndarray,
    r: int,
) -> np.ndarray:
    """C[i, j] = sum over x in A_i, y in B_j of a^x a^y <x, y>^r, term by term."""
    ips = inner_products(rows_a, rows_b, d)
    out = np.zeros((h, h), dtype=object)
    for x in range(rows_a.shape[0]):
        for y in range(rows_b.shape[0]):
            out[groups_a[x], groups_b[y]] += int(signs_a[x]) * int(signs_b[y]) * int(ips[x, y]) ** r
    return out


def dot_signs(rows_a: np.ndarray, rows_b: np.ndarray, d: int) -> np.ndarray:
    """Inner products from unpacked ±1 entries; independent of the popcount path."""
    return unpack_signs(rows_a, d).astype(np.int64) @ unpack_signs(rows_b, d).astype(np.int64).T


def transpose(inst: Instance) -> Instance:
    return Instance(inst.n, inst.d, inst.b_rows, inst.a_rows, tuple((b, a) for a, b in inst.truth))

