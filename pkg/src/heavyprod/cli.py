"""Command-line entry point: ``heavyprod <command> [flags]``.

Results go to stdout as JSON (or to a CSV file where noted). Input errors
produce a JSON object on stderr and exit status 2. ``detect`` and
``detect-det`` exit 1 when a heavy pair recorded in the file's ground truth
was missed.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from contextlib import nullcontext
from fractions import Fraction

import numpy as np

from . import __version__
from .detector import InsufficientRandomness, find_correlated, find_correlated_deterministic
from .instance import FormatError, Instance, PlantSpec, correlated_bits, generate, load, manifest, save
from .multilinear import coefficients
from .nn import forward_dense, forward_sparse, planted_net
from .oracle import brute_force, heavy_pairs
from .params import InfeasibleParams, derive, threshold_for, validate_report
from .scores import BACKENDS
from .vectors import inner_products, paired_inner_products

SCHEMA_VERSION = 1
HIST_COLUMNS = ["bin_low", "bin_high", "count_uniform_pairs", "count_planted_pairs"]
BENCH_COLUMNS = [
    "n", "d", "trial", "seed", "k", "r", "h", "reps", "t_effective",
    "partition_s", "subset_tables_s", "moments_s", "scores_s", "brute_force_s",
    "detect_total_s", "oracle_s", "candidate_cells", "found", "heavy", "recall",
]


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, sort_keys=True) + "\n")


def _fail(kind: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return 2


def _params_for(args, n: int, d: int):
    return derive(n, d, args.rho, mode=args.mode, v=args.v, w=args.w, reps=args.reps)


def _recall(inst: Instance, found_pairs, rho) -> dict:
    """Recall over the ground-truth pairs that actually clear the threshold.

    A planted pair drawn from the agreement model can fall below ceil(rho d);
    it is then not heavy and is listed separately instead of counted as missed.
    """
    threshold = threshold_for(rho, inst.d)
    found = set(found_pairs)
    heavy, light = [], []
    for a, b in inst.truth:
        ip = int(paired_inner_products(inst.a_rows[[a]], inst.b_rows[[b]], inst.d)[0])
        (heavy if ip >= threshold else light).append((a, b))
    missed = [pair for pair in heavy if pair not in found]
    recall = 1.0 if not heavy else (len(heavy) - len(missed)) / len(heavy)
    return {
        "recall": recall,
        "missed": [list(p) for p in missed],
        "truth_below_threshold": [list(p) for p in light],
    }


# -- commands --------------------------------------------------------------


def cmd_gen(args) -> int:
    spec = PlantSpec(args.k, args.match_prob, args.seed, args.min_inner)
    inst = generate(args.n, args.d, spec)
    save(inst, args.out)
    _emit(manifest(inst, spec, args.out))
    return 0


def cmd_oracle(args) -> int:
    inst = load(args.inp)
    pairs = brute_force(inst, args.rho)
    _emit({
        "schema_version": SCHEMA_VERSION,
        "threshold": threshold_for(args.rho, inst.d),
        "pairs": [list(p) for p in pairs],
    })
    return 0


def _detect(args, deterministic: bool) -> int:
    inst = load(args.inp)
    p = _params_for(args, inst.n, inst.d)
    options = dict(backend=args.backend, cap=args.cap, moments=args.moments, repartition=args.repartition)
    if deterministic:
        report = find_correlated_deterministic(inst, p, k=args.k, **options)
    else:
        report = find_correlated(inst, p, seed=args.seed, k=args.k, **options)
    out = report.to_dict(include_timings=not args.no_timings)
    out["schema_version"] = SCHEMA_VERSION
    out["params_report"] = validate_report(p)
    out.update(_recall(inst, report.pairs, p.rho))
    _emit(out)
    return 0 if out["recall"] == 1.0 else 1


def cmd_detect(args) -> int:
    return _detect(args, deterministic=False)


def cmd_detect_det(args) -> int:
    return _detect(args, deterministic=True)


def hist_edges(d: int, bins) -> np.ndarray:
    """Unit-parity bins by default: one bin of width 2 around each reachable value."""
    if bins is None:
        return np.arange(-d - 1, d + 2, 2, dtype=float)
    return np.linspace(-d - 1, d + 1, bins + 1)


def simulate_hist(n, d, c, match_prob, samples, seed=0, bins=None, planted_samples=None):
    """Histogram of <a, b> over uniformly sampled pairs, plus a planted overlay.

    Sampled pairs that happen to be planted are moved to the overlay series.
    The overlay is topped up with ``planted_samples`` fresh correlated pairs,
    since uniform sampling rarely lands on one of the c planted pairs.
    """
    inst = generate(n, d, PlantSpec(c, match_prob, seed))
    rng = np.random.default_rng([seed, 1])
    ia = rng.integers(0, n, samples)
    ib = rng.integers(0, n, samples)
    if n * n <= 1 << 22:
        values = inner_products(inst.a_rows, inst.b_rows, d)[ia, ib]
    else:
        values = paired_inner_products(inst.a_rows[ia], inst.b_rows[ib], d)
    planted_mask = np.zeros(samples, dtype=bool)
    if inst.truth:
        keys = ia.astype(np.int64) * n + ib
        truth_keys = np.array([a * n + b for a, b in inst.truth], dtype=np.int64)
        planted_mask = np.isin(keys, truth_keys)
    uniform = values[~planted_mask]

    extra = samples if planted_samples is None else planted_samples
    overlay_rng = np.random.default_rng([seed, 2])
    a_bits = overlay_rng.integers(0, 2, (extra, d), dtype=np.uint8).astype(bool)
    b_bits = correlated_bits(a_bits, match_prob, overlay_rng)
    overlay = d - 2 * np.count_nonzero(a_bits ^ b_bits, axis=1)
    planted = np.concatenate([values[planted_mask], overlay])

    edges = hist_edges(d, bins)
    cu, _ = np.histogram(uniform, edges)
    cp, _ = np.histogram(planted, edges)
    rows = [(float(lo), float(hi), int(u), int(q)) for lo, hi, u, q in zip(edges[:-1], edges[1:], cu, cp)]
    summary = {
        "schema_version": SCHEMA_VERSION,
        "uniform_samples": int(uniform.size),
        "uniform_mean": float(uniform.mean()) if uniform.size else None,
        "uniform_within_50": float(np.mean(np.abs(uniform) <= 50)) if uniform.size else None,
        "uniform_max_abs": int(np.abs(uniform).max()) if uniform.size else None,
        "planted_samples": int(planted.size),
        "planted_mean": float(planted.mean()) if planted.size else None,
        "planted_expected_mean": d * (2 * match_prob - 1),
    }
    return rows, summary


def cmd_simulate_hist(args) -> int:
    rows, summary = simulate_hist(
        args.n, args.d, args.c, args.match_prob, args.samples, args.seed, args.bins, args.planted_samples
    )
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(HIST_COLUMNS)
            writer.writerows(rows)
        summary["out"] = str(args.out)
    _emit(summary)
    return 0


def cmd_coeffs(args) -> int:
    q = coefficients(args.d, args.r).q
    sys.stdout.write(json.dumps({"q": list(q)}, separators=(",", ":")) + "\n")
    return 0


def nn_demo(m, n, d, k, rho, seed=0, v=18, match_prob=0.96, backend="blas") -> dict:
    net, X, truth = planted_net(m, n, d, k, rho, match_prob, seed)
    p = derive(max(m, n), d, rho, v=v)
    t0 = time.perf_counter()
    dense = forward_dense(net, X)
    dense_s = time.perf_counter() - t0
    t0 = time.perf_counter()
    res = forward_sparse(net, X, p, seed=seed, k=k, backend=backend)
    sparse_s = time.perf_counter() - t0
    active = heavy_pairs(net.weights, X, d, threshold_for(rho, d))
    found = set(res.report.pairs)
    recall = 1.0 if not active else sum(pair in found for pair in active) / len(active)
    deviation = max((abs(s - t) for s, t in zip(res.outputs, dense)), default=Fraction(0))
    return {
        "schema_version": SCHEMA_VERSION,
        "m": m,
        "n": n,
        "d": d,
        "planted": [list(pair) for pair in truth],
        "active_pairs": len(active),
        "recall": recall,
        "exact_match": deviation == 0,
        "max_deviation": str(deviation),
        "dense_seconds": dense_s,
        "sparse_seconds": sparse_s,
        "dense_products": m * n,
        "candidate_cells": res.report.candidate_cells,
        "cells_checked_products": res.report.diagnostics.get("cell_products"),
    }


def cmd_nn_demo(args) -> int:
    out = nn_demo(args.m, args.n, args.d, args.k, args.rho, args.seed, args.v, args.match_prob, args.backend)
    _emit(out)
    return 0 if out["exact_match"] else 1


def bench(n_list, d, rho, trials, v=18, k=3, match_prob=0.96, seed=0, reps=None, backend="blas"):
    rows = []
    for n in n_list:
        p = derive(n, d, rho, v=v, reps=reps)
        for trial in range(trials):
            s = seed + trial
            inst = generate(n, d, PlantSpec(k, match_prob, s))
            t0 = time.perf_counter()
            truth = brute_force(inst, p.rho)
            oracle_s = time.perf_counter() - t0
            report = find_correlated(inst, p, seed=s, backend=backend)
            tm = report.timings
            hits = len(set(report.pairs) & set(truth))
            rows.append({
                "n": n, "d": d, "trial": trial, "seed": s, "k": k, "r": p.r, "h": p.h, "reps": p.reps,
                "t_effective": p.t_effective,
                "partition_s": tm.get("partition", 0.0),
                "subset_tables_s": tm.get("subset_tables", 0.0),
                "moments_s": tm.get("moments", 0.0),
                "scores_s": tm.get("scores", 0.0),
                "brute_force_s": tm.get("brute_force", 0.0),
                "detect_total_s": tm.get("total", 0.0),
                "oracle_s": round(oracle_s, 6),
                "candidate_cells": report.candidate_cells,
                "found": len(report.found),
                "heavy": len(truth),
                "recall": 1.0 if not truth else hits / len(truth),
            })
    return rows


def cmd_bench(args) -> int:
    n_list = [int(x) for x in args.n_list.split(",") if x.strip()]
    rows = bench(n_list, args.d, args.rho, args.trials, args.v, args.k, args.match_prob, args.seed, args.reps,
                 args.backend)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS)
            writer.writeheader()
            writer.writerows(rows)
    _emit({"schema_version": SCHEMA_VERSION, "rows": rows})
    return 0


# -- parser ----------------------------------------------------------------


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _detect_flags(sp) -> None:
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--rho", type=float, required=True)
    sp.add_argument("--v", type=_positive)
    sp.add_argument("--w", type=float)
    sp.add_argument("--reps", type=_positive)
    sp.add_argument("--backend", choices=BACKENDS, default="blas")
    sp.add_argument("--cap", type=_positive)
    sp.add_argument("--mode", choices=("theory", "empirical"), default="empirical")
    sp.add_argument("--k", type=int, help="number of pairs sought (default: the file's ground-truth count)")
    sp.add_argument("--moments", choices=("cached", "fast", "naive"), default="cached")
    sp.add_argument("--repartition", action="store_true", help="draw a fresh partition every repetition")
    sp.add_argument("--no-timings", action="store_true", help="omit timings so output is reproducible")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="heavyprod", description="Heavy inner-product pair detection.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("gen", help="write a planted instance")
    sp.add_argument("--n", type=_positive, required=True)
    sp.add_argument("--d", type=_positive, required=True)
    sp.add_argument("--k", type=int, default=0)
    sp.add_argument("--match-prob", type=float, default=0.96)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--min-inner", type=int, help="resample planted partners until <a, b> reaches this")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("oracle", help="brute-force heavy pairs")
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--rho", type=float, required=True)
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("detect", help="randomized detector")
    _detect_flags(sp)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_detect)

    sp = sub.add_parser("detect-det", help="deterministic detector")
    _detect_flags(sp)
    sp.set_defaults(func=cmd_detect_det)

    sp = sub.add_parser("simulate-hist", help="inner-product histogram with planted overlay")
    sp.add_argument("--n", type=_positive, required=True)
    sp.add_argument("--d", type=_positive, required=True)
    sp.add_argument("--c", type=int, required=True, help="number of planted pairs")
    sp.add_argument("--match-prob", type=float, default=0.96)
    sp.add_argument("--samples", type=_positive, default=1_000_000)
    sp.add_argument("--planted-samples", type=int)
    sp.add_argument("--bins", type=_positive)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_simulate_hist)

    sp = sub.add_parser("coeffs", help="multilinear coefficients by subset size")
    sp.add_argument("--d", type=_positive, required=True)
    sp.add_argument("--r", type=int, required=True)
    sp.set_defaults(func=cmd_coeffs)

    sp = sub.add_parser("nn-demo", help="sparse vs dense shifted-ReLU forward pass")
    sp.add_argument("--m", type=_positive, default=128)
    sp.add_argument("--n", type=_positive, default=128)
    sp.add_argument("--d", type=_positive, default=60)
    sp.add_argument("--k", type=int, default=4)
    sp.add_argument("--rho", type=float, default=0.8)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--v", type=_positive, default=18)
    sp.add_argument("--match-prob", type=float, default=0.96)
    sp.add_argument("--backend", choices=BACKENDS, default="blas")
    sp.set_defaults(func=cmd_nn_demo)

    sp = sub.add_parser("bench", help="per-stage timings and recall over several n")
    sp.add_argument("--n-list", default="256,512,1024")
    sp.add_argument("--d", type=_positive, default=60)
    sp.add_argument("--rho", type=float, default=0.8)
    sp.add_argument("--trials", type=_positive, default=1)
    sp.add_argument("--v", type=_positive, default=18)
    sp.add_argument("--k", type=int, default=3)
    sp.add_argument("--match-prob", type=float, default=0.96)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--reps", type=_positive)
    sp.add_argument("--backend", choices=BACKENDS, default="blas")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_bench)
    return parser


def _thread_limit():
    raw = os.environ.get("HEAVYPROD_THREADS")
    if not raw:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=int(raw))


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        with _thread_limit():
            return args.func(args)
    except CliError as exc:
        return _fail("usage", str(exc))
    except FormatError as exc:
        return _fail("format", str(exc))
    except InfeasibleParams as exc:
        return _fail("infeasible", str(exc))
    except InsufficientRandomness as exc:
        return _fail("insufficient_randomness", str(exc))
    except FileNotFoundError as exc:
        return _fail("io", str(exc))
    except (ValueError, OSError) as exc:
        return _fail("invalid", str(exc))


if __name__ == "__main__":
    sys.exit(main())
