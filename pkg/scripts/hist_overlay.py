"""Inner-product histogram: uniform pairs against correlated pairs, to CSV.

    python3 scripts/hist_overlay.py --c 5 --out hist.csv
"""
import argparse
import csv
import json

from heavyprod.cli import HIST_COLUMNS, simulate_hist


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--d", type=int, default=60)
    ap.add_argument("--c", type=int, required=True, help="planted pairs in the instance")
    ap.add_argument("--match-prob", type=float, default=0.96)
    ap.add_argument("--samples", type=int, default=10**6)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="hist.csv")
    args = ap.parse_args()

    rows, summary = simulate_hist(args.n, args.d, args.c, args.match_prob, args.samples, args.seed)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HIST_COLUMNS)
        writer.writerows(rows)
    print(json.dumps(summary, indent=2))


if __name__ == "__main__":
    main()
