"""Per-stage timings of the detector against the brute-force scan, to CSV.

n=1024 at full repetitions takes about two minutes and 2 GB on one core.
"""
import argparse
import csv

from heavyprod.cli import BENCH_COLUMNS, bench


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-list", default="256,512,1024")
    ap.add_argument("--d", type=int, default=60)
    ap.add_argument("--rho", type=float, default=0.8)
    ap.add_argument("--v", type=int, default=18)
    ap.add_argument("--trials", type=int, default=1)
    ap.add_argument("--reps", type=int, help="override the repetition count")
    ap.add_argument("--out", default="bench.csv")
    args = ap.parse_args()

    n_list = [int(x) for x in args.n_list.split(",")]
    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS)
        writer.writeheader()
        for n in n_list:
            for row in bench([n], args.d, args.rho, args.trials, v=args.v, reps=args.reps):
                writer.writerow(row)
                fh.flush()
                print(f"n={n:5d} trial={row['trial']} detect={row['detect_total_s']:.2f}s "
                      f"scores={row['scores_s']:.2f}s oracle={row['oracle_s']:.4f}s recall={row['recall']:.2f}")


if __name__ == "__main__":
    main()
