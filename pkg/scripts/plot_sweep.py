"""Plot the mean rows of a sweep CSV written by the uavd2d CLI.

    python scripts/plot_sweep.py results/sweep-height/sweep-height.csv \
        --x uav_height --y rate_alg1 rate_alg2
"""

import argparse
import csv
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("csv")
    ap.add_argument("--x", required=True, help="column for the horizontal axis")
    ap.add_argument("--y", nargs="+", default=["rate_alg2"])
    ap.add_argument("--group", default=None, help="column that splits curves")
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    with open(args.csv) as fh:
        rows = [r for r in csv.DictReader(fh) if r["seed"] == "mean"]
    curves = defaultdict(list)
    for r in rows:
        for y in args.y:
            label = y if args.group is None else f"{y} {args.group}={r[args.group]}"
            curves[label].append((float(r[args.x]), float(r[y])))
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for label, pts in curves.items():
        pts.sort()
        ax.plot(*zip(*pts), marker="o", label=label)
    ax.set_xlabel(args.x)
    ax.set_ylabel("bits/s/Hz")
    ax.legend(fontsize=7)
    fig.tight_layout()
    out = args.out or args.csv.rsplit(".", 1)[0] + ".png"
    fig.savefig(out, dpi=150)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
