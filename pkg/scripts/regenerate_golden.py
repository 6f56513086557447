"""Rewrite tests/golden/exhaustive_3x6.csv from the current exhaustive search.

Only run this after a deliberate change to the model; the golden file pins
exhaustive-search results for 3 D2D pairs, 6 cellular users and one UAV.
"""

import argparse
import csv
from pathlib import Path

from uavd2d.allocation import allocate_exhaustive
from uavd2d.scenario import ScenarioConfig, generate

GOLDEN = Path(__file__).resolve().parent.parent / "tests" / "golden" / "exhaustive_3x6.csv"
SMALL = ScenarioConfig(num_cellular=6, num_d2d=3, uav_positions=((450.0, 0.0),))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=6)
    ap.add_argument("--out", type=Path, default=GOLDEN)
    args = ap.parse_args()
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seed", "sum_rate", "total_power", "assignment"])
        for seed in range(args.seeds):
            ex = allocate_exhaustive(generate(SMALL, seed))
            w.writerow([seed, repr(ex.sum_rate), repr(ex.total_power),
                        "|".join(f"{a.pair}:{a.kind}:{a.channels}" for a in ex.assignments)])
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
