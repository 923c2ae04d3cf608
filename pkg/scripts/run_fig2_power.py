#!/usr/bin/env python3
"""Power curves for the 5D Gaussian-with-anomaly family.

n = m = 200, 25 random reference points, bandwidth 0.5, shift grid
{0, 0.05, 0.1, 0.15, 0.2}, 100 trials x 200 permutations per cell.
Emits power.csv with one row per (shift, statistic variant).
"""

import argparse
import sys

from refmmd.cli import main as cli_main


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default="results/fig2_power")
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    return cli_main(
        ["power", "--preset", "fig2", "--out", args.out, "--seed", str(args.seed)]
    )


if __name__ == "__main__":
    sys.exit(main())
