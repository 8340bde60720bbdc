#!/usr/bin/env python3
"""Random-configuration study of the participation game design: fraction of
feasible designs and of small second-equilibrium degradation versus the
users' normalized discrimination ability d."""

import argparse
import sys

from bpviral.game import random_study


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=97)
    ap.add_argument("--d-values", default="0.02,0.05,0.08,0.12,0.18,0.28")
    args = ap.parse_args(argv)

    print("d      feasible  AI      2nd-NE  P<10%")
    for d in (float(x) for x in args.d_values.split(",")):
        res = random_study(args.samples, d=d, seed=args.seed)
        print(f"{d:5.2f}  {res['feasible_fraction']:.4f}    "
              f"{res['ai_fraction']:.4f}  {res['second_ne_fraction']:.4f}  "
              f"{res['small_degradation_fraction']:.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
