#!/usr/bin/env python3
"""Table of the Brownian axis ratio E tau / G on unit cones from the finite-difference solver.

    python3 scripts/cone_ratio_table.py --h 0.0009765625 --angles 2pi/3 pi/3 pi/4 pi/5
"""
import argparse

from bhplab import cli
from bhplab import experiments as ex


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--angles", nargs="+", default=["2pi/3", "pi/4", "pi/5"])
    ap.add_argument("--h", type=float, default=1 / 512)
    ap.add_argument("--a-min", type=float, default=2.0**-6)
    ap.add_argument("--a-max", type=float, default=2.0**-2)
    args = ap.parse_args()
    angles = [cli.parse_angle(a) for a in args.angles]
    rep = ex.cone_counterexample_scan(angles, h=args.h, a_range=(args.a_min, args.a_max))
    for row in rep.rows:
        norm = [round(v / row["R"][-1], 3) for v in row["R"]]
        print(f"angle {row['angle']:.4f}  class {row['class']:<16} band {row['band']:.3f}  R(a)/R(a_max) {norm}")
    print("verdict:", rep.verdict)


if __name__ == "__main__":
    main()
