#!/usr/bin/env python3
"""Axis ratio E tau / G at several depth fractions and scales on a large cone.

Prints, per scale r, the ratio at each depth normalised by the shallowest one,
the relative standard error of the Green estimate and h1 / E tau.  This is the
exploration used to pick the depth pair of the comparability statistic.

    python3 scripts/depth_pilot.py --angle pi/4 --paths 20000
"""
import argparse
import time

from bhplab import cli, geometry
from bhplab import experiments as ex
from bhplab import subordination as sb
from bhplab.sampler import PathConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--angle", default="pi/4")
    ap.add_argument("--paths", type=int, default=20_000)
    ap.add_argument("--radius", type=float, default=2048.0)
    ap.add_argument("--scales", type=float, nargs="+", default=[256, 16, 1, 1 / 16])
    ap.add_argument("--depths", type=float, nargs="+", default=[1 / 4, 1 / 32, 1 / 128])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    proc = sb.ProcessSpec(2, sb.preset("bm+stable(0.5)"))
    dom = geometry.cone(cli.parse_angle(args.angle), args.radius)
    print("r, R(depth)/R(first), green rel se, h1/E tau, seconds")
    for r in args.scales:
        t0 = time.perf_counter()
        run = ex._scale_runs(proc, dom, [0.0, 0.0], r, tuple(args.depths), 1, args.paths,
                             PathConfig(seed=args.seed), 0.4, ("depth-pilot",))
        tau = [e.mean for e in run["tau"]]
        green = [g[0].mean for g in run["green"]]
        ratio = [t / g for t, g in zip(tau, green)]
        rel = [g[0].stderr / g[0].mean for g in run["green"]]
        h1 = [h.mean / t for h, t in zip(run["h1"], tau)]
        print(f"{r:g}", [round(x / ratio[0], 3) for x in ratio], [round(x, 3) for x in rel],
              [round(x, 4) for x in h1], round(time.perf_counter() - t0, 1), flush=True)


if __name__ == "__main__":
    main()
