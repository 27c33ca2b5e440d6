#!/usr/bin/env python3
"""Run compiled-in presets through the CLI and print one verdict line each.

    python3 scripts/run_presets.py                      # every preset
    python3 scripts/run_presets.py --criterion 10       # presets behind one criterion
    python3 scripts/run_presets.py pruitt-bm-d2 --paths 2000 --out runs
"""
import argparse
import time
from pathlib import Path

from bhplab import cli


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("names", nargs="*", help="preset names (default: all)")
    ap.add_argument("--criterion", type=int, choices=sorted(cli.PRESET_CRITERIA))
    ap.add_argument("--out", default="runs")
    ap.add_argument("--paths", type=int)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    names = args.names or (cli.PRESET_CRITERIA[args.criterion] if args.criterion else sorted(cli.PRESETS))
    for name in names:
        cfg = cli.PRESETS[name]
        argv = [cfg["experiment"], "--preset", name, "--out", str(Path(args.out) / name),
                "--workers", str(args.workers)]
        if args.paths and "n_paths" in cfg:
            argv += ["--paths", str(args.paths)]
        t0 = time.perf_counter()
        code = cli.main(argv)
        print(f"  {name}: exit {code} in {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
