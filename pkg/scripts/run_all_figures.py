#!/usr/bin/env python3
"""Run every experiment preset and render its figure.

Full fidelity takes hours on one core; pass --quick for a smoke-scale pass.
"""
import argparse
import dataclasses
import os
import subprocess
import sys
import time

from mecsim.harness import run, sweep_presets

QUICK = dict(episodes=5, reps=2)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs", help="output root directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--quick", action="store_true",
                        help="reduced episodes/reps for a fast smoke pass")
    parser.add_argument("--only", nargs="*", help="subset of preset names")
    args = parser.parse_args()

    presets = sweep_presets()
    names = args.only or sorted(presets)
    for name in names:
        spec = dataclasses.replace(presets[name], seed=args.seed,
                                   out_dir=os.path.join(args.out, name))
        if args.quick and spec.kind != "ga_trace":
            spec = dataclasses.replace(spec, **QUICK)
        t0 = time.monotonic()
        out = run(spec)
        print(f"{name}: simulated in {time.monotonic() - t0:.1f}s -> {out}")
        code = subprocess.call([sys.executable, "-m", "plotkit.cli",
                                "--preset", name, "--in", out, "--out", out])
        if code != 0:
            print(f"{name}: figure rendering failed", file=sys.stderr)
            return code
        print(f"{name}: figure at {os.path.join(out, name + '.png')}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
