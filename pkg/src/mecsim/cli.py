"""Command-line entry points: `mecsim run` and `mecsim recompute`."""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .config import ExperimentSpec, SystemConfig
from .harness import recompute_metrics, run, sweep_presets


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mecsim")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="execute an experiment spec or preset")
    r.add_argument("--config", help="JSON experiment spec file")
    r.add_argument("--preset", choices=sorted(sweep_presets().keys()))
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--reps", type=int, default=None)
    r.add_argument("--episodes", type=int, default=None)
    r.add_argument("--out", default=None)
    r.add_argument("--detail-logs", action="store_true")
    r.add_argument("--jobs", type=int, default=None)

    c = sub.add_parser("recompute", help="recompute metrics from a detail log")
    c.add_argument("--log", required=True)
    c.add_argument("--delta", type=float, default=None,
                   help="cost balance factor if it differs from the default")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        if args.config:
            spec = ExperimentSpec.from_json(args.config)
        elif args.preset:
            spec = sweep_presets()[args.preset]
        else:
            print("error: provide --config or --preset", file=sys.stderr)
            return 2
        for field in ("seed", "reps", "episodes", "jobs"):
            v = getattr(args, field)
            if v is not None:
                spec = dataclasses.replace(spec, **{field: v})
        if args.out is not None:
            spec = dataclasses.replace(spec, out_dir=args.out)
        if args.detail_logs:
            spec = dataclasses.replace(spec, detail_logs=True)
        spec.validate()
        out = run(spec)
        print(f"wrote results to {out}")
        return 0

    if args.command == "recompute":
        cfg = SystemConfig() if args.delta is None else SystemConfig().replace(delta=args.delta)
        result = recompute_metrics(args.log, cfg)
        print(json.dumps({str(k): v for k, v in result.items()}, indent=2))
        return 0
    return 2


if __name__ == "__main__":
    sys.exit(main())
