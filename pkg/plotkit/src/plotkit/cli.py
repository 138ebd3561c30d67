"""plot: render experiment figures from harness CSV logs."""
from __future__ import annotations

import argparse
import sys

from .figures import FigureSpec, preset_spec, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plot", description="Render figures from experiment CSV logs.")
    parser.add_argument("--spec", help="FigureSpec JSON file")
    parser.add_argument("--preset", help="named figure preset (fig4..fig9, fig_train)")
    parser.add_argument("--in", dest="in_dir", default=".",
                        help="run directory holding the input CSVs")
    parser.add_argument("--out", dest="out_dir", default=".",
                        help="directory for the rendered image")
    args = parser.parse_args(argv)

    if bool(args.spec) == bool(args.preset):
        parser.print_usage(sys.stderr)
        print("plot: provide exactly one of --spec or --preset", file=sys.stderr)
        return 2

    try:
        if args.spec:
            spec = FigureSpec.from_json(args.spec)
        else:
            spec = preset_spec(args.preset, args.in_dir, args.out_dir)
        path = render(spec)
    except (ValueError, OSError) as exc:
        print(f"plot: {exc}", file=sys.stderr)
        return 1
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
