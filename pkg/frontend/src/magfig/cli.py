"""Command-line figure generation: `magfig <kind> <run_dir> [--out path]`."""

from __future__ import annotations

import argparse
import sys

from .figures import (
    FigureJob,
    render_calib_curves,
    render_error_curves,
    render_map_trajectory,
)
from .io import ArtifactError

RENDERERS = {
    "map_trajectory": render_map_trajectory,
    "error_curves": render_error_curves,
    "calib_curves": render_calib_curves,
}


def main(argv=None):
    parser = argparse.ArgumentParser(prog="magfig", description=__doc__)
    parser.add_argument("kind", choices=sorted(RENDERERS))
    parser.add_argument("input_dir", help="run or report directory")
    parser.add_argument("--out", help="output image path (default: inside input_dir)")
    args = parser.parse_args(argv)
    job = FigureJob(input_dir=args.input_dir, out=args.out, kind=args.kind)
    try:
        print(RENDERERS[args.kind](job))
    except ArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
