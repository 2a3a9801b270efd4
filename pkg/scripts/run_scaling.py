#!/usr/bin/env python3
"""Wall-clock and analytic-cost scaling of the attention paths.

Times the linear prototype kernel against the quadratic full-attention
reference (and optionally the whole model) over a size ladder, printing
one merged CSV to stdout and the fitted log-log slopes to stderr. On an
unloaded machine the prototype path fits a slope near 1 and the full
path near 2.
"""

import argparse
import sys

from focus_forecast.bench import SWEEP_MODES, scaling_sweep


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="256,512,1024,2048", help="comma-separated segment counts")
    ap.add_argument(
        "--modes",
        default="protoattn,full_attn",
        help=f"comma-separated subset of {SWEEP_MODES}",
    )
    ap.add_argument("--k", type=int, default=16)
    ap.add_argument("--d", type=int, default=64)
    ap.add_argument("--p", type=int, default=16)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    sizes = [int(s) for s in args.sizes.split(",")]
    header_done = False
    for mode in args.modes.split(","):
        report = scaling_sweep(mode.strip(), sizes, k=args.k, d=args.d, p=args.p, seed=args.seed)
        lines = report.to_csv().splitlines()
        if not header_done:
            print(lines[0])
            header_done = True
        for line in lines[1:]:
            print(line)
        slope, resid = report.slopes[mode.strip()]
        print(f"{mode.strip()}: slope={slope:.3f} fit_residual={resid:.3e}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
