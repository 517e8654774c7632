"""Trace the SE-EE tradeoff boundary for each architecture and write a CSV.

Example::

    python scripts/run_frontier.py --out results/frontier.csv --scale 1e-5
"""
import argparse
import sys

from milac import harness
from milac.config import ExperimentConfig, load_config


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="base config file")
    ap.add_argument("--out", default="results/frontier.csv")
    ap.add_argument("--archs", default=",".join(harness.ARCH_NAMES))
    ap.add_argument("--scale", type=float, default=None,
                    help="channel amplitude scale (overrides channel.scale)")
    ap.add_argument("--workers", type=int, default=None)
    args = ap.parse_args(argv)

    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.scale is not None:
        cfg = cfg.with_values(**{"channel.scale": args.scale})
    rows, diagnostics = harness.cmd_frontier(cfg, harness.parse_archs(args.archs),
                                             workers=args.workers)
    for d in diagnostics:
        print(f"warning: {d}", file=sys.stderr)
    harness.write_csv(rows, harness.FRONTIER_COLUMNS, args.out)
    for arch in dict.fromkeys(r["arch"] for r in rows):
        pts = [r for r in rows if r["arch"] == arch]
        print(f"{arch}: {len(pts)} points, SE {pts[0]['se_bit_s_hz']:.4g}..{pts[-1]['se_bit_s_hz']:.4g}"
              f" bit/s/Hz, EE max {max(r['ee_bit_J'] for r in pts):.4g} bit/J")


if __name__ == "__main__":
    main()
