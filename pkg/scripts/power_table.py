"""Print the per-architecture power breakdown and optionally save it as CSV.

Example::

    python scripts/power_table.py --static-only
"""
import argparse

from milac import harness
from milac.config import ExperimentConfig, load_config


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="base config file")
    ap.add_argument("--out", help="CSV output path")
    ap.add_argument("--static-only", action="store_true", help="use p_tx = 0")
    args = ap.parse_args(argv)

    cfg = load_config(args.config) if args.config else ExperimentConfig()
    rows = harness.cmd_power_breakdown(cfg, static_only=args.static_only)
    print(harness.format_table(rows, harness.BREAKDOWN_COLUMNS))
    if args.out:
        harness.write_csv(rows, harness.BREAKDOWN_COLUMNS, args.out)


if __name__ == "__main__":
    main()
