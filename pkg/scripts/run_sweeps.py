"""Run the standard EE/SE sweeps and write one CSV per swept parameter.

Example::

    python scripts/run_sweeps.py --outdir results/sweeps --runs 10
"""
import argparse
from pathlib import Path

from milac import harness
from milac.config import ExperimentConfig, load_config

DEFAULT_VALUES = {
    "pmax_dbm": "0,5,10,15,20,25,30,35,40",
    "users": "2,4,6,8",
    "antennas": "16,32,64,128",
    "dac_bits": "1,2,3,4,5,6,8",
    "adm_scale": "1,10,100,1000",
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="base config file")
    ap.add_argument("--outdir", default="results/sweeps")
    ap.add_argument("--params", default=",".join(DEFAULT_VALUES),
                    help="comma-separated subset of swept parameters")
    ap.add_argument("--archs", default=",".join(harness.ARCH_NAMES))
    ap.add_argument("--runs", type=int, default=None)
    ap.add_argument("--workers", type=int, default=None)
    args = ap.parse_args(argv)

    cfg = load_config(args.config) if args.config else ExperimentConfig()
    archs = harness.parse_archs(args.archs)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for param in (p.strip() for p in args.params.split(",") if p.strip()):
        values = harness.parse_values(param, DEFAULT_VALUES[param])
        rows = harness.cmd_sweep(cfg, param, values, archs=archs, runs=args.runs,
                                 workers=args.workers)
        path = outdir / f"sweep_{param}.csv"
        harness.write_csv(rows, harness.SWEEP_COLUMNS, path)
        failed = sum(1 for r in rows if r["diagnostic"])
        print(f"{param}: {len(rows)} rows -> {path}" + (f" ({failed} diagnostics)" if failed else ""))


if __name__ == "__main__":
    main()
