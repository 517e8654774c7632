"""Command-line entry point: ``milac <subcommand> [options]``.

Exit codes: 0 success, 1 configuration error, 2 solver failure,
3 self-test failure.
"""

import argparse
import sys
import time

from .config import ExperimentConfig, load_config
from .errors import ConfigError, ContractViolation, NumericFailure, ParseError
from . import harness

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_SELFTEST = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="config file with 'section.key = value' lines")
    common.add_argument("--out", help="CSV output path (default: standard output)")
    common.add_argument("--seed", type=int, help="base channel seed (overrides channel.seed)")
    common.add_argument("--runs", type=int, help="channel realizations (overrides runs)")
    common.add_argument("--workers", type=int, default=None, help="worker threads")

    p = _Parser(prog="milac", description="Energy-efficiency experiments for MiLAC and "
                                          "baseline beamforming architectures.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    pb = sub.add_parser("power-breakdown", parents=[common], help="per-architecture power table")
    pb.add_argument("--static-only", action="store_true", help="use p_tx = 0 (no solver runs)")

    sw = sub.add_parser("sweep", parents=[common], help="EE/SE over a parameter sweep")
    sw.add_argument("--param", required=True, choices=harness.SWEEP_PARAMS)
    sw.add_argument("--values", required=True, help="comma-separated values")
    sw.add_argument("--archs", default=",".join(harness.ARCH_NAMES))

    fr = sub.add_parser("frontier", parents=[common], help="SE-EE tradeoff boundary")
    fr.add_argument("--archs", default=",".join(harness.ARCH_NAMES))

    ee = sub.add_parser("ee", parents=[common], help="EE-optimal point of one architecture")
    ee.add_argument("--arch", required=True)

    st = sub.add_parser("selftest", parents=[common], help="run the acceptance suites")
    st.add_argument("--inject-fault", action="append", default=[], metavar="SUITE",
                    help="inject a known defect into a suite (repeatable)")
    st.add_argument("--suites", default=None, help="comma-separated subset of suites")
    return p


def _config(args):
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    changes = {}
    if args.seed is not None:
        changes["channel.seed"] = args.seed
    if args.runs is not None:
        changes["runs"] = args.runs
    return cfg.with_values(**changes) if changes else cfg


def _emit(text, out):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _all_failed(rows):
    return bool(rows) and all(r.get("se_bit_s_hz") is None for r in rows)


def _run(args):
    if args.command == "selftest":
        from .checks import SELFTEST_SUITES, run_selftest

        suites = SELFTEST_SUITES if args.suites is None else tuple(
            s.strip() for s in args.suites.split(",") if s.strip())
        unknown = [s for s in list(suites) + args.inject_fault if s not in SELFTEST_SUITES + ("4",)]
        if unknown:
            raise ConfigError(f"unknown suite(s) {', '.join(unknown)}", "--suites")
        t0 = time.perf_counter()
        results = run_selftest(suites, faults=tuple(args.inject_fault))
        failed = [r.name for r in results if not r.passed]
        print(f"{len(results) - len(failed)}/{len(results)} suites passed "
              f"in {time.perf_counter() - t0:.1f}s")
        return EXIT_SELFTEST if failed else EXIT_OK

    cfg = _config(args)
    if args.command == "power-breakdown":
        rows = harness.cmd_power_breakdown(cfg, static_only=args.static_only, workers=args.workers)
        print(harness.format_table(rows, harness.BREAKDOWN_COLUMNS))
        if not args.out:
            print()
        _emit(harness.to_csv(rows, harness.BREAKDOWN_COLUMNS), args.out)
        return EXIT_OK
    if args.command == "sweep":
        values = harness.parse_values(args.param, args.values)
        archs = harness.parse_archs(args.archs)
        rows = harness.cmd_sweep(cfg, args.param, values, archs=archs, workers=args.workers)
        _emit(harness.to_csv(rows, harness.SWEEP_COLUMNS), args.out)
        return EXIT_SOLVER if _all_failed(rows) else EXIT_OK
    if args.command == "ee":
        (arch,) = harness.parse_archs(args.arch)
        rows = harness.cmd_ee(cfg, arch, workers=args.workers)
        _emit(harness.to_csv(rows, harness.SWEEP_COLUMNS), args.out)
        return EXIT_SOLVER if _all_failed(rows) else EXIT_OK
    if args.command == "frontier":
        archs = harness.parse_archs(args.archs)
        rows, diagnostics = harness.cmd_frontier(cfg, archs, workers=args.workers)
        for d in diagnostics:
            print(f"warning: {d}", file=sys.stderr)
        _emit(harness.to_csv(rows, harness.FRONTIER_COLUMNS), args.out)
        return EXIT_SOLVER if not rows else EXIT_OK
    raise AssertionError(args.command)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except (ConfigError, ParseError, ContractViolation) as exc:
        print(f"milac: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericFailure as exc:
        print(f"milac: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
