"""Command line interface: ``lzkit {transition,sweep,verify,expansion}``."""
import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, fields
from typing import Dict, List, Optional, TextIO

import numpy as np

from .adiabatic import ExpansionRow, expansion_table
from .config import SweepConfig, parse_config
from .errors import ConfigError, LZKitError
from .gamma_profile import parse_gamma_spec
from .model import LZFamily
from .sweep import format_fits, run_sweep, write_report
from .transition import duhamel_split, measured_p
from .verify import SUITE_NAMES, verify

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_CONFIG = 2
EXIT_VERIFY = 3

LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"

# 設定ファイルのキーに対応するフラグ
OVERRIDE_FLAGS = ("g", "epsilon", "gamma", "T", "rtol", "atol", "qtol", "quality", "output", "format", "workers")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Logging level")
    parser.add_argument("--quiet", action="store_true", help="Disable progress bars")


def _add_grid_flags(parser: argparse.ArgumentParser, single: bool) -> None:
    parser.add_argument("--g", help="Minimal gap" if single else "Comma-separated gaps")
    parser.add_argument("--epsilon", help="Adiabatic parameter" if single else "Comma-separated epsilons")
    parser.add_argument("--gamma", help="Profile descriptor, e.g. const:0.5 or gauss:1.0:4.0")
    parser.add_argument("--T", help="Horizon or 'auto' (25 / min g)")
    parser.add_argument("--rtol", help="Integrator relative tolerance")
    parser.add_argument("--atol", help="Integrator absolute tolerance")
    parser.add_argument("--qtol", help="Quadrature absolute tolerance")
    parser.add_argument("--quality", help="Tolerance preset: low, medium or high")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lzkit", description="Landau-Zener transitions under dephasing")
    sub = parser.add_subparsers(dest="command", required=True)

    transition = sub.add_parser("transition", help="Measure one (g, epsilon, gamma) cell")
    _add_grid_flags(transition, single=True)
    transition.add_argument("--duhamel", action="store_true", help="Also compute the exact Duhamel split")
    transition.add_argument("--json", action="store_true", help="Print the record as JSON")
    _add_common(transition)

    sweep = sub.add_parser("sweep", help="Run a grid of cells from a config file")
    sweep.add_argument("--config", help="Path of a 'key = value' config file")
    _add_grid_flags(sweep, single=False)
    sweep.add_argument("--output", help="Output file (stdout when omitted)")
    sweep.add_argument("--format", help="csv or json")
    sweep.add_argument("--workers", help="Worker processes or 'auto'")
    _add_common(sweep)

    check = sub.add_parser("verify", help="Run a built-in verification suite")
    check.add_argument("--suite", default="all", help=f"One of {', '.join(SUITE_NAMES)}")
    _add_common(check)

    expansion = sub.add_parser("expansion", help="Tabulate expansion term norms over an s-grid")
    expansion.add_argument("--g", type=float, default=1.0)
    expansion.add_argument("--gamma", default="const:0.5")
    expansion.add_argument("--s-min", type=float, default=-10.0)
    expansion.add_argument("--s-max", type=float, default=10.0)
    expansion.add_argument("--points", type=int, default=201)
    expansion.add_argument("--s-prime", type=float, default=None, help="Reference point of a and b (default s-min)")
    expansion.add_argument("--top", type=float, default=None, help="Upper end of the dual term (default s-max)")
    expansion.add_argument("--output", help="CSV output file (stdout when omitted)")
    _add_common(expansion)
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Optional[str]]:
    return {key: getattr(args, key, None) for key in OVERRIDE_FLAGS}


def _open_output(path: Optional[str]) -> TextIO:
    return open(path, "w", newline="") if path else sys.stdout


def _run_transition(args: argparse.Namespace) -> int:
    if args.epsilon is None:
        raise ConfigError("epsilon", "required for a single cell")
    cfg = parse_config(overrides=_overrides(args))
    if len(cfg.g_values) != 1 or len(cfg.epsilon_values) != 1 or len(cfg.gamma_specs) != 1:
        raise ConfigError("transition", "takes exactly one g, epsilon and gamma")
    fam = LZFamily(cfg.g_values[0])
    gamma = parse_gamma_spec(cfg.gamma_specs[0])
    eps = cfg.epsilon_values[0]
    record = measured_p(fam, gamma, eps, cfg.horizon(), cfg.integrator_config(), cfg.qtol)
    data = asdict(record)
    if args.duhamel:
        split = duhamel_split(fam, gamma, eps, cfg.horizon(), cfg.integrator_config())
        data.update(duhamel_coherent=split.coherent_part, duhamel_incoherent=split.incoherent_part,
                    duhamel_defect=split.total - record.p_measured)
    if args.json:
        print(json.dumps(data, indent=2))
    else:
        for key, value in data.items():
            print(f"{key} = {value!r}" if isinstance(value, float) else f"{key} = {value}")
    return EXIT_OK


def _read_config(path: Optional[str]) -> str:
    if path is None:
        return ""
    try:
        with open(path) as f:
            return f.read()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path!r}: {exc.strerror}") from None


def _run_sweep(args: argparse.Namespace) -> int:
    cfg: SweepConfig = parse_config(_read_config(args.config), _overrides(args))
    report = run_sweep(cfg, progress=not args.quiet)
    stream = _open_output(cfg.output)
    try:
        write_report(report, cfg, stream)
    finally:
        if stream is not sys.stdout:
            stream.close()
    summary = format_fits(report)
    if summary:
        print(summary, file=sys.stderr)
    for failure in report.failures:
        print(f"failed cell {failure.index}: {failure.reason}", file=sys.stderr)
    if report.all_failed:
        logger.error("every cell of the sweep failed")
    return EXIT_OK if report.complete else EXIT_PARTIAL


def _run_verify(args: argparse.Namespace) -> int:
    report = verify(args.suite, progress=not args.quiet)
    print(report.format_table())
    return EXIT_OK if report.passed else EXIT_VERIFY


def write_expansion(rows: List[ExpansionRow], stream: TextIO) -> None:
    names = [f.name for f in fields(ExpansionRow)]
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(names)
    for row in rows:
        writer.writerow(["%.17g" % getattr(row, name) for name in names])


def _run_expansion(args: argparse.Namespace) -> int:
    if args.points < 2 or not args.s_max > args.s_min:
        raise ConfigError("grid", "need points >= 2 and s-max > s-min")
    if args.g <= 0:
        raise ConfigError("g", f"must be > 0, got {args.g!r}")
    gamma = parse_gamma_spec(args.gamma)
    grid = np.linspace(args.s_min, args.s_max, args.points)
    rows = expansion_table(LZFamily(args.g), gamma, grid, args.s_prime, args.top)
    stream = _open_output(args.output)
    try:
        write_expansion(rows, stream)
    finally:
        if stream is not sys.stdout:
            stream.close()
    return EXIT_OK


COMMANDS = {
    "transition": _run_transition,
    "sweep": _run_sweep,
    "verify": _run_verify,
    "expansion": _run_expansion,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LZKitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
