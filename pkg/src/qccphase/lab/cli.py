"""Command-line interface: ``qccphase <subcommand> [options]``."""
from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from ..classical import StepSizeError
from ..expansion import TensorOverflowError
from ..quantum import BoxError
from .config import ConfigError, preset_names, resolve
from .experiments import run_experiment
from .table import emit_outputs

SUBCOMMANDS = {
    "structure": "structure-compare",
    "break": "break-analysis",
    "moments": "moments",
    "slope": "initial-slope",
    "integrable": "integrable-contrast",
}
HELP = {
    "structure": "classical vs quantal structure measures chi_2c(t), chi_2q(t)",
    "break": "chi_2c^2 - chi_2q^2 against the tensor correction f(t); break-time fit",
    "moments": "classical and quantal second-order moments",
    "slope": "initial slopes of chi_2c and chi_2q against the closed forms",
    "integrable": "integrable (alpha = beta) vs chaotic growth of chi_2c",
}
#: failures reported as a diagnostic instead of a traceback
EXPECTED_ERRORS = (ConfigError, BoxError, StepSizeError, TensorOverflowError, ValueError, OSError)


def _formats(text: str) -> tuple[str, ...]:
    formats = tuple(f.strip() for f in text.split(",") if f.strip())
    bad = set(formats) - {"csv", "svg"}
    if bad or not formats:
        raise argparse.ArgumentTypeError(f"formats must be a subset of csv,svg; got {text!r}")
    return formats


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qccphase", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in HELP.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, help="INI configuration (or a CSV written by a previous run)")
        p.add_argument("--preset", action="append",
                       help=f"built-in preset; repeat to run several cells ({', '.join(preset_names())})")
        p.add_argument("--seed", type=_seed, help="ensemble seed (unsigned 64-bit)")
        p.add_argument("--out", help="output directory (default: from config, else .)")
        p.add_argument("--format", type=_formats, default=("csv", "svg"), help="csv,svg")
        p.add_argument("--jobs", type=int, default=1, help="cells run in parallel processes")
    return parser


def _config_text(path: Path) -> str:
    text = path.read_text()
    if path.suffix.lower() == ".csv":
        from .table import CONFIG_PREFIX
        lines = [line[len(CONFIG_PREFIX):] for line in text.splitlines()
                 if line.startswith(CONFIG_PREFIX)]
        if not lines:
            raise ConfigError(f"{path} carries no configuration echo")
        text = "\n".join(lines)
    return text


def _run_cell(cfg, formats):
    table = run_experiment(cfg)
    return emit_outputs(table, cfg.out_dir, formats)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    experiment = SUBCOMMANDS[args.command]
    try:
        text = _config_text(args.config) if args.config else None
        cells = [resolve(experiment, name, text, args.seed, args.out)
                 for name in (args.preset or [None])]
        if args.jobs > 1 and len(cells) > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                results = list(pool.map(_run_cell, cells, [args.format] * len(cells)))
        else:
            results = [_run_cell(cfg, args.format) for cfg in cells]
    except EXPECTED_ERRORS as exc:
        print(f"qccphase {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    for paths in results:
        for path in paths:
            print(path)
    return 0
