"""Experiment runner CLI.

``mbsense run --config cfg.json [--seed N] [--out DIR] [--no-figures]``
executes the configured experiment and writes one CSV per series, a
run manifest, and (by default) rendered figures.  ``mbsense preset
--name fig8`` prints a paper-parameterized configuration to stdout.

Exit codes: 0 success, 2 config parse/validation error, 3 infeasible
experiment parameters, 4 I/O error.
"""

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

from . import __version__
from .config import ConfigError, parse_config, preset, serialize_config
from .experiments import SCHEMAS, run_experiment

__all__ = ["main", "write_csv", "format_value"]

EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4


def format_value(value) -> str:
    """CSV cell formatting: floats at 17 significant digits, dot decimal."""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format(value, ".17g")
    try:
        import numpy as np
        if isinstance(value, np.integer):
            return str(int(value))
        if isinstance(value, np.floating):
            return format(float(value), ".17g")
    except ImportError:  # pragma: no cover
        pass
    return str(value)


def write_csv(path: Path, header, rows) -> int:
    """Write one series: comma-separated, header row, LF endings."""
    lines = [",".join(header)]
    count = 0
    for row in rows:
        lines.append(",".join(format_value(v) for v in row))
        count += 1
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return count


def _run(args) -> int:
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as err:
        print(f"error: cannot read config: {err}", file=sys.stderr)
        return EXIT_IO
    try:
        cfg = parse_config(text)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    outdir = Path(args.out if args.out is not None else cfg.get("output", "."))
    started = time.perf_counter()
    try:
        series = run_experiment(cfg, seed)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as err:
        print(f"error: infeasible experiment parameters: {err}", file=sys.stderr)
        return EXIT_INFEASIBLE
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        counts = {}
        for name, rows in series.items():
            counts[name] = write_csv(outdir / f"{name}.csv", SCHEMAS[name], rows)
        figures = []
        if not args.no_figures:
            from .plotting import render_figures
            figures = render_figures(series, outdir)
        manifest = {
            "tool": "mbsense",
            "version": __version__,
            "experiment": cfg["experiment"],
            "seed": seed,
            "config_sha256": hashlib.sha256(text.encode("utf-8")).hexdigest(),
            "wall_clock_s": time.perf_counter() - started,
            "series_rows": counts,
            "figures": [Path(f).name for f in figures],
        }
        (outdir / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n",
            encoding="utf-8")
    except OSError as err:
        print(f"error: cannot write outputs: {err}", file=sys.stderr)
        return EXIT_IO
    for name, count in sorted(counts.items()):
        print(f"{name}.csv: {count} rows")
    return 0


def _preset(args) -> int:
    try:
        cfg = preset(args.name)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    sys.stdout.write(serialize_config(cfg))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mbsense",
        description="Multiband spectrum sensing experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run an experiment from a config file")
    run_p.add_argument("--config", required=True, help="path to a JSON config")
    run_p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
    run_p.add_argument("--out", default=None,
                       help="output directory (default: config output or cwd)")
    run_p.add_argument("--no-figures", action="store_true",
                       help="skip figure rendering; write CSV only")
    run_p.set_defaults(func=_run)
    pre_p = sub.add_parser("preset", help="print a figure preset config")
    pre_p.add_argument("--name", required=True,
                       help="fig8, fig9, fig10, fig12, fig13, or fig14")
    pre_p.set_defaults(func=_preset)
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
