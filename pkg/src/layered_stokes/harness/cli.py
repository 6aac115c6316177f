"""Command-line entry point: ``layered-stokes <experiment> [options]``.

Writes ``<out>/<experiment>.csv`` (criteria as ``#`` header lines, then the
columns experiment, param, lhs, rhs, ratio, pass) and ``<out>/manifest.txt``.
Exit status: 0 when every row passes, 2 on any failure, 3 on a solver error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from .. import __version__
from .config import EXPERIMENTS, ConfigError, RunConfig, default_config, load_config
from .experiments import CRITERIA, SweepAborted, all_passed, run_experiment

EXIT_OK, EXIT_FAIL, EXIT_SOLVER = 0, 2, 3
COLUMNS = ("experiment", "param", "lhs", "rhs", "ratio", "pass")
ALL_ORDER = tuple(e for e in EXPERIMENTS if e != "solve")


def _float_list(text: str) -> list:
    return [float(eval_fraction(t)) for t in text.split(",") if t.strip()]


def _int_list(text: str) -> list:
    return [int(t) for t in text.split(",") if t.strip()]


def eval_fraction(token: str) -> float:
    """Parse ``4``, ``1.5`` or ``4/3``."""
    token = token.strip()
    if "/" in token:
        num, den = token.split("/", 1)
        return float(num) / float(den)
    return float(token)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="layered-stokes",
        description="Verification suites for a priori estimates of layered Stokes systems.")
    parser.add_argument("experiment", choices=EXPERIMENTS + ("all",))
    parser.add_argument("--config", type=Path, help="YAML file with RunConfig keys")
    parser.add_argument("--out", type=Path, help="output directory (default: config 'out')")
    parser.add_argument("--seed", type=int, help="random seed (unsigned 64-bit)")
    parser.add_argument("--grid", type=int, help="cells per axis (sets n and a single grid)")
    parser.add_argument("--q", type=_float_list, help="comma-separated exponents, e.g. 4,8,4/3")
    parser.add_argument("--jumps", type=_int_list, help="comma-separated jump counts")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def _config_for(name: str, args) -> RunConfig:
    cfg = load_config(args.config, name) if args.config else default_config(name)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.grid is not None:
        changes["n"] = args.grid
        if cfg.grids:
            changes["grids"] = (args.grid,)
    if args.q is not None:
        changes["q"] = tuple(args.q)
    if args.jumps is not None:
        changes["jumps"] = tuple(args.jumps)
    if args.out is not None:
        changes["out"] = str(args.out)
    return cfg.replace(**changes) if changes else cfg


def write_csv(path: Path, rows, criteria: dict) -> None:
    with open(path, "w", newline="") as fh:
        for name, text in criteria.items():
            fh.write(f"# {name}: {text}\n")
        w = csv.DictWriter(fh, fieldnames=COLUMNS)
        w.writeheader()
        for row in rows:
            w.writerow(row.as_row())


def write_manifest(path: Path, configs: list, status: dict, elapsed: float) -> None:
    lines = [
        f"package layered-stokes {__version__}",
        f"python {platform.python_version()}",
        f"numpy {np.__version__}",
        f"scipy {scipy.__version__}",
        f"platform {platform.platform()}",
        f"elapsed_seconds {elapsed:.2f}",
    ]
    for cfg in configs:
        lines.append(f"experiment {cfg.experiment} config_sha256 {cfg.digest()} "
                     f"seed {cfg.seed} status {status.get(cfg.experiment, 'not-run')}")
        lines.append(f"criterion {cfg.experiment}: {CRITERIA[cfg.experiment]}")
    path.write_text("\n".join(lines) + "\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    names = ALL_ORDER if args.experiment == "all" else (args.experiment,)
    try:
        configs = [_config_for(name, args) for name in names]
    except (ConfigError, ValueError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    out = Path(configs[0].out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    status, code = {}, EXIT_OK
    for cfg in configs:
        try:
            rows = run_experiment(cfg, out)
            ok = all_passed(rows)
            status[cfg.experiment] = "pass" if ok else "fail"
            if not ok:
                code = max(code, EXIT_FAIL)
        except SweepAborted as exc:
            rows = exc.rows
            status[cfg.experiment] = "solver-error"
            print(f"solver error: {exc}", file=sys.stderr)
            code = EXIT_SOLVER
        except ValueError as exc:
            # e.g. more jumps than the grid can hold
            rows = []
            status[cfg.experiment] = "invalid"
            print(f"invalid setup: {exc}", file=sys.stderr)
            code = max(code, EXIT_FAIL)
        write_csv(out / f"{cfg.experiment}.csv", rows,
                  {cfg.experiment: CRITERIA[cfg.experiment]})
        print(f"{cfg.experiment}: {status[cfg.experiment]} ({len(rows)} rows)")
    write_manifest(out / "manifest.txt", configs, status, time.perf_counter() - t0)
    return code


if __name__ == "__main__":
    sys.exit(main())
