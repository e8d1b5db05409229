"""Batch front-end: ``sobolev-bvp <command> --config PATH [--out DIR] [--grid N] [--tol X]``.

Exit codes: 0 solved / all checks pass, 1 mathematical failure (singular
problem or a failed condition), 2 usage or validation error.  Every run
writes a ``MANIFEST`` listing the files it produced.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import (COMMANDS, ConfigError, ExperimentConfig, build_family, build_instance,
                     build_multipoint_family, parse_config)
from .continuity import convergence_experiment, full_criterion
from .errors import BVPError, NoUniqueSolutionError, SingularFundamentalMatrixError
from .multipoint import check_d_conditions
from .solver import analyse, solve_bvp
from .trend import PASS, TrendTest

logger = logging.getLogger("sobolev_bvp")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def fmt(v) -> str:
    """17 significant digits; NaN and infinities become ``undef``."""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return format(v, ".17g") if math.isfinite(v) else "undef"


class Outputs:
    """Writes CSV files into one directory and records them for the manifest."""

    def __init__(self, out_dir: Path):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files = []

    def table(self, name: str, header, rows):
        path = self.dir / name
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(v) for v in row])
        self.files.append(name)

    def manifest(self):
        with open(self.dir / "MANIFEST", "w", encoding="utf-8", newline="\n") as fh:
            fh.write("".join(f"{name}\n" for name in self.files))


def _complex_columns(prefix, count):
    return [f"{prefix}{k + 1}_{part}" for k in range(count) for part in ("re", "im")]


def _split(values):
    return [x for v in values for x in (v.real, v.imag)]


def _cmd_solve(cfg: ExperimentConfig, out: Outputs) -> int:
    prob = build_instance(cfg, 0.0, base=True)
    header = ["residual_L", "residual_B", "sigma_min", "sigma_max", "sigma_ratio", "condition0"]
    try:
        rep = solve_bvp(prob, tol_sing=cfg.tolerances.sing, tol_solve=cfg.tolerances.solve)
    except NoUniqueSolutionError as exc:
        M = exc.characteristic
        out.table("summary.csv", header,
                  [[math.nan, math.nan, M.sigma_min, M.sigma_max, M.sigma_ratio, "singular"]])
        return EXIT_FAIL
    y = rep.y.values[0]
    t = prob.grid.nodes
    out.table("solution.csv", ["t"] + _complex_columns("y", cfg.m),
              ([t[i]] + _split(y[i]) for i in range(t.size)))
    M = rep.characteristic
    out.table("summary.csv", header, [[rep.residual_L, rep.residual_B, M.sigma_min, M.sigma_max,
                                       M.sigma_ratio, rep.condition0.status]])
    return EXIT_OK


def _cmd_condition0(cfg: ExperimentConfig, out: Outputs) -> int:
    prob = build_instance(cfg, 0.0, base=True)
    _, _, M, c0 = analyse(prob, cfg.tolerances.sing)
    out.table("condition0.csv", ["sigma_min", "sigma_max", "sigma_ratio", "tol_sing", "verdict"],
              [[M.sigma_min, M.sigma_max, M.sigma_ratio, c0.tol_sing, c0.status]])
    return EXIT_OK if c0 else EXIT_FAIL


def _write_estimate(rep, out: Outputs):
    out.table("estimate.csv", ["eps", "error", "discrepancy", "ratio"],
              ([r.eps, r.error, r.discrepancy, r.ratio] for r in rep.rows))
    out.table("estimate_summary.csv",
              ["gamma_lo", "gamma_hi", "band", "fitted_rate", "discrepancy_rate"],
              [[rep.gamma_lo, rep.gamma_hi, rep.band, rep.fitted_rate, rep.discrepancy_rate]])


def _cmd_estimate(cfg: ExperimentConfig, out: Outputs) -> int:
    fam = build_family(cfg)
    try:
        rep = convergence_experiment(fam, cfg.eps_cut, cfg.tolerances.sing)
    except NoUniqueSolutionError as exc:
        M = exc.characteristic
        out.table("estimate_summary.csv", ["condition0", "sigma_ratio"], [["singular", M.sigma_ratio]])
        return EXIT_FAIL
    _write_estimate(rep, out)
    return EXIT_OK if not rep.failed_eps else EXIT_FAIL


def _section_rows(name, section, eps):
    for chk in section.checks:
        for e, v in zip(eps, chk.values):
            yield [name, chk.label, e, v, chk.verdict]


def _cmd_continuity(cfg: ExperimentConfig, out: Outputs) -> int:
    fam = build_family(cfg)
    rep = full_criterion(fam, trend=TrendTest(tol=cfg.tolerances.trend),
                         tol_sing=cfg.tolerances.sing, eps_cut=cfg.eps_cut)
    rows = []
    rows += _section_rows("limitI", rep.limitI, fam.eps)
    rows += _section_rows("limitII", rep.limitII, fam.eps)
    summary = [["condition0", "pass" if rep.cond0 else "fail"],
               ["limitI", rep.limitI.verdict], ["limitII", rep.limitII.verdict]]
    if rep.remark24 is not None:
        for name, sec in rep.remark24.items():
            rows += _section_rows(name, sec, fam.eps)
            summary.append([name, sec.verdict])
    if rep.instance_norms is not None:
        rows += [["solution_norm", "y(eps)", e, v, "undef"] for e, v in zip(fam.eps, rep.instance_norms)]
    summary.append(["overall", rep.overall])
    out.table("continuity.csv", ["check", "label", "eps", "value", "verdict"], rows)
    out.table("continuity_summary.csv", ["part", "verdict"], summary)
    if rep.experiment is not None:
        _write_estimate(rep.experiment, out)
    return EXIT_OK if rep.overall == PASS else EXIT_FAIL


def _cmd_multipoint(cfg: ExperimentConfig, out: Outputs) -> int:
    eps, forms, base = build_multipoint_family(cfg)
    rep = check_d_conditions(forms, eps, base, cfg.params.inv_q,
                             trend=TrendTest(tol=cfg.tolerances.trend),
                             grid=cfg.grid_obj, params=cfg.params)
    out.table("dconditions.csv", ["condition", "label", "eps", "value", "verdict"], rep.rows())
    summary = [[name, res.verdict] for name, res in rep.conditions.items()]
    summary.append(["overall", rep.overall])
    if rep.limit_ii is not None:
        summary.append(["limitII", rep.limit_ii.verdict])
        out.table("limit_ii.csv", ["check", "label", "eps", "value", "verdict"],
                  _section_rows("limitII", rep.limit_ii, eps))
    out.table("dconditions_summary.csv", ["condition", "verdict"], summary)
    ok = rep.overall == PASS and (rep.limit_ii is None or rep.limit_ii.verdict == PASS)
    return EXIT_OK if ok else EXIT_FAIL


HANDLERS = {
    "solve": _cmd_solve,
    "condition0": _cmd_condition0,
    "continuity": _cmd_continuity,
    "estimate": _cmd_estimate,
    "multipoint-check": _cmd_multipoint,
}


def run(cfg: ExperimentConfig, out_dir) -> int:
    """Execute a validated configuration, writing CSV files and ``MANIFEST``."""
    out = Outputs(out_dir)
    try:
        return HANDLERS[cfg.command](cfg, out)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SingularFundamentalMatrixError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except BVPError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    finally:
        out.manifest()


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sobolev-bvp", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON configuration file")
    ap.add_argument("--out", default=None, help="output directory (default: config 'output' or ./out)")
    ap.add_argument("--grid", type=int, default=None, help="override the number of grid intervals")
    ap.add_argument("--tol", type=float, default=None, help="override the singularity threshold")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = parse_config(text, command=args.command)
        if args.grid is not None:
            if args.grid < 2 or args.grid % 2:
                raise ConfigError(["grid size must be even"])
            cfg = replace(cfg, grid=args.grid)
        if args.tol is not None:
            if not args.tol > 0:
                raise ConfigError(["--tol must be positive"])
            cfg = replace(cfg, tolerances=replace(cfg.tolerances, sing=args.tol))
    except ConfigError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        if args.out:
            # nothing produced, but the artifact list is still flushed
            Path(args.out).mkdir(parents=True, exist_ok=True)
            (Path(args.out) / "MANIFEST").write_text("", encoding="utf-8")
        return EXIT_USAGE
    out_dir = args.out or cfg.output or "out"
    return run(cfg, out_dir)


if __name__ == "__main__":
    sys.exit(main())
