"""Scenario runner: validate configs, run closed loops, write and compare CSV traces.

Usage:
    python -m stefanlab run zinc.cfg [--out-dir DIR] [--checkpoint-every K] [--fast]
    python -m stefanlab validate zinc.cfg
    python -m stefanlab compare a.csv b.csv
    python -m stefanlab sweep a.cfg b.cfg ... [--out-dir DIR]

Exit codes: 0 success, 2 invalid config or schema mismatch, 3 aborted run.
"""

import argparse
import configparser
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence, Set, Tuple

import pandas as pd
from dotenv import load_dotenv

from stefanlab.closed_loop import RunResult, run_closed_loop
from stefanlab.control import energy_flux_residual, qc_ode_residual
from stefanlab.diagnostics import (
    check_lyapunov,
    fit_decay_rate,
    lyapunov_constants,
    monitor_constraints,
    resolved_window,
)
from stefanlab.params import (
    MODES,
    ConfigurationError,
    PhysicalParams,
    ScenarioConfig,
    ValidationReport,
    validate_scenario,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_ABORTED = 3

FLOAT_FORMAT = "%.17g"


# --------------------------
# Config loading
# --------------------------
def _number(parser, section, key, kind=float, fallback=None):
    try:
        raw = parser.get(section, key)
    except (configparser.NoSectionError, configparser.NoOptionError):
        if fallback is not None:
            return fallback
        raise ConfigurationError(f"missing [{section}] {key}")
    try:
        return kind(raw)
    except ValueError:
        raise ConfigurationError(f"[{section}] {key} = {raw!r} is not a valid {kind.__name__}")


def load_config(path) -> Tuple[PhysicalParams, ScenarioConfig, str]:
    """Parse a scenario file into (physical params, scenario, output directory)."""
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed config {path}: {exc}") from exc

    phys = PhysicalParams(
        rho=_number(parser, "physical", "rho"),
        cp=_number(parser, "physical", "cp"),
        k=_number(parser, "physical", "k"),
        dh=_number(parser, "physical", "dh"),
        tm=_number(parser, "physical", "tm"),
    )

    try:
        mode = parser.get("scenario", "mode").strip()
    except (configparser.NoSectionError, configparser.NoOptionError):
        raise ConfigurationError("missing [scenario] mode")
    if mode not in MODES:
        raise ConfigurationError(f"unknown mode {mode!r}; expected one of {', '.join(MODES)}")

    try:
        include_l2 = parser.getboolean("numerics", "h1_include_l2", fallback=True)
    except ValueError:
        raise ConfigurationError("[numerics] h1_include_l2 must be a boolean")
    lyapunov_d = _number(parser, "numerics", "lyapunov_d", fallback=math.nan)

    cfg = ScenarioConfig(
        s0=_number(parser, "scenario", "s0"),
        H=_number(parser, "scenario", "H"),
        Hhat=_number(parser, "scenario", "Hhat"),
        c=_number(parser, "scenario", "c"),
        lam=_number(parser, "scenario", "lambda"),
        sr=_number(parser, "scenario", "sr"),
        mode=mode,
        domain_length=_number(parser, "scenario", "domain_length", fallback=math.inf),
        grid_n=_number(parser, "numerics", "grid_n", kind=int),
        dt=_number(parser, "numerics", "dt"),
        t_end=_number(parser, "numerics", "t_end"),
        checkpoint_every=_number(parser, "numerics", "checkpoint_every", kind=int, fallback=50),
        ydot_smoothing=_number(parser, "numerics", "ydot_smoothing", fallback=0.0),
        grid_tol_const=_number(parser, "numerics", "grid_tol_const", fallback=1e-3),
        h1_include_l2=include_l2,
        lyapunov_d=None if math.isnan(lyapunov_d) else lyapunov_d,
    )

    try:
        out_dir = parser.get("output", "out_dir")
    except (configparser.NoSectionError, configparser.NoOptionError):
        raise ConfigurationError("missing [output] out_dir")
    return phys, cfg, out_dir


def apply_fast_preset(cfg: ScenarioConfig) -> ScenarioConfig:
    """Coarse, short variant of a scenario for CI."""
    return cfg.with_overrides(
        H=cfg.H * 0.5,
        Hhat=cfg.Hhat * 0.5,
        grid_n=50,
        dt=cfg.dt * 2.0,
        t_end=cfg.t_end * 0.5,
    )


# --------------------------
# Artifacts
# --------------------------
def write_csv(frame: pd.DataFrame, path, title: str) -> None:
    """CSV with one ignorable '#' line on top and 17 significant digits."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# {title}\n")
        frame.to_csv(fh, index=False, float_format=FLOAT_FORMAT, lineterminator="\n", na_rep="")


def read_trace(path) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


def summarize_run(result: RunResult, cfg: ScenarioConfig, phys: PhysicalParams,
                  report: ValidationReport) -> str:
    lines = ["== validation ==", report.format(), ""]
    trace = result.trace

    lines.append("== run ==")
    lines.append(f"mode: {cfg.mode}")
    lines.append(f"rows: {len(trace)}  failed: {result.failed}")
    if result.failed:
        lines.append(f"error: {result.error}")
    if len(trace):
        lines.append(f"s(0) = {trace['s'].iloc[0]:.9g}  s(end) = {trace['s'].iloc[-1]:.9g}  sr = {cfg.sr:.9g}")
        lines.append(f"Ttilde0(0) = {trace['Ttilde0'].iloc[0]:.9g}  Ttilde0(end) = {trace['Ttilde0'].iloc[-1]:.9g}")
    lines.append("")

    if len(trace) >= 2:
        constraints = result.constraints or monitor_constraints(trace, cfg)
        lines.append("== constraints ==")
        lines.extend(f"{key}: {value}" for key, value in constraints.to_dict().items())
        lines.append("")

        lines.append("== energy ==")
        lines.append(f"relative residual |dE - int qc/k| / |dE| = {energy_flux_residual(trace):.6g}")
        lines.append("")

    if len(trace) >= 3:
        ode = qc_ode_residual(trace, cfg, phys)
        lines.append("== q_c inequality ==")
        lines.append(f"qdot >= -c qc within tolerance: {ode.inequality_ok}  worst margin {ode.worst_margin:.6g}")
        lines.append("")

    lines.append("== decay rates ==")
    window = resolved_window(trace["h1_err"].to_numpy()) if len(trace) else 0
    try:
        rate = fit_decay_rate(trace["t"].to_numpy()[:window], trace["h1_err"].to_numpy()[:window])
        lines.append(f"H1 estimation error: {rate:.6g} 1/s over t <= {trace['t'].iloc[window - 1]:.6g}")
    except ValueError as exc:
        lines.append(f"H1 estimation error: n/a ({exc})")
    lines.append("")

    consts = lyapunov_constants(cfg, phys)
    lines.append("== lyapunov ==")
    lines.append(f"p = {consts.p:.9g}  a = {consts.a:.9g}  b = {consts.b:.9g}  d = {consts.d:.9g}")
    if len(result.checkpoints):
        lyap = check_lyapunov(result.checkpoints, consts, cfg.sr)
        lines.append(f"V non-increasing: {lyap.non_increasing} (max relative rate {lyap.max_increase_rate:.6g} 1/s)")
        lines.append(f"Vtot envelope violations: {lyap.bound_violations}")
    return "\n".join(lines) + "\n"


# --------------------------
# Operations
# --------------------------
def run_scenario(config_path, out_dir: Optional[str] = None,
                 checkpoint_every: Optional[int] = None, fast: bool = False) -> int:
    try:
        phys, cfg, cfg_out = load_config(config_path)
    except ConfigurationError as exc:
        print(f"invalid config: {exc}")
        return EXIT_INVALID
    if fast:
        cfg = apply_fast_preset(cfg)

    target = Path(out_dir or os.getenv("STEFANLAB_OUT_DIR") or cfg_out)
    target.mkdir(parents=True, exist_ok=True)

    report = validate_scenario(cfg, phys)
    logger.info("validation %s for %s", "passed" if report.ok else "failed", config_path)
    if not report.ok:
        text = "== validation ==\n" + report.format() + "\n"
        (target / "summary.txt").write_text(text, encoding="utf-8")
        print(text, end="")
        return EXIT_INVALID

    result = run_closed_loop(cfg, phys, checkpoint_every)
    name = Path(config_path).name
    write_csv(result.trace, target / "trace.csv", f"stefanlab trace {name} mode={cfg.mode}")
    write_csv(result.checkpoints, target / "checkpoints.csv", f"stefanlab checkpoints {name}")

    summary = summarize_run(result, cfg, phys, report)
    (target / "summary.txt").write_text(summary, encoding="utf-8")
    print(summary, end="")
    return EXIT_ABORTED if result.failed else EXIT_OK


def compare_traces(a, b) -> pd.Series:
    """Column-wise max absolute difference on the times both traces share."""
    left, right = read_trace(a), read_trace(b)
    if list(left.columns) != list(right.columns):
        raise ValueError(f"schema mismatch: {list(left.columns)} vs {list(right.columns)}")

    merged = left.merge(right, on="t", suffixes=("_a", "_b"))
    if merged.empty:
        raise ValueError("traces share no time stamps")
    diffs = {}
    for column in left.columns:
        if column == "t" or not pd.api.types.is_numeric_dtype(left[column]):
            continue
        a_col, b_col = merged[f"{column}_a"], merged[f"{column}_b"]
        if pd.api.types.is_bool_dtype(left[column]):
            # flags count as 1 where the traces disagree
            delta = (a_col != b_col).astype(float)
        else:
            delta = (a_col - b_col).abs()
        diffs[column] = float(delta.max()) if delta.notna().any() else 0.0
    return pd.Series(diffs, name="max_abs_diff")


def validate_config(config_path, fast: bool = False) -> int:
    try:
        phys, cfg, _ = load_config(config_path)
    except ConfigurationError as exc:
        print(f"invalid config: {exc}")
        return EXIT_INVALID
    if fast:
        cfg = apply_fast_preset(cfg)
    report = validate_scenario(cfg, phys)
    print(report.format())
    return EXIT_OK if report.ok else EXIT_INVALID


def _sweep_one(args) -> int:
    config_path, out_dir, checkpoint_every, fast = args
    return run_scenario(config_path, out_dir, checkpoint_every, fast)


def run_names(config_paths: Sequence[str]) -> List[str]:
    """Config stems, with _2, _3, ... appended to repeats."""
    taken: Set[str] = set()
    names = []
    for path in config_paths:
        stem = name = Path(path).stem
        suffix = 1
        while name in taken:
            suffix += 1
            name = f"{stem}_{suffix}"
        taken.add(name)
        names.append(name)
    return names


def sweep(config_paths: Sequence[str], out_dir: Optional[str] = None,
          checkpoint_every: Optional[int] = None, fast: bool = False,
          workers: Optional[int] = None) -> int:
    """Run each scenario in its own process and output subdirectory."""
    root = Path(out_dir or os.getenv("STEFANLAB_OUT_DIR") or "runs")
    jobs = [(path, str(root / name), checkpoint_every, fast)
            for path, name in zip(config_paths, run_names(config_paths))]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        codes = list(pool.map(_sweep_one, jobs))
    for (path, *_), code in zip(jobs, codes):
        logger.info("sweep %s -> exit %d", path, code)
    return max(codes) if codes else EXIT_OK


# --------------------------
# Entry point
# --------------------------
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stefanlab", description=__doc__.splitlines()[0])
    parser.add_argument("--log-level", default=None, help="logging level (default from STEFANLAB_LOG_LEVEL or INFO)")
    sub = parser.add_subparsers(dest="command", required=True)

    def run_flags(p):
        p.add_argument("--out-dir", default=None)
        p.add_argument("--checkpoint-every", type=int, default=None)
        p.add_argument("--fast", action="store_true", help="halve H, Hhat and t_end; N=50; double dt")

    run = sub.add_parser("run", help="validate and run one scenario")
    run.add_argument("config")
    run_flags(run)

    val = sub.add_parser("validate", help="check a scenario against the pre-run restrictions")
    val.add_argument("config")
    val.add_argument("--fast", action="store_true")

    cmp_ = sub.add_parser("compare", help="max abs difference per column of two traces")
    cmp_.add_argument("a")
    cmp_.add_argument("b")

    swp = sub.add_parser("sweep", help="run several scenarios in parallel")
    swp.add_argument("configs", nargs="+")
    swp.add_argument("--workers", type=int, default=None)
    run_flags(swp)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    level = (args.log_level or os.getenv("STEFANLAB_LOG_LEVEL") or "INFO").upper()
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    if args.command == "run":
        return run_scenario(args.config, args.out_dir, args.checkpoint_every, args.fast)
    if args.command == "validate":
        return validate_config(args.config, args.fast)
    if args.command == "compare":
        try:
            diffs = compare_traces(args.a, args.b)
        except ValueError as exc:
            print(f"cannot compare: {exc}")
            return EXIT_INVALID
        print(diffs.to_string())
        return EXIT_OK
    return sweep(args.configs, args.out_dir, args.checkpoint_every, args.fast, args.workers)


if __name__ == "__main__":
    sys.exit(main())
