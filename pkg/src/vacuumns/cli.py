"""Command line entry point: run, sweep, verify, check-profile, convergence.

Exit codes: 0 success, 1 verification violations, 2 configuration error,
3 interior vacuum (hard assumption reject), 4 solver abort, 5 numerical
failure.  Flags fall back to environment variables VACUUMNS_CONFIG,
VACUUMNS_OUT, VACUUMNS_WORKERS and VACUUMNS_SEED.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .config import SWEEP_AXES, ConfigError, RunConfig
from .core import InteriorVacuumError, NumericalError, ParameterError
from .experiment import build_setup, fmt, run_experiment, write_artifacts, write_csv, write_json
from .profiles import check_assumptions
from .solver import SolverAbort

log = logging.getLogger("vacuumns")

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_VACUUM, EXIT_ABORT, EXIT_NUMERICAL = 0, 1, 2, 3, 4, 5
ENV_PREFIX = "VACUUMNS_"
SUITES = ("lemma-iteration", "lemma-interp", "lemma-gn", "solver-units")

SWEEP_COLUMNS = ("energy_drift", "energy_drift_raw", "J_residual_max", "s_min", "s_max", "s_range",
                 "ZJ", "Ztheta", "ZG", "vanishing_level_q", "vanishing_level_Q", "steps")


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, InteriorVacuumError):
        return EXIT_VACUUM
    if isinstance(exc, (ConfigError, ParameterError)):
        return EXIT_CONFIG
    if isinstance(exc, SolverAbort):
        return EXIT_ABORT
    if isinstance(exc, NumericalError):
        return EXIT_NUMERICAL
    raise exc


def _load_config(path: str | None, seed: int | None) -> RunConfig:
    cfg = cfgmod.load(path) if path else RunConfig()
    if seed is not None:
        cfg.run.seed = seed
    return cfg


def execute(cfg: RunConfig, out: Path) -> tuple[int, dict | None, str]:
    """Run one configuration; returns (exit code, summary or None, message)."""
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.toml").write_text(cfg.dumps(), encoding="utf-8", newline="\n")
    try:
        setup = build_setup(cfg)
        res = run_experiment(setup)
        summ = write_artifacts(res, out, snapshots=cfg.run.snapshots)
        return EXIT_OK, summ, "ok"
    except (ConfigError, ParameterError, SolverAbort, NumericalError) as exc:
        return _exit_code(exc), None, str(exc)


# --- subcommands -------------------------------------------------------------------


def cmd_run(args) -> int:
    cfg = _load_config(args.config, args.seed)
    out = Path(args.out)
    code, summ, msg = execute(cfg, out)
    if code != EXIT_OK:
        print(f"error: {msg}", file=sys.stderr)
        return code
    print(f"drift={summ['energy_drift']:.3e} J_residual={summ['J_residual_max']:.3e} "
          f"s=[{summ['s_min']:.6g}, {summ['s_max']:.6g}] -> {out}")
    return EXIT_OK


def _parse_values(axis: str, raw: str) -> list:
    items = [v for v in (s.strip() for s in raw.split(",")) if v]
    if not items:
        raise ConfigError("values", "empty values list")
    try:
        return [int(v) if axis == "N" else float(v) for v in items]
    except ValueError as exc:
        raise ConfigError("values", str(exc)) from exc


def _sweep_cell(payload) -> tuple[int, dict | None, str, str]:
    data, out = payload
    cfg = cfgmod.from_dict(data)
    code, summ, msg = execute(cfg, Path(out))
    return code, summ, msg, cfg.config_hash()


def run_sweep(base: RunConfig, axis: str, values: list, out: Path, workers: int = 1,
              table: str = "sweep.csv") -> list[dict]:
    if axis not in SWEEP_AXES:
        raise ConfigError("axis", f"not sweepable: {axis!r} (choose from {', '.join(SWEEP_AXES)})")
    if not values:
        raise ConfigError("values", "empty values list")
    section, key = SWEEP_AXES[axis]
    cells = []
    for v in values:
        cfg = base.replace(section, key, v)
        cells.append((cfg.to_dict(), str(out / f"{axis}={fmt(v)}")))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_cell, cells))
    else:
        results = [_sweep_cell(c) for c in cells]
    rows, records = [], []
    for v, (code, summ, msg, h) in zip(values, results):
        rec = {"value": v, "exit_code": code, "status": "ok" if code == 0 else msg, "config_hash": h}
        if summ is not None:
            summ = dict(summ, s_range=summ["s_max"] - summ["s_min"])
            rec.update({c: summ.get(c) for c in SWEEP_COLUMNS})
        records.append(rec)
        rows.append([rec.get(c, "") if rec.get(c) is not None else "" for c in
                     ("value", "exit_code", "status", "config_hash") + SWEEP_COLUMNS])
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / table, [axis, "exit_code", "status", "config_hash", *SWEEP_COLUMNS], rows,
              base.config_hash())
    return records


def cmd_sweep(args) -> int:
    base = _load_config(args.config, args.seed)
    values = _parse_values(args.axis, args.values)
    records = run_sweep(base, args.axis, values, Path(args.out), args.workers)
    for r in records:
        print(f"{args.axis}={fmt(r['value'])}: {r['status']}")
    return EXIT_OK


def cmd_convergence(args) -> int:
    base = _load_config(args.config, args.seed)
    Ns = _parse_values("N", args.Ns)
    out = Path(args.out)
    records = run_sweep(base, "N", Ns, out, args.workers, table="convergence_cells.csv")
    rows = []
    prev = None
    for r in records:
        drift, jres = r.get("energy_drift"), r.get("J_residual_max")
        order_d = order_j = ""
        if prev is not None and r["exit_code"] == 0 and prev["exit_code"] == 0:
            order_d = math.log2(prev["energy_drift"] / drift) if drift > 0 else ""
            order_j = math.log2(prev["J_residual_max"] / jres) if jres > 0 else ""
        rows.append([r["value"], r["exit_code"], "" if drift is None else drift, order_d,
                     "" if jres is None else jres, order_j])
        prev = r
    write_csv(out / "convergence.csv", ["N", "exit_code", "energy_drift", "drift_order",
                                        "J_residual_max", "J_residual_order"], rows, base.config_hash())
    for row in rows:
        print(",".join(fmt(x) for x in row))
    return EXIT_OK


def cmd_check_profile(args) -> int:
    cfg = _load_config(args.config, args.seed)
    setup = build_setup(cfg)
    rep = check_assumptions(setup.profile, setup.initial, setup.grid, setup.params,
                            allow_sandwich=setup.allow_sandwich)
    data = dict(rep.to_dict(), config_hash=setup.config_hash)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        write_json(Path(args.out) / "assumptions.json", data)
    for name, status in data["status"].items():
        print(f"{name}: {status}")
    return EXIT_VACUUM if rep.hard_reject else EXIT_OK


def run_suite(name: str, seed: int) -> tuple[int, dict]:
    """Returns (number of violations, JSON report)."""
    if name == "lemma-iteration":
        from .degiorgi import IterationHypothesis, iteration_gap, iteration_suite

        fams = iteration_suite(200, seed)
        bad = [f for f in fams if not f.conclusion_ok]
        extra = {
            "zero_base_gap": iteration_gap(IterationHypothesis(1.0, 0.0, 4.0, 2.0, 0.0, 0.0)),
            "reference_gap": iteration_gap(IterationHypothesis(1.0, 0.0, 4.0, 2.0, 0.0, 1.0)),
        }
        return len(bad), {"suite": name, "seed": seed, **extra,
                          "families": [f.to_dict() for f in fams]}
    if name == "lemma-interp":
        from .inequalities import interp_suite

        reps = interp_suite(1000, seed)
        return sum(not r.passed for r in reps), {"suite": name, "seed": seed,
                                                 "instances": [r.to_dict() for r in reps]}
    if name == "lemma-gn":
        from .inequalities import gn_suite

        s = gn_suite(200, seed)
        return (0 if s.stable else 1), {"suite": name, "seed": seed, **s.to_dict()}
    if name == "solver-units":
        return _solver_units(seed)
    raise ConfigError("suite", f"unknown suite {name!r} (choose from {', '.join(SUITES)})")


def _solver_units(seed: int) -> tuple[int, dict]:
    from .core import PhysParams, make_grid, solve_tridiagonal
    from .experiment import reference_setup
    from .solver import run_simulation, uniform_state_error

    checks = []
    err = uniform_state_error(100, 1e-3, make_grid(10.0, 64), PhysParams())
    checks.append({"name": "uniform fixed point", "value": err, "pass": err <= 1e-12})
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(3, 40))
        lo, up = rng.uniform(-1, 1, n), rng.uniform(-1, 1, n)
        d = np.abs(lo) + np.abs(up) + rng.uniform(0.1, 2.0, n)
        b = rng.normal(size=n)
        A = np.diag(d) + np.diag(lo[1:], -1) + np.diag(up[:-1], 1)
        worst = max(worst, float(np.max(np.abs(solve_tridiagonal(lo, d, up, b) - np.linalg.solve(A, b)))))
    checks.append({"name": "tridiagonal vs dense", "value": worst, "pass": worst <= 1e-10})
    setup = reference_setup(N=256)
    mins = [np.inf, np.inf]

    def watch(state, dt):
        mins[0] = min(mins[0], float(np.min(state.J)))
        mins[1] = min(mins[1], float(np.min(state.theta)))

    run_simulation(setup.initial, setup.profile, setup.params, setup.grid, setup.control, setup.T, [watch])
    checks.append({"name": "positivity J > 0, theta >= 0", "value": mins, "pass": mins[0] > 0 and mins[1] >= 0})
    return sum(not c["pass"] for c in checks), {"suite": "solver-units", "seed": seed, "checks": checks}


def cmd_verify(args) -> int:
    if args.suite not in SUITES:
        raise ConfigError("suite", f"unknown suite {args.suite!r} (choose from {', '.join(SUITES)})")
    seed = 0 if args.seed is None else args.seed
    nbad, report = run_suite(args.suite, seed)
    report["violations"] = nbad
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        write_json(Path(args.out) / f"verify_{args.suite}.json", report)
    print(f"{args.suite}: {nbad} violation(s)")
    return EXIT_OK if nbad == 0 else EXIT_VIOLATION


# --- argument parsing -----------------------------------------------------------------


def _env(name: str, default=None, cast=str):
    raw = os.environ.get(ENV_PREFIX + name)
    if raw is None:
        return default
    try:
        return cast(raw)
    except ValueError as exc:
        raise ConfigError(ENV_PREFIX + name, f"invalid value {raw!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=_env("CONFIG"), help="TOML run configuration")
    common.add_argument("--out", default=_env("OUT", "out"), help="output directory")
    common.add_argument("--workers", type=int, default=_env("WORKERS", 1, int), help="parallel sweep cells")
    common.add_argument("--seed", type=int, default=_env("SEED", None, int), help="seed override")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="vacuumns", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="single monitored run").set_defaults(func=cmd_run)
    sw = sub.add_parser("sweep", parents=[common], help="one-axis parameter sweep")
    sw.add_argument("--axis", required=True, help=", ".join(SWEEP_AXES))
    sw.add_argument("--values", required=True, help="comma-separated values")
    sw.set_defaults(func=cmd_sweep)
    ve = sub.add_parser("verify", parents=[common], help="property suites")
    ve.add_argument("suite", help=", ".join(SUITES))
    ve.set_defaults(func=cmd_verify)
    ck = sub.add_parser("check-profile", parents=[common], help="assumption checks only")
    ck.set_defaults(func=cmd_check_profile)
    cv = sub.add_parser("convergence", parents=[common], help="N-doubling study")
    cv.add_argument("--Ns", default="512,1024,2048,4096")
    cv.set_defaults(func=cmd_convergence)
    return p


def main(argv: list[str] | None = None) -> int:
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # argparse usage errors
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ParameterError, SolverAbort, NumericalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
