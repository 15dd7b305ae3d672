"""Experiment pipeline shared by the CLI and the acceptance tests.

A run is two passes over identical steps.  The pilot pass records the range
of J, which fixes the drift rates M_lower/M_upper; the monitored pass then
accumulates every diagnostic.  Because the controller is deterministic, the
pilot's J range is exactly the J range of the monitored run.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import RunConfig
from .core import Grid, InteriorVacuumError, PhysParams, SimState, make_grid
from .degiorgi import DataError, fit_recursion_constant, vanishing_level
from .diagnostics import (SERIES_COLUMNS, Monitor, a_priori_J_floor, b_bracket, default_levels)
from .profiles import (AssumptionReport, DecayConstants, DensityProfile, EntropyLevelParams,
                       InitialData, check_assumptions, decay_constants, density_power_law,
                       entropy_level_params, load_profile_table, remark_initial_data)
from .solver import StepControl, Trajectory, run_simulation, write_snapshot

DIAGNOSTIC_COLUMNS = SERIES_COLUMNS + (
    "E_corrected", "J_min", "J_max", "theta_min", "B_min", "B_max", "flux_identity",
    "flux_residual", "pressure_mismatch", "n_masked", "tail_bound",
)


@dataclass
class Setup:
    params: PhysParams
    grid: Grid
    profile: DensityProfile
    initial: InitialData
    control: StepControl
    T: float
    epsilon: float = 1e-10
    output_times: tuple[float, ...] = ()
    n_levels: int = 33
    lower_span: float = 20.0
    upper_span: float = 20.0
    allow_sandwich: bool = False
    config_hash: str = ""


def build_setup(cfg: RunConfig) -> Setup:
    """Translate a config into solver objects (raises ParameterError on bad values)."""
    ph = cfg.physics
    params = PhysParams(mu=ph.mu, kappa=ph.kappa, R=ph.R, c_v=ph.c_v, A=ph.A)
    grid = make_grid(cfg.grid.L, cfg.grid.N, cfg.grid.buffer_fraction)
    v_table = None
    if cfg.profile.family == "table":
        profile, v_table = load_profile_table(cfg.profile.table, grid)
    else:
        profile = density_power_law(cfg.profile.K_rho, cfg.profile.ell_rho, grid)
    ini = cfg.initial
    initial = remark_initial_data(profile, grid, params, ini.v_amplitude, ini.v_width, ini.s0, ini.J0)
    if v_table is not None:
        initial.v0 = v_table
    c = cfg.control
    dt_init, dt_max = c.dt_init, c.dt_max
    if c.dt_per_h > 0:
        dt_init = dt_max = max(c.dt_per_h * grid.h, c.dt_min)
    control = StepControl(dt_init=dt_init, dt_min=c.dt_min, dt_max=dt_max, safety=c.safety,
                          max_retries=c.max_retries, reaction_cap=c.reaction_cap, growth=c.growth)
    T = cfg.run.T
    outs = tuple(float(t) for t in np.linspace(0.0, T, cfg.run.n_outputs + 1))
    return Setup(params, grid, profile, initial, control, T, cfg.run.epsilon, outs,
                 cfg.ladder.n_levels, cfg.ladder.lower_span, cfg.ladder.upper_span,
                 cfg.run.allow_sandwich, cfg.config_hash())


def reference_setup(N: int = 2048, L: float = 50.0, ell_rho: float = 2.0, T: float = 0.5,
                    dt_per_h: float = 0.02) -> Setup:
    """gamma = 5/3, mu = kappa = A = 1, rho0 = <y>^-ell, s0 = 0, bump velocity, J0 = 1."""
    cfg = RunConfig()
    cfg.grid.N, cfg.grid.L, cfg.profile.ell_rho, cfg.run.T = N, L, ell_rho, T
    cfg.control.dt_per_h = dt_per_h
    return build_setup(cfg)


def pilot_J_range(setup: Setup) -> tuple[float, float]:
    """(min J, max J) over every accepted step of an unmonitored run."""
    lo, hi = [math.inf], [0.0]

    def track(state: SimState, dt: float) -> None:
        lo[0] = min(lo[0], float(np.min(state.J)))
        hi[0] = max(hi[0], float(np.max(state.J)))

    run_simulation(setup.initial, setup.profile, setup.params, setup.grid, setup.control, setup.T,
                   [track], setup.output_times)
    return lo[0], hi[0]


@dataclass
class Result:
    setup: Setup
    report: AssumptionReport
    decay: DecayConstants
    levels: EntropyLevelParams
    trajectory: Trajectory
    monitor: Monitor
    ladder_times: list[float] = field(default_factory=list)


def run_experiment(setup: Setup, keep_fields: bool = False) -> Result:
    """Assumption check, pilot pass, monitored pass."""
    report = check_assumptions(setup.profile, setup.initial, setup.grid, setup.params,
                               allow_sandwich=setup.allow_sandwich)
    if report.hard_reject:
        raise InteriorVacuumError("profile", "rho0 vanishes at a grid node (interior vacuum)")
    decay = decay_constants(setup.profile, setup.grid)
    J_range = pilot_J_range(setup)
    lp = entropy_level_params(setup.initial, decay, J_range, setup.params, setup.T)
    lower, upper = default_levels(lp.ell_lower0, lp.ell_upper0, setup.n_levels,
                                  setup.lower_span, setup.upper_span)
    mon = Monitor(setup.initial, setup.profile, setup.params, setup.grid, lower, upper,
                  lp.M_lower, lp.M_upper, epsilon=setup.epsilon, keep_fields=keep_fields)
    outs = set(setup.output_times)
    times: list[float] = []

    def ladder_at_outputs(state: SimState, dt: float) -> None:
        if state.t in outs:
            mon.snapshot_ladder()
            times.append(state.t)

    traj = run_simulation(setup.initial, setup.profile, setup.params, setup.grid, setup.control,
                          setup.T, [mon, ladder_at_outputs], setup.output_times)
    return Result(setup, report, decay, lp, traj, mon, times)


# --- summaries -----------------------------------------------------------------


def _vanish(levels, values, orientation):
    try:
        return vanishing_level(levels, values, orientation=orientation)
    except DataError as exc:
        return f"non-monotone: {exc}"


def summary(res: Result) -> dict:
    mon, lp, st = res.monitor, res.levels, res.setup
    last = mon.last
    lad = mon.ladder
    E0 = mon.E0
    fres = mon.series("flux_residual")
    bracket = b_bracket(st.profile, E0, st.grid, st.params)
    q_fit = fit_recursion_constant(lad.levels_lower, lad.q, 0.0, 4.0, 2.0, scale=mon.norms.ZJ,
                                   orientation="increasing")
    Q_fit = fit_recursion_constant(lad.levels_upper, lad.Q, 2.0, 3.0, 2.0, orientation="decreasing")
    return {
        "config_hash": st.config_hash,
        "T": last.t,
        "steps": len(res.trajectory.accepted_dts),
        "rejections": res.trajectory.retries,
        "energy_drift": mon.energy_drift(corrected=True),
        "energy_drift_raw": mon.energy_drift(corrected=False),
        "E0": E0,
        "J_residual_max": mon.max_j_residual(),
        "J_residual_final": last.J_residual,
        "s_min": last.s_min,
        "s_max": last.s_max,
        "s_eps_min": mon.s_eps_min,
        "theta_ratio_max": mon.theta_ratio_max,
        "n_masked": last.n_masked,
        "ZJ": mon.norms.ZJ,
        "Ztheta": mon.norms.Ztheta,
        "ZG": mon.norms.ZG,
        "ZG_grad": mon.norms.ZG_grad,
        "vanishing_level_q": _vanish(lad.levels_lower, lad.q, "increasing"),
        "vanishing_level_Q": _vanish(lad.levels_upper, lad.Q, "decreasing"),
        "recursion_fit_q": {"C": q_fit.C, "violations": q_fit.violations, "certified": False},
        "recursion_fit_Q": {"C": Q_fit.C, "violations": Q_fit.violations, "certified": False},
        "ell_lower0": lp.ell_lower0,
        "ell_upper0": lp.ell_upper0,
        "M_lower": lp.M_lower,
        "M_upper": lp.M_upper,
        "J_lowerT": lp.J_lowerT,
        "J_upperT": lp.J_upperT,
        "K1": res.decay.K1,
        "K2": res.decay.K2,
        "B_min": float(np.min(mon.series("B_min"))),
        "B_max": float(np.max(mon.series("B_max"))),
        "B_bracket": [math.exp(-bracket), math.exp(bracket)],
        "J_floor": a_priori_J_floor(st.initial, st.profile, st.params, st.grid),
        "flux_identity_max": float(np.max(mon.series("flux_identity"))),
        "flux_residual_final": float(fres[-1]) if fres.size > 1 else None,
        "monotone_violations": dict(mon.monotone_violations),
        "assumptions": res.report.to_dict()["status"],
    }


# --- artifacts ---------------------------------------------------------------------


def fmt(x) -> str:
    """Shortest round-trip text for floats; ints and strings as-is."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: Path, header: list[str], rows, config_hash: str) -> None:
    lines = [f"# config_hash={config_hash}", ",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def write_json(path: Path, data) -> None:
    text = json.dumps(jsonable(data), sort_keys=True, indent=2, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8", newline="\n")


def write_artifacts(res: Result, out: str | Path, snapshots: bool = True) -> dict:
    """diagnostics.csv, ladder_q.csv, ladder_Q.csv, snapshot_*.csv and summary.json."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    h = res.setup.config_hash
    mon = res.monitor
    rows = [[getattr(r, c) for c in DIAGNOSTIC_COLUMNS] for r in mon.records]
    write_csv(out / "diagnostics.csv", list(DIAGNOSTIC_COLUMNS), rows, h)
    lad = mon.ladder
    q_rows, Q_rows = [], []
    for t, q, Q in mon.ladder_snapshots:
        q_rows += [[t, lv, v] for lv, v in zip(lad.levels_lower, q)]
        Q_rows += [[t, lv, v] for lv, v in zip(lad.levels_upper, Q)]
    write_csv(out / "ladder_q.csv", ["t", "level", "q"], q_rows, h)
    write_csv(out / "ladder_Q.csv", ["t", "level", "Q"], Q_rows, h)
    if snapshots:
        for k, st in enumerate(res.trajectory.states):
            write_snapshot(out / f"snapshot_{k:03d}.csv", st, res.setup.grid, h)
    summ = summary(res)
    write_json(out / "summary.json", summ)
    return summ


__all__ = [
    "Setup", "build_setup", "reference_setup", "pilot_J_range", "Result", "run_experiment",
    "summary", "write_artifacts", "write_csv", "write_json", "jsonable", "fmt", "DIAGNOSTIC_COLUMNS",
]
