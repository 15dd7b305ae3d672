"""Semi-implicit finite-difference integrator for (J, v, theta).

One step runs three stages in order:

1. momentum: implicit viscous diffusion, explicit pressure gradient;
2. Jacobian: J += dt * v_y with the new velocity;
3. temperature: implicit conduction and compression term, explicit
   (nonnegative) viscous heating.

Interface diffusion coefficients use the harmonic mean of the nodal 1/J,
i.e. 2 / (J_i + J_{i+1}).  With the reaction cap enforced the temperature
matrix is an M-matrix, so theta stays nonnegative.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import Grid, NumericalError, ParameterError, PhysParams, SimState, check_dominance, d1, solve_tridiagonal
from .profiles import DensityProfile, InitialData

log = logging.getLogger(__name__)

Observer = Callable[[SimState, float], None]


class StepRejected(Exception):
    """Recoverable: the driver halves dt and retries."""


class SolverAbort(RuntimeError):
    """dt fell below dt_min (or retries ran out) while steps kept being rejected."""

    def __init__(self, state: SimState, dt: float, reason: str):
        super().__init__(f"solver abort at t={state.t!r} dt={dt!r}: {reason}")
        self.state = state
        self.dt = dt
        self.reason = reason


@dataclass
class StepControl:
    dt_init: float = 1e-4
    dt_min: float = 1e-12
    dt_max: float = 1e-2
    safety: float = 0.5
    max_retries: int = 20
    reaction_cap: float = 0.9
    growth: float = 1.2

    def __post_init__(self):
        if not self.dt_min > 0:
            raise ParameterError("dt_min", "must be > 0")
        if not 0 < self.safety <= 1:
            raise ParameterError("safety", "must lie in (0, 1]")
        if not self.dt_init >= self.dt_min:
            raise ParameterError("dt_init", "must be >= dt_min")
        if not self.dt_max >= self.dt_min:
            raise ParameterError("dt_max", "must be >= dt_min")
        if not 0 < self.reaction_cap < 1:
            raise ParameterError("reaction_cap", "must lie in (0, 1)")
        if not self.growth >= 1:
            raise ParameterError("growth", "must be >= 1")


@dataclass
class Trajectory:
    states: list[SimState] = field(default_factory=list)
    accepted_dts: list[float] = field(default_factory=list)
    retries: int = 0

    @property
    def times(self) -> list[float]:
        return [s.t for s in self.states]

    @property
    def final(self) -> SimState:
        return self.states[-1]


def face_coefficients(J: np.ndarray) -> np.ndarray:
    """Harmonic mean of 1/J on the N faces."""
    return 2.0 / (J[:-1] + J[1:])


def _diffusion_rows(coef: float, a: np.ndarray, h: float, n: int):
    """Off-diagonals and diagonal increment of -coef * D_h(a u_y) on interior rows."""
    lower = np.zeros(n)
    upper = np.zeros(n)
    dinc = np.zeros(n)
    s = coef / (h * h)
    lower[1:-1] = -s * a[:-1]
    upper[1:-1] = -s * a[1:]
    dinc[1:-1] = s * (a[:-1] + a[1:])
    return lower, upper, dinc


def reaction_rate(state: SimState, params: PhysParams, grid: Grid) -> float:
    """max |R v_y / (c_v J)| over the grid."""
    return float(np.max(np.abs(params.R * d1(state.v, grid.h) / (params.c_v * state.J))))


def momentum_stage(state: SimState, dt: float, profile: DensityProfile, params: PhysParams, grid: Grid):
    """Return v* and the pressure/viscous data used to form it."""
    n, h, rho = grid.size, grid.h, profile.rho0
    a = face_coefficients(state.J)
    lower, upper, dinc = _diffusion_rows(params.mu, a, h, n)
    diag = np.ones(n)
    diag[1:-1] = rho[1:-1] / dt + dinc[1:-1]
    P = rho * state.theta / state.J
    rhs = np.zeros(n)
    rhs[1:-1] = rho[1:-1] * state.v[1:-1] / dt - params.R * (P[2:] - P[:-2]) / (2.0 * h)
    return solve_tridiagonal(lower, diag, upper, rhs)


def step(
    state: SimState, dt: float, profile: DensityProfile, params: PhysParams, grid: Grid
) -> SimState:
    """Advance one step of size dt.  Raises StepRejected when dt is too large."""
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    n, h, rho = grid.size, grid.h, profile.rho0

    v_new = momentum_stage(state, dt, profile, params, grid)
    if not np.all(np.isfinite(v_new)):
        raise NumericalError("non-finite velocity", int(np.flatnonzero(~np.isfinite(v_new))[0]))

    vy = d1(v_new, h)
    J_new = state.J + dt * vy
    if np.any(J_new <= 0):
        raise StepRejected(f"J <= 0 at node {int(np.argmin(J_new))}")

    a = face_coefficients(J_new)
    lower, upper, dinc = _diffusion_rows(params.kappa, a, h, n)
    mass = params.c_v * rho / dt
    react = params.R * rho * vy / J_new
    if np.any(mass[1:-1] + react[1:-1] <= 0):
        raise StepRejected("temperature matrix lost diagonal dominance")
    diag = np.ones(n)
    diag[1:-1] = mass[1:-1] + react[1:-1] + dinc[1:-1]
    rhs = np.empty(n)
    rhs[1:-1] = mass[1:-1] * state.theta[1:-1] + params.mu * vy[1:-1] ** 2 / J_new[1:-1]
    rhs[0], rhs[-1] = state.theta[0], state.theta[-1]
    bad = check_dominance(lower, diag, upper)
    if bad is not None:
        raise StepRejected(f"temperature matrix not dominant at row {bad}")
    # increment form: the residual of the old temperature is solved for, so a
    # discrete steady state is reproduced bit for bit
    th = state.theta
    resid = rhs - diag * th
    resid[1:] -= lower[1:] * th[:-1]
    resid[:-1] -= upper[:-1] * th[1:]
    theta_new = th + solve_tridiagonal(lower, diag, upper, resid)

    for name, arr in (("J", J_new), ("theta", theta_new)):
        if not np.all(np.isfinite(arr)):
            raise NumericalError(f"non-finite {name}", int(np.flatnonzero(~np.isfinite(arr))[0]))
    if np.any(theta_new < 0):
        raise StepRejected(f"theta < 0 at node {int(np.argmin(theta_new))}")
    return SimState(state.t + dt, J_new, v_new, theta_new)


def run_simulation(
    initial: InitialData,
    profile: DensityProfile,
    params: PhysParams,
    grid: Grid,
    control: StepControl,
    T: float,
    observers: Iterable[Observer] = (),
    output_times: Sequence[float] | None = None,
) -> Trajectory:
    """Integrate to T with the adaptive controller.

    Observers are called as ``obs(state, dt)``: once with dt = 0 for the
    initial state, then after every accepted step.  Snapshots are stored at
    ``output_times`` (default: 0 and T), which the stepper hits exactly.
    """
    if T < 0:
        raise ValueError("T must be >= 0")
    observers = list(observers)
    outs = sorted({0.0, float(T), *(float(t) for t in (output_times or ()) if 0 <= t <= T)})
    state = SimState(0.0, initial.J0.astype(float).copy(), initial.v0.astype(float).copy(),
                     initial.theta0.astype(float).copy())
    state.validate()
    traj = Trajectory(states=[state.copy()])
    for obs in observers:
        obs(state, 0.0)
    pending = [t for t in outs if t > 0]
    dt_prev: float | None = None

    while pending:
        target = pending[0]
        dt = control.dt_init if dt_prev is None else dt_prev * control.growth
        dt = min(dt, control.dt_max)
        rate = reaction_rate(state, params, grid)
        if rate > 0:
            dt = min(dt, control.safety * control.reaction_cap / rate)
        remaining = target - state.t
        clamped = dt >= remaining
        if clamped:
            dt = remaining
        retries = 0
        while True:
            try:
                new = step(state, dt, profile, params, grid)
                break
            except StepRejected as exc:
                retries += 1
                traj.retries += 1
                dt *= 0.5
                clamped = False
                log.debug("step rejected at t=%g (%s); dt -> %g", state.t, exc, dt)
                if dt < control.dt_min or retries > control.max_retries:
                    raise SolverAbort(state, dt, str(exc)) from exc
        if clamped:
            new.t = target
        else:
            dt_prev = dt
        if dt_prev is None:
            dt_prev = dt
        state = new
        traj.accepted_dts.append(dt)
        for obs in observers:
            obs(state, dt)
        if state.t >= target:
            traj.states.append(state.copy())
            pending.pop(0)
    return traj


def write_snapshot(path: str | Path, state: SimState, grid: Grid, config_hash: str = "") -> None:
    """CSV (y, J, v, theta) with a comment header carrying t and the config hash."""
    lines = [f"# t={state.t!r} config_hash={config_hash}", "y,J,v,theta"]
    for row in zip(grid.nodes, state.J, state.v, state.theta):
        lines.append(",".join(repr(float(x)) for x in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_snapshot(path: str | Path) -> tuple[float, np.ndarray, SimState]:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    t = float(text[0].split("t=")[1].split()[0])
    data = np.loadtxt(text[2:], delimiter=",", ndmin=2)
    return t, data[:, 0], SimState(t, data[:, 1], data[:, 2], data[:, 3])


def uniform_state_error(steps: int, dt: float, grid: Grid, params: PhysParams, theta: float = 1.0) -> float:
    """Max-norm deviation of the uniform state after ``steps`` fixed steps."""
    from .profiles import density_power_law

    prof = density_power_law(1.0, 0.0, grid)
    s0 = SimState(0.0, np.ones(grid.size), np.zeros(grid.size), np.full(grid.size, theta))
    s = s0
    for _ in range(steps):
        s = step(s, dt, prof, params, grid)
    return max(float(np.max(np.abs(s.J - s0.J))), float(np.max(np.abs(s.v))),
               float(np.max(np.abs(s.theta - s0.theta))))


__all__ = [
    "StepControl", "StepRejected", "SolverAbort", "Trajectory", "step", "run_simulation",
    "momentum_stage", "face_coefficients", "reaction_rate", "write_snapshot", "read_snapshot",
    "uniform_state_error",
]
