"""Monitored quantities: energy, effective viscous flux, the J representation,
entropy fields, singularly weighted norms and level-set truncation energies.

Pure functions take a state and return arrays or scalars.  The running
quantities (time integrals, sups over time) live in small accumulator
classes, and :class:`Monitor` bundles all of them into one observer that the
solver calls after every accepted step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from .core import Grid, PhysParams, SimState, d1
from .profiles import DensityProfile, InitialData

THETA_FLOOR = 1e-300


def quad(f: np.ndarray, grid: Grid) -> float:
    """Composite trapezoid over the whole truncated domain."""
    return float(trapezoid(f, dx=grid.h))


def total_energy(state: SimState, profile: DensityProfile, grid: Grid, params: PhysParams) -> float:
    return quad(profile.rho0 * (0.5 * state.v**2 + params.c_v * state.theta), grid)


def boundary_energy_flux(state: SimState, profile: DensityProfile, grid: Grid, params: PhysParams) -> float:
    """Net energy inflow through y = +-L: [(kappa theta_y + mu v v_y - R rho0 theta v)/J] from -L to L."""
    vy, ty = d1(state.v, grid.h), d1(state.theta, grid.h)
    F = (params.kappa * ty + params.mu * state.v * vy - params.R * profile.rho0 * state.theta * state.v) / state.J
    return float(F[-1] - F[0])


def viscous_flux(state: SimState, profile: DensityProfile, params: PhysParams, grid: Grid) -> np.ndarray:
    """G = mu v_y / J - R rho0 theta / J."""
    return (params.mu * d1(state.v, grid.h) - params.R * profile.rho0 * state.theta) / state.J


def flux_identity_error(state: SimState, G: np.ndarray, profile: DensityProfile, params: PhysParams,
                        grid: Grid) -> float:
    """max |mu v_y - (J G + R rho0 theta)| / max(|mu v_y|, |R rho0 theta|, tiny)."""
    lhs = params.mu * d1(state.v, grid.h)
    rhs = state.J * G + params.R * profile.rho0 * state.theta
    scale = np.maximum(np.abs(lhs), np.abs(params.R * profile.rho0 * state.theta))
    scale = np.maximum(scale, np.finfo(float).tiny)
    return float(np.max(np.abs(lhs - rhs) / scale))


def _flux_div(u: np.ndarray, a_face: np.ndarray, h: float) -> np.ndarray:
    """Conservative (a u_y)_y on interior nodes; zero at the two ends."""
    out = np.zeros_like(u)
    flux = a_face * np.diff(u) / h
    out[1:-1] = np.diff(flux) / h
    return out


def flux_equation_terms(state: SimState, profile: DensityProfile, params: PhysParams, grid: Grid):
    """Right side and diffusion term of the G equation at one time level.

    Returns (G, diffusion, source) with
    diffusion = (mu/J)(G_y/rho0)_y and
    source = -kappa(gamma-1)/J (theta_y/J)_y - gamma (v_y/J) G.
    """
    h, rho, J = grid.h, profile.rho0, state.J
    G = viscous_flux(state, profile, params, grid)
    inv_rho_face = 0.5 * (1.0 / rho[:-1] + 1.0 / rho[1:])
    inv_J_face = 2.0 / (J[:-1] + J[1:])
    diffusion = params.mu / J * _flux_div(G, inv_rho_face, h)
    source = (-params.kappa * (params.gamma - 1.0) / J * _flux_div(state.theta, inv_J_face, h)
              - params.gamma * d1(state.v, h) / J * G)
    return G, diffusion, source


def flux_equation_residual(prev: SimState, cur: SimState, profile: DensityProfile, params: PhysParams,
                           grid: Grid, region: np.ndarray | None = None) -> float:
    """Max-norm residual of G_t - (mu/J)(G_y/rho0)_y - source over interior nodes.

    The time derivative is a forward difference between the two states, the
    spatial terms are evaluated at the later one.  ``region`` restricts the
    max (default: buffer-excluded core, two nodes away from its edges).
    """
    dt = cur.t - prev.t
    if not dt > 0:
        raise ValueError("states must be at increasing times")
    G0 = viscous_flux(prev, profile, params, grid)
    G1, diff, src = flux_equation_terms(cur, profile, params, grid)
    r = (G1 - G0) / dt - diff - src
    if region is None:
        region = grid.core_mask.copy()
        region[:2] = region[-2:] = False
    return float(np.max(np.abs(r[region])))


# --- J representation ---------------------------------------------------------


def b_field(state: SimState, v0: np.ndarray, profile: DensityProfile, params: PhysParams,
            grid: Grid) -> np.ndarray:
    """B = exp((1/mu) int_{-L}^y rho0 (v - v0) dy')."""
    return np.exp(cumulative_trapezoid(profile.rho0 * (state.v - v0), dx=grid.h, initial=0.0) / params.mu)


class JIdentityAccumulator:
    """Trapezoid-in-time integral of rho0 theta / B at every node."""

    def __init__(self, initial: InitialData, profile: DensityProfile, params: PhysParams, grid: Grid):
        self.initial, self.profile, self.params, self.grid = initial, profile, params, grid
        self.t = 0.0
        self.integral = np.zeros(grid.size)
        self._last: np.ndarray | None = None

    def update(self, state: SimState, dt: float) -> np.ndarray:
        """Advance the time integral to state.t and return B at that time."""
        B = b_field(state, self.initial.v0, self.profile, self.params, self.grid)
        f = self.profile.rho0 * state.theta / B
        if self._last is None:
            if dt != 0:
                raise ValueError("first accumulator update must be the initial state (dt = 0)")
        else:
            self.integral += 0.5 * dt * (f + self._last)
        self.t = state.t
        self._last = f
        return B


def j_identity(state: SimState, initial: InitialData, profile: DensityProfile, grid: Grid,
               params: PhysParams, acc: JIdentityAccumulator):
    """(B, J_pred, J_residual) from the representation J = B (J0 + (R/mu) int rho0 theta / B)."""
    if not math.isclose(acc.t, state.t, rel_tol=1e-12, abs_tol=1e-14):
        raise ValueError(f"accumulator time {acc.t!r} does not match state time {state.t!r}")
    B = b_field(state, initial.v0, profile, params, grid)
    J_pred = B * (initial.J0 + params.R / params.mu * acc.integral)
    resid = float(np.max(np.abs(state.J - J_pred) / state.J))
    return B, J_pred, resid


def b_tail_bound(state: SimState, initial: InitialData, profile: DensityProfile, params: PhysParams,
                 grid: Grid) -> float:
    """Bound on the neglected (-inf, -L) part of the B exponent."""
    return profile.tail_mass(grid.L) * float(np.max(np.abs(state.v - initial.v0))) / params.mu


def b_bracket(profile: DensityProfile, E0: float, grid: Grid, params: PhysParams) -> float:
    """Exponent (2 sqrt 2 / mu) sqrt(|rho0|_1 E0) bounding |log B| and log(J0_min / J_min)."""
    return 2.0 * math.sqrt(2.0) / params.mu * math.sqrt(quad(profile.rho0, grid) * E0)


# --- entropy -------------------------------------------------------------------


@dataclass
class EntropyField:
    s: np.ndarray
    s_min: float
    s_max: float
    n_masked: int


def entropy_field(state: SimState, profile: DensityProfile, params: PhysParams, grid: Grid,
                  floor: float = THETA_FLOOR) -> EntropyField:
    """Nodal entropy; extrema over the buffer-excluded core, theta <= floor masked."""
    gm1 = params.gamma - 1.0
    ok = state.theta > floor
    s = np.full(grid.size, np.nan)
    s[ok] = params.c_v * (math.log(params.R / params.A) + gm1 * np.log(state.J[ok])
                          + np.log(state.theta[ok]) - gm1 * np.log(profile.rho0[ok]))
    region = ok & grid.core_mask
    n_masked = int(np.count_nonzero(grid.core_mask & ~ok))
    if not region.any():
        raise ValueError("entropy undefined on the whole evaluation region")
    return EntropyField(s, float(np.min(s[region])), float(np.max(s[region])), n_masked)


def pressure_pair(state: SimState, s: np.ndarray, profile: DensityProfile, params: PhysParams):
    """(A e^{s/c_v} rho^gamma, R rho theta) with rho = rho0 / J."""
    rho = profile.rho0 / state.J
    return params.A * np.exp(s / params.c_v) * rho**params.gamma, params.R * rho * state.theta


@dataclass
class RegularizedEntropy:
    epsilon: float
    S_eps: np.ndarray
    s_eps: np.ndarray
    t: float
    M_lower: float


def regularized_entropy(state: SimState, profile: DensityProfile, params: PhysParams,
                        epsilon: float = 1e-10, M_lower: float = 0.0, t: float | None = None
                        ) -> RegularizedEntropy:
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    gm1 = params.gamma - 1.0
    t = state.t if t is None else t
    S = np.log(state.theta + epsilon) - gm1 * np.log(profile.rho0 + epsilon ** (1.0 / gm1))
    return RegularizedEntropy(epsilon, S, S + M_lower * t, t, M_lower)


# --- weighted norms ------------------------------------------------------------


@dataclass
class WeightedNorms:
    """Running Z_J, Z_theta, Z_G (sup parts by max, integral parts by trapezoid)."""

    ZJ: float = 0.0
    theta_sup: float = 0.0
    theta_int: float = 0.0
    G_sup: float = 0.0
    G_int: float = 0.0
    Gy_int: float = 0.0  # same as G_int but with G_y; reported alongside
    _last: tuple[float, float, float] | None = field(default=None, repr=False)

    @property
    def Ztheta(self) -> float:
        return self.theta_sup + self.theta_int

    @property
    def ZG(self) -> float:
        return self.G_sup + self.G_int

    @property
    def ZG_grad(self) -> float:
        return self.G_sup + self.Gy_int

    @property
    def Z(self) -> float:
        return math.sqrt(self.ZJ) + self.Ztheta + self.ZG


def weighted_pieces(state: SimState, G: np.ndarray, profile: DensityProfile, params: PhysParams,
                    grid: Grid) -> dict[str, float]:
    rho, gam, h = profile.rho0, params.gamma, grid.h
    th = state.theta
    return {
        "ZJ": quad(d1(state.J, h) ** 2 / rho + rho * th**2, grid),
        "theta_sup": quad(rho ** (2.0 - gam) * th**2, grid),
        "theta_int": quad(rho ** (1.0 - gam) * th**2, grid),
        "G_sup": quad(rho ** (-gam) * G**2, grid),
        "G_int": quad(rho ** (-(gam + 1.0)) * G**2, grid),
        "Gy_int": quad(rho ** (-(gam + 1.0)) * d1(G, h) ** 2, grid),
    }


def update_weighted_norms(acc: WeightedNorms, state: SimState, G: np.ndarray, profile: DensityProfile,
                          params: PhysParams, grid: Grid, dt: float) -> WeightedNorms:
    p = weighted_pieces(state, G, profile, params, grid)
    acc.ZJ = max(acc.ZJ, p["ZJ"])
    acc.theta_sup = max(acc.theta_sup, p["theta_sup"])
    acc.G_sup = max(acc.G_sup, p["G_sup"])
    now = (p["theta_int"], p["G_int"], p["Gy_int"])
    if acc._last is not None and dt > 0:
        acc.theta_int += 0.5 * dt * (now[0] + acc._last[0])
        acc.G_int += 0.5 * dt * (now[1] + acc._last[1])
        acc.Gy_int += 0.5 * dt * (now[2] + acc._last[2])
    acc._last = now
    return acc


# --- level-set ladders -----------------------------------------------------------


def default_levels(ell_lower0: float, ell_upper0: float, n: int = 33,
                   lower_span: float = 20.0, upper_span: float = 20.0):
    """Lower ladder ending at ell_lower0, upper ladder starting at ell_upper0."""
    lower = np.linspace(ell_lower0 - lower_span, ell_lower0, n)
    upper = np.linspace(ell_upper0, ell_upper0 + upper_span * (1.0 + ell_upper0), n)
    return lower, upper


@dataclass
class LevelSetLadder:
    levels_lower: np.ndarray
    levels_upper: np.ndarray
    q_sup: np.ndarray = None
    q_int: np.ndarray = None
    Q_sup: np.ndarray = None
    Q_int: np.ndarray = None
    _last_q: np.ndarray | None = field(default=None, repr=False)
    _last_Q: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.levels_lower = np.asarray(self.levels_lower, dtype=float)
        self.levels_upper = np.asarray(self.levels_upper, dtype=float)
        for name, n in (("q_sup", self.levels_lower.size), ("q_int", self.levels_lower.size),
                        ("Q_sup", self.levels_upper.size), ("Q_int", self.levels_upper.size)):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros(n))

    @property
    def q(self) -> np.ndarray:
        return self.q_sup + self.q_int

    @property
    def Q(self) -> np.ndarray:
        return self.Q_sup + self.Q_int


def truncation_pieces(reg: RegularizedEntropy, state: SimState, profile: DensityProfile,
                      params: PhysParams, grid: Grid, levels_lower, levels_upper, M_upper: float):
    """Per-level (sup integrand, time integrand) for q and Q at one time."""
    rho, gam, h = profile.rho0, params.gamma, grid.h
    levels_lower = np.asarray(levels_lower, dtype=float)[:, None]
    levels_upper = np.asarray(levels_upper, dtype=float)[:, None]
    neg = np.maximum(levels_lower - reg.s_eps[None, :], 0.0)  # (s_eps - l)_-
    dneg = np.gradient(neg, h, axis=1, edge_order=2)
    q_s = trapezoid(neg**2, dx=h, axis=1)
    q_i = trapezoid(dneg**2 / rho[None, :], dx=h, axis=1)
    # exp(M t) may overflow for fast-decaying data; (theta_l)_+ is then 0 for l > 0
    with np.errstate(over="ignore", invalid="ignore"):
        w = rho ** (gam - 1.0) * np.exp(M_upper * state.t)
        pos = np.maximum(state.theta[None, :] - levels_upper * w[None, :], 0.0)  # (theta_l)_+
    pos[~np.isfinite(pos)] = 0.0
    dpos = np.gradient(pos, h, axis=1, edge_order=2)
    Q_s = trapezoid((rho ** (1.0 - gam))[None, :] ** 2 * pos**2, dx=h, axis=1)
    Q_i = trapezoid((rho ** (0.5 - gam))[None, :] ** 2 * dpos**2, dx=h, axis=1)
    return q_s, q_i, Q_s, Q_i


def update_levelset_ladder(ladder: LevelSetLadder, reg: RegularizedEntropy, state: SimState,
                           profile: DensityProfile, params: PhysParams, grid: Grid, dt: float,
                           M_upper: float) -> LevelSetLadder:
    q_s, q_i, Q_s, Q_i = truncation_pieces(reg, state, profile, params, grid,
                                           ladder.levels_lower, ladder.levels_upper, M_upper)
    np.maximum(ladder.q_sup, q_s, out=ladder.q_sup)
    np.maximum(ladder.Q_sup, Q_s, out=ladder.Q_sup)
    if ladder._last_q is not None and dt > 0:
        ladder.q_int += 0.5 * dt * (q_i + ladder._last_q)
        ladder.Q_int += 0.5 * dt * (Q_i + ladder._last_Q)
    ladder._last_q, ladder._last_Q = q_i, Q_i
    return ladder


# --- monitor -------------------------------------------------------------------


@dataclass
class DiagnosticsRecord:
    t: float
    dt: float
    E_total: float
    E_corrected: float
    J_residual: float
    s_min: float
    s_max: float
    theta_max_weighted: float
    n_masked: int
    ZJ: float
    Ztheta: float
    ZG: float
    J_min: float
    J_max: float
    theta_min: float
    B_min: float
    B_max: float
    flux_identity: float
    flux_residual: float
    pressure_mismatch: float
    tail_bound: float
    G: np.ndarray | None = field(default=None, repr=False)
    B: np.ndarray | None = field(default=None, repr=False)


SERIES_COLUMNS = ("t", "dt", "E_total", "J_residual", "s_min", "s_max", "ZJ", "Ztheta", "ZG")


class Monitor:
    """Observer accumulating every diagnostic along a run.

    ``M_lower``/``M_upper`` are fixed before the run starts; callers derive
    them from the J range of a pilot pass (see :mod:`vacuumns.experiment`).
    """

    def __init__(self, initial: InitialData, profile: DensityProfile, params: PhysParams, grid: Grid,
                 levels_lower, levels_upper, M_lower: float, M_upper: float,
                 epsilon: float = 1e-10, keep_fields: bool = False):
        self.initial, self.profile, self.params, self.grid = initial, profile, params, grid
        self.epsilon = epsilon
        self.M_lower, self.M_upper = M_lower, M_upper
        self.keep_fields = keep_fields
        self.j_acc = JIdentityAccumulator(initial, profile, params, grid)
        self.norms = WeightedNorms()
        self.ladder = LevelSetLadder(levels_lower, levels_upper)
        self.records: list[DiagnosticsRecord] = []
        self.ladder_snapshots: list[tuple[float, np.ndarray, np.ndarray]] = []
        self.flux_in = 0.0  # time integral of the boundary energy inflow
        self.E0 = float("nan")
        self._prev: SimState | None = None
        self._prev_flux = 0.0
        self.s_eps_min = math.inf
        self.theta_ratio_max = 0.0  # max over run of theta rho0^{1-g} e^{-M_upper t}
        self.J_min = math.inf
        self.J_max = 0.0
        self.monotone_violations = {"ZJ": 0, "Ztheta": 0, "ZG": 0, "q": 0, "Q": 0}

    def __call__(self, state: SimState, dt: float) -> None:
        prof, par, grid = self.profile, self.params, self.grid
        B = self.j_acc.update(state, dt)
        _, _, jres = j_identity(state, self.initial, prof, grid, par, self.j_acc)
        G = viscous_flux(state, prof, par, grid)
        E = total_energy(state, prof, grid, par)
        fl = boundary_energy_flux(state, prof, grid, par)
        if self._prev is None:
            self.E0 = E
        else:
            self.flux_in += 0.5 * dt * (fl + self._prev_flux)
        self._prev_flux = fl
        ent = entropy_field(state, prof, par, grid)
        ok = np.isfinite(ent.s) & grid.core_mask
        p1, p2 = pressure_pair(state, ent.s, prof, par)
        mismatch = float(np.max(np.abs(p1[ok] - p2[ok]) / p2[ok])) if ok.any() else 0.0

        before = (self.norms.ZJ, self.norms.Ztheta, self.norms.ZG)
        update_weighted_norms(self.norms, state, G, prof, par, grid, dt)
        for key, old, new in zip(("ZJ", "Ztheta", "ZG"), before,
                                 (self.norms.ZJ, self.norms.Ztheta, self.norms.ZG)):
            if new < old:
                self.monotone_violations[key] += 1

        reg = regularized_entropy(state, prof, par, self.epsilon, self.M_lower)
        update_levelset_ladder(self.ladder, reg, state, prof, par, grid, dt, self.M_upper)
        if np.any(np.diff(self.ladder.q) < 0):
            self.monotone_violations["q"] += 1
        if np.any(np.diff(self.ladder.Q) > 0):
            self.monotone_violations["Q"] += 1
        self.s_eps_min = min(self.s_eps_min, float(np.min(reg.s_eps)))
        ratio = state.theta * prof.rho0 ** (1.0 - par.gamma)
        self.theta_ratio_max = max(self.theta_ratio_max,
                                   float(np.max(ratio)) * float(np.exp(-self.M_upper * state.t)))
        self.J_min = min(self.J_min, float(np.min(state.J)))
        self.J_max = max(self.J_max, float(np.max(state.J)))

        fres = float("nan")
        if self._prev is not None and dt > 0:
            fres = flux_equation_residual(self._prev, state, prof, par, grid)
        rec = DiagnosticsRecord(
            t=state.t, dt=dt, E_total=E, E_corrected=E - self.flux_in, J_residual=jres,
            s_min=ent.s_min, s_max=ent.s_max,
            theta_max_weighted=float(np.max(ratio[grid.core_mask])), n_masked=ent.n_masked,
            ZJ=self.norms.ZJ, Ztheta=self.norms.Ztheta, ZG=self.norms.ZG,
            J_min=float(np.min(state.J)), J_max=float(np.max(state.J)),
            theta_min=float(np.min(state.theta)),
            B_min=float(np.min(B)), B_max=float(np.max(B)),
            flux_identity=flux_identity_error(state, G, prof, par, grid),
            flux_residual=fres, pressure_mismatch=mismatch,
            tail_bound=b_tail_bound(state, self.initial, prof, par, grid),
            G=G, B=B,
        )
        if self.records and not self.keep_fields:
            self.records[-1].G = self.records[-1].B = None
        self.records.append(rec)
        self._prev = state.copy()

    def snapshot_ladder(self) -> None:
        self.ladder_snapshots.append((self._prev.t, self.ladder.q.copy(), self.ladder.Q.copy()))

    # summaries
    @property
    def last(self) -> DiagnosticsRecord:
        return self.records[-1]

    def energy_drift(self, corrected: bool = True) -> float:
        """max over the run of |E(t) - E0| / E0 (boundary inflow removed when corrected)."""
        key = "E_corrected" if corrected else "E_total"
        return max(abs(getattr(r, key) - self.E0) for r in self.records) / self.E0

    def max_j_residual(self) -> float:
        return max(r.J_residual for r in self.records)

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


def a_priori_J_floor(initial: InitialData, profile: DensityProfile, params: PhysParams, grid: Grid) -> float:
    """Analytic lower bound J_min(0) exp(-(2 sqrt2/mu) sqrt(|rho0|_1 E0)) for J over the run."""
    E0 = quad(profile.rho0 * (0.5 * initial.v0**2 + params.c_v * initial.theta0), grid)
    return float(np.min(initial.J0)) * math.exp(-b_bracket(profile, E0, grid, params))
