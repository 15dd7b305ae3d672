"""Initial data families and numerical checks of the decay/compatibility assumptions.

Everything here is evaluated on a truncated grid, so a check can witness
divergence but never prove boundedness on the whole line.  Each functional
is therefore reported together with a growth ratio: the value on [-L, L]
divided by the value on [-L/2, L/2].  A ratio near 1 means the tail is no
longer contributing; a ratio well above 1 means the functional keeps
growing with the domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

from .core import Grid, InteriorVacuumError, ParameterError, PhysParams, d1

GROWTH_DIVERGENCE = 1.5
NOISE_FLOOR = 1e-24


@dataclass(frozen=True)
class DensityProfile:
    rho0: np.ndarray = field(repr=False)
    drho0: np.ndarray = field(repr=False)
    d2rho0: np.ndarray = field(repr=False)
    family: str = "power_law"
    K_rho: float = float("nan")
    ell_rho: float = float("nan")
    approximate: bool = False  # derivatives from finite differences

    def tail_mass(self, L: float) -> float:
        """Mass of rho0 on (-inf, -L); nan when not known analytically."""
        if self.family != "power_law":
            return float("nan")
        if self.ell_rho <= 1:
            return float("inf")
        val, _ = integrate.quad(
            lambda y: self.K_rho * (1.0 + y * y) ** (-0.5 * self.ell_rho), L, np.inf
        )
        return val


@dataclass(frozen=True)
class DecayConstants:
    K1: float
    K2: float
    K1_growth: float
    K2_growth: float


@dataclass
class InitialData:
    J0: np.ndarray
    v0: np.ndarray
    theta0: np.ndarray
    s0: np.ndarray | None = None

    @property
    def J_lower(self) -> float:
        return float(np.min(self.J0))

    @property
    def J_upper(self) -> float:
        return float(np.max(self.J0))


@dataclass(frozen=True)
class EntropyLevelParams:
    s_lower0: float
    s_upper0: float
    ell_lower0: float
    ell_upper0: float
    M_lower: float
    M_upper: float
    J_lowerT: float
    J_upperT: float
    T: float


def density_power_law(K_rho: float, ell_rho: float, grid: Grid) -> DensityProfile:
    """rho0 = K <y>^-ell with closed-form first and second derivatives."""
    if not (np.isfinite(K_rho) and K_rho > 0):
        raise ParameterError("K_rho", f"must be > 0, got {K_rho!r}")
    if not (np.isfinite(ell_rho) and ell_rho >= 0):
        raise ParameterError("ell_rho", f"must be >= 0, got {ell_rho!r}")
    y = grid.nodes
    w = 1.0 + y * y
    rho = K_rho * w ** (-0.5 * ell_rho)
    drho = -ell_rho * K_rho * y * w ** (-0.5 * ell_rho - 1.0)
    d2rho = ell_rho * K_rho * w ** (-0.5 * ell_rho - 2.0) * ((ell_rho + 1.0) * y * y - 1.0)
    return DensityProfile(rho, drho, d2rho, "power_law", float(K_rho), float(ell_rho))


def load_profile_table(path: str | Path, grid: Grid) -> tuple[DensityProfile, np.ndarray | None]:
    """Read a (y, rho0[, v0]) table and interpolate it cubically onto the grid.

    Derivatives are those of the spline (so they resolve the table spacing,
    not the grid spacing) and the profile is flagged approximate.  Returns the profile and the optional v0 samples.
    """
    data = np.loadtxt(path, comments="#", delimiter=None, ndmin=2)
    if data.shape[1] not in (2, 3):
        raise ParameterError("profile.table", f"expected 2 or 3 columns, got {data.shape[1]}")
    y, rho = data[:, 0], data[:, 1]
    if np.any(np.diff(y) <= 0):
        raise ParameterError("profile.table", "y column must be strictly increasing")
    if np.any(rho <= 0):
        i = int(np.flatnonzero(rho <= 0)[0])
        raise InteriorVacuumError("profile.table", f"rho0 <= 0 at y={y[i]!r} (interior vacuum)")
    if y[0] > grid.nodes[0] + 1e-12 or y[-1] < grid.nodes[-1] - 1e-12:
        raise ParameterError("profile.table", "table does not cover [-L, L]")
    spline = CubicSpline(y, rho)
    rho_g = spline(grid.nodes)
    if np.any(rho_g <= 0):
        i = int(np.flatnonzero(rho_g <= 0)[0])
        raise InteriorVacuumError("profile.table", f"interpolated rho0 <= 0 at node {i}")
    prof = DensityProfile(
        rho_g, spline(grid.nodes, 1), spline(grid.nodes, 2), family="table", approximate=True
    )
    v0 = CubicSpline(y, data[:, 2])(grid.nodes) if data.shape[1] == 3 else None
    return prof, v0


def bump(grid: Grid, amplitude: float = 0.5, width: float = 5.0) -> np.ndarray:
    """amplitude * exp(1/((y/w)^2 - 1)) on |y| < w, zero outside."""
    y = grid.nodes / width
    out = np.zeros_like(y)
    inside = np.abs(y) < 1
    out[inside] = amplitude * np.exp(1.0 / (y[inside] ** 2 - 1.0))
    return out


def _sup_growth(values: np.ndarray, grid: Grid) -> tuple[float, float]:
    full = float(np.max(values))
    half = float(np.max(values[grid.half_mask()]))
    return full, _ratio(full, half)


def _ratio(full: float, half: float) -> float:
    if abs(full) <= NOISE_FLOOR:
        return 1.0  # roundoff-level functional: no growth to speak of
    if half == 0:
        return 1.0 if full == 0 else float("inf")
    return full / half


def decay_constants(profile: DensityProfile, grid: Grid) -> DecayConstants:
    rho = profile.rho0
    K1, g1 = _sup_growth(np.abs(profile.drho0) / rho**1.5, grid)
    K2, g2 = _sup_growth(np.abs(profile.d2rho0) / rho**2, grid)
    return DecayConstants(K1, K2, g1, g2)


def theta_from_entropy(s0, profile: DensityProfile, params: PhysParams) -> np.ndarray:
    s0 = np.broadcast_to(np.asarray(s0, dtype=float), profile.rho0.shape)
    return (params.A / params.R) * np.exp(s0 / params.c_v) * profile.rho0 ** (params.gamma - 1.0)


def remark_initial_data(
    profile: DensityProfile,
    grid: Grid,
    params: PhysParams,
    v_amplitude: float = 0.5,
    v_width: float = 5.0,
    s0: float | np.ndarray = 0.0,
    J0: float = 1.0,
) -> InitialData:
    """Bump velocity, J0 constant, theta0 built from a prescribed entropy."""
    s = np.array(np.broadcast_to(np.asarray(s0, dtype=float), grid.nodes.shape))
    return InitialData(
        J0=np.full(grid.size, float(J0)),
        v0=bump(grid, v_amplitude, v_width),
        theta0=theta_from_entropy(s, profile, params),
        s0=s,
    )


# --- assumption checks -------------------------------------------------------


@dataclass
class AssumptionCheck:
    assumption: str
    name: str
    kind: str  # "sup", "L2", "L1", "inf", "sign"
    value: float
    growth: float
    status: str  # "pass", "fail", "diverging"


@dataclass
class AssumptionReport:
    checks: list[AssumptionCheck]
    hard_reject: bool = False
    sandwich_used: bool = False

    def status(self, assumption: str) -> str:
        rows = [c for c in self.checks if c.assumption == assumption]
        if not rows:
            raise KeyError(assumption)
        if any(c.status == "fail" for c in rows):
            return "fail"
        if any(c.status == "diverging" for c in rows):
            return "diverging"
        return "pass"

    def passed(self, assumption: str) -> bool:
        return self.status(assumption) == "pass"

    def to_dict(self) -> dict:
        names = sorted({c.assumption for c in self.checks})
        return {
            "hard_reject": self.hard_reject,
            "sandwich_used": self.sandwich_used,
            "status": {a: self.status(a) for a in names},
            "checks": [vars(c) for c in self.checks],
        }


def _trap(f: np.ndarray, h: float, mask: np.ndarray | None = None) -> float:
    if mask is not None:
        f = f[mask]
    return float(integrate.trapezoid(f, dx=h))


def _bounded_check(assumption, name, kind, values, grid, nonneg=True) -> AssumptionCheck:
    if kind == "sup":
        full, growth = _sup_growth(np.abs(values), grid)
    else:
        p = 2 if kind == "L2" else 1
        integrand = np.abs(values) ** p
        full = _trap(integrand, grid.h)
        growth = _ratio(full, _trap(integrand, grid.h, grid.half_mask()))
    if not np.isfinite(full):
        status = "fail"
    else:
        status = "diverging" if growth > GROWTH_DIVERGENCE else "pass"
    return AssumptionCheck(assumption, name, kind, full, growth, status)


def check_assumptions(
    profile: DensityProfile,
    initial: InitialData,
    grid: Grid,
    params: PhysParams,
    allow_sandwich: bool = False,
) -> AssumptionReport:
    """Evaluate (H0)-(H2), (HS), finite mass and the slow-decay bounds on the grid."""
    rho, drho, d2rho = profile.rho0, profile.drho0, profile.d2rho0
    gam = params.gamma
    h = grid.h
    v0, th0, J0 = initial.v0, initial.theta0, initial.J0
    dv0, dth0, dJ0 = d1(v0, h), d1(th0, h), d1(J0, h)
    checks: list[AssumptionCheck] = []
    hard = bool(np.any(rho <= 0))

    def sign_check(assumption, name, value, ok):
        checks.append(AssumptionCheck(assumption, name, "sign", value, 1.0, "pass" if ok else "fail"))

    # (H0)
    sign_check("H0", "inf rho0 > 0", float(np.min(rho)), not hard)
    sign_check("H0", "inf J0 > 0", float(np.min(J0)), bool(np.min(J0) > 0))
    sign_check("H0", "inf theta0 >= 0", float(np.min(th0)), bool(np.min(th0) >= 0))
    checks.append(_bounded_check("H0", "rho0 in W1inf", "sup", np.abs(rho) + np.abs(drho), grid))
    checks.append(_bounded_check("H0", "J0 in Linf", "sup", J0, grid))
    sq = np.sqrt(rho)
    for name, vals in (
        ("sqrt(rho0) v0", sq * v0),
        ("sqrt(rho0) v0^2", sq * v0**2),
        ("sqrt(rho0) theta0", sq * th0),
        ("sqrt(rho0) J0'", sq * dJ0),
        ("v0'", dv0),
        ("rho0^1.5 theta0'", rho**1.5 * dth0),
    ):
        checks.append(_bounded_check("H0", name, "L2", vals, grid))

    # (H1) and finite mass
    sandwich = False
    if allow_sandwich:
        sandwich = _sandwich_holds(profile, grid)
    h1 = _bounded_check("H1", "(1/sqrt(rho0))'", "sup", -0.5 * drho / rho**1.5, grid)
    h2 = _bounded_check(
        "H2", "(1/rho0)''", "sup", -d2rho / rho**2 + 2.0 * drho**2 / rho**3, grid
    )
    if sandwich:
        h1.status = h2.status = "pass"
    checks.append(h1)
    checks.append(_bounded_check("H1", "rho0 in L1", "L1", rho, grid))
    checks.append(_bounded_check("H1", "sqrt(rho0) theta0'", "L2", sq * dth0, grid))
    checks.append(h2)

    # slow-decay constants
    dc = decay_constants(profile, grid)
    for assumption, name, val, growth in (
        ("HSLOW", "K1 = sup |rho0'|/rho0^1.5", dc.K1, dc.K1_growth),
        ("HSLOW2", "K2 = sup |rho0''|/rho0^2", dc.K2, dc.K2_growth),
    ):
        status = "diverging" if growth > GROWTH_DIVERGENCE else "pass"
        checks.append(AssumptionCheck(assumption, name, "sup", val, growth, status))

    # (HS) singular compatibility
    G0 = (params.mu * dv0 - params.R * rho * th0) / J0
    for name, vals in (
        ("rho0^((1-g)/2) v0", rho ** (0.5 * (1 - gam)) * v0),
        ("rho0^(1-g/2) theta0", rho ** (1 - 0.5 * gam) * th0),
        ("rho0^(-g/2) G0", rho ** (-0.5 * gam) * G0),
    ):
        checks.append(_bounded_check("HS", name, "L2", vals, grid))

    return AssumptionReport(checks, hard_reject=hard, sandwich_used=sandwich)


def _sandwich_holds(profile: DensityProfile, grid: Grid) -> bool:
    """Two-sided power envelope with exponents in [0, 2].

    Holds iff rho0 is bounded above and rho0 <y>^2 stays bounded below.
    """
    upper = _bounded_check("sandwich", "rho0", "sup", profile.rho0, grid)
    inv = 1.0 / (profile.rho0 * (1.0 + grid.nodes**2))
    lower = _bounded_check("sandwich", "1/(rho0 <y>^2)", "sup", inv, grid)
    return upper.status == "pass" and lower.status == "pass"


def remark_admissible(ell_rho: float, gamma: float) -> bool:
    """Exponent window 1/gamma < ell <= 2 of the slowly decaying power-law family."""
    return 1.0 / gamma < ell_rho <= 2.0


def entropy_level_params(
    initial: InitialData,
    decay: DecayConstants,
    J_range: tuple[float, float],
    params: PhysParams,
    T: float,
) -> EntropyLevelParams:
    if initial.s0 is None:
        raise ParameterError("s0", "initial entropy is required for the level parameters")
    J_lo, J_hi = map(float, J_range)
    if not J_lo > 0:
        raise ParameterError("J_lowerT", f"must be > 0, got {J_lo!r}")
    if J_hi < J_lo:
        raise ParameterError("J_upperT", "must be >= J_lowerT")
    gam, cv = params.gamma, params.c_v
    s_lo, s_hi = float(np.min(initial.s0)), float(np.max(initial.s0))
    a = params.A / params.R
    ell_lo = math.log(min(1.0, a * math.exp(s_lo / cv)) / max(1.0, 2.0 ** (gam - 2.0)))
    ell_hi = a * math.exp(s_hi / cv)
    pref = params.kappa * (gam - 1.0) / (cv * J_lo)
    return EntropyLevelParams(
        s_lower0=s_lo,
        s_upper0=s_hi,
        ell_lower0=ell_lo,
        ell_upper0=ell_hi,
        M_lower=pref * (decay.K1**2 + decay.K2),
        M_upper=pref * (abs(gam - 2.0) * decay.K1**2 + decay.K2),
        J_lowerT=J_lo,
        J_upperT=J_hi,
        T=float(T),
    )
