"""Numerical checkers for the two weighted functional inequalities.

* :func:`check_sqrt_weight_bound` tests a sup-norm interpolation bound whose
  constants are explicit, so a single violation is a real failure.
* :func:`check_weighted_gn` evaluates the ratio in a weighted
  Gagliardo-Nirenberg bound whose constant C is not given; it can only be
  checked to stay bounded over a family (the report says so).

Random test functions are Gaussian mixtures with closed-form derivatives, so
no differencing error enters the comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .core import Grid, ParameterError, d1, make_grid


@dataclass(frozen=True)
class Mixture:
    """sum_i a_i exp(-(y - c_i)^2 / (2 s_i^2)) with its exact derivative."""

    amps: tuple[float, ...]
    centers: tuple[float, ...]
    widths: tuple[float, ...]

    def __call__(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)[..., None]
        a, c, s = (np.asarray(v) for v in (self.amps, self.centers, self.widths))
        return np.sum(a * np.exp(-((y - c) ** 2) / (2 * s * s)), axis=-1)

    def derivative(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)[..., None]
        a, c, s = (np.asarray(v) for v in (self.amps, self.centers, self.widths))
        return np.sum(-a * (y - c) / (s * s) * np.exp(-((y - c) ** 2) / (2 * s * s)), axis=-1)


def random_mixture(rng: np.random.Generator, nonneg: bool = True, terms: int | None = None,
                   spread: float = 5.0) -> Mixture:
    k = terms or int(rng.integers(1, 5))
    amps = rng.uniform(0.1, 2.0, k)
    if not nonneg:
        amps *= rng.choice([-1.0, 1.0], k)
    return Mixture(tuple(amps.tolist()), tuple(rng.uniform(-spread, spread, k).tolist()),
                   tuple(rng.uniform(0.3, 2.0, k).tolist()))


def power_weight(y: np.ndarray, p: float) -> tuple[np.ndarray, np.ndarray, float]:
    """<y>^-p, its derivative and the exact log-Lipschitz constant p/2."""
    w = (1.0 + y * y) ** (-0.5 * p)
    return w, -p * y * (1.0 + y * y) ** (-0.5 * p - 1.0), 0.5 * p


# --- sup-norm interpolation bound ------------------------------------------------------


@dataclass
class InterpolationInstance:
    omega: np.ndarray
    eta: np.ndarray
    f: np.ndarray
    K: float
    df: np.ndarray | None = None  # analytic f' when available
    domega: np.ndarray | None = None
    seed: int = -1

    def check_invariants(self, grid: Grid) -> None:
        if np.any(self.omega < 0) or np.any(self.eta <= 0) or np.any(self.f < 0):
            raise ParameterError("instance", "need omega >= 0, eta > 0, f >= 0")
        if not self.K >= 0:
            raise ParameterError("K", "must be >= 0")
        if self.domega is not None:
            dw, atol = self.domega, 1e-300
        else:
            # differencing roundoff on a constant weight is ~eps |omega| / h
            dw = d1(self.omega, grid.h)
            atol = 64 * np.finfo(float).eps * float(np.max(self.omega)) / grid.h
        if np.any(np.abs(dw) > self.K * self.omega * (1.0 + 1e-12) + atol):
            raise ParameterError("K", "|omega'| <= K omega fails on the grid")


@dataclass
class SlackReport:
    lhs: float
    rhs: float
    slack: float
    tol: float
    passed: bool
    seed: int = -1

    def to_dict(self) -> dict:
        return {"seed": self.seed, "lhs": self.lhs, "rhs": self.rhs, "slack": self.slack,
                "pass": self.passed}


def check_sqrt_weight_bound(inst: InterpolationInstance, grid: Grid, rel_tol: float = 1e-6) -> SlackReport:
    """LHS = |sqrt(w) f|_inf^2; RHS = 2K|sqrt(w) f|_2^2 + 8|w|_inf^1/3 |w f|_1^2/3 |f'/sqrt(eta)|_2^4/3 |eta|_inf^2/3."""
    inst.check_invariants(grid)
    h = grid.h
    w, eta, f = inst.omega, inst.eta, inst.f
    df = inst.df if inst.df is not None else d1(f, h)
    lhs = float(np.max(w * f * f))
    rhs = (2.0 * inst.K * float(trapezoid(w * f * f, dx=h))
           + 8.0 * float(np.max(w)) ** (1 / 3) * float(trapezoid(w * f, dx=h)) ** (2 / 3)
           * float(trapezoid(df * df / eta, dx=h)) ** (2 / 3) * float(np.max(eta)) ** (2 / 3))
    tol = rel_tol * rhs
    slack = rhs - lhs
    return SlackReport(lhs, rhs, slack, tol, bool(slack >= -tol), inst.seed)


def random_interp_instance(seed: int, grid: Grid) -> InterpolationInstance:
    """Nonnegative mixture f, power-law omega (p in [0, 4]) and bounded eta > 0."""
    rng = np.random.default_rng(seed)
    y = grid.nodes
    mix = random_mixture(rng)
    w, dw, K = power_weight(y, float(rng.uniform(0.0, 4.0)))
    c = float(rng.uniform(0.2, 3.0))
    w, dw = c * w, c * dw
    bump = random_mixture(rng, terms=1)
    eta = float(rng.uniform(0.1, 2.0)) + bump(y)
    return InterpolationInstance(w, eta, mix(y), K, df=mix.derivative(y), domega=dw, seed=seed)


def interp_suite(n: int = 1000, seed: int = 0, L: float = 40.0, N: int = 8192) -> list[SlackReport]:
    grid = make_grid(L, N, 0.0)
    base = np.random.SeedSequence(seed)
    seeds = [int(s.generate_state(1)[0]) for s in base.spawn(n)]
    return [check_sqrt_weight_bound(random_interp_instance(s, grid), grid) for s in seeds]


# --- weighted Gagliardo-Nirenberg ratio ---------------------------------------------------


@dataclass
class GNReport:
    sigma: float
    q: float
    lhs: float
    bracket: float
    ratio: float
    seed: int = -1
    note: str = field(default="ratio = LHS / bracket; the constant is generic, only boundedness is checked")

    def to_dict(self) -> dict:
        return {"seed": self.seed, "sigma": self.sigma, "q": self.q, "lhs": self.lhs,
                "bracket": self.bracket, "ratio": self.ratio}


def check_weighted_gn(rho0: np.ndarray, f: np.ndarray, sigma: float, q: float, grid: Grid,
                      df: np.ndarray | None = None, seed: int = -1) -> GNReport:
    """|rho^s f|_q / (|rho|_inf^(1/4-1/2q) (|rho^s f|_2 + |rho^s f|_2^(1/2+1/q) |rho^(s-1/2) f'|_2^(1/2-1/q)))."""
    if sigma == 0:
        raise ParameterError("sigma", "must be nonzero")
    if not q >= 2:
        raise ParameterError("q", f"must lie in [2, inf], got {q!r}")
    h = grid.h
    df = df if df is not None else d1(f, h)
    g = rho0**sigma * f
    inv_q = 0.0 if np.isinf(q) else 1.0 / q
    if np.isinf(q):
        lhs = float(np.max(np.abs(g)))
    else:
        lhs = float(trapezoid(np.abs(g) ** q, dx=h)) ** inv_q
    n2 = float(trapezoid(g * g, dx=h)) ** 0.5
    nd = float(trapezoid((rho0 ** (sigma - 0.5) * df) ** 2, dx=h)) ** 0.5
    bracket = float(np.max(rho0)) ** (0.25 - 0.5 * inv_q) * (n2 + n2 ** (0.5 + inv_q) * nd ** (0.5 - inv_q))
    ratio = lhs / bracket if bracket > 0 else 0.0
    return GNReport(float(sigma), float(q), lhs, bracket, ratio, seed)


GN_QS = (4.0, 6.0, 8.0, np.inf)


def gn_sigmas(gamma: float) -> tuple[float, float, float]:
    return (-0.5 * gamma, 1.0 - 0.5 * gamma, 1.0 - gamma)


@dataclass
class GNSuite:
    reports: list[GNReport]
    refined: list[GNReport]
    max_ratio: float
    max_ratio_refined: float

    @property
    def stable(self) -> bool:
        return abs(self.max_ratio_refined - self.max_ratio) <= 0.1 * self.max_ratio

    def to_dict(self) -> dict:
        return {"max_ratio": self.max_ratio, "max_ratio_refined": self.max_ratio_refined,
                "stable": self.stable,
                "semantics": "boundedness over the family; no numeric constant is asserted",
                "instances": [r.to_dict() for r in self.reports]}


def gn_suite(n: int = 200, seed: int = 0, gamma: float = 5.0 / 3.0, ell_rho: float = 2.0,
             L: float = 40.0, N: int = 4096) -> GNSuite:
    """n seeded (f, sigma, q) instances on rho0 = <y>^-ell at N and 2N."""
    grids = (make_grid(L, N, 0.0), make_grid(L, 2 * N, 0.0))
    sig = gn_sigmas(gamma)
    out: list[list[GNReport]] = [[], []]
    for k, child in enumerate(np.random.SeedSequence(seed).spawn(n)):
        s = int(child.generate_state(1)[0])
        rng = np.random.default_rng(s)
        mix = random_mixture(rng, nonneg=False)
        sigma, q = sig[k % 3], GN_QS[(k // 3) % 4]
        for i, g in enumerate(grids):
            rho = (1.0 + g.nodes**2) ** (-0.5 * ell_rho)
            out[i].append(check_weighted_gn(rho, mix(g.nodes), sigma, q, g,
                                            df=mix.derivative(g.nodes), seed=s))
    return GNSuite(out[0], out[1], max(r.ratio for r in out[0]), max(r.ratio for r in out[1]))


__all__ = [
    "Mixture", "random_mixture", "power_weight", "InterpolationInstance", "SlackReport",
    "check_sqrt_weight_bound", "random_interp_instance", "interp_suite", "GNReport",
    "check_weighted_gn", "gn_sigmas", "GNSuite", "gn_suite", "GN_QS",
]
