"""Physical parameters, grid, state container and the tridiagonal kernel."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import lapack


class ParameterError(ValueError):
    """Invalid input parameter; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class InteriorVacuumError(ParameterError):
    """Density vanishes at a finite node (hard rejection)."""


class NumericalError(ArithmeticError):
    """Non-recoverable numerical failure (NaN, singular pivot)."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message if index is None else f"{message} (index {index})")
        self.index = index


@dataclass(frozen=True)
class PhysParams:
    mu: float = 1.0
    kappa: float = 1.0
    R: float = 2.0 / 3.0
    c_v: float = 1.0
    A: float = 1.0

    def __post_init__(self):
        for name in ("mu", "kappa", "R", "c_v", "A"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ParameterError(name, f"must be finite and > 0, got {value!r}")

    @property
    def gamma(self) -> float:
        # derived on every access so it can never drift from (R, c_v)
        return 1.0 + self.R / self.c_v

    @classmethod
    def from_gamma(cls, gamma: float, c_v: float = 1.0, **kw) -> "PhysParams":
        if not gamma > 1:
            raise ParameterError("gamma", f"must be > 1, got {gamma!r}")
        return cls(R=(gamma - 1.0) * c_v, c_v=c_v, **kw)


@dataclass(frozen=True)
class Grid:
    L: float
    N: int
    buffer_fraction: float
    h: float
    nodes: np.ndarray = field(repr=False, compare=False)

    @property
    def size(self) -> int:
        return self.N + 1

    @property
    def core_halfwidth(self) -> float:
        """Half-width of the region kept by entropy diagnostics."""
        return self.L * (1.0 - 2.0 * self.buffer_fraction)

    @property
    def core_mask(self) -> np.ndarray:
        return np.abs(self.nodes) <= self.core_halfwidth * (1 + 1e-14)

    def half_mask(self) -> np.ndarray:
        """Nodes with |y| <= L/2, used for domain-doubling growth ratios."""
        return np.abs(self.nodes) <= 0.5 * self.L * (1 + 1e-14)


def make_grid(L: float, N: int, buffer_fraction: float = 0.125) -> Grid:
    if not (np.isfinite(L) and L > 0):
        raise ParameterError("L", f"must be > 0, got {L!r}")
    if int(N) != N or N < 8 or N % 2:
        raise ParameterError("N", f"must be an even integer >= 8, got {N!r}")
    if not 0 <= buffer_fraction < 0.5:
        raise ParameterError("buffer_fraction", f"must lie in [0, 1/2), got {buffer_fraction!r}")
    N = int(N)
    h = 2.0 * L / N
    nodes = -L + h * np.arange(N + 1, dtype=float)
    nodes[-1] = L
    nodes.setflags(write=False)
    return Grid(L=float(L), N=N, buffer_fraction=float(buffer_fraction), h=h, nodes=nodes)


@dataclass
class SimState:
    t: float
    J: np.ndarray
    v: np.ndarray
    theta: np.ndarray

    def copy(self) -> "SimState":
        return replace(self, J=self.J.copy(), v=self.v.copy(), theta=self.theta.copy())

    def validate(self) -> None:
        for name in ("J", "v", "theta"):
            if not np.all(np.isfinite(getattr(self, name))):
                bad = int(np.flatnonzero(~np.isfinite(getattr(self, name)))[0])
                raise NumericalError(f"non-finite {name}", bad)
        if np.any(self.J <= 0):
            raise NumericalError("J must be positive", int(np.argmin(self.J)))
        if np.any(self.theta < 0):
            raise NumericalError("theta must be nonnegative", int(np.argmin(self.theta)))


def d1(u: np.ndarray, h: float) -> np.ndarray:
    """Centered first difference; second-order one-sided at both ends."""
    return np.gradient(u, h, edge_order=2)


def check_dominance(lower, diag, upper) -> int | None:
    """Index of the first row violating diagonal dominance, else None.

    Rows must satisfy |d_i| >= |l_i| + |u_i| with strict inequality in at
    least one row (irreducible dominance, which covers the classic
    (-1, 2, -1) stencil with Dirichlet rows).
    """
    off = np.abs(lower) + np.abs(upper)
    ad = np.abs(diag)
    scale = np.maximum(ad, off)
    weak = ad - off >= -1e-14 * scale
    if not np.all(weak):
        return int(np.flatnonzero(~weak)[0])
    if not np.any(ad > off):
        return 0
    return None


def solve_tridiagonal(lower, diag, upper, rhs) -> np.ndarray:
    """Solve T x = rhs for tridiagonal T.

    All arrays have length n; ``lower[0]`` and ``upper[-1]`` are ignored
    (treated as zero).  Raises NumericalError carrying the row index when
    dominance fails or a pivot vanishes.
    """
    diag = np.asarray(diag, dtype=float)
    n = diag.size
    lower = np.array(lower, dtype=float, copy=True)
    upper = np.array(upper, dtype=float, copy=True)
    rhs = np.asarray(rhs, dtype=float)
    if lower.size != n or upper.size != n or rhs.shape[0] != n:
        raise ValueError("lower, diag, upper and rhs must have the same length")
    lower[0] = 0.0
    upper[-1] = 0.0
    bad = check_dominance(lower, diag, upper)
    if bad is not None:
        raise NumericalError("tridiagonal matrix is not diagonally dominant", bad)
    if n == 1:
        if diag[0] == 0:
            raise NumericalError("zero pivot", 0)
        return rhs / diag[0]
    _, _, _, x, info = lapack.dgtsv(lower[1:], diag, upper[:-1], rhs)
    if info > 0:
        raise NumericalError("zero pivot", info - 1)
    if info < 0:
        raise ValueError(f"illegal argument {-info} to dgtsv")
    return x
