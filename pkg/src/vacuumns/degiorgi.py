"""Level-set iteration lemma and vanishing analysis of measured ladders.

The lemma: if f >= 0 is nonincreasing on [m0, inf) and

    f(l) <= M0 (l+1)^alpha (l-m)^(-beta) f(m)^sigma     for all l > m >= m0,

then f(m0 + d) = 0 with the explicit gap returned by :func:`iteration_gap`.
Synthetic families are finitely supported step functions whose hypothesis
is always re-checked by brute force before the conclusion is tested.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .core import ParameterError


class DataError(ValueError):
    """A ladder that should be monotone is not (points at a diagnostics bug)."""


@dataclass(frozen=True)
class IterationHypothesis:
    M0: float
    alpha: float
    beta: float
    sigma: float
    m0: float = 0.0
    f0: float = 0.0

    def __post_init__(self):
        _validate(self)

    @property
    def M(self) -> float:
        return self.M0 + self.m0 + 2.0

    @property
    def a(self) -> float:
        return self.beta / (self.sigma - 1.0)

    @property
    def b(self) -> float:
        s1 = self.sigma - 1.0
        return (2.0 * self.alpha + self.beta + 1.0) / s1 + self.beta / s1**2

    @property
    def exponent(self) -> float:
        """Power of M inside the gap formula."""
        s1 = self.sigma - 1.0
        return ((2.0 * self.alpha + 2.0 * self.beta + 1.0) / s1 + self.beta / s1**2
                + 2.0 * self.alpha + self.beta + 1.0)


def _validate(h) -> None:
    if not h.alpha < h.beta:
        raise ParameterError("alpha", f"need alpha < beta, got alpha={h.alpha!r}, beta={h.beta!r}")
    if not h.sigma > 1:
        raise ParameterError("sigma", f"must be > 1, got {h.sigma!r}")
    if not h.alpha >= 0:
        raise ParameterError("alpha", f"must be >= 0, got {h.alpha!r}")
    for name in ("M0", "m0", "f0"):
        if not getattr(h, name) >= 0:
            raise ParameterError(name, f"must be >= 0, got {getattr(h, name)!r}")


def iteration_gap(h: IterationHypothesis) -> float:
    """d = [2 f0^sigma M^e]^(1/(beta-alpha)) + 2 with M = M0 + m0 + 2."""
    _validate(h)
    if h.f0 == 0:
        return 2.0
    p = 1.0 / (h.beta - h.alpha)
    try:
        core = (2.0 * h.f0**h.sigma * h.M**h.exponent) ** p
    except OverflowError:
        core = math.inf
    if not math.isfinite(core) or core == 0.0:
        # intermediate over/underflow: redo in log space; inf only if d itself overflows
        log_core = p * (math.log(2.0) + h.sigma * math.log(h.f0) + h.exponent * math.log(h.M))
        core = math.exp(log_core) if log_core < 709.0 else math.inf
    return core + 2.0


# --- brute-force hypothesis check ------------------------------------------------


@dataclass
class HypothesisCheck:
    passed: bool
    worst_ratio: float
    worst_pair: tuple[float, float] | None  # (l, m)
    nonincreasing: bool


def verify_hypothesis(levels, f, h: IterationHypothesis, rtol: float = 1e-12) -> HypothesisCheck:
    """Check f(l) <= M0 (l+1)^a (l-m)^-b f(m)^s over every sampled pair l > m >= m0.

    ``worst_ratio`` is max f(l)/rhs (inf when rhs = 0 < f(l)); the pass
    flag allows ``rtol`` relative rounding in the comparison.
    """
    lv = np.asarray(levels, dtype=float)
    fv = np.asarray(f, dtype=float)
    if lv.shape != fv.shape or lv.ndim != 1:
        raise ValueError("levels and f must be 1-D arrays of equal length")
    if np.any(np.diff(lv) <= 0):
        raise ValueError("levels must be strictly increasing")
    if np.any(fv < 0):
        raise ValueError("f must be nonnegative")
    keep = lv >= h.m0
    lv, fv = lv[keep], fv[keep]
    nonincreasing = bool(np.all(np.diff(fv) <= 0))
    if lv.size < 2:
        return HypothesisCheck(True, 0.0, None, nonincreasing)

    L, Mm = np.meshgrid(lv, lv, indexing="ij")  # row = l, column = m
    FL, FM = np.meshgrid(fv, fv, indexing="ij")
    pair = L > Mm
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        rhs = h.M0 * (L + 1.0) ** h.alpha * (L - Mm) ** (-h.beta) * FM**h.sigma
        ratio = np.where(FL == 0, 0.0, np.where(rhs > 0, FL / rhs, np.inf))
        ok = FL <= rhs * (1.0 + rtol)
    ratio = np.where(pair, ratio, 0.0)
    i, j = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    worst = float(ratio[i, j])
    passed = bool(np.all(ok[pair]))
    return HypothesisCheck(passed, worst, (float(lv[i]), float(lv[j])) if worst > 0 else None, nonincreasing)


# --- synthetic families ------------------------------------------------------------


@dataclass(frozen=True)
class StepFamily:
    """f = eps on [m0, l_star), 0 from l_star on."""

    M0: float
    alpha: float
    beta: float
    sigma: float
    m0: float
    l_star: float
    eps: float

    def __call__(self, levels) -> np.ndarray:
        lv = np.asarray(levels, dtype=float)
        return np.where(lv < self.l_star, self.eps, 0.0)

    @property
    def hypothesis(self) -> IterationHypothesis:
        return IterationHypothesis(self.M0, self.alpha, self.beta, self.sigma, self.m0, self.eps)

    def threshold(self) -> float:
        """Smallest eps with eps^(sigma-1) >= (l_star - m0)^beta / M0."""
        return ((self.l_star - self.m0) ** self.beta / self.M0) ** (1.0 / (self.sigma - 1.0))


def step_family(M0, alpha, beta, sigma, m0, l_star, factor=1.0) -> StepFamily:
    """Family at ``factor`` times the threshold (factor >= 1 satisfies the hypothesis)."""
    base = StepFamily(M0, alpha, beta, sigma, m0, l_star, 1.0)
    return StepFamily(M0, alpha, beta, sigma, m0, l_star, factor * base.threshold())


def _draw(rng: np.random.Generator, alpha: float) -> StepFamily:
    """Random family a random factor above its hypothesis threshold."""
    m0 = float(rng.uniform(0.0, 5.0))
    return step_family(
        M0=float(rng.uniform(0.1, 10.0)),
        alpha=alpha,
        beta=alpha + float(rng.uniform(0.5, 5.0)),
        sigma=float(rng.uniform(1.2, 3.0)),
        m0=m0,
        l_star=m0 + float(rng.uniform(0.05, 3.0)),
        factor=1.0 + float(rng.exponential(0.5)),
    )


def sample_levels(fam: StepFamily, n: int = 160) -> np.ndarray:
    """Levels from m0 past both l_star and a modest multiple of the support."""
    top = fam.m0 + 3.0 * (fam.l_star - fam.m0) + 1.0
    lv = np.linspace(fam.m0, top, n)
    return np.unique(np.concatenate([lv, [fam.l_star]]))


@dataclass
class FamilyOutcome:
    seed: int
    family: StepFamily
    hypothesis_ok: bool
    worst_ratio: float
    gap: float
    conclusion_ok: bool

    def to_dict(self) -> dict:
        out = asdict(self)
        out["family"] = asdict(self.family)
        return out


def check_family(fam: StepFamily, seed: int = -1) -> FamilyOutcome:
    """Re-verify the hypothesis by brute force, then test f = 0 from m0 + d on."""
    h = fam.hypothesis
    lv = sample_levels(fam)
    hc = verify_hypothesis(lv, fam(lv), h)
    d = iteration_gap(h)
    probe = np.concatenate([[fam.m0 + d], lv[lv >= fam.m0 + d]])
    concl = bool(np.all(fam(probe) == 0))
    return FamilyOutcome(seed, fam, hc.passed and hc.nonincreasing, hc.worst_ratio, d, concl)


def iteration_suite(n: int = 200, seed: int = 0) -> list[FamilyOutcome]:
    """n hypothesis-verified random families; draws failing brute force are redrawn."""
    rng = np.random.default_rng(seed)
    out: list[FamilyOutcome] = []
    draws = 0
    while len(out) < n:
        draws += 1
        if draws > 20 * n:
            raise RuntimeError("could not generate enough hypothesis-verified families")
        fam = _draw(rng, float(rng.uniform(0.0, 3.0)))
        res = check_family(fam, seed=draws - 1)
        if res.hypothesis_ok:
            out.append(res)
    return out


# --- measured ladders ----------------------------------------------------------------


def vanishing_level(levels, values, zero_tol: float = 1e-12, orientation: str = "decreasing",
                    mono_tol: float = 1e-9) -> float | None:
    """Extremal sampled level at which a monotone ladder vanishes.

    ``orientation="decreasing"``: values nonincreasing in the level (the Q
    ladder); returns the smallest level with value <= zero_tol (1 + max).
    ``orientation="increasing"``: values nondecreasing (the q ladder);
    returns the largest such level.  None when no entry qualifies.
    """
    lv = np.asarray(levels, dtype=float)
    val = np.asarray(values, dtype=float)
    if lv.shape != val.shape or lv.ndim != 1 or lv.size == 0:
        raise ValueError("levels and values must be nonempty 1-D arrays of equal length")
    if np.any(np.diff(lv) <= 0):
        raise ValueError("levels must be strictly increasing")
    if orientation not in ("increasing", "decreasing"):
        raise ValueError(f"orientation must be 'increasing' or 'decreasing', got {orientation!r}")
    top = float(np.max(np.abs(val)))
    step = np.diff(val) if orientation == "increasing" else -np.diff(val)
    if np.any(step < -mono_tol * (1.0 + top)):
        k = int(np.flatnonzero(step < -mono_tol * (1.0 + top))[0])
        raise DataError(f"ladder not {orientation} between levels {lv[k]!r} and {lv[k + 1]!r}")
    zero = np.flatnonzero(val <= zero_tol * (1.0 + top))
    if zero.size == 0:
        return None
    return float(lv[zero[-1]] if orientation == "increasing" else lv[zero[0]])


@dataclass
class RecursionFit:
    """Empirical constant C in f(l) <= C scale (l+1)^a (l-m)^-b f(m)^s.  Not certified."""

    C: float
    violations: int  # pairs with f(m) = 0 < f(l): no finite C fits them
    pairs: int
    certified: bool = False


def fit_recursion_constant(levels, values, alpha: float, beta: float, sigma: float,
                           scale: float = 1.0, orientation: str = "decreasing",
                           zero_tol: float = 1e-12) -> RecursionFit:
    """Smallest C consistent with every sampled pair of a measured ladder.

    For an increasing (q-type) ladder the level axis is reflected first, so
    that f(l) = q_{-l} is nonincreasing as the lemma requires.
    """
    lv = np.asarray(levels, dtype=float)
    val = np.asarray(values, dtype=float)
    if orientation == "increasing":
        lv, val = -lv[::-1], val[::-1]
    top = float(np.max(np.abs(val))) if val.size else 0.0
    val = np.where(val <= zero_tol * (1.0 + top), 0.0, val)
    C, bad, npairs = 0.0, 0, 0
    for i in range(lv.size):
        for j in range(i):
            l, m = lv[i], lv[j]
            if l + 1.0 <= 0 and alpha != 0:
                continue
            npairs += 1
            if val[i] == 0:
                continue
            if val[j] == 0:
                bad += 1
                continue
            need = val[i] * (l - m) ** beta / (scale * (l + 1.0) ** alpha * val[j] ** sigma)
            C = max(C, need)
    return RecursionFit(C, bad, npairs)


def hypothesis_report(h: IterationHypothesis, levels=None, f=None) -> dict:
    """JSON-ready record: hypothesis fields, gap, and (when given) the brute-force check."""
    out = {"hypothesis": asdict(h), "M": h.M, "a": h.a, "b": h.b, "gap": iteration_gap(h)}
    if levels is not None:
        hc = verify_hypothesis(levels, f, h)
        out.update(passed=hc.passed, nonincreasing=hc.nonincreasing, worst_ratio=hc.worst_ratio,
                   worst_pair=hc.worst_pair)
    return out


__all__ = [
    "DataError", "IterationHypothesis", "iteration_gap", "HypothesisCheck", "verify_hypothesis",
    "StepFamily", "step_family", "sample_levels", "check_family", "iteration_suite", "FamilyOutcome",
    "vanishing_level", "RecursionFit", "fit_recursion_constant", "hypothesis_report",
]
