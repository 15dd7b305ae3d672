"""Acceptance gate: nine criteria on the reference configuration.

Reference: gamma = 5/3, mu = kappa = A = 1, rho0 = <y>^-ell, s0 = 0, bump
velocity, J0 = 1, L = 50, buffer 1/8, T = 0.5, dt = 0.02 h.  Runs are cached
per (ell, L, N) so each configuration is simulated once.
"""

import math
import time
from functools import lru_cache

import numpy as np
import pytest

from conftest import record
from vacuumns.core import PhysParams, make_grid
from vacuumns.degiorgi import IterationHypothesis, iteration_gap, iteration_suite
from vacuumns.diagnostics import a_priori_J_floor, b_bracket
from vacuumns.experiment import reference_setup, run_experiment, summary
from vacuumns.inequalities import gn_suite, interp_suite
from vacuumns.solver import uniform_state_error

H_REF = 100.0 / 2048  # grid spacing of the reference N = 2048, L = 50 run


@lru_cache(maxsize=None)
def run(ell: float = 2.0, L: float = 50.0, N: int = 2048) -> dict:
    setup = reference_setup(N=N, L=L, ell_rho=ell)
    t0 = time.perf_counter()
    res = run_experiment(setup)
    mon = res.monitor
    out = summary(res)
    lad = mon.ladder
    snaps_ok = all(np.all(np.diff(q) >= 0) and np.all(np.diff(Q) <= 0) for _, q, Q in mon.ladder_snapshots)
    out.update(
        runtime=time.perf_counter() - t0,
        bracket=b_bracket(setup.profile, mon.E0, setup.grid, setup.params),
        floor=a_priori_J_floor(setup.initial, setup.profile, setup.params, setup.grid),
        series={k: mon.series(k) for k in ("B_min", "B_max", "J_min", "theta_min", "flux_identity",
                                           "flux_residual", "ZJ", "Ztheta", "ZG", "t")},
        ladder_snapshot_times=[t for t, _, _ in mon.ladder_snapshots],
        ladders_monotone=bool(snaps_ok),
        levels_lower=lad.levels_lower, levels_upper=lad.levels_upper,
        J_residual_t0=mon.records[0].J_residual,
    )
    return out


def n_for(L: float) -> int:
    return int(round(2 * L / H_REF))


# --- 1 ------------------------------------------------------------------------------------


def test_criterion_1_fixed_point():
    t0 = time.perf_counter()
    err = uniform_state_error(100, 1e-3, make_grid(50.0, 2048), PhysParams())
    dt = time.perf_counter() - t0
    ok = err <= 1e-12 and dt < 1.0
    record("1", ok, f"max-norm change {err:.2e} (<= 1e-12) in {dt:.2f} s (< 1 s)")
    assert ok


# --- 2 ------------------------------------------------------------------------------------


def test_criterion_2_energy():
    a, b = run(N=2048), run(N=4096)
    ratio = a["energy_drift"] / b["energy_drift"]
    ok = a["energy_drift"] <= 1e-3 and a["energy_drift_raw"] <= 1e-3 and ratio >= 1.8
    record("2", ok, f"drift N=2048 {a['energy_drift']:.2e} (raw {a['energy_drift_raw']:.2e}) <= 1e-3, "
                    f"ratio vs N=4096 {ratio:.2f} >= 1.8")
    assert ok


# --- 3 ------------------------------------------------------------------------------------


def test_criterion_3_j_identity():
    r = [run(N=n) for n in (1024, 2048, 4096)]
    res = [x["J_residual_max"] for x in r]
    mono = res[0] > res[1] > res[2]
    t0_zero = all(x["J_residual_t0"] == 0.0 for x in r)
    ok = res[2] <= 5e-3 and mono and t0_zero
    record("3", ok, f"J residual {res[0]:.2e}/{res[1]:.2e}/{res[2]:.2e} at N=1024/2048/4096 "
                    f"(<= 5e-3, decreasing), zero at t=0: {t0_zero}")
    assert ok


# --- 4 ------------------------------------------------------------------------------------


@pytest.mark.parametrize("N", [2048, 4096])
def test_criterion_4_brackets(N):
    r = run(N=N)
    s = r["series"]
    lo, hi = math.exp(-r["bracket"]), math.exp(r["bracket"])
    b_ok = bool(np.all(s["B_min"] >= lo * 0.95) and np.all(s["B_max"] <= hi * 1.05))
    j_ok = bool(np.all(s["J_min"] >= r["floor"] * 0.95))
    record("4", b_ok and j_ok, f"N={N}: B in [{s['B_min'].min():.3f}, {s['B_max'].max():.3f}] within "
                               f"[{lo:.3g}, {hi:.3g}]; min J {s['J_min'].min():.3f} >= floor {r['floor']:.3g}")
    assert b_ok and j_ok


# --- 5 ------------------------------------------------------------------------------------


def test_criterion_5_iteration_lemma():
    t0 = time.perf_counter()
    fams = iteration_suite(200, seed=0)
    d0 = iteration_gap(IterationHypothesis(1.0, 0.0, 4.0, 2.0, 0.0, 0.0))
    d1 = iteration_gap(IterationHypothesis(1.0, 0.0, 4.0, 2.0, 0.0, 1.0))
    dt = time.perf_counter() - t0
    ref = (2 * 3.0**18) ** 0.25 + 2
    held = sum(f.hypothesis_ok and f.conclusion_ok for f in fams)
    ok = held == 200 and d0 == 2.0 and abs(d1 - ref) <= 1e-12 * ref and dt < 5
    record("5", ok, f"{held}/200 families conclude f(m0+d)=0; d(f0=0)={d0}; reference gap {d1!r} "
                    f"rel err {abs(d1 - ref) / ref:.1e}; {dt:.2f} s")
    assert ok


# --- 6 ------------------------------------------------------------------------------------


def test_criterion_6_inequalities():
    t0 = time.perf_counter()
    reps = interp_suite(1000, seed=0)
    gn = gn_suite(200, seed=0)
    dt = time.perf_counter() - t0
    bad = sum(not r.passed for r in reps)
    ok = bad == 0 and gn.stable and dt < 30
    record("6", ok, f"interpolation bound: {bad} violations / 1000; GN max ratio {gn.max_ratio:.5f} vs "
                    f"{gn.max_ratio_refined:.5f} after refinement; {dt:.1f} s")
    assert ok


# --- 7 ------------------------------------------------------------------------------------


def _variation(values):
    values = np.asarray(values)
    return float((values.max() - values.min()) / values.min())


@pytest.mark.slow
def test_criterion_7_slow_decay():
    by_N = [run(N=n) for n in (512, 1024, 2048, 4096)]
    by_L = [run(L=L, N=n_for(L)) for L in (25.0, 50.0, 100.0)]
    rN = [x["s_max"] - x["s_min"] for x in by_N]
    rL = [x["s_max"] - x["s_min"] for x in by_L]
    vN, vL = _variation(rN), _variation(rL)
    vanish = []
    for x in by_N + by_L:
        q, Q = x["vanishing_level_q"], x["vanishing_level_Q"]
        vanish.append(isinstance(q, float) and q <= x["ell_lower0"] + 1e-12
                      and isinstance(Q, float) and Q >= x["ell_upper0"] - 1e-12)
    ok = vN <= 0.2 and vL <= 0.2 and all(vanish)
    ref = by_N[2]
    record("7", ok, f"slow decay: entropy range varies {vN:.1%} over N, {vL:.1%} over L (<= 20%); "
                    f"vanishing levels q={ref['vanishing_level_q']} <= {ref['ell_lower0']:.3g}, "
                    f"Q={ref['vanishing_level_Q']} >= {ref['ell_upper0']:.3g} in all runs: {all(vanish)}")
    assert ok


@pytest.mark.slow
def test_criterion_7_fast_decay_flags():
    r = run(ell=4.0, L=50.0, N=2048)
    flags = r["assumptions"]
    ok = flags["H1"] == "diverging" and flags["H2"] == "diverging"
    record("7", ok, f"fast decay: H1 {flags['H1']}, H2 {flags['H2']}")
    assert ok


@pytest.mark.slow
def test_criterion_7_fast_decay_entropy_min():
    runs = [run(ell=4.0, L=L, N=n_for(L)) for L in (25.0, 50.0, 100.0)]
    smin = [x["s_min"] for x in runs]
    smax = [x["s_max"] for x in runs]
    ok = smin[0] > smin[1] > smin[2]
    record("7", ok, f"fast decay: s_min at T over L=25/50/100 = {smin[0]:.4f}/{smin[1]:.4f}/{smin[2]:.4f} "
                    f"(required strictly decreasing); s_max = {smax[0]:.2f}/{smax[1]:.2f}/{smax[2]:.2f}")
    assert ok


# --- 8 ------------------------------------------------------------------------------------


def test_criterion_8_flux():
    r = [run(N=n) for n in (1024, 2048, 4096)]
    ident = max(float(np.max(x["series"]["flux_identity"])) for x in r)
    res = [x["flux_residual_final"] for x in r]
    orders = [math.log2(res[i] / res[i + 1]) for i in range(2)]
    ok = ident <= 1e-12 and min(orders) >= 1.0
    record("8", ok, f"identity max {ident:.1e} (<= 1e-12); G-equation residual "
                    f"{res[0]:.2e}/{res[1]:.2e}/{res[2]:.2e}, orders {orders[0]:.2f}, {orders[1]:.2f} (>= 1)")
    assert ok


# --- 9 ------------------------------------------------------------------------------------


@pytest.mark.parametrize("ell,N", [(2.0, 2048), (4.0, 2048)])
def test_criterion_9_positivity_monotone(ell, N):
    r = run(ell=ell, N=N)
    s = r["series"]
    pos = bool(np.all(s["theta_min"] >= 0) and np.all(s["J_min"] > 0))
    mono = all(np.all(np.diff(s[k]) >= 0) for k in ("ZJ", "Ztheta", "ZG"))
    lad = r["ladders_monotone"] and len(r["ladder_snapshot_times"]) == 5
    viol = sum(r["monotone_violations"].values())
    ok = pos and mono and lad and viol == 0
    record("9", ok, f"ell={ell:g}: theta >= 0 and J > 0 at all {len(s['t'])} records: {pos}; Z's nondecreasing: "
                    f"{mono}; q/Q monotone in level at {len(r['ladder_snapshot_times'])} output times: {lad}")
    assert ok
