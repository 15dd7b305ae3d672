import math

import numpy as np
import pytest
import sympy as sp

from vacuumns.core import InteriorVacuumError, ParameterError, PhysParams, make_grid
from vacuumns.profiles import (DecayConstants, InitialData, bump, check_assumptions, decay_constants,
                               density_power_law, entropy_level_params, load_profile_table,
                               remark_admissible, remark_initial_data, theta_from_entropy)


@pytest.mark.parametrize("K,ell", [(1.0, 2.0), (0.7, 1.3), (2.0, 4.0)])
def test_power_law_matches_symbolic_derivatives(K, ell):
    y = sp.symbols("y", real=True)
    expr = K * (1 + y**2) ** (-sp.nsimplify(ell) / 2)
    f0, f1, f2 = (sp.lambdify(y, e, "numpy") for e in (expr, sp.diff(expr, y), sp.diff(expr, y, 2)))
    g = make_grid(20, 400)
    p = density_power_law(K, ell, g)
    np.testing.assert_allclose(p.rho0, f0(g.nodes), rtol=1e-13)
    np.testing.assert_allclose(p.drho0, f1(g.nodes), rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(p.d2rho0, f2(g.nodes), rtol=1e-12, atol=1e-15)


def test_constant_and_origin_values():
    g = make_grid(4, 8)
    p = density_power_law(1, 0, g)
    assert np.all(p.rho0 == 1) and np.all(p.drho0 == 0) and np.all(p.d2rho0 == 0)
    p = density_power_law(1, 2, g)
    i = int(np.flatnonzero(g.nodes == 0)[0])
    assert (p.rho0[i], p.drho0[i], p.d2rho0[i]) == (1.0, 0.0, -2.0)


def test_tail_mass_quadrature():
    p = density_power_law(1, 2, make_grid(10, 64))
    assert p.tail_mass(10) == pytest.approx(math.pi / 2 - math.atan(10), rel=1e-10)
    assert density_power_law(1, 1, make_grid(10, 64)).tail_mass(10) == math.inf


def test_admissible_window():
    assert remark_admissible(2.0, 5 / 3)
    assert not remark_admissible(0.5, 5 / 3)
    assert not remark_admissible(4.0, 5 / 3)


def test_decay_constants():
    g = make_grid(50, 2048)
    dc = decay_constants(density_power_law(1, 0, g), g)
    assert dc.K1 == 0 and dc.K2 == 0
    K1s = []
    for L in (50, 200, 800):
        g = make_grid(L, 32 * L)
        dc = decay_constants(density_power_law(1, 2, g), g)
        K1s.append(dc.K1)
        assert dc.K1 <= 2 and dc.K2 <= 6
        assert dc.K1_growth < 1.5 and dc.K2_growth < 1.5
    assert 2 - K1s[-1] < 2 - K1s[0] and K1s[-1] == pytest.approx(2, rel=1e-5)
    assert dc.K2 == pytest.approx(6, rel=1e-5)
    g = make_grid(50, 2048)
    dc = decay_constants(density_power_law(1, 4, g), g)
    assert dc.K1_growth == pytest.approx(2, rel=1e-3)


def test_theta_from_entropy():
    g = make_grid(10, 64)
    par = PhysParams(R=1.0, A=1.0)  # gamma = 2, A = R
    p = density_power_law(1, 2, g)
    th = theta_from_entropy(0.0, p, par)
    np.testing.assert_allclose(th, 1 / (1 + g.nodes**2), rtol=1e-15)
    th2 = theta_from_entropy(par.c_v * math.log(2), p, par)
    np.testing.assert_allclose(th2, 2 * th, rtol=1e-14)
    par = PhysParams(R=2 / 3, A=2 / 3)
    np.testing.assert_allclose(theta_from_entropy(0.0, p, par), p.rho0 ** (2 / 3), rtol=1e-14)


def test_remark_data_invariants():
    g = make_grid(50, 512)
    par = PhysParams()
    p = density_power_law(1, 2, g)
    ini = remark_initial_data(p, g, par, s0=0.3)
    expect = (par.A / par.R) * math.exp(0.3 / par.c_v) * p.rho0 ** (par.gamma - 1)
    np.testing.assert_allclose(ini.theta0, expect, rtol=1e-14)
    assert ini.J_lower == ini.J_upper == 1.0
    assert np.all(ini.v0[np.abs(g.nodes) >= 5] == 0)
    assert bump(g).max() == pytest.approx(0.5 * math.exp(-1), rel=1e-12)


def _report(ell, L=50.0, N=2048):
    g = make_grid(L, N)
    par = PhysParams()
    p = density_power_law(1, ell, g)
    return check_assumptions(p, remark_initial_data(p, g, par), g, par)


def test_slow_decay_passes_everything():
    rep = _report(2.0)
    for a in ("H0", "H1", "H2", "HS", "HSLOW", "HSLOW2"):
        assert rep.passed(a), (a, rep.to_dict())
    assert not rep.hard_reject


def test_fast_decay_flags_h1_h2():
    rep = _report(4.0)
    assert rep.status("H1") == "diverging" and rep.status("H2") == "diverging"
    assert rep.status("HSLOW") == "diverging"


def test_constant_density_fails_mass_only():
    rep = _report(0.0)
    by_name = {c.name: c for c in rep.checks}
    assert by_name["rho0 in L1"].status == "diverging"
    assert by_name["rho0 in L1"].growth == pytest.approx(2.0, rel=1e-3)
    assert by_name["(1/sqrt(rho0))'"].status == "pass"
    assert by_name["(1/rho0)''"].status == "pass"


def test_table_with_zero_is_interior_vacuum(tmp_path):
    y = np.linspace(-12, 12, 97)
    rho = 1 / (1 + y**2)
    rho[48] = 0.0
    f = tmp_path / "rho.txt"
    np.savetxt(f, np.column_stack([y, rho]))
    with pytest.raises(InteriorVacuumError):
        load_profile_table(f, make_grid(10, 64))


def test_table_round_trip(tmp_path):
    y = np.linspace(-12, 12, 481)
    f = tmp_path / "rho.txt"
    np.savetxt(f, np.column_stack([y, 1 / (1 + y**2), np.sin(y)]))
    g = make_grid(10, 128)
    prof, v0 = load_profile_table(f, g)
    exact = density_power_law(1, 2, g)
    assert prof.approximate
    np.testing.assert_allclose(prof.rho0, exact.rho0, rtol=1e-5)
    np.testing.assert_allclose(prof.drho0, exact.drho0, atol=1e-4)
    np.testing.assert_allclose(v0, np.sin(g.nodes), atol=1e-5)
    np.savetxt(f, np.column_stack([y[::-1], 1 / (1 + y**2)]))
    with pytest.raises(ParameterError):
        load_profile_table(f, g)


def _initial(s0):
    return InitialData(np.ones(3), np.zeros(3), np.ones(3), None if s0 is None else np.full(3, s0))


def test_level_params_examples():
    par = PhysParams(R=1.0, A=1.0, kappa=1.0, c_v=1.0)  # gamma = 2
    lp = entropy_level_params(_initial(0.0), DecayConstants(2.0, 6.0, 1.0, 1.0), (1.0, 1.0), par, 1.0)
    assert lp.ell_lower0 == 0.0 and lp.ell_upper0 == 1.0
    assert lp.M_lower == pytest.approx(10.0, rel=1e-15)
    assert lp.M_upper == pytest.approx(6.0, rel=1e-15)


def test_level_params_formula_general():
    par = PhysParams(R=2 / 3, A=0.5, kappa=1.7, c_v=1.0)
    s_lo = -0.4
    lp = entropy_level_params(_initial(s_lo), DecayConstants(1.5, 2.5, 1, 1), (0.8, 1.1), par, 2.0)
    g = par.gamma
    expect = math.log(min(1, (par.A / par.R) * math.exp(s_lo)) / max(1, 2 ** (g - 2)))
    assert lp.ell_lower0 == expect
    assert lp.M_lower == pytest.approx(1.7 * (g - 1) * (1.5**2 + 2.5) / 0.8, rel=1e-14)
    assert lp.M_upper == pytest.approx(1.7 * (g - 1) * (abs(g - 2) * 1.5**2 + 2.5) / 0.8, rel=1e-14)


def test_level_params_errors():
    par = PhysParams()
    with pytest.raises(ParameterError):
        entropy_level_params(_initial(None), DecayConstants(1, 1, 1, 1), (1, 1), par, 1)
    with pytest.raises(ParameterError):
        entropy_level_params(_initial(0.0), DecayConstants(1, 1, 1, 1), (0.0, 1), par, 1)
