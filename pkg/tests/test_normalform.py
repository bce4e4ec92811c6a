from fractions import Fraction as F

import mpmath
import numpy as np
import pytest

from nosekam.dynamics import MassProfile, ThermostatParams, canonical_form, rescaled_energy
from nosekam.mathcore import FlatMetric, TorusPotential, UnitCovector
from nosekam.normalform import (SingularChartError, alpha_from_b, build_chart_expansion, direct_F0, fgen_numeric,
                                g1_series, normal_form, remainder_scaling, variable_mass_relations)
from nosekam.series import GradedPoly, compose, std_series
from nosekam.series import VarTable


@pytest.fixture(scope="module")
def nf00():
    return normal_form(0, 0)


def test_constant_mass_scalars(nf00):
    assert (nf00.alpha, nf00.beta_scalar, nf00.gamma_par, nf00.gamma_perp) == (F(-11, 24), 1, 1, F(-1, 2))
    assert nf00.residual_ok


def test_constant_mass_generator(nf00):
    # monomials in (x, U, c, m)
    expected = {
        (3, 1, 0, 0): F(55, 144), (2, 1, 0, 0): F(-5, 6), (2, 1, 1, 0): F(-5, 6),
        (0, 3, 0, 0): F(-5, 18), (1, 3, 0, 0): F(233, 288), (0, 3, 1, 0): F(-5, 9),
    }
    for mono, cf in expected.items():
        assert nf00.nu.coeff(mono) == cf


def test_normal_form_shape(nf00):
    # G0_nf = I (1 + alpha I + beta cJ + gamma terms) and nothing else
    assert set(nf00.G0_nf.coeffs) == {(1, 0, 0), (2, 0, 0), (1, 1, 0), (1, 0, 1), (1, 2, 0)}
    assert nf00.G0_nf.coeff((1, 0, 0)) == 1


def test_chart_expansion_constant_mass():
    ce = build_chart_expansion((0, 0))
    p = ce.poly
    assert p.constant == F(1, 2)
    U2 = {(0, 2, 2, 0): 2, (0, 2, 0, 1): F(-1, 2), (0, 2, 1, 0): 1, (0, 2, 0, 0): F(1, 2)}
    upart = {(4, 0, 0, 0): F(9, 4), (3, 0, 0, 0): F(5, 3), (2, 0, 0, 0): 1}
    assert {k: v for k, v in p.coeffs.items() if k != (0, 0, 0, 0)} == {**U2, **upart}


def test_std_series_f0_example():
    u = std_series(-2, 4)
    lhs = F(1, 2) * u + std_series("log1m", 4)
    x = GradedPoly.var(u.vars, 4, u.vars.names[0])
    assert lhs == F(1, 2) + x * x * (1 + F(5, 3) * x + F(9, 4) * x * x)


@pytest.mark.parametrize("a,b", [(1, 0), (-2, 1), (F(1, 2), F(-3, 2))])
def test_chart_expansion_general_entries(a, b):
    p = build_chart_expansion((a, b)).poly
    a, b = F(a), F(b)
    assert p.coeff((1, 2, 0, 0)) == -a / 2
    assert p.coeff((1, 2, 1, 0)) == (b - a) / 2
    assert p.coeff((0, 2, 2, 0)) == (8 + b - 5 * a) / 4
    assert p.coeff((2, 2, 0, 0)) == b / 4


def _taylor_U2c(a, b):
    """U^2 c coefficient of F0 o fgen for n=1, by 40-digit numerical differentiation."""
    prof = MassProfile.polynomial(a, b, domain=(0.9, 1.1))
    C = UnitCovector.axis(1)
    with mpmath.workdps(40):
        f = lambda U, V: direct_F0(mpmath.mpf(0), [mpmath.mpf(0)], U, [V], C, prof)
        return float(mpmath.diff(f, (0, 0), (2, 1)) / 2)


@pytest.mark.parametrize("a,b", [(1, 0), (-1, 2), (2, -2)])
def test_U2c_coefficient_against_numerical_taylor(a, b):
    p = build_chart_expansion((a, b)).poly
    assert float(p.coeff((0, 2, 1, 0))) == pytest.approx(_taylor_U2c(a, b), abs=1e-20)
    assert p.coeff((0, 2, 1, 0)) == (2 - F(a)) / 2


GRID = [(a, b) for a in range(-2, 3) for b in range(-2, 3)]


@pytest.fixture(scope="module")
def grid_solutions():
    return {ab: normal_form(*ab) for ab in GRID}


@pytest.mark.parametrize("ab", GRID)
def test_variable_mass_items_i_ii(grid_solutions, ab):
    a, b = ab
    nf = grid_solutions[ab]
    beta, b_pred, _, gperp = variable_mass_relations(a, nf.alpha)
    assert nf.residual_ok
    assert nf.beta_scalar == beta == 1 - F(a, 2)
    assert b_pred == b
    assert nf.gamma_perp == gperp


@pytest.mark.parametrize("ab", GRID)
def test_variable_mass_gamma_par_solver_form(grid_solutions, ab):
    # the form confirmed by the remainder-slope oracle below: a^2/4 in place of a^2/2
    a, _ = ab
    nf = grid_solutions[ab]
    assert nf.gamma_par == nf.gamma_perp + 4 * nf.alpha + F(a * a, 4) - 2 * a + F(10, 3)


def test_remainder_slope_confirms_variable_mass_solution():
    nf = normal_form(1, 0)
    C = UnitCovector.axis(1)
    radii = np.geomspace(1e-3, 1e-1, 5)
    _, _, slope = remainder_scaling(nf, C, radii=radii, n_dirs=4, dps=40)
    assert 4.5 <= slope <= 5.5


def test_relations_examples():
    assert variable_mass_relations(0, F(-11, 24)) == (1, 0, 1, F(-1, 2))
    beta, b, gpar, gperp = variable_mass_relations(2, F(-1, 3))
    assert (beta, gpar, gperp, b) == (0, 0, 0, -2)
    assert variable_mass_relations(2, F(7, 5))[0] == 0
    assert alpha_from_b(2, -2) == F(-1, 3)


def test_a2_candidate_solver():
    nf = normal_form(2, -2)
    assert nf.alpha == F(-1, 3) and nf.beta_scalar == 0 and nf.gamma_perp == 0
    # solver value; the closed form with a^2/2 would give 0 here
    assert nf.gamma_par == -1


def test_truncation_consistency():
    nf3 = normal_form(0, 0, N=3)
    nf4 = normal_form(0, 0, N=4)
    assert nf3.alpha is None and nf3.gamma_par is None
    assert nf3.beta_scalar is None or nf3.beta_scalar == nf4.beta_scalar
    for e, c in nf3.nu.coeffs.items():
        assert nf4.nu.coeff(e) == c
    assert all(nf3.nu.vars.degree(e) <= 3 for e in nf3.nu.coeffs)


def test_g1_series():
    g = g1_series(4)
    expected = {(1, 0): -1, (2, 0): -1, (0, 1): F(1, 2), (1, 1): 1, (3, 0): F(-4, 3),
                (0, 2): F(-1, 4), (2, 1): 2, (4, 0): -2}
    assert dict(g.coeffs) == expected
    assert g.constant == 0


def test_g1_series_by_composition():
    # independent route: substitute t = 2 cJ - mJ into ln(1-t)/2
    vt = VarTable(("cJ", "mJ"), (1, 2))
    cJ, mJ = GradedPoly.gens(vt, 4)
    half_log = F(1, 2) * std_series("log1m", 4, "t")
    assert compose(half_log, {"t": 2 * cJ - mJ}).coeffs == g1_series(4).coeffs


def test_fgen_maps_onto_equilibrium():
    C = UnitCovector.normalized([0.6, 0.8])
    y = fgen_numeric(0.0, np.array([0.1, -0.3]), 0.0, np.zeros(2), C)
    assert np.allclose(y, [-0.1, 0.3, 0.6, 0.8, 1.0, 0.0], atol=1e-15)


def test_fgen_singular():
    C = UnitCovector.axis(2)
    with pytest.raises(SingularChartError):
        fgen_numeric(0.0, np.zeros(2), 0.1, C.components, C)
    with pytest.raises(SingularChartError):
        fgen_numeric(1.0, np.zeros(2), 0.1, np.zeros(2), C)


def _fgen_jacobian(z, C, n, h=1e-30):
    cols = []
    for i in range(z.size):
        zc = z.astype(complex)
        zc[i] += 1j * h
        u, v, U, V = zc[0], zc[1:1 + n], zc[1 + n], zc[2 + n:]
        cols.append(np.imag(fgen_numeric(u, v, U, V, C, check=False)) / h)
    return np.array(cols).T


def test_fgen_is_canonical():
    rng = np.random.default_rng(11)
    n = 2
    C = UnitCovector.normalized([1.0, 0.5], FlatMetric(np.array([[1.2, 0.1], [0.1, 0.9]])))
    # reorder (u, v, U, V) to (v, V, u, U) to match the (w, W, sigma, Sigma) layout
    perm = [1, 2, 4, 5, 0, 3]
    Om = canonical_form(n, "rescaled")
    for _ in range(100):
        z = np.concatenate([[rng.uniform(-0.3, 0.3)], rng.uniform(-1, 1, n), [rng.uniform(-0.3, 0.3)],
                            rng.uniform(-0.3, 0.3, n)])
        J = _fgen_jacobian(z, C, n)[:, perm]
        assert np.max(np.abs(J.T @ Om @ J - Om)) < 1e-9


def test_chart_expansion_matches_direct_evaluation():
    ce = build_chart_expansion((0, 0))
    C = UnitCovector.axis(1)
    pr = ThermostatParams(1)
    Z = TorusPotential.zero(1)
    rng = np.random.default_rng(5)
    for r in (0.05, 0.025):
        for _ in range(5):
            u, U, V = r * rng.uniform(-1, 1, 3)
            direct = rescaled_energy(fgen_numeric(u, np.zeros(1), U, np.array([V]), C), 0.0, pr, Z)
            # ln|C - V| belongs to G1 and is kept out of the chart expansion
            direct -= np.log(abs(1.0 - V))
            series = ce.poly.evaluate_float([u, U, V, V * V])
            assert abs(direct - series) < 40 * r ** 5
