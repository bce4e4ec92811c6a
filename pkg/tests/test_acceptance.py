"""Acceptance criteria 1-11, each reported as one PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -s``; the lines are also
collected into the terminal summary of any pytest run.
"""
import json
import time
from fractions import Fraction as F

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from nosekam.cli import main
from nosekam.dynamics import (ThermostatParams, canonical_form, make_energy, make_field, rescale_state,
                              rescaled_time)
from nosekam.integrate import IntegratorConfig, implicit_midpoint_step, integrate_midpoint, midpoint_step_jacobian, \
    rk_adaptive_integrate
from nosekam.kamscan import ICGrid, RescaledModel, torus_fraction
from nosekam.mathcore import TorusPotential, UnitCovector
from nosekam.nondegen import degeneracy_locus, detA_closed, detB_closed, isoenergetic_det, kolmogorov_det, \
    rho_expansion
from nosekam.normalform import (build_chart_expansion, fgen_numeric, g1_series, normal_form, remainder_scaling,
                                variable_mass_relations)


def record(k: int, ok: bool, detail: str) -> None:
    line = f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[k] = line
    print(line)
    assert ok, line


def test_criterion_01_constant_mass_normal_form(capsys, tmp_path):
    t0 = time.perf_counter()
    code = main(["normal-form", "--a", "0", "--b", "0", "--out", str(tmp_path)])
    rep = json.loads(capsys.readouterr().out)
    dt = time.perf_counter() - t0
    nu = rep["nu"]
    want = {"alpha": "-11/24", "beta_scalar": "1", "gamma_par": "1", "gamma_perp": "-1/2"}
    want_nu = {"x^3*U": "55/144", "x^2*U": "-5/6", "x^2*U*c": "-5/6", "U^3": "-5/18", "x*U^3": "233/288",
               "U^3*c": "-5/9"}
    bad = [k for k, v in want.items() if rep[k] != v] + [k for k, v in want_nu.items() if nu.get(k) != v]
    with capsys.disabled():
        record(1, code == 0 and not bad and dt < 10, f"mismatches={bad} runtime={dt:.2f}s")


def test_criterion_02_variable_mass_oracle(capsys):
    t0 = time.perf_counter()
    bad = {"i": [], "ii": [], "iii": []}
    for a in range(-2, 3):
        for b in range(-2, 3):
            nf = normal_form(a, b)
            beta, b_rel, gpar, gperp = variable_mass_relations(a, nf.alpha)
            if nf.beta_scalar != beta:
                bad["i"].append((a, b))
            if b_rel != b:
                bad["ii"].append((a, b))
            if (nf.gamma_par, nf.gamma_perp) != (gpar, gperp):
                bad["iii"].append((a, b))
    dt = time.perf_counter() - t0
    ok = not any(bad.values()) and dt < 120
    detail = ", ".join(f"({k}) {25 - len(v)}/25" for k, v in bad.items()) + f" runtime={dt:.1f}s"
    if bad["iii"]:
        detail += f"; item (iii) differs at a in {sorted({p[0] for p in bad['iii']})} (see ledger)"
    with capsys.disabled():
        record(2, ok, detail)


def test_criterion_03_determinants(capsys):
    nf = normal_form(0, 0)
    bad = []
    for n in (1, 2, 3):
        C = UnitCovector.axis(n)
        if kolmogorov_det(nf, F(0), F(0), C)["full"] != F(-1, 12):
            bad.append(f"kolmogorov n={n}")
        if isoenergetic_det(nf, F(0), F(0), C)["full"] != F(-1, 12):
            bad.append(f"isoenergetic n={n}")
    C = UnitCovector.axis(2)
    args = (nf.alpha, nf.beta_scalar, nf.gamma_par)
    if rho_expansion(nf, "B_W", C) != detB_closed(*args):
        bad.append("det(B|W)")
    if rho_expansion(nf, "A_V", C) != detA_closed(*args):
        bad.append("det(A|V)")
    with capsys.disabled():
        record(3, not bad, f"mismatches={bad}; det(B|W) = {[str(x) for x in rho_expansion(nf, 'B_W', C)]}")


def test_criterion_04_g1(capsys):
    want = {(1, 0): -1, (2, 0): -1, (0, 1): F(1, 2), (1, 1): 1, (3, 0): F(-4, 3), (0, 2): F(-1, 4),
            (2, 1): 2, (4, 0): -2}
    got = dict(g1_series(4).coeffs)
    with capsys.disabled():
        record(4, got == want, f"{len(want)} coefficients, equal={got == want}")


def test_criterion_05_chart_expansion(capsys):
    p = build_chart_expansion((0, 0)).poly
    want = {(0, 2, 2, 0): 2, (0, 2, 0, 1): F(-1, 2), (0, 2, 1, 0): 1, (0, 2, 0, 0): F(1, 2),
            (4, 0, 0, 0): F(9, 4), (3, 0, 0, 0): F(5, 3), (2, 0, 0, 0): 1}
    got = {k: v for k, v in p.coeffs.items() if k != (0, 0, 0, 0)}
    bad_general = [(a, b) for a in range(-2, 3) for b in range(-2, 3)
                   if build_chart_expansion((a, b)).poly.coeff((0, 2, 2, 0)) != F(8 + b - 5 * a, 4)]
    ok = got == want and p.constant == F(1, 2) and not bad_general
    with capsys.disabled():
        record(5, ok, f"constant-mass equal={got == want}; U^2c^2 mismatches over 25 (a,b): {bad_general}")


def test_criterion_06_remainder_scaling(capsys):
    t0 = time.perf_counter()
    _, errs, slope = remainder_scaling(normal_form(0, 0), UnitCovector.axis(2), radii=np.geomspace(1e-3, 1e-1, 9))
    dt = time.perf_counter() - t0
    with capsys.disabled():
        record(6, abs(slope - 5) <= 0.5 and dt < 60, f"slope={slope:.3f} runtime={dt:.1f}s")


def _complex_step_jacobian(f, z, h=1e-30):
    cols = []
    for i in range(z.size):
        zc = z.astype(complex)
        zc[i] += 1j * h
        cols.append(np.imag(f(zc)) / h)
    return np.array(cols).T


def test_criterion_07_symplecticity(capsys):
    rng = np.random.default_rng(2024)
    n = 2
    Om = canonical_form(n, "rescaled")
    C = UnitCovector.normalized([0.8, -0.6])
    # (u, v, U, V) reordered to the (v, V, u, U) layout of the output chart
    perm = [1, 2, 4, 5, 0, 3]

    def fgen(z):
        return fgen_numeric(z[0], z[1:3], z[3], z[4:6], C, check=False)

    pr = ThermostatParams(n, M=2.0, kT_eff=3.0)
    Jr = np.array([rescale_state(e, pr) for e in np.eye(2 * n + 2)]).T
    err_fgen = err_rescale = err_mid = 0.0
    V = TorusPotential.cosine(n)
    field = make_field("rescaled", ThermostatParams(n), V, beta=0.5)
    cfg = IntegratorConfig(newton_tol=1e-14)
    for _ in range(100):
        z = np.concatenate([[rng.uniform(-0.3, 0.3)], rng.uniform(-1, 1, n), [rng.uniform(-0.3, 0.3)],
                            rng.uniform(-0.3, 0.3, n)])
        J = _complex_step_jacobian(fgen, z)[:, perm]
        err_fgen = max(err_fgen, np.max(np.abs(J.T @ Om @ J - Om)))
        err_rescale = max(err_rescale, np.max(np.abs(Jr.T @ Om @ Jr - Om)))
        y = np.concatenate([rng.uniform(0, 1, n), rng.uniform(-1, 1, n), [rng.uniform(0.7, 1.5)],
                            [rng.uniform(-0.5, 0.5)]])
        y1 = implicit_midpoint_step(field, y, 0.05, cfg)
        Jm = midpoint_step_jacobian(field, y, y1, 0.05)
        err_mid = max(err_mid, np.max(np.abs(Jm.T @ Om @ Jm - Om)))
    ok = err_fgen < 1e-9 and err_rescale < 1e-9 and err_mid < 1e-8
    with capsys.disabled():
        record(7, ok, f"fgen={err_fgen:.1e} rescale={err_rescale:.1e} midpoint={err_mid:.1e}")


def test_criterion_08_conservation(capsys):
    pr = ThermostatParams(1)
    Z = TorusPotential.zero(1)
    y0 = np.array([0.0, 1.0, 1.05, 0.0])
    orb = integrate_midpoint(make_field("rescaled", pr, Z), y0, 1e-3, 100_000, energy=make_energy("rescaled", pr, Z),
                             sample_every=100, positive=[2])
    drift = float(np.max(np.abs(orb.energy - orb.energy[0])))
    dW = float(np.max(np.abs(orb.y[:, 1] - y0[1])))
    with capsys.disabled():
        record(8, len(orb) == 1001 and drift < 1e-8 and dW <= 1e-12,
               f"steps=1e5 drift={drift:.2e} max|dW|={dW:.1e}")


def test_criterion_09_time_rescaling(capsys):
    V = TorusPotential.cosine(1, 0.5)
    cfg = IntegratorConfig(rk_rel_tol=1e-12, rk_abs_tol=1e-14)
    y_ext = np.array([0.1, 0.7, 0.9, 0.2])
    worst = {}
    for T in (1.0, 4.0, 25.0):
        pr = ThermostatParams(1, M=1.0, kT_eff=T)
        ts = np.linspace(0.0, 10.0, 51)
        nose = rk_adaptive_integrate(make_field("nose", pr, V), y_ext, (0, 10), cfg, t_eval=ts)
        resc = rk_adaptive_integrate(make_field("rescaled", ThermostatParams(1), V, beta=1.0 / T),
                                     rescale_state(y_ext, pr), (0, rescaled_time(10.0, pr)), cfg,
                                     t_eval=[rescaled_time(t, pr) for t in ts])
        mapped = np.array([rescale_state(y, pr) for y in nose.y])
        worst[T] = float(np.max(np.abs(mapped - resc.y)))
    with capsys.disabled():
        record(9, max(worst.values()) < 1e-6, " ".join(f"T={T:g}:{e:.1e}" for T, e in worst.items()))


@pytest.mark.slow
def test_criterion_10_kam_suite(capsys):
    V = TorusPotential.cosine(1)
    grid = ICGrid(shape=(20, 20))
    t0 = time.perf_counter()
    frac = {beta: torus_fraction(RescaledModel(beta, V), grid) for beta in (0.0, 1e-3, 1.0)}
    dt = time.perf_counter() - t0
    f0, f1, f2 = (frac[b].fraction for b in (0.0, 1e-3, 1.0))
    ok = f0 == 1.0 and f1 >= 0.9 and f1 > f2 and dt <= 900
    detail = (f"(a) beta=0: {f0:.4f}  (b) beta=1e-3: {f1:.4f}  (c) beta=1: {f2:.4f} "
              f"counts(beta=1)={frac[1.0].counts()}  runtime={dt:.0f}s")
    with capsys.disabled():
        record(10, ok, detail)


def test_criterion_11_degeneracy_locus(capsys):
    L = degeneracy_locus()
    p = L.points[0] if L.points else {}
    ok = L.count == 1 and not L.remark_consistent
    detail = (f"points={L.count} (a, b, alpha, beta, gamma_par, gamma_perp) = "
              f"({p.get('a')}, {p.get('b')}, {p.get('alpha')}, {p.get('beta_scalar')}, {p.get('gamma_par')}, "
              f"{p.get('gamma_perp')}); stated b=-8 disagrees: OPEN question, not a failure")
    with capsys.disabled():
        record(11, ok, detail)
