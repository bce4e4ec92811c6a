"""Birkhoff-like normal form of the thermostated free particle near the torus lambda.

Pipeline: :func:`build_chart_expansion` Taylor-expands ``G0`` in the chart
``(u, v, U, V)`` produced by the first generating function, then
:func:`solve_nf` finds the second generating function

    nu(U, V; x, y) = x U + <y, V> + R(x, U, <C,V>, |V|^2)

together with the coefficients of the postulated normal form
``I (1 + alpha I + <beta, J> + <gamma J, J>)`` with ``I = x^2 + X^2/2`` and
``J = Y = V``.  The mixed-variable relations ``u = dnu/dU`` and
``X = dnu/dx`` are explicit in ``(x, U, V)``, so the defining identity

    G0(x + R_U, U, V) = G0(lambda) + Gnf(x^2 + (U + R_x)^2 / 2, V)

is imposed directly in the mixed variables, degree by degree.

Vector variables are scalarized: ``c = <C, V>`` (weight 1) and
``m = |V|^2`` (weight 2).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

import mpmath
import numpy as np

from .dynamics import MassProfile, RescaledState, DomainError
from .mathcore import FlatMetric, UnitCovector
from .series import GradedPoly, VarTable, compose, solve_triangular, std_series, univariate

CHART_VARS = VarTable(("u", "U", "c", "m"), (1, 1, 1, 2))
MIXED_VARS = VarTable(("x", "U", "c", "m"), (1, 1, 1, 2))
ACTION_VARS = VarTable(("I", "cJ", "mJ"), (2, 1, 2))
G1_VARS = VarTable(("cJ", "mJ"), (1, 2))


class SingularChartError(ValueError):
    """Point on ``V = C`` or with ``u >= 1``, where the chart degenerates."""


@dataclass(frozen=True)
class ChartExpansion:
    """Truncated ``G0`` in ``(u, U, c, m)``, constant term kept."""

    poly: GradedPoly
    a: Fraction
    b: Fraction
    higher: tuple[Fraction, ...] = ()
    generator: str = "phi(Sigma,W;u,v) = (1-u)|W| Sigma + <C-W, v>"

    @property
    def N(self) -> int:
        return self.poly.N


@dataclass(frozen=True)
class NormalFormCoeffs:
    """Solved normal form.  Scalar fields are ``None`` when ``N`` is too low to fix them."""

    a: Fraction
    b: Fraction
    N: int
    alpha: Fraction | None
    beta_scalar: Fraction | None
    gamma_par: Fraction | None
    gamma_perp: Fraction | None
    nu: GradedPoly
    G0_nf: GradedPoly
    G1_nf: GradedPoly
    constant: Fraction
    residual_ok: bool
    nf_terms: Mapping[str, Fraction] = field(default_factory=dict)
    # cyclic angles never enter the normal form
    angles: tuple[str, str] = ("theta", "eta")

    def report(self) -> dict:
        s = lambda x: None if x is None else str(x)
        return {
            "a": str(self.a),
            "b": str(self.b),
            "N": self.N,
            "alpha": s(self.alpha),
            "beta_scalar": s(self.beta_scalar),
            "gamma_par": s(self.gamma_par),
            "gamma_perp": s(self.gamma_perp),
            "nu": {_mono_name(MIXED_VARS, e): str(c) for e, c in self.nu.sorted_terms()},
            "nu_note": "plus <y, V>; c = <C,V>, m = |V|^2",
            "G0_nf": str(self.G0_nf),
            "G1_nf": str(self.G1_nf),
            "G0_constant": str(self.constant),
            "residual_ok": self.residual_ok,
        }


def _mono_name(vt: VarTable, e) -> str:
    return "*".join(n if p == 1 else f"{n}^{p}" for n, p in zip(vt.names, e) if p) or "1"


def _lift(poly_u: GradedPoly, image: GradedPoly) -> GradedPoly:
    return compose(poly_u, {poly_u.vars.names[0]: image})


def build_chart_expansion(profile: MassProfile | tuple = (0, 0), N: int = 4) -> ChartExpansion:
    """Expand ``1/2 (1-u)^-2 + ln(1-u) + 1/2 Omega((1-u)|C-V|) U^2 / |C-V|^2``.

    ``profile`` is a :class:`MassProfile` or an ``(a, b)`` pair.  Constant
    profiles are ``Omega = 1`` in the rescaled chart.
    """
    if N < 4:
        # lower N only truncates; the expansion itself needs nothing special
        pass
    if isinstance(profile, MassProfile):
        if profile.kind == "constant":
            a, b, higher = Fraction(0), Fraction(0), ()
        else:
            a, b, higher = profile.a, profile.b, profile.higher
    else:
        a, b = map(Fraction, profile)
        higher = ()
    u, U, c, m = GradedPoly.gens(CHART_VARS, N)
    one = GradedPoly.const(CHART_VARS, N, 1)
    t = 2 * c - m  # 1 - |C-V|^2
    inv_norm2 = _lift(std_series(-1, N, "t"), t)
    norm = _lift(std_series(Fraction(1, 2), N, "t"), t)
    kinetic = _lift(std_series("powneg2", N), u).scale(Fraction(1, 2))
    log_part = _lift(std_series("log1m", N), u)
    d = (one - u) * norm - 1  # sigma - 1
    omega = _lift(univariate([1, a, b / 2, *higher], N, "d"), d)
    thermo = omega * U * U * inv_norm2
    G0 = kinetic + log_part + thermo.scale(Fraction(1, 2))
    return ChartExpansion(G0, a, b, tuple(higher))


def g1_series(N: int = 4) -> GradedPoly:
    """``1/2 ln(1 - t)`` with ``t = 2<C,J> - |J|^2``, in ``(cJ, mJ)``."""
    cJ, mJ = GradedPoly.gens(G1_VARS, N)
    half_log = std_series("log1m", N, "t").scale(Fraction(1, 2))
    return compose(half_log, {"t": 2 * cJ - mJ})


def _nu_unknowns(N: int) -> dict[str, tuple[int, ...]]:
    names = {}
    for d in range(3, N + 1):
        for e in MIXED_VARS.monomials(d):
            if e[1] % 2 == 1:
                names[f"nu[{_mono_name(MIXED_VARS, e)}]"] = e
    return names


def _nf_unknowns(N: int) -> dict[str, tuple[int, ...]]:
    names = {}
    for d in range(3, N + 1):
        for e in ACTION_VARS.monomials(d):
            if e[0] >= 1:
                names[f"nf[{_mono_name(ACTION_VARS, e)}]"] = e
    return names


def _assemble(ce: ChartExpansion, nu_names, nf_names, assignment):
    N = ce.N
    x, U, c, m = GradedPoly.gens(MIXED_VARS, N)
    R = GradedPoly(MIXED_VARS, N, {e: assignment[k] for k, e in nu_names.items()})
    nf = GradedPoly(ACTION_VARS, N, {(1, 0, 0): 1, **{e: assignment[k] for k, e in nf_names.items()}})
    return x, U, c, m, R, nf


def _residual(ce: ChartExpansion, nu_names, nf_names):
    def residual(assignment):
        x, U, c, m, R, nf = _assemble(ce, nu_names, nf_names, assignment)
        lhs = compose(ce.poly, {"u": x + R.diff("U"), "U": U, "c": c, "m": m})
        X = U + R.diff("x")
        I = x * x + (X * X).scale(Fraction(1, 2))
        rhs = compose(nf, {"I": I, "cJ": c, "mJ": m}) + ce.poly.constant
        return lhs - rhs
    return residual


def solve_nf(ce: ChartExpansion) -> NormalFormCoeffs:
    """Solve for ``nu`` and the normal-form coefficients through degree ``N``.

    ``R`` ranges over monomials odd in ``U``: ``G0`` is even in ``U`` and the
    homological operator ``2x d/dU - U d/dx`` is injective on that space,
    which makes each degree block uniquely solvable.
    """
    N = ce.N
    nu_names = _nu_unknowns(N)
    nf_names = _nf_unknowns(N)
    unknowns = {k: MIXED_VARS.degree(e) for k, e in nu_names.items()}
    unknowns.update({k: ACTION_VARS.degree(e) for k, e in nf_names.items()})
    residual = _residual(ce, nu_names, nf_names)
    sol = solve_triangular(unknowns, residual)
    x, U, c, m, R, nf = _assemble(ce, nu_names, nf_names, sol)
    residual_ok = residual(sol).is_zero()

    def get(*exp):
        return nf.coeff(exp) if ACTION_VARS.degree(exp) <= N else None

    alpha = get(2, 0, 0)
    beta = get(1, 1, 0)
    gamma_perp = get(1, 0, 1)
    gamma_par = None if gamma_perp is None else get(1, 2, 0) + gamma_perp
    nu = x * U + R
    return NormalFormCoeffs(
        a=ce.a, b=ce.b, N=N, alpha=alpha, beta_scalar=beta, gamma_par=gamma_par, gamma_perp=gamma_perp,
        nu=nu, G0_nf=nf, G1_nf=g1_series(N), constant=ce.poly.constant, residual_ok=residual_ok,
        nf_terms={_mono_name(ACTION_VARS, e): cf for e, cf in nf.sorted_terms()},
    )


def normal_form(a=0, b=0, N: int = 4) -> NormalFormCoeffs:
    return solve_nf(build_chart_expansion((a, b), N))


def variable_mass_relations(a, alpha) -> tuple[Fraction, Fraction, Fraction, Fraction]:
    """Closed-form ``(beta_scalar, b, gamma_par, gamma_perp)`` from ``(a, alpha)``."""
    a, alpha = Fraction(a), Fraction(alpha)
    beta = 1 - a / 2
    b = 16 * alpha + Fraction(3, 2) * a**2 - 5 * a + Fraction(22, 3)
    gamma_perp = (a - 2) / 4
    gamma_par = gamma_perp + 4 * alpha + a**2 / 2 - 2 * a + Fraction(10, 3)
    return beta, b, gamma_par, gamma_perp


def alpha_from_b(a, b) -> Fraction:
    """Invert the ``b``-relation for ``alpha``."""
    a, b = Fraction(a), Fraction(b)
    return (b - Fraction(3, 2) * a**2 + 5 * a - Fraction(22, 3)) / 16


def coeffs_from_relations(a, b, N: int = 4) -> NormalFormCoeffs:
    """Normal form assembled from the closed-form relations, without a solve.

    Only the ``G0_nf``/``G1_nf`` parts are filled; ``nu`` is left zero.
    """
    a, b = Fraction(a), Fraction(b)
    alpha = alpha_from_b(a, b)
    beta, _, gpar, gperp = variable_mass_relations(a, alpha)
    return nf_from_scalars(alpha, beta, gpar, gperp, N=N, a=a, b=b)


def nf_from_scalars(alpha, beta, gamma_par, gamma_perp, N: int = 4, a=0, b=0) -> NormalFormCoeffs:
    """Normal form with prescribed scalarized coefficients (used for candidate scans)."""
    alpha, beta, gamma_par, gamma_perp = map(Fraction, (alpha, beta, gamma_par, gamma_perp))
    nf = GradedPoly(ACTION_VARS, N, {
        (1, 0, 0): 1, (2, 0, 0): alpha, (1, 1, 0): beta,
        (1, 0, 1): gamma_perp, (1, 2, 0): gamma_par - gamma_perp,
    })
    return NormalFormCoeffs(
        a=Fraction(a), b=Fraction(b), N=N, alpha=alpha, beta_scalar=beta, gamma_par=gamma_par,
        gamma_perp=gamma_perp, nu=GradedPoly.zero(MIXED_VARS, N), G0_nf=nf, G1_nf=g1_series(N),
        constant=Fraction(1, 2), residual_ok=True,
    )


# ---------------------------------------------------------------------------
# numerical charts

def fgen_map(N: int = 4) -> dict[str, GradedPoly]:
    """Scalar part of the first canonical change as series in ``(u, U, c, m)``.

    Keys: ``sigma``, ``Sigma``, ``W_C = <C, W>`` and ``W_sq = |W|^2``.
    """
    u, U, c, m = GradedPoly.gens(CHART_VARS, N)
    one = GradedPoly.const(CHART_VARS, N, 1)
    t = 2 * c - m
    norm = _lift(std_series(Fraction(1, 2), N, "t"), t)
    inv_norm = _lift(std_series(Fraction(-1, 2), N, "t"), t)
    return {
        "sigma": (one - u) * norm,
        "Sigma": -(U * inv_norm),
        "W_C": one - c,
        "W_sq": one - t,
    }


def fgen_numeric(u, v, U, V, C: UnitCovector, *, check: bool = True) -> np.ndarray:
    """``(u, v, U, V) -> (w, W, sigma, Sigma)`` generated by
    ``phi(Sigma, W; u, v) = (1-u)|W| Sigma + <C - W, v>``.

    Returns a flat rescaled-chart array.  Works with complex inputs so
    complex-step Jacobians can be taken.
    """
    g = C.metric
    v = np.atleast_1d(v)
    V = np.atleast_1d(V)
    W = C.components - V
    n2 = W @ g.ginv @ W
    if check and (abs(n2) < 1e-24 or np.real(u) >= 1):
        raise SingularChartError("fgen is singular on V = C and for u >= 1")
    nrm = np.sqrt(n2)
    sigma = (1 - u) * nrm
    Sigma = -U / nrm
    w = -v - (1 - u) * U * (g.ginv @ W) / n2
    return np.concatenate([w, W, [sigma, Sigma]])


def fgen_state(u, v, U, V, C: UnitCovector) -> RescaledState:
    y = fgen_numeric(u, v, U, V, C)
    n = C.dim
    return RescaledState.from_array(y, n)


def _nu_parts(nf: NormalFormCoeffs):
    R = nf.nu - GradedPoly.var(MIXED_VARS, nf.N, "x") * GradedPoly.var(MIXED_VARS, nf.N, "U")
    return R, R.diff("x"), R.diff("U"), R.diff("c"), R.diff("m")


def nf_to_chart(x, X, y, Y, nf: NormalFormCoeffs, C: UnitCovector, *, newton_tol=None):
    """Map normal-form coordinates ``(x, y, X, Y)`` to ``(u, v, U, V)``.

    Solves ``X = U + R_x(x, U, c, m)`` for ``U`` by Newton iteration; works on
    floats or ``mpmath`` numbers.
    """
    g = C.metric
    Y = list(Y)
    Cc = list(C.components)
    ginv = g.ginv
    n = len(Y)
    cval = sum(Cc[i] * ginv[i, j] * Y[j] for i in range(n) for j in range(n))
    mval = sum(Y[i] * ginv[i, j] * Y[j] for i in range(n) for j in range(n))
    R, Rx, RU, Rc, Rm = _nu_parts(nf)
    RxU = Rx.diff("U")
    tol = newton_tol if newton_tol is not None else (mpmath.mpf(10) ** (-mpmath.mp.dps + 5) if isinstance(X, mpmath.mpf) else 1e-15)
    Uv = X
    for _ in range(100):
        pt = (x, Uv, cval, mval)
        f = Uv + Rx.evaluate(pt) - X
        step = f / (1 + RxU.evaluate(pt))
        Uv = Uv - step
        if abs(step) <= tol * (1 + abs(Uv)):
            break
    pt = (x, Uv, cval, mval)
    u = x + RU.evaluate(pt)
    rc, rm = Rc.evaluate(pt), Rm.evaluate(pt)
    # dR/dV as a vector: R_c g^-1 C + 2 R_m g^-1 V, paired with v
    v = [y[i] + rc * sum(ginv[i, j] * Cc[j] for j in range(n)) + 2 * rm * sum(ginv[i, j] * Y[j] for j in range(n))
         for i in range(n)]
    return u, v, Uv, Y


def direct_F0(u, v, U, V, C: UnitCovector, profile: MassProfile | None = None):
    """``F0 = |W/sigma|^2/2 + Omega(sigma) Sigma^2/2 + ln sigma`` after ``fgen``, in mpmath."""
    g = C.metric
    n = C.dim
    Cc = [mpmath.mpf(float(x)) for x in C.components]
    W = [Cc[i] - V[i] for i in range(n)]
    n2 = sum(W[i] * mpmath.mpf(g.ginv[i, j]) * W[j] for i in range(n) for j in range(n))
    nrm = mpmath.sqrt(n2)
    sigma = (1 - u) * nrm
    Sigma = -U / nrm
    coeffs = profile.coefficients if profile is not None and profile.kind == "polynomial" else [Fraction(1)]
    d = sigma - 1
    omega = sum(mpmath.mpf(cf.numerator) / cf.denominator * d**j for j, cf in enumerate(coeffs))
    return n2 / sigma**2 / 2 + omega * Sigma**2 / 2 + mpmath.log(sigma)


def nf_value(x, X, Y, nf: NormalFormCoeffs, C: UnitCovector):
    """``G0(lambda) + G0_nf + G1_nf`` at ``(x, X, Y)``."""
    g = C.metric
    n = C.dim
    Cc = list(C.components)
    cval = sum(Cc[i] * g.ginv[i, j] * Y[j] for i in range(n) for j in range(n))
    mval = sum(Y[i] * g.ginv[i, j] * Y[j] for i in range(n) for j in range(n))
    I = x * x + X * X / 2
    return nf.constant + nf.G0_nf.evaluate((I, cval, mval)) + nf.G1_nf.evaluate((cval, mval))


def remainder_scaling(nf: NormalFormCoeffs, C: UnitCovector, radii=None, n_dirs: int = 8, seed: int = 0,
                      profile: MassProfile | None = None, dps: int = 60):
    """Compare the composed normal form with ``F0`` evaluated directly.

    For each radius ``r`` and random unit direction ``d`` in ``(x, X, Y)``,
    records ``|F0(fgen(nf_to_chart(r d))) - nf_value(r d)|``.  Returns
    ``(radii, mean_errors, slope)`` with the log-log least-squares slope.
    """
    if radii is None:
        radii = np.geomspace(1e-3, 1e-1, 9)
    rng = np.random.default_rng(seed)
    n = C.dim
    if profile is None and (nf.a or nf.b):
        profile = MassProfile.polynomial(nf.a, nf.b, domain=(0.9, 1.1))
    dirs = rng.normal(size=(n_dirs, 2 + n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    errs = []
    with mpmath.workdps(dps):
        for r in radii:
            acc = mpmath.mpf(0)
            for dvec in dirs:
                x, X = (mpmath.mpf(r) * mpmath.mpf(float(z)) for z in dvec[:2])
                Y = [mpmath.mpf(r) * mpmath.mpf(float(z)) for z in dvec[2:]]
                y0 = [mpmath.mpf(0)] * n
                u, v, U, V = nf_to_chart(x, X, y0, Y, nf, C)
                acc += abs(direct_F0(u, v, U, V, C, profile) - nf_value(x, X, Y, nf, C))
            errs.append(float(acc / n_dirs))
    errs = np.array(errs)
    slope = np.polyfit(np.log(radii), np.log(errs), 1)[0]
    return np.asarray(radii), errs, float(slope)
