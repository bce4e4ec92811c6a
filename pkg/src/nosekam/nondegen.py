"""Kolmogorov and iso-energetic non-degeneracy of ``G0 + G1`` in the actions ``(I, J)``.

Everything is written over a generic scalar ring so the same assembly runs
on floats, on exact :class:`~fractions.Fraction` values, and on truncated
polynomials in ``rho`` (for Taylor coefficients of the determinants).
``J`` components are taken in an orthonormal frame of the flat metric.
Scalarized labels follow the usual abuse of notation: ``beta`` stands for
``<beta, C>`` and ``gamma`` for ``<gamma C, C>`` (``gamma_par``).
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .mathcore import UnitCovector
from .normalform import ACTION_VARS, NormalFormCoeffs, alpha_from_b, variable_mass_relations
from .series import GradedPoly, VarTable, compose

RHO_VARS = VarTable(("rho",), (1,))

SCAN_COLUMNS = ("rho", "det_kolmogorov_full", "det_A_V", "det_A_Vperp",
                "det_isoenergetic", "det_B_W", "det_B_Wperp")


def total_hamiltonian(nf: NormalFormCoeffs) -> GradedPoly:
    """``G0_nf + G1_nf`` as one polynomial in ``(I, cJ, mJ)``."""
    g1 = compose(nf.G1_nf, {
        "cJ": GradedPoly.var(ACTION_VARS, nf.N, "cJ"),
        "mJ": GradedPoly.var(ACTION_VARS, nf.N, "mJ"),
    })
    return nf.G0_nf + g1


def frame_components(C: UnitCovector, exact: bool | None = None) -> list:
    """``C`` in an orthonormal frame; rational when available and requested."""
    if exact is None:
        exact = C.exact is not None
    if exact:
        if C.exact is None:
            raise ValueError("covector has no exact components")
        return list(C.exact)
    return list(C.metric.orthonormal(C.components))


@dataclass
class _Derivs:
    P: GradedPoly

    def __post_init__(self):
        P = self.P
        self.P_I, self.P_c, self.P_m = P.diff("I"), P.diff("cJ"), P.diff("mJ")
        self.P_II = self.P_I.diff("I")
        self.P_Ic, self.P_Im = self.P_I.diff("cJ"), self.P_I.diff("mJ")
        self.P_cc, self.P_cm, self.P_mm = self.P_c.diff("cJ"), self.P_c.diff("mJ"), self.P_m.diff("mJ")


def _zero_like(x):
    return x * 0


def _eval_point(nf: NormalFormCoeffs, I, J: Sequence, Cf: Sequence):
    c = sum(ci * ji for ci, ji in zip(Cf, J))
    m = sum(ji * ji for ji in J)
    return (I, c, m)


@dataclass
class ActionHessian:
    """``(n+1) x (n+1)`` Hessian plus the frequency covector at one action point."""

    matrix: list[list]
    gradient: list
    C: list

    @property
    def n(self) -> int:
        return len(self.C)

    def as_array(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.matrix])

    def bordered(self) -> "BorderedHessian":
        k = len(self.matrix)
        zero = _zero_like(self.gradient[0])
        rows = [list(self.matrix[i]) + [self.gradient[i]] for i in range(k)]
        rows.append(list(self.gradient) + [zero])
        return BorderedHessian(rows, self.C)


@dataclass
class BorderedHessian:
    matrix: list[list]
    C: list

    def as_array(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.matrix])


def action_gradient(nf: NormalFormCoeffs, I, rho, C: UnitCovector | Sequence, *, derivs=None) -> tuple:
    """``(dG/dI, dG/dJ)`` at ``J = rho C``."""
    Cf = frame_components(C) if isinstance(C, UnitCovector) else list(C)
    d = derivs or _Derivs(total_hamiltonian(nf))
    J = [rho * ci for ci in Cf]
    pt = _eval_point(nf, I, J, Cf)
    gI = d.P_I.evaluate(pt)
    pc, pm = d.P_c.evaluate(pt), d.P_m.evaluate(pt)
    gJ = [pc * ci + 2 * pm * ji for ci, ji in zip(Cf, J)]
    return gI, gJ


def hessian(nf: NormalFormCoeffs, I, rho, C: UnitCovector | Sequence, *, derivs=None) -> ActionHessian:
    """Second derivatives of ``G0 + G1`` at ``(I, J = rho C)``."""
    Cf = frame_components(C) if isinstance(C, UnitCovector) else list(C)
    d = derivs or _Derivs(total_hamiltonian(nf))
    n = len(Cf)
    J = [rho * ci for ci in Cf]
    pt = _eval_point(nf, I, J, Cf)
    ev = lambda p: p.evaluate(pt)
    P_II, P_Ic, P_Im = ev(d.P_II), ev(d.P_Ic), ev(d.P_Im)
    P_cc, P_cm, P_mm, P_m = ev(d.P_cc), ev(d.P_cm), ev(d.P_mm), ev(d.P_m)
    H = [[None] * (n + 1) for _ in range(n + 1)]
    H[0][0] = P_II
    for i in range(n):
        H[0][i + 1] = H[i + 1][0] = P_Ic * Cf[i] + 2 * P_Im * J[i]
        for j in range(n):
            v = P_cc * Cf[i] * Cf[j] + 2 * P_cm * (Cf[i] * J[j] + J[i] * Cf[j]) + 4 * P_mm * J[i] * J[j]
            if i == j:
                v = v + 2 * P_m
            H[i + 1][j + 1] = v
    gI, gJ = action_gradient(nf, I, rho, Cf, derivs=d)
    return ActionHessian(H, [gI, *gJ], Cf)


# ---------------------------------------------------------------------------
# determinants over a generic ring

def det(M: list[list]):
    """Laplace expansion; fine for the at most 5 x 5 matrices used here."""
    k = len(M)
    if k == 0:
        return 1
    if k == 1:
        return M[0][0]
    if k == 2:
        return M[0][0] * M[1][1] - M[0][1] * M[1][0]
    total = None
    for j in range(k):
        a = M[0][j]
        if isinstance(a, (int, Fraction, float)) and a == 0:
            continue
        if isinstance(a, GradedPoly) and a.is_zero():
            continue
        minor = [row[:j] + row[j + 1:] for row in M[1:]]
        term = a * det(minor)
        if j % 2:
            term = -term
        total = term if total is None else total + term
    if total is None:
        return _zero_like(M[0][0])
    return total


def _compress(M: list[list], basis: list[list]):
    """``B^T M B`` for a list of basis column vectors."""
    k = len(basis)
    out = [[None] * k for _ in range(k)]
    for a in range(k):
        for b in range(k):
            acc = None
            for i, bi in enumerate(basis[a]):
                if bi == 0:
                    continue
                for j, bj in enumerate(basis[b]):
                    if bj == 0:
                        continue
                    term = M[i][j] * (bi * bj)
                    acc = term if acc is None else acc + term
            out[a][b] = acc if acc is not None else _zero_like(M[0][0])
    return out


def _gram(basis):
    return [[sum(x * y for x, y in zip(u, v)) for v in basis] for u in basis]


def restricted_det(M: list[list], basis: list[list]):
    """Determinant of ``M`` compressed to ``span(basis)``, basis-independent."""
    if not basis:
        return 1
    num = det(_compress(M, basis))
    g = det(_gram(basis))
    return num * (1 / g) if isinstance(g, float) else num * (Fraction(1) / Fraction(g))


def _perp_basis(Cf: list) -> list[list]:
    """Spanning set of ``C``'s orthocomplement: ``e_j - C_j C`` skipping the largest ``|C_k|``."""
    n = len(Cf)
    k = max(range(n), key=lambda i: abs(float(Cf[i])))
    out = []
    for j in range(n):
        if j == k:
            continue
        out.append([(1 if i == j else 0) - Cf[j] * Cf[i] for i in range(n)])
    return out


def _bases(Cf: list, size: int, bordered: bool):
    n = len(Cf)
    zero = 0
    first = [1] + [zero] * (size - 1)
    along = [zero] + list(Cf) + ([zero] if bordered else [])
    invariant = [first, along]
    if bordered:
        invariant.append([zero] * (n + 1) + [1])
    perp = [[zero] + v + ([zero] if bordered else []) for v in _perp_basis(Cf)]
    return invariant, perp


def kolmogorov_det(nf: NormalFormCoeffs, I, rho, C, *, derivs=None) -> dict:
    """``{"full", "A_V", "A_Vperp"}`` determinants of the action Hessian."""
    H = hessian(nf, I, rho, C, derivs=derivs)
    inv, perp = _bases(H.C, len(H.matrix), bordered=False)
    return {
        "full": det(H.matrix),
        "A_V": restricted_det(H.matrix, inv),
        "A_Vperp": restricted_det(H.matrix, perp),
    }


def isoenergetic_det(nf: NormalFormCoeffs, I, rho, C, *, derivs=None) -> dict:
    """``{"full", "B_W", "B_Wperp"}`` determinants of the frequency-bordered Hessian."""
    B = hessian(nf, I, rho, C, derivs=derivs).bordered()
    inv, perp = _bases(B.C, len(B.matrix), bordered=True)
    return {
        "full": det(B.matrix),
        "B_W": restricted_det(B.matrix, inv),
        "B_Wperp": restricted_det(B.matrix, perp),
    }


def rho_expansion(nf: NormalFormCoeffs, which: str, C, order: int = 2, I=0) -> list[Fraction]:
    """Exact Taylor coefficients ``[c0, ..., c_order]`` in ``rho`` of a determinant.

    ``which`` is one of ``A_V``, ``A_Vperp``, ``B_W``, ``B_Wperp``, ``kolmogorov``
    or ``isoenergetic``.  ``C`` must carry exact components.
    """
    Cf = frame_components(C, exact=True) if isinstance(C, UnitCovector) else [Fraction(x) for x in C]
    rho = GradedPoly.var(RHO_VARS, order, "rho")
    I = GradedPoly.const(RHO_VARS, order, I)
    Cp = Cf
    d = _Derivs(total_hamiltonian(nf))
    if which in ("A_V", "A_Vperp", "kolmogorov"):
        res = kolmogorov_det(nf, I, rho, Cp, derivs=d)
        key = {"kolmogorov": "full"}.get(which, which)
    else:
        res = isoenergetic_det(nf, I, rho, Cp, derivs=d)
        key = {"isoenergetic": "full"}.get(which, which)
    val = res[key]
    if not isinstance(val, GradedPoly):
        val = GradedPoly.const(RHO_VARS, order, val)
    return [val.coeff((k,)) for k in range(order + 1)]


# closed forms through rho^2, scalarized

def detA_closed(alpha, beta, gamma) -> list:
    return [-2 * alpha - beta**2, -4 * beta * gamma - 4 * alpha, -4 * gamma**2 - 6 * alpha]


def detB_closed(alpha, beta, gamma) -> list:
    return [1 - 2 * alpha - 2 * beta,
            -4 * gamma - 2 * beta**2 - 4 * alpha + 2,
            -6 * beta * gamma - 2 * gamma - beta**2 + 2 * beta - 6 * alpha + 3]


# ---------------------------------------------------------------------------
# scans

@dataclass
class ScanReport:
    rho: np.ndarray
    columns: dict[str, np.ndarray]
    zero_crossings: dict[str, list[float]] = field(default_factory=dict)
    vanishing_order: dict[str, float] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SCAN_COLUMNS)
        for i, r in enumerate(self.rho):
            w.writerow([repr(float(r))] + [repr(float(self.columns[c][i])) for c in SCAN_COLUMNS[1:]])
        return buf.getvalue()


def _crossings(x: np.ndarray, y: np.ndarray) -> list[float]:
    out = []
    for i in range(len(x) - 1):
        if y[i] == 0:
            out.append(float(x[i]))
        elif y[i] * y[i + 1] < 0:
            out.append(float(x[i] - y[i] * (x[i + 1] - x[i]) / (y[i + 1] - y[i])))
    if len(y) and y[-1] == 0:
        out.append(float(x[-1]))
    return out


def vanishing_order(f, lo: float = 1e-4, hi: float = 1e-2, num: int = 25) -> float:
    """Leading exponent of ``|f(rho)|`` at 0 by log-log regression on ``[lo, hi]``."""
    rs = np.geomspace(lo, hi, num)
    vals = np.array([abs(float(f(r))) for r in rs])
    vals = np.maximum(vals, np.finfo(float).tiny)
    return float(np.polyfit(np.log(rs), np.log(vals), 1)[0])


def degeneracy_scan(nf: NormalFormCoeffs, rho_grid, C: UnitCovector | Sequence | None = None, I: float = 0.0) -> ScanReport:
    if C is None:
        C = UnitCovector.axis(2)
    Cf = [float(x) for x in (frame_components(C, exact=False) if isinstance(C, UnitCovector) else C)]
    d = _Derivs(total_hamiltonian(nf))
    rho_grid = np.asarray(rho_grid, dtype=float)
    cols = {c: np.empty(rho_grid.size) for c in SCAN_COLUMNS[1:]}
    for i, r in enumerate(rho_grid):
        k = kolmogorov_det(nf, I, float(r), Cf, derivs=d)
        b = isoenergetic_det(nf, I, float(r), Cf, derivs=d)
        cols["det_kolmogorov_full"][i] = k["full"]
        cols["det_A_V"][i] = k["A_V"]
        cols["det_A_Vperp"][i] = k["A_Vperp"]
        cols["det_isoenergetic"][i] = b["full"]
        cols["det_B_W"][i] = b["B_W"]
        cols["det_B_Wperp"][i] = b["B_Wperp"]
    report = ScanReport(rho_grid, cols)
    for c in SCAN_COLUMNS[1:]:
        report.zero_crossings[c] = _crossings(rho_grid, cols[c])
    report.vanishing_order["det_kolmogorov_full"] = vanishing_order(
        lambda r: kolmogorov_det(nf, I, r, Cf, derivs=d)["full"])
    report.vanishing_order["det_isoenergetic"] = vanishing_order(
        lambda r: isoenergetic_det(nf, I, r, Cf, derivs=d)["full"])
    report.meta = {"a": str(nf.a), "b": str(nf.b), "alpha": str(nf.alpha), "I": I}
    return report


# ---------------------------------------------------------------------------
# simultaneous degeneracy over the variable-mass family

@dataclass
class DegeneracyLocus:
    points: list[dict]
    polynomial: list[Fraction]
    remark_b: Fraction
    remark_consistent: bool

    @property
    def count(self) -> int:
        return len(self.points)


def _const_terms(a, alpha, C) -> tuple[Fraction, Fraction]:
    from .normalform import nf_from_scalars
    beta, b, gpar, gperp = variable_mass_relations(a, alpha)
    nf = nf_from_scalars(alpha, beta, gpar, gperp, a=a, b=b)
    ka = rho_expansion(nf, "A_V", C, order=0)[0]
    kb = rho_expansion(nf, "B_W", C, order=0)[0]
    return ka, kb


def degeneracy_locus(C: UnitCovector | None = None, remark_b=Fraction(-8)) -> DegeneracyLocus:
    """Parameters where the constant terms of ``det(A|V)`` and ``det(B|W)`` both vanish.

    The constant terms are computed from assembled matrices along the family
    constrained by the variable-mass relations; ``det(B|W)_0`` is affine in
    ``alpha`` (checked), which is eliminated, leaving a polynomial in ``a``.
    """
    C = C or UnitCovector.axis(2)
    # det(B|W)_0 affine in alpha: solve for alpha(a) exactly
    def alpha_of(a):
        _, k0 = _const_terms(a, Fraction(0), C)
        _, k1 = _const_terms(a, Fraction(1), C)
        _, k2 = _const_terms(a, Fraction(2), C)
        if k2 - 2 * k1 + k0 != 0:
            raise ArithmeticError("det(B|W) constant term is not affine in alpha")
        return -k0 / (k1 - k0)

    # interpolate det(A|V)_0(a, alpha(a)) on a rational grid, then verify
    xs = [Fraction(k, 2) for k in range(-4, 5)]
    ys = [_const_terms(a, alpha_of(a), C)[0] for a in xs]
    coeffs = _interpolate(xs[:5], ys[:5])
    for a, y in zip(xs[5:], ys[5:]):
        if _polyval(coeffs, a) != y:
            raise ArithmeticError("eliminated determinant is not a quartic in a")
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    roots = _real_roots(coeffs)
    points = []
    for a in roots:
        al = alpha_of(a) if isinstance(a, Fraction) else None
        beta, b, gpar, gperp = variable_mass_relations(a, al)
        points.append({"a": a, "b": b, "alpha": al, "beta_scalar": beta, "gamma_par": gpar, "gamma_perp": gperp})
    consistent = all(p["b"] == Fraction(remark_b) for p in points)
    return DegeneracyLocus(points, coeffs, Fraction(remark_b), consistent)


def _interpolate(xs, ys) -> list[Fraction]:
    """Exact Newton-form interpolation returned as monomial coefficients."""
    n = len(xs)
    coef = list(ys)
    for j in range(1, n):
        for i in range(n - 1, j - 1, -1):
            coef[i] = (coef[i] - coef[i - 1]) / (xs[i] - xs[i - j])
    poly = [Fraction(0)] * n
    basis = [Fraction(1)]
    for k in range(n):
        for i, bcoef in enumerate(basis):
            poly[i] += coef[k] * bcoef
        nb = [Fraction(0)] * (len(basis) + 1)
        for i, bcoef in enumerate(basis):
            nb[i + 1] += bcoef
            nb[i] -= xs[k] * bcoef
        basis = nb
    return poly


def _polyval(coeffs, x):
    return sum(c * x**k for k, c in enumerate(coeffs))


def _real_roots(coeffs: list[Fraction]) -> list:
    """Distinct real roots of a polynomial of degree <= 2 (exact when rational)."""
    deg = len(coeffs) - 1
    if deg <= 0:
        return []
    if deg == 1:
        return [-coeffs[0] / coeffs[1]]
    if deg == 2:
        c, b, a = coeffs
        disc = b * b - 4 * a * c
        if disc < 0:
            return []
        if disc == 0:
            return [-b / (2 * a)]
        num, den = disc.numerator, disc.denominator
        rn, rd = _isqrt_exact(num), _isqrt_exact(den)
        if rn is not None and rd is not None:
            s = Fraction(rn, rd)
            return sorted([(-b - s) / (2 * a), (-b + s) / (2 * a)])
        s = float(disc) ** 0.5
        return sorted([(-float(b) - s) / (2 * float(a)), (-float(b) + s) / (2 * float(a))])
    r = np.roots([float(c) for c in reversed(coeffs)])
    return sorted({round(float(x.real), 12) for x in r if abs(x.imag) < 1e-12})


def _isqrt_exact(k: int):
    import math
    r = math.isqrt(k)
    return r if r * r == k else None
