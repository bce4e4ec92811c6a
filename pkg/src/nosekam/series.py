"""Exact weighted-graded truncated multivariate polynomials.

Every monomial carries a weighted degree ``sum(weight_i * exponent_i)``;
products and substitutions drop everything above the truncation degree
``N``.  Coefficients are :class:`fractions.Fraction` throughout.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from numbers import Rational
from typing import Callable, Iterable, Mapping, Sequence

Exponent = tuple[int, ...]


class SeriesError(ValueError):
    """Raised on variable-table mismatches and weight violations."""


class SolveError(ArithmeticError):
    """Raised when an order-by-order solve is inconsistent or underdetermined.

    Attributes
    ----------
    degree : int
        Weighted degree at which the failure occurred.
    kind : str
        ``"inconsistent"`` or ``"underdetermined"``.
    residual : list of str
        Offending monomials (inconsistent) or free unknowns (underdetermined).
    """

    def __init__(self, degree: int, kind: str, residual: list[str]):
        self.degree = degree
        self.kind = kind
        self.residual = residual
        super().__init__(f"{kind} system at weighted degree {degree}: {', '.join(residual)}")


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"exact coefficient required, got {type(x).__name__}")


@dataclass(frozen=True)
class VarTable:
    names: tuple[str, ...]
    weights: tuple[int, ...]

    def __post_init__(self):
        if len(self.names) != len(self.weights):
            raise SeriesError("names and weights differ in length")
        if len(set(self.names)) != len(self.names):
            raise SeriesError("duplicate variable names")
        if any(w not in (1, 2) for w in self.weights):
            raise SeriesError("weights must be 1 or 2")

    @classmethod
    def of(cls, spec: Mapping[str, int] | Sequence[tuple[str, int]]) -> "VarTable":
        items = list(spec.items()) if isinstance(spec, Mapping) else list(spec)
        return cls(tuple(n for n, _ in items), tuple(w for _, w in items))

    def __len__(self):
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SeriesError(f"unknown variable {name!r}") from None

    def degree(self, exp: Exponent) -> int:
        return sum(w * e for w, e in zip(self.weights, exp))

    def monomials(self, degree: int) -> list[Exponent]:
        """All exponents of exactly the given weighted degree, graded-lex order."""
        out = []
        bounds = [range(degree // w + 1) for w in self.weights]
        for exp in product(*bounds):
            if self.degree(exp) == degree:
                out.append(exp)
        return sorted(out, reverse=True)


@dataclass(frozen=True)
class GradedPoly:
    """Truncated polynomial over exact rationals.

    ``coeffs`` never holds zeros nor monomials above weighted degree ``N``.
    """

    vars: VarTable
    N: int
    coeffs: Mapping[Exponent, Fraction] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for exp, c in self.coeffs.items():
            exp = tuple(exp)
            if len(exp) != len(self.vars):
                raise SeriesError("exponent length does not match variable table")
            c = _frac(c)
            if c and self.vars.degree(exp) <= self.N:
                clean[exp] = c
        object.__setattr__(self, "coeffs", clean)

    # construction -------------------------------------------------------
    @classmethod
    def zero(cls, vars: VarTable, N: int) -> "GradedPoly":
        return cls(vars, N, {})

    @classmethod
    def const(cls, vars: VarTable, N: int, c) -> "GradedPoly":
        return cls(vars, N, {(0,) * len(vars): _frac(c)})

    @classmethod
    def var(cls, vars: VarTable, N: int, name: str) -> "GradedPoly":
        exp = [0] * len(vars)
        exp[vars.index(name)] = 1
        return cls(vars, N, {tuple(exp): Fraction(1)})

    @classmethod
    def gens(cls, vars: VarTable, N: int) -> tuple["GradedPoly", ...]:
        return tuple(cls.var(vars, N, n) for n in vars.names)

    def _like(self, coeffs) -> "GradedPoly":
        return GradedPoly(self.vars, self.N, coeffs)

    def _check(self, other: "GradedPoly"):
        if self.vars != other.vars or self.N != other.N:
            raise SeriesError("variable table or truncation mismatch")

    def _coerce(self, other) -> "GradedPoly":
        if isinstance(other, GradedPoly):
            self._check(other)
            return other
        return GradedPoly.const(self.vars, self.N, other)

    # ring operations ----------------------------------------------------
    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.coeffs)
        for e, c in other.coeffs.items():
            out[e] = out.get(e, 0) + c
        return self._like(out)

    __radd__ = __add__

    def __neg__(self):
        return self._like({e: -c for e, c in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, GradedPoly):
            return self.scale(other)
        self._check(other)
        out: dict[Exponent, Fraction] = {}
        deg = self.vars.degree
        for e1, c1 in self.coeffs.items():
            d1 = deg(e1)
            for e2, c2 in other.coeffs.items():
                if d1 + deg(e2) > self.N:
                    continue
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        return self._like(out)

    def __rmul__(self, other):
        return self.scale(other)

    def scale(self, k) -> "GradedPoly":
        k = _frac(k)
        return self._like({e: k * c for e, c in self.coeffs.items()})

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise SeriesError("only non-negative integer powers")
        result = GradedPoly.const(self.vars, self.N, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, GradedPoly):
            return self.vars == other.vars and self.N == other.N and self.coeffs == other.coeffs
        if isinstance(other, (int, Fraction)):
            return self == GradedPoly.const(self.vars, self.N, other)
        return NotImplemented

    def __hash__(self):
        return hash((self.vars, self.N, frozenset(self.coeffs.items())))

    # inspection ---------------------------------------------------------
    def coeff(self, monomial: Mapping[str, int] | Exponent | None = None, **powers) -> Fraction:
        """Coefficient of a monomial given as exponent tuple or ``name=power``."""
        if monomial is None:
            monomial = powers
        if isinstance(monomial, Mapping):
            exp = [0] * len(self.vars)
            for name, p in monomial.items():
                exp[self.vars.index(name)] = p
            monomial = tuple(exp)
        return self.coeffs.get(tuple(monomial), Fraction(0))

    @property
    def constant(self) -> Fraction:
        return self.coeffs.get((0,) * len(self.vars), Fraction(0))

    def valuation(self) -> int | None:
        """Lowest weighted degree present, ``None`` for the zero polynomial."""
        if not self.coeffs:
            return None
        return min(self.vars.degree(e) for e in self.coeffs)

    def part(self, degree: int) -> "GradedPoly":
        deg = self.vars.degree
        return self._like({e: c for e, c in self.coeffs.items() if deg(e) == degree})

    def truncate(self, N: int) -> "GradedPoly":
        """Same polynomial with truncation degree lowered (or raised) to ``N``."""
        return GradedPoly(self.vars, N, self.coeffs)

    def is_zero(self) -> bool:
        return not self.coeffs

    # calculus -----------------------------------------------------------
    def diff(self, name: str) -> "GradedPoly":
        """Partial derivative.  The result stays in the same ring."""
        i = self.vars.index(name)
        out = {}
        for e, c in self.coeffs.items():
            if e[i]:
                e2 = list(e)
                e2[i] -= 1
                out[tuple(e2)] = c * e[i]
        return self._like(out)

    def evaluate(self, values: Mapping[str, object] | Sequence[object]):
        """Evaluate at a point; works for Fraction, float, mpmath or numpy inputs."""
        if isinstance(values, Mapping):
            values = [values[n] for n in self.vars.names]
        total = 0
        for e, c in self.coeffs.items():
            term = c
            for v, p in zip(values, e):
                if p:
                    term = term * v**p
            total = total + term
        return total

    def evaluate_float(self, values) -> float:
        if isinstance(values, Mapping):
            values = [values[n] for n in self.vars.names]
        total = 0.0
        for e, c in self.coeffs.items():
            term = float(c)
            for v, p in zip(values, e):
                if p:
                    term *= v**p
            total += term
        return total

    # output -------------------------------------------------------------
    def sorted_terms(self) -> list[tuple[Exponent, Fraction]]:
        deg = self.vars.degree
        return sorted(self.coeffs.items(), key=lambda ec: (deg(ec[0]), ec[0]), reverse=False)

    def __str__(self):
        if not self.coeffs:
            return "0"
        parts = []
        for e, c in self.sorted_terms():
            mono = "*".join(
                n if p == 1 else f"{n}^{p}" for n, p in zip(self.vars.names, e) if p
            )
            if not mono:
                parts.append(str(c))
            elif c == 1:
                parts.append(mono)
            elif c == -1:
                parts.append("-" + mono)
            else:
                parts.append(f"{c}*{mono}")
        return " + ".join(parts).replace("+ -", "- ")

    def __repr__(self):
        return f"GradedPoly({self}; N={self.N})"

    def to_json(self) -> dict:
        """``{"vars": [...], "weights": [...], "N": N, "terms": {"e1,e2,..": [num, den]}}``."""
        return {
            "vars": list(self.vars.names),
            "weights": list(self.vars.weights),
            "N": self.N,
            "terms": {
                ",".join(map(str, e)): [c.numerator, c.denominator] for e, c in self.sorted_terms()
            },
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "GradedPoly":
        vt = VarTable(tuple(data["vars"]), tuple(data["weights"]))
        coeffs = {
            tuple(int(p) for p in k.split(",")): Fraction(v[0], v[1]) for k, v in data["terms"].items()
        }
        return cls(vt, int(data["N"]), coeffs)


SeriesMap = Mapping[str, GradedPoly]


def compose(f: GradedPoly, sub: SeriesMap, *, check_weights: bool = True) -> GradedPoly:
    """Substitute ``sub[name]`` for each variable of ``f``.

    Variables of ``f`` missing from ``sub`` must exist in the target ring and
    are kept as they are.  The image of a weight-``d`` variable needs lowest
    weighted degree at least ``d`` unless ``check_weights`` is off, in which
    case the caller guarantees the result is still meaningful after truncation.
    """
    images = list(sub.values())
    if not images:
        return f
    target = images[0]
    for img in images:
        target._check(img)
    subs = []
    for name, w in zip(f.vars.names, f.vars.weights):
        if name in sub:
            img = sub[name]
        else:
            img = GradedPoly.var(target.vars, target.N, name)
        if check_weights:
            v = img.valuation()
            if v is not None and v < w:
                raise SeriesError(
                    f"image of weight-{w} variable {name!r} has valuation {v}"
                )
        subs.append(img)

    # cache powers of each image
    power_cache: list[dict[int, GradedPoly]] = [{0: GradedPoly.const(target.vars, target.N, 1), 1: s} for s in subs]

    def power(i: int, k: int) -> GradedPoly:
        cache = power_cache[i]
        if k not in cache:
            cache[k] = power(i, k - 1) * subs[i]
        return cache[k]

    out = GradedPoly.zero(target.vars, target.N)
    for e, c in f.coeffs.items():
        term = GradedPoly.const(target.vars, target.N, c)
        for i, p in enumerate(e):
            if p:
                term = term * power(i, p)
                if term.is_zero():
                    break
        out = out + term
    return out


def std_series(kind: str | Fraction | int, N: int, var: str = "u") -> GradedPoly:
    """Maclaurin polynomial in a single weight-1 variable.

    ``kind`` is ``"log1m"`` for ln(1-u), ``"powneg2"`` for (1-u)^-2, or a
    rational exponent ``k`` for the binomial series of (1-u)^k.
    """
    if N < 0:
        raise SeriesError("N must be non-negative")
    vt = VarTable((var,), (1,))
    coeffs: dict[Exponent, Fraction] = {}
    if kind == "log1m":
        for j in range(1, N + 1):
            coeffs[(j,)] = Fraction(-1, j)
        return GradedPoly(vt, N, coeffs)
    if kind == "powneg2":
        kind = -2
    k = _frac(kind)
    # (1-u)^k = sum_j binom(k, j) (-u)^j
    c = Fraction(1)
    for j in range(N + 1):
        coeffs[(j,)] = c
        c = c * (k - j) / (j + 1) * -1
    return GradedPoly(vt, N, coeffs)


def univariate(poly_coeffs: Sequence, N: int, var: str = "u") -> GradedPoly:
    vt = VarTable((var,), (1,))
    return GradedPoly(vt, N, {(j,): _frac(c) for j, c in enumerate(poly_coeffs)})


# ---------------------------------------------------------------------------
# order-by-order linear solves

def rational_solve(rows: list[list[Fraction]], rhs: list[Fraction]):
    """Gauss-Jordan elimination over Q.

    Returns ``(solution, free_columns, inconsistent_rows)``; ``solution`` sets
    free columns to zero.
    """
    m = len(rows)
    n = len(rows[0]) if rows else 0
    a = [list(map(Fraction, r)) + [Fraction(b)] for r, b in zip(rows, rhs)]
    pivots = []
    r = 0
    for col in range(n):
        piv = next((i for i in range(r, m) if a[i][col] != 0), None)
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        p = a[r][col]
        a[r] = [x / p for x in a[r]]
        for i in range(m):
            if i != r and a[i][col] != 0:
                f = a[i][col]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        pivots.append(col)
        r += 1
        if r == m:
            break
    inconsistent = [i for i in range(r, m) if a[i][n] != 0]
    sol = [Fraction(0)] * n
    for i, col in enumerate(pivots):
        sol[col] = a[i][n]
    free = [c for c in range(n) if c not in pivots]
    return sol, free, inconsistent


Residual = Callable[[Mapping[str, Fraction]], "GradedPoly | Sequence[GradedPoly]"]


def solve_triangular(unknowns: Mapping[str, int], residual: Residual, max_degree: int | None = None) -> dict[str, Fraction]:
    """Solve ``residual(assignment) == 0`` degree by degree.

    ``unknowns`` maps each coefficient symbol to the weighted degree at which
    it first enters the equations; the degree-``d`` part of the residual must
    be affine in the degree-``d`` unknowns once lower degrees are fixed.
    Unknowns above the current degree are held at zero while lower blocks are
    solved.

    Raises :class:`SolveError` naming the first degree whose block is
    inconsistent or leaves unknowns undetermined.
    """
    assignment = {name: Fraction(0) for name in unknowns}

    def as_list(res):
        return [res] if isinstance(res, GradedPoly) else list(res)

    probe = as_list(residual(assignment))
    top = max(p.N for p in probe) if max_degree is None else max_degree
    by_degree: dict[int, list[str]] = {}
    for name, d in unknowns.items():
        by_degree.setdefault(d, []).append(name)

    for d in range(0, top + 1):
        names = by_degree.get(d, [])
        base = as_list(residual(assignment))
        keys = sorted({(k, e) for k, p in enumerate(base) for e in p.part(d).coeffs})
        cols = []
        for name in names:
            trial = dict(assignment)
            trial[name] = Fraction(1)
            res = as_list(residual(trial))
            col = {}
            for k, p in enumerate(res):
                diff = (p - base[k]).part(d)
                for e, c in diff.coeffs.items():
                    col[(k, e)] = c
            cols.append(col)
            keys = sorted(set(keys) | {key for key, c in col.items() if c})
        if not names:
            if keys:
                raise SolveError(d, "inconsistent", [_fmt_key(base, k) for k in keys])
            continue
        rows = [[col.get(key, Fraction(0)) for col in cols] for key in keys]
        rhs = [-base[k].coeff(e) for k, e in keys]
        if not rows:
            rows, rhs = [[Fraction(0)] * len(names)], [Fraction(0)]
        sol, free, bad = rational_solve(rows, rhs)
        if bad:
            raise SolveError(d, "inconsistent", [_fmt_key(base, keys[i]) for i in bad])
        if free:
            raise SolveError(d, "underdetermined", [names[i] for i in free])
        for name, v in zip(names, sol):
            assignment[name] = v
        check = as_list(residual(assignment))
        leftover = [(k, e) for k, p in enumerate(check) for e in p.part(d).coeffs]
        if leftover:
            # the block was not affine in its unknowns
            raise SolveError(d, "inconsistent", [_fmt_key(check, k) for k in leftover])
    return assignment


def _fmt_key(polys: list[GradedPoly], key) -> str:
    k, e = key
    p = polys[k]
    mono = "*".join(n if q == 1 else f"{n}^{q}" for n, q in zip(p.vars.names, e) if q) or "1"
    return f"eq{k}:{mono}" if len(polys) > 1 else mono
