"""Energy functions and vector fields of the thermostated flows.

Three charts are used:

* extended (Nosé) chart ``(q, p, s, p_s)``,
* rescaled chart ``(w, W, sigma, Sigma)`` in which ``F = T * F_beta + const``,
* Nosé-Hoover chart ``(q, rho, xi)`` after eliminating ``s``.

States travel as flat arrays in exactly that field order; the dataclasses
below validate and name them.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .mathcore import FlatMetric, TorusPotential, UnitCovector, UsageError


class DomainError(ValueError):
    """A state left the chart (``s <= 0`` or ``sigma <= 0``)."""


# ---------------------------------------------------------------------------
# model constants

@dataclass(frozen=True)
class MassProfile:
    """Inverse thermostat mass ``Omega``.

    ``constant`` profiles give ``1/M`` in the extended chart and ``1`` in the
    rescaled chart.  ``polynomial`` profiles are
    ``Omega(x) = 1 + a (x-1) + b/2 (x-1)^2 + sum_j c_j (x-1)^j`` with ``higher``
    holding ``c_3, c_4, ...``, evaluated at ``s`` or ``sigma`` directly.
    """

    kind: str = "constant"
    a: Fraction = Fraction(0)
    b: Fraction = Fraction(0)
    higher: tuple[Fraction, ...] = ()
    domain: tuple[float, float] = (0.5, 2.0)

    def __post_init__(self):
        if self.kind not in ("constant", "polynomial"):
            raise UsageError(f"unknown mass profile kind {self.kind!r}")
        object.__setattr__(self, "a", Fraction(self.a))
        object.__setattr__(self, "b", Fraction(self.b))
        object.__setattr__(self, "higher", tuple(Fraction(c) for c in self.higher))
        if self.kind == "polynomial":
            xs = np.linspace(*self.domain, 257)
            if np.any(self.omega(xs) <= 0):
                raise UsageError("mass profile is not positive on its declared domain")

    @classmethod
    def polynomial(cls, a, b, higher=(), domain=(0.5, 2.0)) -> "MassProfile":
        return cls("polynomial", Fraction(a), Fraction(b), tuple(higher), domain)

    @property
    def coefficients(self) -> list[Fraction]:
        """Taylor coefficients of ``Omega`` about 1 (polynomial kind)."""
        if self.kind == "constant":
            return [Fraction(1)]
        return [Fraction(1), self.a, self.b / 2, *self.higher]

    def omega(self, x, M: float = 1.0):
        if self.kind == "constant":
            return 1.0 / M + 0.0 * x
        d = x - 1.0
        return sum(float(c) * d**j for j, c in enumerate(self.coefficients))

    def domega(self, x, M: float = 1.0):
        if self.kind == "constant":
            return 0.0 * x
        d = x - 1.0
        return sum(j * float(c) * d ** (j - 1) for j, c in enumerate(self.coefficients) if j)


@dataclass(frozen=True)
class ThermostatParams:
    """``n`` degrees of freedom, mass ``M`` and the amalgamated ``kT_eff = n k T``."""

    n: int
    M: float = 1.0
    kT_eff: float = 1.0
    mass_profile: MassProfile = field(default_factory=MassProfile)

    def __post_init__(self):
        if self.n < 1:
            raise UsageError("n must be positive")
        if not self.M > 0:
            raise UsageError("thermostat mass M must be positive")
        if not self.kT_eff > 0:
            raise UsageError("temperature must be positive")

    @classmethod
    def physical(cls, n: int, M: float, T: float, k: float = 1.0, mass_profile=None) -> "ThermostatParams":
        return cls(n, M, n * k * T, mass_profile or MassProfile())

    @property
    def T(self) -> float:
        return self.kT_eff

    @property
    def beta(self) -> float:
        return 1.0 / self.kT_eff


@dataclass(frozen=True)
class HarmonicPotential:
    """``V(q) = k/2 |q|^2`` on ``R^n``, the oscillator of the Nosé-Hoover example."""

    dim: int = 1
    k: float = 1.0

    def __call__(self, q):
        q = np.asarray(q)
        return 0.5 * self.k * np.sum(q * q)

    def grad(self, q):
        return self.k * np.asarray(q)

    @property
    def is_zero(self) -> bool:
        return self.k == 0

    def to_json(self) -> dict:
        return {"kind": "harmonic", "dim": self.dim, "k": self.k}


# ---------------------------------------------------------------------------
# states

def _vec(x, n=None) -> np.ndarray:
    a = np.atleast_1d(np.asarray(x))
    if n is not None and a.shape != (n,):
        raise UsageError(f"expected a vector of length {n}")
    return a


@dataclass(frozen=True, eq=False)
class ExtendedState:
    q: np.ndarray
    p: np.ndarray
    s: float
    p_s: float

    fields = ("q", "p", "s", "p_s")

    def __post_init__(self):
        object.__setattr__(self, "q", _vec(self.q))
        object.__setattr__(self, "p", _vec(self.p, self.q.size))
        if not np.real(self.s) > 0:
            raise DomainError("s must be positive")

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.q, self.p, [self.s, self.p_s]])

    @classmethod
    def from_array(cls, y, n: int) -> "ExtendedState":
        return cls(y[:n], y[n:2 * n], y[2 * n], y[2 * n + 1])


@dataclass(frozen=True, eq=False)
class RescaledState:
    w: np.ndarray
    W: np.ndarray
    sigma: float
    Sigma: float

    fields = ("w", "W", "sigma", "Sigma")

    def __post_init__(self):
        object.__setattr__(self, "w", _vec(self.w))
        object.__setattr__(self, "W", _vec(self.W, self.w.size))
        if not np.real(self.sigma) > 0:
            raise DomainError("sigma must be positive")

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.w, self.W, [self.sigma, self.Sigma]])

    @classmethod
    def from_array(cls, y, n: int) -> "RescaledState":
        return cls(y[:n], y[n:2 * n], y[2 * n], y[2 * n + 1])


@dataclass(frozen=True, eq=False)
class NoseHooverState:
    q: np.ndarray
    rho: np.ndarray
    xi: float

    fields = ("q", "rho", "xi")

    def __post_init__(self):
        object.__setattr__(self, "q", _vec(self.q))
        object.__setattr__(self, "rho", _vec(self.rho, self.q.size))

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.q, self.rho, [self.xi]])

    @classmethod
    def from_array(cls, y, n: int) -> "NoseHooverState":
        return cls(y[:n], y[n:2 * n], y[2 * n])


def state_columns(chart: str, n: int) -> list[str]:
    """CSV column names for a chart, in flat-array order."""
    idx = [str(i + 1) for i in range(n)] if n > 1 else [""]
    if chart == "nose":
        return [f"q{i}" for i in idx] + [f"p{i}" for i in idx] + ["s", "p_s"]
    if chart == "rescaled":
        return [f"w{i}" for i in idx] + [f"W{i}" for i in idx] + ["sigma", "Sigma"]
    if chart == "nose-hoover":
        return [f"q{i}" for i in idx] + [f"rho{i}" for i in idx] + ["xi"]
    raise UsageError(f"unknown chart {chart!r}")


def canonical_form(n: int, chart: str) -> np.ndarray:
    """Matrix of the canonical symplectic form in flat-array coordinates."""
    dim = 2 * n + 2
    pos = list(range(n)) + [2 * n]
    mom = list(range(n, 2 * n)) + [2 * n + 1]
    if chart not in ("nose", "rescaled"):
        raise UsageError("only Hamiltonian charts carry a symplectic form")
    J = np.zeros((dim, dim))
    for i, j in zip(pos, mom):
        J[i, j] = 1.0
        J[j, i] = -1.0
    return J


def _as_array(st) -> np.ndarray:
    return st.to_array() if hasattr(st, "to_array") else np.asarray(st)


def _n_of(pr: ThermostatParams, g: FlatMetric | None) -> int:
    return g.dim if g is not None else pr.n


def _metric(g: FlatMetric | None, n: int) -> FlatMetric:
    return g if g is not None else FlatMetric.identity(n)


# ---------------------------------------------------------------------------
# extended (Nosé) chart

def _omega_ext(pr: ThermostatParams, s):
    return pr.mass_profile.omega(s, pr.M)


def _domega_ext(pr: ThermostatParams, s):
    return pr.mass_profile.domega(s, pr.M)


def nose_energy(st, pr: ThermostatParams, V, g: FlatMetric | None = None):
    """``|p/s|^2/2 + V(q) + Omega(s) p_s^2/2 + kT_eff ln s``; Omega = 1/M for constant mass."""
    y = _as_array(st)
    g = _metric(g, _n_of(pr, g))
    n = g.dim
    q, p, s, ps = y[:n], y[n:2 * n], y[2 * n], y[2 * n + 1]
    if not np.real(s) > 0:
        raise DomainError("s must be positive")
    return 0.5 * (p @ g.ginv @ p) / s**2 + V(q) + 0.5 * _omega_ext(pr, s) * ps**2 + pr.kT_eff * np.log(s)


def nose_vector_field(st, pr: ThermostatParams, V, g: FlatMetric | None = None) -> np.ndarray:
    """Hamilton's equations of the extended Hamiltonian, flat array out."""
    y = _as_array(st)
    g = _metric(g, _n_of(pr, g))
    n = g.dim
    q, p, s, ps = y[:n], y[n:2 * n], y[2 * n], y[2 * n + 1]
    if not np.real(s) > 0:
        raise DomainError("s must be positive")
    out = np.empty_like(y)
    gp = g.ginv @ p
    out[:n] = gp / s**2
    out[n:2 * n] = -V.grad(q)
    out[2 * n] = _omega_ext(pr, s) * ps
    out[2 * n + 1] = (p @ gp) / s**3 - pr.kT_eff / s - 0.5 * _domega_ext(pr, s) * ps**2
    return out


# ---------------------------------------------------------------------------
# rescaled chart

def rescaled_energy(st, beta: float, pr: ThermostatParams, V, g: FlatMetric | None = None):
    """``F_beta = |W/sigma|^2/2 + Omega(sigma) Sigma^2/2 + beta V(sqrt(M) w) + ln sigma``."""
    y = _as_array(st)
    g = _metric(g, _n_of(pr, g))
    n = g.dim
    w, W, sg, Sg = y[:n], y[n:2 * n], y[2 * n], y[2 * n + 1]
    if not np.real(sg) > 0:
        raise DomainError("sigma must be positive")
    pot = beta * V(np.sqrt(pr.M) * w) if beta else 0.0
    return 0.5 * (W @ g.ginv @ W) / sg**2 + 0.5 * pr.mass_profile.omega(sg) * Sg**2 + pot + np.log(sg)


def rescaled_vector_field(st, beta: float, pr: ThermostatParams, V, g: FlatMetric | None = None) -> np.ndarray:
    y = _as_array(st)
    g = _metric(g, _n_of(pr, g))
    n = g.dim
    w, W, sg, Sg = y[:n], y[n:2 * n], y[2 * n], y[2 * n + 1]
    if not np.real(sg) > 0:
        raise DomainError("sigma must be positive")
    prof = pr.mass_profile
    out = np.empty_like(y)
    gW = g.ginv @ W
    out[:n] = gW / sg**2
    if beta:
        rM = np.sqrt(pr.M)
        out[n:2 * n] = -beta * rM * V.grad(rM * w)
    else:
        out[n:2 * n] = 0.0
    out[2 * n] = prof.omega(sg) * Sg
    out[2 * n + 1] = (W @ gW) / sg**3 - 1.0 / sg - 0.5 * prof.domega(sg) * Sg**2
    return out


def cartesian_chart(st) -> tuple:
    """``n = 1``: ``(a, b, A, B)`` with ``(a, b) = sigma (cos w, sin w)`` and cotangent lift."""
    y = _as_array(st)
    if y.size != 4:
        raise UsageError("cartesian chart is defined for n = 1")
    w, W, sg, Sg = y
    cw, sw = np.cos(w), np.sin(w)
    a, b = sg * cw, sg * sw
    A = Sg * cw - W * sw / sg
    B = Sg * sw + W * cw / sg
    return a, b, A, B


def rotinv_energy(a, b, A, B):
    """Mechanical Hamiltonian with rotationally invariant logarithmic potential."""
    return 0.5 * (A * A + B * B) + 0.5 * np.log(a * a + b * b)


# ---------------------------------------------------------------------------
# Nosé-Hoover chart

def nose_hoover_vector_field(st, pr: ThermostatParams, V, g: FlatMetric | None = None) -> np.ndarray:
    """``dq = g^-1 rho, drho = -grad V - xi rho, dxi = (|rho|^2 - kT_eff)/M``."""
    y = _as_array(st)
    g = _metric(g, _n_of(pr, g))
    n = g.dim
    q, rho, xi = y[:n], y[n:2 * n], y[2 * n]
    out = np.empty_like(y)
    grho = g.ginv @ rho
    out[:n] = grho
    out[n:2 * n] = -V.grad(q) - xi * rho
    out[2 * n] = (rho @ grho - pr.kT_eff) / pr.M
    return out


def nose_hoover_energy(st, pr: ThermostatParams, V, g: FlatMetric | None = None, log_s: float = 0.0):
    """``|rho|^2/2 + V + M xi^2/2 + kT_eff ln s``; conserved when ``ln s`` is integrated along."""
    y = _as_array(st)
    g = _metric(g, _n_of(pr, g))
    n = g.dim
    q, rho, xi = y[:n], y[n:2 * n], y[2 * n]
    return 0.5 * rho @ g.ginv @ rho + V(q) + 0.5 * pr.M * xi**2 + pr.kT_eff * log_s


# ---------------------------------------------------------------------------
# coordinate changes

def _scales(pr: ThermostatParams, n: int) -> np.ndarray:
    rM, rMT = np.sqrt(pr.M), np.sqrt(pr.M * pr.kT_eff)
    return np.concatenate([np.full(n, rM), np.full(n, 1.0 / rM), [1.0 / rMT, rMT]])


def rescale_state(st, pr: ThermostatParams) -> np.ndarray:
    """Extended ``(q, p, s, p_s)`` to rescaled ``(w, W, sigma, Sigma)``.

    ``q`` is not reduced mod ``Z^n`` so the map stays invertible on lifts.
    """
    y = _as_array(st)
    n = (y.size - 2) // 2
    return y / _scales(pr, n)


def unrescale_state(st, pr: ThermostatParams) -> np.ndarray:
    y = _as_array(st)
    n = (y.size - 2) // 2
    return y * _scales(pr, n)


def rescaled_time(t: float, pr: ThermostatParams) -> float:
    """Time of the ``F_beta`` flow matching time ``t`` of the extended flow."""
    return pr.kT_eff * t


# ---------------------------------------------------------------------------
# thermostatic equilibria

@dataclass(frozen=True)
class EquilibriumSet:
    """States with ``ds/dt = 0 = dp_s/dt`` (extended) or ``sigma = |W|, Sigma = 0`` (rescaled)."""

    chart: str
    pr: ThermostatParams
    g: FlatMetric

    def residual(self, st) -> float:
        y = _as_array(st)
        n = self.g.dim
        if self.chart == "rescaled":
            W, sg, Sg = y[n:2 * n], y[2 * n], y[2 * n + 1]
            return max(abs(self.pr.mass_profile.omega(sg) * Sg),
                       abs(self.g.norm2(W) / sg**3 - 1.0 / sg))
        p, s, ps = y[n:2 * n], y[2 * n], y[2 * n + 1]
        return max(abs(_omega_ext(self.pr, s) * ps),
                   abs(self.g.norm2(p) / s**3 - self.pr.kT_eff / s))

    def contains(self, st, tol: float = 1e-10) -> bool:
        return self.residual(st) <= tol

    def parametrize(self, w, C: UnitCovector) -> RescaledState:
        """The distinguished component ``w -> (sigma=1, w, Sigma=0, W=C)``."""
        if self.chart != "rescaled":
            raise UsageError("parametrization is given in the rescaled chart")
        return RescaledState(np.asarray(w, dtype=float), C.components.copy(), 1.0, 0.0)


def thermostatic_equilibria(pr: ThermostatParams, g: FlatMetric | None = None, chart: str = "rescaled") -> EquilibriumSet:
    if chart not in ("extended", "rescaled"):
        raise UsageError("chart must be 'extended' or 'rescaled'")
    return EquilibriumSet(chart, pr, _metric(g, pr.n))


# ---------------------------------------------------------------------------
# bound fields for the integrators

Field = Callable[[np.ndarray], np.ndarray]


def make_field(chart: str, pr: ThermostatParams, V, g: FlatMetric | None = None, beta: float = 0.0) -> Field:
    g = _metric(g, pr.n)
    if chart == "nose":
        return lambda y: nose_vector_field(y, pr, V, g)
    if chart == "rescaled":
        return lambda y: rescaled_vector_field(y, beta, pr, V, g)
    if chart == "nose-hoover":
        return lambda y: nose_hoover_vector_field(y, pr, V, g)
    raise UsageError(f"unknown chart {chart!r}")


def make_energy(chart: str, pr: ThermostatParams, V, g: FlatMetric | None = None, beta: float = 0.0):
    g = _metric(g, pr.n)
    if chart == "nose":
        return lambda y: nose_energy(y, pr, V, g)
    if chart == "rescaled":
        return lambda y: rescaled_energy(y, beta, pr, V, g)
    if chart == "nose-hoover":
        return lambda y: nose_hoover_energy(y, pr, V, g)
    raise UsageError(f"unknown chart {chart!r}")
