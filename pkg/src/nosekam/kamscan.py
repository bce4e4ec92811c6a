"""Numerical detection of invariant tori in the rescaled thermostat flow.

Orbits are integrated with a compiled implicit-midpoint kernel, cut by the
Poincaré section ``Sigma = 0`` (upward), and classified from weighted Birkhoff
averages of the angle and return-time increments between crossings.
"""
from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numba
import numpy as np

from .dynamics import DomainError, MassProfile
from .integrate import IntegratorConfig, implicit_midpoint_step
from .mathcore import FlatMetric, TorusPotential, UnitCovector, UsageError

VERDICTS = ("quasiperiodic", "resonant", "irregular", "escaped")
SIGMA_BOUNDS = (1e-3, 1e3)
# an orbit whose energy error passes this has been lost by the fixed-step
# integrator (strong coupling drives |W| and sigma far from the torus) and
# counts as escaped
DRIFT_MAX = 5e-2

# scans solve the midpoint equations to roundoff: a 1e-12 residual per step
# accumulates into a secular drift that swamps the Birkhoff gap
SCAN_CONFIG = IntegratorConfig(h=0.08, newton_tol=1e-15, max_steps=300_000)

# status codes returned by the compiled kernel
_OK, _ESCAPED, _NO_CONVERGENCE, _MAX_STEPS, _DRIFT = 0, 1, 2, 3, 4


# ---------------------------------------------------------------------------
# section and classification records

@dataclass(frozen=True)
class SectionSpec:
    """A coordinate section ``y[index] = value`` crossed in direction ``direction``.

    The default is ``Sigma = 0`` with ``dSigma/dt > 0`` in the rescaled chart,
    whose flat index is ``2n + 1``; pass ``index=None`` to get it for any ``n``.
    ``function`` overrides the coordinate section on the generic path.
    """

    chart: str = "rescaled"
    index: int | None = None
    value: float = 0.0
    direction: int = 1
    tol: float = 1e-11
    max_crossings: int = 500
    function: Callable[[np.ndarray], float] | None = None

    def __post_init__(self):
        if not self.tol > 0:
            raise UsageError("crossing tolerance must be positive")
        if self.direction not in (-1, 1):
            raise UsageError("direction must be +1 or -1")
        if self.max_crossings < 1:
            raise UsageError("max_crossings must be positive")

    def resolved_index(self, n: int) -> int:
        return 2 * n + 1 if self.index is None else self.index

    def evaluate(self, y: np.ndarray, n: int) -> float:
        if self.function is not None:
            return float(self.function(y))
        return float(y[self.resolved_index(n)] - self.value)


@dataclass
class SectionResult:
    points: np.ndarray
    times: np.ndarray
    flags: dict = field(default_factory=dict)

    def __len__(self):
        return self.times.size


@dataclass(frozen=True)
class Thresholds:
    """Classifier thresholds; calibrated on the integrable case ``beta = 0``."""

    tol_qp: float = 1e-7
    tol_res: float = 1e-4


@dataclass
class OrbitClassification:
    rot_w: float
    rot_thermo: float
    gap_w: float
    gap_thermo: float
    verdict: str
    energy_drift: float
    n_crossings: int = 0
    in_section: bool = False

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")

    @property
    def gap(self) -> float:
        return max(self.gap_w, self.gap_thermo)


# ---------------------------------------------------------------------------
# weighted Birkhoff averages

def bump_weights(N: int) -> np.ndarray:
    """Normalised ``exp(-1/(t(1-t)))`` weights on ``t = k/(N+1)``, ``k = 1..N``."""
    t = np.arange(1, N + 1) / (N + 1)
    w = np.exp(-1.0 / (t * (1.0 - t)))
    return w / w.sum()


def weighted_birkhoff(values) -> float:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("empty sample")
    return float(bump_weights(values.size) @ values)


def rotation_number(theta, lifted: bool = False, period: float = 1.0) -> tuple[float, float]:
    """Rotation number of the samples ``theta_k`` and its convergence gap.

    Unlifted samples are taken mod ``period`` and increments are folded into
    ``[0, period)``.  Returns ``(estimate, gap)`` where the gap compares the
    weighted averages over the two halves of the increments.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.size < 5:
        raise ValueError("need at least 5 samples (two windows of increments)")
    d = np.diff(theta)
    if not lifted:
        d = np.mod(d, period)
    half = d.size // 2
    est = weighted_birkhoff(d)
    gap = abs(weighted_birkhoff(d[:half]) - weighted_birkhoff(d[half:2 * half]))
    return est, gap


def classify(rot_w, gap_w, rot_t, gap_t, drift, thresholds: Thresholds, escaped=False,
             n_crossings=0, in_section=False) -> OrbitClassification:
    if escaped:
        verdict = "escaped"
    elif max(gap_w, gap_t) < thresholds.tol_qp:
        verdict = "quasiperiodic"
    elif max(gap_w, gap_t) < thresholds.tol_res:
        verdict = "resonant"
    else:
        verdict = "irregular"
    return OrbitClassification(rot_w, rot_t, gap_w, gap_t, verdict, drift, n_crossings, in_section)


# ---------------------------------------------------------------------------
# compiled rescaled-chart kernel

@numba.njit(cache=True)
def _omega(x, coef):
    d = x - 1.0
    acc = 0.0
    for j in range(coef.size - 1, -1, -1):
        acc = acc * d + coef[j]
    return acc


@numba.njit(cache=True)
def _domega(x, coef):
    d = x - 1.0
    acc = 0.0
    for j in range(coef.size - 1, 0, -1):
        acc = acc * d + j * coef[j]
    return acc


@numba.njit(cache=True)
def _field(y, out, n, ginv, K, ca, sb, beta, rM, coef):
    sg = y[2 * n]
    Sg = y[2 * n + 1]
    WgW = 0.0
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc += ginv[i, j] * y[n + j]
        out[i] = acc / (sg * sg)
        WgW += y[n + i] * acc
    for i in range(n):
        out[n + i] = 0.0
    if beta != 0.0:
        for m in range(K.shape[0]):
            ph = 0.0
            for i in range(n):
                ph += K[m, i] * rM * y[i]
            ph *= 2.0 * np.pi
            # d/dq of a cos + b sin
            dv = -ca[m] * np.sin(ph) + sb[m] * np.cos(ph)
            for i in range(n):
                out[n + i] -= beta * rM * 2.0 * np.pi * K[m, i] * dv
    out[2 * n] = _omega(sg, coef) * Sg
    out[2 * n + 1] = WgW / (sg * sg * sg) - 1.0 / sg - 0.5 * _domega(sg, coef) * Sg * Sg


@numba.njit(cache=True)
def _energy(y, n, ginv, K, ca, sb, beta, rM, coef):
    sg = y[2 * n]
    Sg = y[2 * n + 1]
    WgW = 0.0
    for i in range(n):
        for j in range(n):
            WgW += y[n + i] * ginv[i, j] * y[n + j]
    pot = 0.0
    if beta != 0.0:
        for m in range(K.shape[0]):
            ph = 0.0
            for i in range(n):
                ph += K[m, i] * rM * y[i]
            ph *= 2.0 * np.pi
            pot += ca[m] * np.cos(ph) + sb[m] * np.sin(ph)
    return 0.5 * WgW / (sg * sg) + 0.5 * _omega(sg, coef) * Sg * Sg + beta * pot + np.log(sg)


@numba.njit(cache=True)
def _clock(sg):
    """Time-transformation factor ``g(sigma) = sigma^3 / (1 + sigma^3)`` and ``g'``.

    The cube cancels the ``|W|^2 / sigma^3`` growth of the force near
    ``sigma = 0`` so the transformed field stays bounded there.
    """
    s3 = sg * sg * sg
    return s3 / (1.0 + s3), 3.0 * sg * sg / ((1.0 + s3) * (1.0 + s3))


@numba.njit(cache=True)
def _field_K(y, out, P, E0):
    """Field of ``K = g(sigma) (F - E0)``; equals ``g X_F`` on the level ``F = E0``."""
    n, ginv, K, ca, sb, beta, rM, coef = P
    _field(y, out, n, ginv, K, ca, sb, beta, rM, coef)
    g, dg = _clock(y[2 * n])
    dE = _energy(y, n, ginv, K, ca, sb, beta, rM, coef) - E0
    for i in range(y.size):
        out[i] *= g
    out[2 * n + 1] -= dE * dg


@numba.njit(cache=True)
def _mid_step(y, h, y1, P, E0, tol, max_iter, mid, f):
    """Fixed-point solve of the midpoint rule for ``K``.

    Returns the elapsed physical time ``h g(sigma_mid)``, or -1 on failure.
    """
    n = P[0]
    dim = y.size
    _field_K(y, f, P, E0)
    for i in range(dim):
        y1[i] = y[i] + h * f[i]
    prev = np.inf
    for _ in range(max_iter):
        for i in range(dim):
            mid[i] = 0.5 * (y[i] + y1[i])
        if mid[2 * n] <= 0.0:
            return -1.0
        _field_K(mid, f, P, E0)
        err = 0.0
        scale = 1.0
        for i in range(dim):
            new = y[i] + h * f[i]
            e = abs(new - y1[i])
            if e > err:
                err = e
            if abs(new) > scale:
                scale = abs(new)
            y1[i] = new
        # past the roundoff floor further sweeps only shuffle the last bits
        if err <= tol * scale or (err >= prev and err <= 1e-13 * scale):
            for i in range(dim):
                mid[i] = 0.5 * (y[i] + y1[i])
            return h * _clock(mid[2 * n])[0]
        prev = err
    return -1.0


@numba.njit(cache=True)
def _sub_step(y, h, y1, P, E0, tol, max_iter, mid, f, ytmp):
    """Step of fictitious length ``h``, split into 2, 4, ... substeps if the solve
    fails; returns elapsed physical time or -1 after 2^10 substeps."""
    dim = y.size
    dt = _mid_step(y, h, y1, P, E0, tol, max_iter, mid, f)
    if dt >= 0.0:
        return dt
    for level in range(1, 11):
        m = 2 ** level
        for i in range(dim):
            ytmp[i] = y[i]
        total = 0.0
        for _ in range(m):
            dt = _mid_step(ytmp, h / m, y1, P, E0, tol, max_iter, mid, f)
            if dt < 0.0:
                break
            total += dt
            for i in range(dim):
                ytmp[i] = y1[i]
        if dt >= 0.0:
            return total
    return -1.0


@numba.njit(cache=True)
def _section_orbit(y0, h, max_steps, max_cross, idx, value, direction, ctol,
                   P, newton_tol, max_iter, smin, smax, drift_max):
    n, ginv, K, ca, sb, beta, rM, coef = P
    dim = y0.size
    pts = np.empty((max_cross, dim))
    times = np.empty(max_cross)
    y = y0.copy()
    y1 = np.empty(dim)
    yc = np.empty(dim)
    ytmp = np.empty(dim)
    mid = np.empty(dim)
    f = np.empty(dim)
    E0 = _energy(y0, n, ginv, K, ca, sb, beta, rM, coef)
    drift = 0.0
    count = 0
    # physical time as a compensated sum: t is large, each increment small
    t = 0.0
    t_c = 0.0
    status = _MAX_STEPS
    for step in range(max_steps):
        dt = _sub_step(y, h, y1, P, E0, newton_tol, max_iter, mid, f, ytmp)
        if dt < 0.0:
            status = _NO_CONVERGENCE
            break
        if y1[2 * n] < smin or y1[2 * n] > smax:
            status = _ESCAPED
            break
        if step % 16 == 0:
            e = abs(_energy(y1, n, ginv, K, ca, sb, beta, rM, coef) - E0)
            if e > drift:
                drift = e
            if e > drift_max:
                status = _DRIFT
                break
        g0 = direction * (y[idx] - value)
        g1 = direction * (y1[idx] - value)
        if g0 < 0.0 and g1 >= 0.0:
            # bisection on the substep length
            lo = 0.0
            hi = h
            dtc = 0.0
            for _ in range(80):
                tau = 0.5 * (lo + hi)
                dtc = _sub_step(y, tau, yc, P, E0, newton_tol, max_iter, mid, f, ytmp)
                gc = direction * (yc[idx] - value)
                if abs(gc) <= ctol or hi - lo <= 1e-15:
                    break
                if gc < 0.0:
                    lo = tau
                else:
                    hi = tau
            for i in range(dim):
                pts[count, i] = yc[i]
            times[count] = t + (dtc - t_c)
            e = abs(_energy(yc, n, ginv, K, ca, sb, beta, rM, coef) - E0)
            if e > drift:
                drift = e
            count += 1
            if count >= max_cross:
                status = _OK
                break
        for i in range(dim):
            y[i] = y1[i]
        # Kahan update of t
        yk = dt - t_c
        tk = t + yk
        t_c = (tk - t) - yk
        t = tk
    return pts[:count], times[:count], status, drift


# ---------------------------------------------------------------------------
# model bundle for the kernel

@dataclass(frozen=True)
class RescaledModel:
    """Everything the compiled kernel needs for the ``F_beta`` flow."""

    beta: float
    V: TorusPotential
    M: float = 1.0
    metric: FlatMetric | None = None
    mass_profile: MassProfile = field(default_factory=MassProfile)

    @property
    def n(self) -> int:
        return self.V.dim

    def kernel_args(self):
        n = self.n
        g = self.metric or FlatMetric.identity(n)
        modes = self.V.modes
        K = np.array([m.k for m in modes], dtype=float).reshape(len(modes), n)
        ca = np.array([m.cos for m in modes], dtype=float)
        sb = np.array([m.sin for m in modes], dtype=float)
        if len(modes) == 0:
            K = np.zeros((0, n))
        coef = np.array([float(c) for c in self.mass_profile.coefficients])
        return (n, np.ascontiguousarray(g.ginv, dtype=float), np.ascontiguousarray(K), ca, sb,
                float(self.beta), float(np.sqrt(self.M)), coef)

    def energy(self, y) -> float:
        return float(_energy(np.asarray(y, dtype=float), *self.kernel_args()))

    def field(self, y) -> np.ndarray:
        out = np.empty(len(y))
        _field(np.asarray(y, dtype=float), out, *self.kernel_args())
        return out


def section_orbit(model: RescaledModel, y0, spec: SectionSpec | None = None,
                  cfg: IntegratorConfig | None = None) -> SectionResult:
    """Compiled Poincaré section of the rescaled flow from ``y0``."""
    spec = spec or SectionSpec()
    cfg = cfg or SCAN_CONFIG
    y0 = np.asarray(y0, dtype=float)
    n = model.n
    if y0.size != 2 * n + 2:
        raise UsageError(f"state must have {2 * n + 2} components")
    if not y0[2 * n] > 0:
        raise DomainError("initial sigma must be positive")
    pts, times, status, drift = _section_orbit(
        y0, cfg.h, cfg.max_steps, spec.max_crossings, spec.resolved_index(n), spec.value,
        spec.direction, spec.tol, model.kernel_args(), cfg.newton_tol, cfg.newton_max_iter,
        SIGMA_BOUNDS[0], SIGMA_BOUNDS[1], DRIFT_MAX)
    flags = {"escaped": status == _ESCAPED, "no_convergence": status == _NO_CONVERGENCE,
             "drift_exceeded": status == _DRIFT,
             "partial": status != _OK, "energy_drift": float(drift)}
    return SectionResult(pts, times, flags)


def poincare_section(field_fn: Callable[[np.ndarray], np.ndarray], y0, spec: SectionSpec,
                     cfg: IntegratorConfig, n: int | None = None) -> SectionResult:
    """Generic Poincaré section using the Python midpoint stepper.

    Works for any smooth field; crossings are refined by bisection on the
    substep length until the section function is below ``spec.tol``.
    """
    y = np.asarray(y0, dtype=float).copy()
    n = n if n is not None else (y.size - 2) // 2
    h = cfg.h
    pts, times = [], []
    t = 0.0
    status = "max_steps"
    for _ in range(cfg.max_steps):
        y1 = implicit_midpoint_step(field_fn, y, h, cfg)
        g0 = spec.direction * spec.evaluate(y, n)
        g1 = spec.direction * spec.evaluate(y1, n)
        if g0 < 0.0 <= g1:
            lo, hi = 0.0, h
            yc, tau = y1, h
            for _ in range(80):
                tau = 0.5 * (lo + hi)
                yc = implicit_midpoint_step(field_fn, y, tau, cfg)
                gc = spec.direction * spec.evaluate(yc, n)
                if abs(gc) <= spec.tol or hi - lo <= 1e-15:
                    break
                lo, hi = (tau, hi) if gc < 0 else (lo, tau)
            pts.append(yc)
            times.append(t + tau)
            if len(pts) >= spec.max_crossings:
                status = "ok"
                break
        y = y1
        t += h
    return SectionResult(np.array(pts).reshape(len(pts), y.size), np.array(times),
                         {"partial": status != "ok"})


# ---------------------------------------------------------------------------
# classification

def in_equilibrium_section(model: RescaledModel, y0, tol: float = 1e-12) -> bool:
    """True when ``y0`` lies on an equilibrium torus (``sigma = |W|``, ``Sigma = 0``) with beta = 0."""
    if model.beta != 0.0 or model.mass_profile.kind != "constant":
        return False
    n = model.n
    g = model.metric or FlatMetric.identity(n)
    y = np.asarray(y0, dtype=float)
    return abs(y[2 * n + 1]) <= tol and abs(y[2 * n] - np.sqrt(g.norm2(y[n:2 * n]))) <= tol


def classify_orbit(model: RescaledModel, y0, spec: SectionSpec | None = None,
                   cfg: IntegratorConfig | None = None,
                   thresholds: Thresholds | None = None) -> tuple[OrbitClassification, SectionResult]:
    thresholds = thresholds or Thresholds()
    y0 = np.asarray(y0, dtype=float)
    n = model.n
    if in_equilibrium_section(model, y0):
        # the whole torus lies in Sigma = 0: no transversal crossings, trivially invariant
        empty = SectionResult(np.empty((0, y0.size)), np.empty(0), {"in_section": True})
        return OrbitClassification(np.nan, np.nan, 0.0, 0.0, "quasiperiodic", 0.0, 0, True), empty
    sec = section_orbit(model, y0, spec, cfg)
    k = len(sec)
    lost = sec.flags["escaped"] or sec.flags["no_convergence"] or sec.flags["drift_exceeded"]
    if lost or k < 5:
        return classify(np.nan, np.inf, np.nan, np.inf, sec.flags["energy_drift"], thresholds,
                        escaped=lost, n_crossings=k), sec
    rot_w, gap_w = rotation_number(sec.points[:, 0], lifted=True)
    rot_t, gap_t = rotation_number(sec.times, lifted=True)
    return classify(rot_w, gap_w, rot_t, gap_t, sec.flags["energy_drift"], thresholds,
                    n_crossings=k), sec


# ---------------------------------------------------------------------------
# torus-fraction scans

@dataclass(frozen=True)
class ICGrid:
    """Initial conditions near the isotropic torus.

    ``W = (1 + dW) C`` and ``sigma = |W| (1 + ds)`` with ``w = 0``, ``Sigma = 0``.
    """

    C: tuple[float, ...] = (1.0,)
    dW: tuple[float, float] = (-0.1, 0.1)
    ds: tuple[float, float] = (0.02, 0.2)
    shape: tuple[int, int] = (20, 20)

    def points(self, metric: FlatMetric | None = None) -> np.ndarray:
        C = np.asarray(self.C, dtype=float)
        n = C.size
        g = metric or FlatMetric.identity(n)
        UnitCovector(C, g)
        out = []
        for dw in np.linspace(*self.dW, self.shape[0]):
            W = (1.0 + dw) * C
            Wn = np.sqrt(g.norm2(W))
            for ds in np.linspace(*self.ds, self.shape[1]):
                out.append(np.concatenate([np.zeros(n), W, [Wn * (1.0 + ds), 0.0]]))
        return np.array(out)


@dataclass
class ScanReport:
    beta: float
    fraction: float
    classifications: list[OrbitClassification]
    sections: list[SectionResult] | None
    ics: np.ndarray
    meta: dict = field(default_factory=dict)

    def counts(self) -> dict[str, int]:
        return {v: sum(c.verdict == v for c in self.classifications) for v in VERDICTS}

    def classification_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["ic_index", "verdict", "rot_w", "rot_thermo", "gap", "energy_drift"])
        for i, c in enumerate(self.classifications):
            w.writerow([i, c.verdict, f"{c.rot_w:.17g}", f"{c.rot_thermo:.17g}",
                        f"{c.gap:.17g}", f"{c.energy_drift:.17g}"])
        return buf.getvalue()

    def section_csv(self) -> str:
        if self.sections is None:
            raise UsageError("section points were not kept for this scan")
        n = (self.ics.shape[1] - 2) // 2
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["ic_index", "crossing_index", *[f"w{i + 1}" for i in range(n)],
                    *[f"W{i + 1}" for i in range(n)], "sigma", "Sigma", "t"])
        for i, sec in enumerate(self.sections):
            for k, (p, t) in enumerate(zip(sec.points, sec.times)):
                w.writerow([i, k, *(f"{x:.17g}" for x in p), f"{t:.17g}"])
        return buf.getvalue()


def _classify_task(args):
    model, y0, spec, cfg, thresholds, keep = args
    c, sec = classify_orbit(model, y0, spec, cfg, thresholds)
    return c, (sec if keep else None)


def torus_fraction(model: RescaledModel, grid: ICGrid | None = None, spec: SectionSpec | None = None,
                   cfg: IntegratorConfig | None = None, thresholds: Thresholds | None = None,
                   jobs: int = 1, keep_sections: bool = False) -> ScanReport:
    """Fraction of grid initial conditions classified quasiperiodic.

    Results are ordered by IC index whatever the completion order.
    """
    grid = grid or ICGrid(C=tuple(np.eye(model.n)[0]))
    spec = spec or SectionSpec()
    cfg = cfg or SCAN_CONFIG
    thresholds = thresholds or Thresholds()
    ics = grid.points(model.metric)
    tasks = [(model, y0, spec, cfg, thresholds, keep_sections) for y0 in ics]
    t0 = time.perf_counter()
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_classify_task, tasks, chunksize=8))
    else:
        results = [_classify_task(t) for t in tasks]
    cls = [r[0] for r in results]
    secs = [r[1] for r in results] if keep_sections else None
    frac = sum(c.verdict == "quasiperiodic" for c in cls) / len(cls)
    meta = {"wall_time": time.perf_counter() - t0, "h": cfg.h, "max_crossings": spec.max_crossings,
            "tol_qp": thresholds.tol_qp, "tol_res": thresholds.tol_res,
            "thresholds_note": "calibration artifacts; no quantitative torus-measure prediction exists"}
    return ScanReport(model.beta, frac, cls, secs, ics, meta)


def beta_ladder(betas: Sequence[float], V: TorusPotential, **kw) -> list[ScanReport]:
    """Torus fractions over several couplings on the same grid."""
    return [torus_fraction(RescaledModel(b, V), **kw) for b in betas]


def is_monotone(reports: Sequence[ScanReport]) -> bool:
    """True when the fraction does not increase with beta."""
    rs = sorted(reports, key=lambda r: r.beta)
    return all(a.fraction >= b.fraction for a, b in zip(rs, rs[1:]))
