"""Time integration: implicit midpoint for the Hamiltonian charts and an
embedded Runge-Kutta pair for the Nosé-Hoover ODE."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import DOP853

from .dynamics import DomainError

Field = Callable[[np.ndarray], np.ndarray]

SIGMA_MIN = 1e-6


class StepFailure(RuntimeError):
    """The implicit solve did not converge; the caller should halve ``h``."""


@dataclass(frozen=True)
class IntegratorConfig:
    h: float = 1e-2
    newton_tol: float = 1e-12
    newton_max_iter: int = 50
    rk_rel_tol: float = 1e-10
    rk_abs_tol: float = 1e-12
    max_steps: int = 10_000_000

    def __post_init__(self):
        for name in ("h", "newton_tol", "rk_rel_tol", "rk_abs_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.newton_max_iter < 1 or self.max_steps < 1:
            raise ValueError("iteration limits must be positive")


@dataclass
class Orbit:
    t: np.ndarray
    y: np.ndarray
    energy: np.ndarray | None = None
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.t.size > 1 and np.any(np.diff(self.t) <= 0):
            raise ValueError("orbit times must be strictly increasing")

    def __len__(self):
        return self.t.size

    def to_csv(self, columns: Sequence[str]) -> str:
        """``t,<columns...>,E`` rows at 17 significant digits."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", *columns, "E"])
        E = self.energy if self.energy is not None else np.full(self.t.size, np.nan)
        for t, row, e in zip(self.t, self.y, E):
            w.writerow([f"{t:.17g}", *(f"{x:.17g}" for x in row), f"{e:.17g}"])
        return buf.getvalue()


def _fd_jacobian(f: Field, y: np.ndarray, f0: np.ndarray | None = None) -> np.ndarray:
    n = y.size
    J = np.empty((n, n))
    for j in range(n):
        e = 1e-7 * max(1.0, abs(y[j]))
        yp = y.copy()
        ym = y.copy()
        yp[j] += e
        ym[j] -= e
        J[:, j] = (f(yp) - f(ym)) / (2 * e)
    return J


def implicit_midpoint_step(field: Field, y: np.ndarray, h: float, cfg: IntegratorConfig | None = None,
                           positive: Sequence[int] = (), jac: Callable | None = None) -> np.ndarray:
    """One step of ``y1 = y0 + h f((y0 + y1)/2)``.

    Simplified Newton with the Jacobian frozen at ``y0``.  ``positive`` lists
    indices (``s`` or ``sigma``) that must stay above ``SIGMA_MIN`` at the
    midpoint.
    """
    cfg = cfg or IntegratorConfig(h=abs(h) or 1.0)
    y = np.asarray(y, dtype=float)
    f0 = field(y)
    if not np.any(f0):
        return y.copy()
    J = jac(y) if jac is not None else _fd_jacobian(field, y)
    M = np.eye(y.size) - 0.5 * h * J
    try:
        lu = np.linalg.inv(M)
    except np.linalg.LinAlgError as exc:
        raise StepFailure("singular Newton matrix") from exc
    y1 = y + h * f0
    scale = 1.0 + np.max(np.abs(y))
    for _ in range(cfg.newton_max_iter):
        mid = 0.5 * (y + y1)
        for i in positive:
            if mid[i] <= SIGMA_MIN:
                raise DomainError("midpoint left the chart (s or sigma too small)")
        r = y1 - y - h * field(mid)
        dy = lu @ r
        y1 = y1 - dy
        if np.max(np.abs(dy)) <= cfg.newton_tol * scale:
            return y1
    raise StepFailure("implicit midpoint solve did not converge")


def integrate_midpoint(field: Field, y0, h: float, n_steps: int, cfg: IntegratorConfig | None = None,
                       energy: Callable | None = None, sample_every: int = 1,
                       positive: Sequence[int] = (), t0: float = 0.0) -> Orbit:
    """Fixed-step midpoint integration; on solver failure the step is halved locally."""
    cfg = cfg or IntegratorConfig(h=h)
    y = np.asarray(y0, dtype=float).copy()
    ts, ys = [t0], [y.copy()]
    flags = {"drift_exceeded": False, "sigma_min_approach": False, "truncated": False}
    t = t0
    for k in range(1, n_steps + 1):
        try:
            y = _step_with_halving(field, y, h, cfg, positive)
        except DomainError:
            flags["sigma_min_approach"] = True
            flags["truncated"] = True
            break
        t = t0 + k * h
        if k % sample_every == 0 or k == n_steps:
            ts.append(t)
            ys.append(y.copy())
    E = np.array([energy(v) for v in ys]) if energy is not None else None
    return Orbit(np.array(ts), np.array(ys), E, flags)


def _step_with_halving(field, y, h, cfg, positive, depth=0):
    try:
        return implicit_midpoint_step(field, y, h, cfg, positive)
    except StepFailure:
        if depth >= 8:
            raise
        half = _step_with_halving(field, y, h / 2, cfg, positive, depth + 1)
        return _step_with_halving(field, half, h / 2, cfg, positive, depth + 1)


def rk_adaptive_integrate(field: Field, y0, t_span: tuple[float, float], cfg: IntegratorConfig | None = None,
                          t_eval: Sequence[float] | None = None, energy: Callable | None = None,
                          positive: Sequence[int] = ()) -> Orbit:
    """Adaptive Dormand-Prince 8(5,3) integration with dense output at ``t_eval``.

    Without ``t_eval`` every accepted step is recorded.
    """
    cfg = cfg or IntegratorConfig()
    t0, t1 = map(float, t_span)
    if t1 == t0:
        raise ValueError("empty time span")
    y0 = np.asarray(y0, dtype=float)
    solver = DOP853(lambda t, y: field(y), t0, y0, t1, rtol=cfg.rk_rel_tol, atol=cfg.rk_abs_tol)
    direction = 1.0 if t1 > t0 else -1.0
    if t_eval is not None:
        t_eval = np.asarray(t_eval, dtype=float)
        pending = sorted(t_eval, reverse=direction > 0)
    ts, ys = [t0], [y0.copy()]
    if t_eval is not None:
        ts, ys = [], []
        while pending and pending[-1] == t0:
            ts.append(t0)
            ys.append(y0.copy())
            pending.pop()
    flags = {"truncated": False, "sigma_min_approach": False, "steps": 0}
    steps = 0
    while solver.status == "running":
        if steps >= cfg.max_steps:
            flags["truncated"] = True
            break
        msg = solver.step()
        steps += 1
        if solver.status == "failed":
            flags["truncated"] = True
            flags["message"] = msg
            break
        if any(solver.y[i] <= SIGMA_MIN for i in positive):
            flags["sigma_min_approach"] = True
            flags["truncated"] = True
            break
        if t_eval is None:
            ts.append(solver.t)
            ys.append(solver.y.copy())
        else:
            dense = None
            while pending and (pending[-1] - solver.t) * direction <= 0:
                dense = dense or solver.dense_output()
                tt = pending.pop()
                ts.append(tt)
                ys.append(dense(tt))
    flags["steps"] = steps
    ts_arr, ys_arr = np.array(ts), np.array(ys)
    if direction < 0:
        # stored in integration order; Orbit wants increasing times
        ts_arr, ys_arr = ts_arr[::-1], ys_arr[::-1]
    E = np.array([energy(v) for v in ys_arr]) if energy is not None else None
    return Orbit(ts_arr, ys_arr, E, flags)


def energy_drift(orbit: Orbit, energy_fn: Callable | None = None) -> float:
    """``max |E(t) - E(0)|`` along the orbit."""
    if energy_fn is not None:
        E = np.array([energy_fn(y) for y in orbit.y])
    else:
        E = orbit.energy
    if E is None or E.size == 0:
        return 0.0
    return float(np.max(np.abs(E - E[0])))


def midpoint_step_jacobian(field: Field, y0: np.ndarray, y1: np.ndarray, h: float,
                           jac: Callable | None = None) -> np.ndarray:
    """Jacobian of the midpoint map ``y0 -> y1`` by implicit differentiation.

    With ``A = Df((y0 + y1)/2)`` the derivative is the Cayley transform
    ``(I - hA/2)^{-1} (I + hA/2)``, which avoids differencing through the
    Newton solve.
    """
    mid = 0.5 * (np.asarray(y0, dtype=float) + np.asarray(y1, dtype=float))
    A = jac(mid) if jac is not None else _fd_jacobian(field, mid)
    I = np.eye(mid.size)
    return np.linalg.solve(I - 0.5 * h * A, I + 0.5 * h * A)
