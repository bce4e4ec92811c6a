"""Flat-torus geometry and trigonometric-polynomial potentials."""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

TWO_PI = 2.0 * np.pi


class UsageError(ValueError):
    """Bad arguments: dimension mismatches, non-SPD metrics and the like."""


@dataclass(frozen=True, eq=False)
class FlatMetric:
    """Constant SPD metric ``g`` on vectors; covectors use ``g^-1``."""

    g: np.ndarray

    def __post_init__(self):
        g = np.array(self.g, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] < 1:
            raise UsageError("metric must be a square matrix")
        if not np.allclose(g, g.T, atol=1e-12, rtol=0):
            raise UsageError("metric must be symmetric")
        if np.linalg.eigvalsh(g).min() <= 0:
            raise UsageError("metric must be positive definite")
        g.setflags(write=False)
        ginv = np.linalg.inv(g)
        ginv = 0.5 * (ginv + ginv.T)
        ginv.setflags(write=False)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "ginv", ginv)
        # orthonormal coframe: covector components C -> L^T-scaled so <.,.> is Euclidean
        object.__setattr__(self, "_chol", np.linalg.cholesky(ginv))

    @classmethod
    def identity(cls, n: int) -> "FlatMetric":
        return cls(np.eye(n))

    @property
    def dim(self) -> int:
        return self.g.shape[0]

    @property
    def is_identity(self) -> bool:
        return bool(np.array_equal(self.g, np.eye(self.dim)))

    def _check(self, *vs):
        for v in vs:
            if np.shape(v)[-1:] != (self.dim,):
                raise UsageError(f"expected dimension {self.dim}, got shape {np.shape(v)}")

    def inner(self, a, b):
        """Dual inner product of two covectors."""
        self._check(a, b)
        return np.asarray(a) @ self.ginv @ np.asarray(b)

    def norm2(self, a):
        return self.inner(a, a)

    def sharp(self, covector):
        """Covector to vector, ``v'' -> v``."""
        self._check(covector)
        return self.ginv @ np.asarray(covector)

    def flat(self, vector):
        """Vector to covector, ``v -> v' = <v, .>``."""
        self._check(vector)
        return self.g @ np.asarray(vector)

    def orthonormal(self, covector):
        """Components of a covector in a ``g^-1``-orthonormal frame."""
        self._check(covector)
        return self._chol.T @ np.asarray(covector)

    def to_json(self) -> list:
        return self.g.tolist()


def inner(metric: FlatMetric, a, b):
    return metric.inner(a, b)


@dataclass(frozen=True)
class Mode:
    k: tuple[int, ...]
    cos: float = 0.0
    sin: float = 0.0


@dataclass(frozen=True)
class TorusPotential:
    """``V(q) = sum_k a_k cos(2 pi k.q) + b_k sin(2 pi k.q)`` on ``R^n / Z^n``."""

    dim: int
    modes: tuple[Mode, ...] = ()

    def __post_init__(self):
        if self.dim < 1:
            raise UsageError("dimension must be positive")
        modes = tuple(m if isinstance(m, Mode) else Mode(tuple(m["k"]), m.get("cos", 0.0), m.get("sin", 0.0))
                      for m in self.modes)
        for m in modes:
            if len(m.k) != self.dim:
                raise UsageError(f"wavevector {m.k} does not have dimension {self.dim}")
            if any(int(x) != x for x in m.k):
                raise UsageError("wavevectors must be integer")
        object.__setattr__(self, "modes", modes)
        K = np.array([m.k for m in modes], dtype=float).reshape(len(modes), self.dim)
        object.__setattr__(self, "_K", K)
        object.__setattr__(self, "_a", np.array([m.cos for m in modes], dtype=float))
        object.__setattr__(self, "_b", np.array([m.sin for m in modes], dtype=float))

    @classmethod
    def zero(cls, dim: int) -> "TorusPotential":
        return cls(dim, ())

    @classmethod
    def cosine(cls, dim: int = 1, amplitude: float = 1.0, axis: int = 0) -> "TorusPotential":
        k = [0] * dim
        k[axis] = 1
        return cls(dim, (Mode(tuple(k), amplitude, 0.0),))

    @property
    def is_zero(self) -> bool:
        return not np.any(self._a) and not np.any(self._b)

    def _phase(self, q):
        q = np.asarray(q)
        if q.shape[-1:] != (self.dim,):
            raise UsageError(f"expected point of dimension {self.dim}")
        return TWO_PI * (self._K @ q)

    def __call__(self, q):
        if not self.modes:
            return 0.0 * np.sum(q)
        ph = self._phase(q)
        return self._a @ np.cos(ph) + self._b @ np.sin(ph)

    def grad(self, q):
        """Exact gradient, a covector."""
        if not self.modes:
            return 0.0 * np.asarray(q)
        ph = self._phase(q)
        w = TWO_PI * (-self._a * np.sin(ph) + self._b * np.cos(ph))
        return w @ self._K

    def to_json(self) -> dict:
        return {"dim": self.dim, "modes": [{"k": list(m.k), "cos": m.cos, "sin": m.sin} for m in self.modes]}

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, data: dict) -> "TorusPotential":
        if "dim" not in data:
            raise UsageError("potential: missing field 'dim'")
        return cls(int(data["dim"]), tuple(data.get("modes", ())))


def potential_eval(V: TorusPotential, q):
    return V(q)


def potential_grad(V: TorusPotential, q):
    return V.grad(q)


@dataclass(frozen=True, eq=False)
class UnitCovector:
    """Unit covector ``C``.

    ``exact`` holds rational components when ``C`` is axis-aligned under the
    identity metric, so the exact-arithmetic paths can use it.
    """

    components: np.ndarray
    metric: FlatMetric
    exact: tuple[Fraction, ...] | None = None

    def __post_init__(self):
        c = np.array(self.components, dtype=float)
        self.metric._check(c)
        if abs(self.metric.norm2(c) - 1.0) > 1e-12:
            raise UsageError("covector is not of unit length")
        c.setflags(write=False)
        object.__setattr__(self, "components", c)

    @classmethod
    def normalized(cls, components: Sequence[float], metric: FlatMetric | None = None) -> "UnitCovector":
        c = np.asarray(components, dtype=float)
        metric = metric or FlatMetric.identity(c.size)
        return cls(c / np.sqrt(metric.norm2(c)), metric)

    @classmethod
    def axis(cls, n: int, i: int = 0, sign: int = 1) -> "UnitCovector":
        ex = [Fraction(0)] * n
        ex[i] = Fraction(sign)
        return cls(np.array([float(x) for x in ex]), FlatMetric.identity(n), tuple(ex))

    @property
    def dim(self) -> int:
        return self.components.size

    def projector(self) -> np.ndarray:
        """The map ``CC'`` as a matrix acting on covectors (orthonormal frame)."""
        c = self.metric.orthonormal(self.components)
        return np.outer(c, c)
