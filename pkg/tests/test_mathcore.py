import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nosekam.mathcore import FlatMetric, Mode, TorusPotential, UnitCovector, UsageError, inner, potential_eval, potential_grad

finite = st.floats(-3, 3, allow_nan=False)


def test_inner_examples():
    e = FlatMetric.identity(2)
    assert inner(e, [1, 0], [0, 1]) == 0
    assert inner(e, [3, 4], [3, 4]) == 25
    assert inner(FlatMetric(np.diag([2.0, 1.0])), [1, 0], [1, 0]) == pytest.approx(0.5, abs=1e-15)


def test_inner_dimension_mismatch():
    with pytest.raises(UsageError):
        inner(FlatMetric.identity(2), [1, 0, 0], [1, 0])


@pytest.mark.parametrize("g", [[[1, 2], [0, 1]], [[1, 0], [0, -1]], [[1, 2, 3]]])
def test_metric_rejects_bad_matrices(g):
    with pytest.raises(UsageError):
        FlatMetric(np.array(g, dtype=float))


@st.composite
def spd(draw, n=3):
    A = draw(arrays(float, (n, n), elements=finite))
    return FlatMetric(A @ A.T + np.eye(n))


@given(spd(), arrays(float, 3, elements=finite))
def test_metric_duality_roundtrip(g, c):
    assert np.allclose(g.g @ g.ginv, np.eye(3), atol=1e-12)
    assert np.allclose(g.flat(g.sharp(c)), c, atol=1e-12 * max(1, np.abs(c).max()) * 10)
    assert g.inner(c, c) == pytest.approx(float(np.sum(g.orthonormal(c) ** 2)), rel=1e-12, abs=1e-12)


def test_potential_examples():
    Z = TorusPotential.zero(2)
    assert potential_eval(Z, [0.3, 0.1]) == 0
    assert np.array_equal(potential_grad(Z, [0.3, 0.1]), [0, 0])
    V = TorusPotential.cosine(2)
    assert potential_eval(V, [0.0, 0.0]) == 1.0
    assert np.allclose(potential_grad(V, [0.0, 0.0]), 0.0)
    assert potential_grad(V, [0.25, 0.0])[0] == pytest.approx(-2 * np.pi, abs=1e-14)


MIXED = TorusPotential(2, (Mode((1, 0), 0.7, -0.2), Mode((2, -3), 0.1, 0.4), Mode((0, 1), 0.0, 1.3)))


@given(arrays(float, 2, elements=finite), arrays(int, 2, elements=st.integers(-50, 50)))
def test_potential_periodic(q, m):
    assert abs(MIXED(q + m) - MIXED(q)) < 1e-12


# unit wavevectors keep the O(h^2) truncation error of the step-1e-5 stencil below 1e-8
SMOOTH = TorusPotential(2, (Mode((1, 0), 0.7, -0.2), Mode((1, -1), 0.1, 0.4), Mode((0, 1), 0.0, 0.5)))


@given(arrays(float, 2, elements=finite))
def test_gradient_matches_central_differences(q):
    h = 1e-5
    fd = [(SMOOTH(q + h * e) - SMOOTH(q - h * e)) / (2 * h) for e in np.eye(2)]
    assert np.max(np.abs(SMOOTH.grad(q) - fd)) < 1e-8


def test_potential_json_roundtrip_and_validation():
    assert TorusPotential.from_json(MIXED.to_json()) == MIXED
    with pytest.raises(UsageError):
        TorusPotential.from_json({"modes": []})
    with pytest.raises(UsageError):
        TorusPotential(1, ({"k": [0.5], "cos": 1.0},))


def test_unit_covector():
    C = UnitCovector.axis(3, 1)
    assert C.exact == (0, 1, 0)
    g = FlatMetric(np.diag([4.0, 1.0]))
    D = UnitCovector.normalized([1.0, 1.0], g)
    assert g.norm2(D.components) == pytest.approx(1.0, abs=1e-12)
    P = D.projector()
    assert np.allclose(P @ P, P) and np.trace(P) == pytest.approx(1.0)
    with pytest.raises(UsageError):
        UnitCovector(np.array([1.0, 1.0]), FlatMetric.identity(2))
