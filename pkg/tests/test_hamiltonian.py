import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qccphase.hamiltonian import (SYMPLECTIC_J, ModelParams, energy, flow_field, hessian,
                                  higher_derivatives, potential_gradient)

coord = st.floats(-2.0, 2.0, allow_nan=False)
point = st.tuples(coord, coord, coord, coord).map(np.array)
models = st.one_of(
    st.builds(ModelParams.quartic, st.floats(0.0, 3.0), st.floats(0.01, 2.0)),
    st.builds(lambda w1, w2, c: ModelParams.quadratic((w1, w2), c),
              st.floats(0.3, 2.0), st.floats(0.3, 2.0), st.floats(-0.05, 0.05)),
)
QUARTIC = ModelParams.quartic(1.0, 0.01)


def test_symplectic_form():
    J = SYMPLECTIC_J
    assert np.array_equal(J @ J, -np.eye(4))
    assert np.array_equal(J.T, -J)
    with pytest.raises(ValueError):
        J[0, 0] = 1.0


def test_energy_examples():
    assert energy(QUARTIC, np.zeros(4)) == 0.0
    assert energy(QUARTIC, [1, 1, 0, 0]) == pytest.approx(0.505, abs=1e-15)
    for a, b in [(1.0, 0.01), (0.3, 2.0)]:
        assert energy(ModelParams.quartic(a, b), [0, 0, 0.5, 0.414]) == pytest.approx(0.210698, abs=1e-12)


def test_flow_field_examples():
    assert np.array_equal(flow_field(QUARTIC, np.zeros(4)), np.zeros(4))
    np.testing.assert_allclose(flow_field(QUARTIC, [1, 1, 0, 0]), [0, 0, -1.01, -1.01], rtol=1e-14)


def test_hessian_examples():
    np.testing.assert_array_equal(hessian(QUARTIC, np.zeros(4)), np.diag([0, 0, 1, 1]))
    H = hessian(QUARTIC, [1, 1, 0, 0])
    assert H[0, 0] == pytest.approx(1.03)
    assert H[0, 1] == pytest.approx(2.0)


def test_fourth_derivative_reference_value():
    _, fourth = higher_derivatives(QUARTIC, [0.4, 0.6, 0.5, 0.414])
    assert fourth[0, 0, 1, 1] == pytest.approx(2.0)


def test_quadratic_model_has_no_higher_derivatives():
    third, fourth = higher_derivatives(ModelParams.quadratic((1.0, 1.3), 0.2), [0.3, -0.7, 1, 2])
    assert not third.any() and not fourth.any()


@pytest.mark.parametrize("kwargs", [dict(kind="quartic", beta=0.0), dict(kind="quartic", alpha=-1.0),
                                    dict(kind="quadratic-test", omega=(1.0, 0.0)),
                                    dict(kind="quadratic-test", coupling=1.0), dict(kind="cubic")])
def test_invalid_params(kwargs):
    with pytest.raises(ValueError):
        ModelParams(**kwargs)


def _central(f, x, h):
    cols = []
    for j in range(4):
        e = np.zeros(4)
        e[j] = h
        cols.append((f(x + e) - f(x - e)) / (2 * h))
    return np.stack(cols, axis=-1)


@settings(max_examples=60, deadline=None)
@given(models, point)
def test_flow_field_is_J_grad_energy(params, x):
    grad = _central(lambda y: energy(params, y), x, 1e-5)
    np.testing.assert_allclose(flow_field(params, x), SYMPLECTIC_J @ grad, rtol=1e-8, atol=1e-8)


@settings(max_examples=60, deadline=None)
@given(models, point)
def test_hessian_matches_flow_differences(params, x):
    # d(flow)/dx = J H  =>  H = -J d(flow)/dx
    jac = _central(lambda y: flow_field(params, y), x, 1e-4)
    np.testing.assert_allclose(hessian(params, x), -SYMPLECTIC_J @ jac, rtol=1e-7, atol=1e-7)
    H = hessian(params, x)
    assert np.array_equal(H, H.T)


@settings(max_examples=60, deadline=None)
@given(models, point)
def test_higher_derivatives_match_nested_differences(params, x):
    third, fourth = higher_derivatives(params, x)
    fd3 = _central(lambda y: hessian(params, y), x, 1e-4)
    np.testing.assert_allclose(third, fd3, rtol=1e-6, atol=1e-6)
    fd4 = _central(lambda y: higher_derivatives(params, y)[0], x, 1e-4)
    np.testing.assert_allclose(fourth, fd4, rtol=1e-6, atol=1e-6)


@settings(max_examples=40, deadline=None)
@given(models, point, st.permutations(range(3)), st.permutations(range(4)))
def test_higher_derivatives_fully_symmetric(params, x, perm3, perm4):
    third, fourth = higher_derivatives(params, x)
    assert np.array_equal(third, third.transpose(perm3))
    assert np.array_equal(fourth, fourth.transpose(perm4))
    assert not third[2:].any() and not fourth[..., 2:].any()


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 3.0), st.floats(0.01, 2.0), point)
def test_quartic_exchange_symmetry(a, b, x):
    params = ModelParams.quartic(a, b)
    swapped = x[[1, 0, 3, 2]]
    assert energy(params, x) == pytest.approx(energy(params, swapped), rel=1e-14, abs=1e-15)


def test_vectorized_shapes():
    xs = np.random.default_rng(0).normal(size=(5, 3, 4))
    assert energy(QUARTIC, xs).shape == (5, 3)
    assert potential_gradient(QUARTIC, xs).shape == (5, 3, 2)
    assert hessian(QUARTIC, xs).shape == (5, 3, 4, 4)
