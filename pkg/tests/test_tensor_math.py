import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from tivisco import tensor_math as tm
from tivisco.errors import SingularTensorError

from conftest import random_F

elements = st.floats(-2.0, 2.0, allow_nan=False)
mats = arrays(np.float64, (3, 3), elements=elements)


@given(mats)
def test_det_matches_numpy(A):
    assert tm.det(A) == pytest.approx(np.linalg.det(A), abs=1e-12)


@given(mats)
def test_adjugate_identity(A):
    assert np.allclose(A @ tm.adjugate(A), tm.det(A) * np.eye(3), atol=1e-12)


def test_inv_batched():
    rng = np.random.default_rng(1)
    A = random_F(rng, 0.3, n=50)
    assert np.allclose(tm.inv(A) @ A, np.eye(3), atol=1e-12)


def test_inv_singular_raises():
    A = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 1.0, 1.0]])
    with pytest.raises(SingularTensorError):
        tm.inv(A)


def test_inv_of_small_but_regular_matrix_passes():
    assert np.allclose(tm.inv(1e-8 * np.eye(3)), 1e8 * np.eye(3))


@given(mats, mats)
def test_left_right_maps(A, B):
    X = np.arange(9.0).reshape(3, 3) - 4.0
    assert np.allclose(tm.ddot42(tm.left_right(A, B), X), A @ X @ B, atol=1e-10)
    assert np.allclose(tm.ddot42(tm.left_right_t(A, B), X), A @ X.T @ B, atol=1e-10)


def test_compose_is_chain_rule():
    rng = np.random.default_rng(2)
    A, B = rng.standard_normal((2, 3, 3))
    # d(A X B)/dX composed with d(X^T)/dX is the map X -> A X^T B
    assert np.allclose(tm.compose(tm.left_right(A, B), tm.identity4_transpose()),
                       tm.left_right_t(A, B))


def test_identities():
    X = np.random.default_rng(3).standard_normal((3, 3))
    assert np.allclose(tm.ddot42(tm.identity4(), X), X)
    assert np.allclose(tm.ddot42(tm.identity4_sym(), X), tm.sym(X))
    assert np.allclose(tm.ddot42(tm.identity4_transpose(), X), X.T)
    assert np.allclose(tm.sym(X) + tm.skw(X), X)


def test_dinv_finite_difference():
    A = random_F(np.random.default_rng(4), 0.2)
    fd = tm.finite_difference(tm.inv, A, 1e-5, richardson=True)
    assert np.abs(fd - tm.dinv(A)).max() < 1e-9


@given(arrays(np.float64, (3, 3), elements=st.floats(-1.0, 1.0)), st.floats(1e-3, 0.5))
def test_pade_close_to_expm(D, dt):
    from scipy.linalg import expm

    E = expm(dt * D)
    err = np.abs(tm.pade_exp(D, dt) - E).max()
    assert err <= 0.2 * (dt * max(np.abs(D).max(), 1e-3)) ** 3 * 10 + 1e-14


def test_pade_derivative_finite_difference():
    D = np.random.default_rng(5).standard_normal((3, 3))
    fd = tm.finite_difference(lambda X: tm.pade_exp(X, 0.3), D, 1e-5, richardson=True)
    assert np.abs(fd - tm.pade_exp_derivative(D, 0.3)).max() < 1e-9


def test_pade_traceless_determinant_third_order():
    D = np.random.default_rng(6).standard_normal((3, 3))
    D -= np.trace(D) / 3 * np.eye(3)
    e1 = abs(tm.det(tm.pade_exp(D, 1e-2)) - 1)
    e2 = abs(tm.det(tm.pade_exp(D, 5e-3)) - 1)
    assert e2 < e1 / 6


@given(st.floats(-np.pi, np.pi))
def test_rotation_orthogonal(angle):
    Q = tm.rotation([1.0, 2.0, -0.5], angle)
    assert np.allclose(Q @ Q.T, np.eye(3), atol=1e-14)
    assert tm.det(Q) == pytest.approx(1.0)


def test_first_piola_derivative():
    rng = np.random.default_rng(7)
    F = random_F(rng, 0.1)
    C = rng.standard_normal((3, 3, 3, 3))
    S0 = tm.sym(rng.standard_normal((3, 3)))

    def sigma(X):
        return S0 + tm.ddot42(C, X - np.eye(3))

    _, dP = tm.first_piola(F, sigma(F), C)
    fd = tm.finite_difference(lambda X: tm.first_piola(X, sigma(X)), F, 1e-5, richardson=True)
    assert np.abs(fd - dP).max() < 1e-8


def test_finite_difference_of_quadratic_is_exact():
    fd = tm.finite_difference(lambda X: X @ X, np.eye(3) * 2.0, 1e-3)
    assert np.allclose(tm.ddot42(fd, np.ones((3, 3))), 4.0 * np.ones((3, 3)))
