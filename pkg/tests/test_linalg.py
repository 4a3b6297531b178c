import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from rankcurve.errors import DimensionMismatch, NotSymmetric, SingularMatrix
from rankcurve.linalg import condition_probe, lu_solve, sym_eigen


def test_lu_examples():
    b = np.array([1.5, -2.0, 3.0])
    assert np.allclose(lu_solve(np.eye(3), b), b)
    assert np.allclose(lu_solve([[2.0, 0.0], [0.0, 4.0]], [2.0, 8.0]), [1.0, 2.0])


def test_lu_random_multiply_back():
    rng = np.random.default_rng(0)
    for _ in range(50):
        A = rng.normal(size=(6, 6)) + 6 * np.eye(6)
        b = rng.normal(size=6)
        x = lu_solve(A, b)
        assert np.linalg.norm(A @ x - b) <= 1e-12 * np.linalg.norm(A) * np.linalg.norm(x) + 1e-13


def test_lu_needs_pivoting():
    A = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert np.allclose(lu_solve(A, [2.0, 3.0]), [3.0, 2.0])


def test_lu_errors():
    with pytest.raises(SingularMatrix):
        lu_solve([[1.0, 1.0], [1.0, 1.0]], [1.0, 2.0])
    with pytest.raises(DimensionMismatch):
        lu_solve(np.ones((2, 3)), [1.0, 2.0])
    with pytest.raises(DimensionMismatch):
        lu_solve(np.eye(2), [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        lu_solve([[np.nan, 0.0], [0.0, 1.0]], [1.0, 1.0])


def test_eigen_cubic_stability_matrix():
    S = np.array([[188.7722, -91.9182], [-91.9182, 45.5187]])
    eig = sym_eigen(S)
    assert np.allclose(eig.values, [0.6150, 233.6758], atol=1e-3)
    v = eig.vectors[:, 0]
    assert np.allclose(np.abs(v), [0.4389, 0.8985], atol=1e-3)


def test_eigen_identity():
    eig = sym_eigen(np.eye(4))
    assert np.allclose(eig.values, 1.0)
    assert np.allclose(eig.vectors.T @ eig.vectors, np.eye(4), atol=1e-12)


def _check_decomposition(S):
    eig = sym_eigen(S)
    fro = np.linalg.norm(S)
    assert np.all(np.diff(eig.values) >= 0)
    V = eig.vectors
    assert np.allclose(np.linalg.norm(V, axis=0), 1.0, atol=1e-12)
    off = V.T @ V - np.eye(len(S))
    assert np.abs(off).max() <= 1e-10
    for lam, v in eig.pairs():
        assert np.linalg.norm(S @ v - lam * v) <= 1e-8 * max(fro, 1e-300) + 1e-300
    assert np.linalg.norm(V @ np.diag(eig.values) @ V.T - S) <= 1e-8 * max(fro, 1.0)
    return eig


@pytest.mark.property
def test_eigen_random_reconstruction():
    rng = np.random.default_rng(1)
    for _ in range(50):
        M = rng.normal(size=(8, 8))
        _check_decomposition(M + M.T)


@pytest.mark.property
@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, (5, 5), elements=st.floats(-1e3, 1e3, allow_nan=False)))
def test_eigen_property(M):
    _check_decomposition(0.5 * (M + M.T))


def test_eigen_rejects_nonsymmetric():
    with pytest.raises(NotSymmetric):
        sym_eigen([[1.0, 2.0], [0.0, 1.0]])


def test_condition_probe():
    assert abs(condition_probe(np.eye(3)) - 1.0) <= 1e-6
    assert abs(condition_probe(np.diag([1e-8, 1.0])) - 1e-8) <= 1e-10
    rng = np.random.default_rng(2)
    for _ in range(20):
        A = rng.normal(size=(5, 5))
        smin = np.sqrt(np.linalg.eigvalsh(A.T @ A)[0])
        est = condition_probe(A, iterations=50)
        assert smin / 2 <= est <= 2 * smin
    assert condition_probe([[1.0, 1.0], [1.0, 1.0]]) == 0.0
