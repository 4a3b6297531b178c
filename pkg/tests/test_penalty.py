import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rankcurve.errors import DimensionMismatch, NoConvergence
from rankcurve.penalty import (
    PenaltyProblem,
    grad_system,
    lagrangian_residual,
    mu_value,
    newton_refine,
    slack_values,
    stability_matrix,
)
from rankcurve.poly import Polynomial, PolySystem, homogenize, parse_system

from conftest import CUBIC_WITNESSES


def test_mu_examples(system):
    prob = PenaltyProblem(parse_system("x1", ["x1"]), [0.0], 4.0)
    assert mu_value(prob, [1.0]) == 2.5
    cubic = system("cubic")
    prob = PenaltyProblem(cubic, [1.0, 1.0], 1e4)
    assert mu_value(prob, [1.0, 1.0]) == 0.0


def test_mu_homogenized_quartic(system):
    hs = homogenize(system("positive_quartic"))
    prob = PenaltyProblem(hs, [0.2, 0.5, 0.3], 1e4)
    # the reported value is the un-halved objective
    assert abs(2 * mu_value(prob, [0.565, 0.565, 0.596]) - 28.6) <= 0.5


def test_grad_cubic_expansion(system):
    cubic = system("cubic")
    x1 = Polynomial.variable(0, 2)
    x2 = Polynomial.variable(1, 2)
    f = cubic.polys[0]
    d1 = 6 * x1 ** 5 - 6 * x1 ** 2 * x2
    d2 = -2 * x1 ** 3 + 2 * x2
    g1 = x1 + 1e4 * f * d1
    g2 = x2 + 1 + 1e4 * f * d2
    assert g1.as_dict()[(11, 0)] == 60000.0
    assert g1.as_dict()[(8, 1)] == -180000.0
    assert g2.as_dict()[(9, 0)] == -20000.0
    prob = PenaltyProblem(cubic, [0.0, -1.0], 1e4)
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = rng.uniform(-1.2, 1.2, 2)
        G = grad_system(prob, x)
        assert np.allclose(G, [g1.evaluate(x), g2.evaluate(x)], rtol=1e-10, atol=1e-9)


def test_grad_zero_at_anchor_on_curve(system):
    prob = PenaltyProblem(system("circle"), [1.0, 0.0], 1e4)
    assert np.array_equal(grad_system(prob, [1.0, 0.0]), [0.0, 0.0])


def test_stability_examples(system):
    prob = PenaltyProblem(parse_system("x1", ["x1", "x2"]), [0.0, 0.0], 1.0)
    assert np.array_equal(stability_matrix(prob, [0.3, 0.7]), [[2.0, 0.0], [0.0, 1.0]])
    prob = PenaltyProblem(system("cubic"), [0.0, -1.0], 1e4)
    S = stability_matrix(prob, [-0.8296, -0.5982])
    assert np.allclose(S, [[188.7722, -91.9182], [-91.9182, 45.5187]], atol=0.05)


def test_stability_line():
    beta = 1e4
    prob = PenaltyProblem(parse_system("x2", ["x1", "x2"]), [0.0, 0.5], beta)
    # J^T J = diag(0, 1) and f is linear, so S = diag(1, 1 + beta)
    assert np.array_equal(stability_matrix(prob, [0.4, 0.0]), np.diag([1.0, 1.0 + beta]))


def _random_system(rng, n, k):
    polys = []
    for _ in range(k):
        coeffs = {}
        for _ in range(5):
            e = rng.multinomial(int(rng.integers(0, 4)), np.ones(n + 1) / (n + 1))[:n]
            coeffs[tuple(int(v) for v in e)] = float(rng.normal())
        polys.append(Polynomial.from_dict(coeffs, n))
    return PolySystem.from_polys(polys)


@pytest.mark.property
def test_gradient_and_stability_finite_differences():
    rng = np.random.default_rng(42)
    h = 1e-6
    for _ in range(200):
        n, k = int(rng.integers(1, 4)), int(rng.integers(1, 3))
        s = _random_system(rng, n, k)
        prob = PenaltyProblem(s, rng.normal(size=n), float(10 ** rng.uniform(0, 3)))
        x = rng.uniform(-1, 1, n)
        G = grad_system(prob, x)
        S = stability_matrix(prob, x)
        assert np.array_equal(S, S.T)
        fd_G = np.empty(n)
        fd_S = np.empty((n, n))
        for i in range(n):
            e = np.zeros(n)
            e[i] = h
            fd_G[i] = (mu_value(prob, x + e) - mu_value(prob, x - e)) / (2 * h)
            fd_S[:, i] = (grad_system(prob, x + e) - grad_system(prob, x - e)) / (2 * h)
        assert np.abs(G - fd_G).max() <= 1e-5 * max(np.abs(G).max(), 1.0)
        assert np.abs(S - fd_S).max() <= 1e-4 * max(np.abs(S).max(), 1.0)


def test_newton_refine_reaches_witnesses(system):
    prob = PenaltyProblem(system("cubic"), [0.0, -1.0], 1e4)
    cp = newton_refine(prob, [-0.83, -0.60])
    assert np.abs(cp.x - CUBIC_WITNESSES[1]).max() <= 5e-4
    cp = newton_refine(prob, [0.0, -0.04])
    assert np.abs(cp.x - CUBIC_WITNESSES[2]).max() <= 5e-4
    again = newton_refine(prob, cp.x)
    assert again.iterations <= 1
    assert np.array_equal(again.x, cp.x)


def test_newton_refine_errors(system):
    prob = PenaltyProblem(system("cubic"), [0.0, -1.0], 1e4)
    with pytest.raises(NoConvergence):
        newton_refine(prob, [3.0, 2.0], max_iter=2)
    with pytest.raises(DimensionMismatch):
        newton_refine(prob, [1.0])
    with pytest.raises(ValueError):
        newton_refine(prob, [0.0, 0.0], tol=0.0)


def test_problem_validation(system):
    with pytest.raises(DimensionMismatch):
        PenaltyProblem(system("cubic"), [0.0], 1.0)
    with pytest.raises(ValueError):
        PenaltyProblem(system("cubic"), [0.0, 0.0], -1.0)
    with pytest.raises(ValueError):
        PenaltyProblem(system("cubic"), [np.inf, 0.0], 1.0)


@pytest.mark.property
@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_lagrangian_equivalence(seed):
    # a critical point of mu, with w = -sqrt(beta) f and lam = sqrt(beta) w,
    # solves the Lagrange system of the constrained form
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    s = _random_system(rng, n, int(rng.integers(1, 3)))
    prob = PenaltyProblem(s, rng.normal(size=n), 10.0)
    try:
        cp = newton_refine(prob, rng.normal(size=n), tol=1e-11)
    except Exception:
        return
    assert lagrangian_residual(prob, cp.x) <= 1e-8 * (1 + np.linalg.norm(cp.x))
    w, lam = slack_values(prob, cp.x)
    assert np.allclose(lam, np.sqrt(prob.beta) * w)
    # away from critical points the residual is the gradient of mu
    x = cp.x + 0.1
    r = lagrangian_residual(prob, x)
    assert np.isclose(r, np.linalg.norm(grad_system(prob, x)), rtol=1e-9, atol=1e-12)
