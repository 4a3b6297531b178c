"""Penalty objective, its gradient system and stability matrix.

For a system ``f``, anchor ``a`` and penalty weight ``beta``::

    mu(x) = (beta * sum f_i(x)^2 + |x - a|^2) / 2
    G(x)  = (x - a) + beta * J(x)^T f(x)                  # gradient of mu
    S(x)  = I + beta * (J^T J + sum_l f_l * Hess f_l)      # Jacobian of G

``S`` is symmetric; its spectrum drives the tracer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, DivergedToInfinity, NoConvergence
from .linalg import lu_solve
from .poly import PolySystem

EPS = np.finfo(float).eps
DIVERGENCE_RADIUS = 1e8


@dataclass(frozen=True, eq=False)
class PenaltyProblem:
    sys: PolySystem
    anchor: np.ndarray
    beta: float

    def __post_init__(self):
        a = np.array(self.anchor, dtype=np.float64).reshape(-1)
        if a.shape[0] != self.sys.n_vars:
            raise DimensionMismatch(f"anchor has length {a.shape[0]}, expected {self.sys.n_vars}")
        if not np.all(np.isfinite(a)):
            raise ValueError("anchor must be finite")
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise ValueError("beta must be finite and positive")
        a.setflags(write=False)
        object.__setattr__(self, "anchor", a)
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def n(self) -> int:
        return self.sys.n_vars

    def with_anchor(self, anchor) -> "PenaltyProblem":
        return PenaltyProblem(self.sys, anchor, self.beta)

    def default_tol(self) -> float:
        return 1e-10 * (1.0 + float(np.linalg.norm(self.anchor)))


@dataclass(frozen=True, eq=False)
class CriticalPoint:
    x: np.ndarray
    residual: float
    mu: float
    grad_norm: float
    iterations: int = 0

    def as_dict(self):
        return {
            "x": [float(v) for v in self.x],
            "residual": self.residual,
            "mu": self.mu,
            "grad_norm": self.grad_norm,
        }


def _point(prob, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (prob.n,):
        raise DimensionMismatch(f"point has shape {x.shape}, expected ({prob.n},)")
    return x


def mu_value(prob: PenaltyProblem, x) -> float:
    x = _point(prob, x)
    f = prob.sys.evaluate(x)
    d = x - prob.anchor
    return 0.5 * (prob.beta * float(f @ f) + float(d @ d))


def grad_system(prob: PenaltyProblem, x) -> np.ndarray:
    x = _point(prob, x)
    f, J, _ = prob.sys.eval_all(x, 1)
    return (x - prob.anchor) + prob.beta * (J.T @ f)


def _curvature_matrix(f, J, H):
    # A = J^T J + sum_l f_l H_l, mirrored so it is exactly symmetric
    n = J.shape[1]
    A = J.T @ J + (f @ H.reshape(f.shape[0], n * n)).reshape(n, n)
    return 0.5 * (A + A.T)


def _shift_identity(A):
    A.flat[:: A.shape[0] + 1] += 1.0
    return A


def stability_matrix(prob: PenaltyProblem, x) -> np.ndarray:
    x = _point(prob, x)
    f, J, H = prob.sys.eval_all(x, 2)
    return _shift_identity(prob.beta * _curvature_matrix(f, J, H))


def grad_and_stability(prob: PenaltyProblem, x):
    """``(G, S, f)`` from a single kernel call."""
    x = _point(prob, x)
    f, J, H = prob.sys.eval_all(x, 2)
    G = (x - prob.anchor) + prob.beta * (J.T @ f)
    return G, _shift_identity(prob.beta * _curvature_matrix(f, J, H)), f


def gradient_noise_floor(prob: PenaltyProblem, x) -> float:
    """Rough bound on the rounding error of ``G(x)`` in double precision.

    With beta = 1e4 and coefficients in the hundreds, the attainable
    ``|G|`` can sit well above an absolute 1e-10.
    """
    x = _point(prob, x)
    f, J, _ = prob.sys.eval_all(x, 1)
    Mf, MJ, _ = prob.sys.eval_abs(x, 1)
    T = max(len(prob.sys._packed[0]), 1)
    scale = np.linalg.norm(MJ) * np.linalg.norm(f) + np.linalg.norm(J) * np.linalg.norm(Mf)
    return 16.0 * T * EPS * (np.linalg.norm(x) + np.linalg.norm(prob.anchor) + prob.beta * scale)


def critical_point(prob: PenaltyProblem, x, iterations: int = 0) -> CriticalPoint:
    x = np.array(x, dtype=np.float64)
    f = prob.sys.evaluate(x)
    return CriticalPoint(
        x=x,
        residual=float(np.linalg.norm(f)),
        mu=mu_value(prob, x),
        grad_norm=float(np.linalg.norm(grad_system(prob, x))),
        iterations=iterations,
    )


def newton_refine(prob: PenaltyProblem, x0, tol: float | None = None, max_iter: int = 50) -> CriticalPoint:
    """Full-step Newton on ``G(x) = 0`` with ``S`` as its Jacobian.

    Converged when ``|G| <= max(tol, rounding floor)``.  Raises
    NoConvergence, DivergedToInfinity, or SingularMatrix from the solve.
    """
    if tol is None:
        tol = prob.default_tol()
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = np.array(_point(prob, x0), dtype=np.float64)
    floor = None
    for it in range(max_iter + 1):
        G, S, _ = grad_and_stability(prob, x)
        gn = float(np.linalg.norm(G))
        if not np.isfinite(gn):
            raise DivergedToInfinity("non-finite gradient during Newton")
        if gn <= tol:
            return critical_point(prob, x, it)
        if floor is None or gn <= 1e3 * floor:
            floor = gradient_noise_floor(prob, x)
            if gn <= floor:
                return critical_point(prob, x, it)
        if it == max_iter:
            break
        x = x - lu_solve(S, G)
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > DIVERGENCE_RADIUS:
            raise DivergedToInfinity(f"Newton iterate left the ball of radius {DIVERGENCE_RADIUS:g}")
    raise NoConvergence(f"Newton did not reach |G| <= {tol:.2e} in {max_iter} iterations (|G|={gn:.2e})", max_iter)


def slack_values(prob: PenaltyProblem, x):
    """Slack ``w = -sqrt(beta) f(x)`` and multiplier ``lam = sqrt(beta) w``
    of the equivalent smooth constrained formulation."""
    f = prob.sys.evaluate(_point(prob, x))
    w = -np.sqrt(prob.beta) * f
    return w, np.sqrt(prob.beta) * w


def lagrangian_residual(prob: PenaltyProblem, x, w=None, lam=None) -> float:
    """Residual of the Lagrange system of

        min (|w|^2 + |x - a|^2)/2  s.t.  f(x) + w/sqrt(beta) = 0

    i.e. ``x - a = J^T lam``, ``w = lam/sqrt(beta)``, ``f + w/sqrt(beta) = 0``.
    Missing ``w``/``lam`` are recovered from ``x``.
    """
    x = _point(prob, x)
    if w is None or lam is None:
        w, lam = slack_values(prob, x)
    rb = np.sqrt(prob.beta)
    f, J, _ = prob.sys.eval_all(x, 1)
    r1 = (x - prob.anchor) - J.T @ lam
    r2 = np.asarray(w) - np.asarray(lam) / rb
    r3 = f + np.asarray(w) / rb
    return float(np.linalg.norm(np.concatenate([r1, r2, r3])))
