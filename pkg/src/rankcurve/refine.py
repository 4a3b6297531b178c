"""Refinement of critical points by continuation in the penalty weight.

With ``t = 1/beta`` the critical system becomes ``H(x, t) = t (x - a) +
J^T f = 0``.  :func:`track_beta` follows its real solution path between two
values of ``t``; :func:`move_toward_tube` uses it to pull the guiding point
toward the current critical point while keeping the penalty weight fixed.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidStart, NoConvergence, SingularMatrix
from .linalg import lu_solve
from .penalty import CriticalPoint, PenaltyProblem, _curvature_matrix, newton_refine
from .poly import PolySystem

START_TOL = 1e-6
MIN_STEP = 1e-14
MAX_CORRECTOR_ITERS = 8
EASY_ITERS = 3


class PathStatus(str, enum.Enum):
    COMPLETED = "Completed"
    SINGULAR_STOP = "SingularStop"
    STEP_UNDERFLOW = "StepUnderflow"


@dataclass
class HomotopyPath:
    samples: list[tuple[float, np.ndarray]] = field(default_factory=list)
    status: PathStatus = PathStatus.COMPLETED

    @property
    def end(self) -> np.ndarray:
        return self.samples[-1][1]

    @property
    def t_end(self) -> float:
        return self.samples[-1][0]


@dataclass(frozen=True, eq=False)
class TubeMove:
    x1: np.ndarray
    a1: np.ndarray
    lam: float


def homotopy_residual(sys: PolySystem, anchor, x, t) -> np.ndarray:
    f, J, _ = sys.eval_all(x, 1)
    return t * (x - anchor) + J.T @ f


def _hx(sys, anchor, x, t):
    f, J, H = sys.eval_all(x, 2)
    A = _curvature_matrix(f, J, H)
    A.flat[:: A.shape[0] + 1] += t
    return t * (x - anchor) + J.T @ f, A


def _correct(sys, anchor, x, t, tol):
    """Newton on H(., t).  Returns (x, iterations) or None on failure."""
    x = x.copy()
    last_step = math.inf
    for it in range(MAX_CORRECTOR_ITERS + 1):
        r, A = _hx(sys, anchor, x, t)
        rn = np.linalg.norm(r)
        if not np.isfinite(rn):
            return None
        if rn <= tol and (it > 0 and (last_step <= 1e-10 * (1 + np.linalg.norm(x)) or rn <= 1e-3 * tol)):
            return x, it
        if it == MAX_CORRECTOR_ITERS:
            return None
        dx = lu_solve(A, r)
        last_step = np.linalg.norm(dx)
        x = x - dx
    return None


def track_beta(sys: PolySystem, anchor, x_start, t1: float, t0: float,
               tol: float | None = None) -> HomotopyPath:
    """Predictor-corrector continuation of ``H(x, t) = 0`` from ``t1`` to ``t0``.

    Steps are taken in ``log t``; the initial step halves ``t`` and is
    capped at an eighth of the total log-range.  Failed corrections halve
    the step, three consecutive easy ones double it.
    """
    if not (t1 > 0 and t0 > 0):
        raise ValueError("t1 and t0 must be positive")
    a = np.asarray(anchor, dtype=np.float64)
    x = np.array(x_start, dtype=np.float64)
    if tol is None:
        tol = 1e-9 * (1.0 + float(np.linalg.norm(a)))
    r0 = np.linalg.norm(homotopy_residual(sys, a, x, t1))
    if not r0 <= START_TOL:
        raise InvalidStart(f"start residual {r0:.3e} exceeds {START_TOL:g}")
    path = HomotopyPath()
    try:
        fixed = _correct(sys, a, x, t1, tol)
    except SingularMatrix:
        path.samples.append((t1, x))
        path.status = PathStatus.SINGULAR_STOP
        return path
    if fixed is not None:
        x = fixed[0]
    path.samples.append((t1, x))
    if t1 == t0:
        return path

    s, s_end = math.log(t1), math.log(t0)
    direction = 1.0 if s_end > s else -1.0
    cap = abs(s_end - s) / 8.0
    ds = min(math.log(2.0), cap)
    easy = 0
    t = t1
    while True:
        remaining = abs(s_end - s)
        step = min(ds, remaining)
        last = step >= remaining
        s_new = s_end if last else s + direction * step
        t_new = t0 if last else math.exp(s_new)
        try:
            _, A = _hx(sys, a, x, t)
            # dx/ds = t dx/dt = -t (tI + A)^{-1} (x - a)
            slope = -t * lu_solve(A, x - a)
            x_pred = x + (s_new - s) * slope
            res = _correct(sys, a, x_pred, t_new, tol)
        except SingularMatrix:
            path.status = PathStatus.SINGULAR_STOP
            return path
        if res is None or np.linalg.norm(res[0] - x_pred) > 0.1 * (1.0 + np.linalg.norm(x)):
            ds = step / 2.0
            easy = 0
            if ds < MIN_STEP:
                path.status = PathStatus.STEP_UNDERFLOW
                return path
            continue
        x, iters = res
        s, t = s_new, t_new
        path.samples.append((t_new, x))
        if last:
            path.status = PathStatus.COMPLETED
            return path
        easy = easy + 1 if iters <= EASY_ITERS else 0
        if easy >= 3:
            ds = min(2.0 * step, cap)
            easy = 0


def move_toward_tube(sys: PolySystem, x0, a0, lam: float, beta0: float) -> TubeMove:
    """Pull the guiding point onto the segment toward ``x0`` and re-solve.

    ``a1 = (1 - lam) x0 + lam a0``; ``x0`` is exactly critical for ``(a1,
    lam*beta0)``, so tracking ``t`` from ``1/(lam beta0)`` to ``1/beta0``
    yields a critical point ``x1`` for ``(a1, beta0)``.  A singular path is
    retried once with ``lam/2``.
    """
    if not (0.0 < lam <= 1.0):
        raise ValueError("lambda must lie in (0, 1)")
    x0 = np.asarray(x0, dtype=np.float64)
    a0 = np.asarray(a0, dtype=np.float64)
    prob0 = PenaltyProblem(sys, a0, beta0)
    for attempt in range(2):
        a1 = (1.0 - lam) * x0 + lam * a0
        path = track_beta(sys, a1, x0, 1.0 / (lam * beta0), 1.0 / beta0)
        if path.status is PathStatus.COMPLETED:
            cp = newton_refine(prob0.with_anchor(a1), path.end)
            return TubeMove(cp.x, a1, lam)
        if path.status is PathStatus.STEP_UNDERFLOW:
            raise NoConvergence("beta continuation stalled (step underflow)")
        lam /= 2.0
    raise SingularMatrix("beta continuation hit a singular Jacobian twice")


def refine_witness(sys: PolySystem, anchor, x, beta_from: float, beta_to: float) -> CriticalPoint:
    """Carry a critical point at ``beta_from`` to one at ``beta_to`` along
    the beta-continuation path."""
    if not (beta_from > 0 and beta_to > 0):
        raise ValueError("betas must be positive")
    a = np.asarray(anchor, dtype=np.float64)
    x = newton_refine(PenaltyProblem(sys, a, beta_from), x).x
    path = track_beta(sys, a, x, 1.0 / beta_from, 1.0 / beta_to)
    if path.status is PathStatus.SINGULAR_STOP:
        raise SingularMatrix(f"singular Jacobian at t={path.t_end:.3e}")
    if path.status is PathStatus.STEP_UNDERFLOW:
        raise NoConvergence(f"step underflow at t={path.t_end:.3e}")
    return newton_refine(PenaltyProblem(sys, a, beta_to), path.end)


EXACT = math.nan


def convergence_slope(sys: PolySystem, anchor, x_seed, betas: Sequence[float],
                      distance: Callable[[np.ndarray], float]) -> float:
    """Least-squares slope of ``log d(beta)`` against ``log beta``.

    ``x_seed`` is refined to a critical point at ``betas[0]`` and then tracked
    up the ladder; ``distance`` maps a point to its distance from the curve.
    Returns :data:`EXACT` (NaN) when every distance is zero.
    """
    betas = [float(b) for b in betas]
    if len(betas) < 3 or any(b2 <= b1 for b1, b2 in zip(betas, betas[1:])):
        raise ValueError("betas must be ascending with at least three values")
    a = np.asarray(anchor, dtype=np.float64)
    x = newton_refine(PenaltyProblem(sys, a, betas[0]), x_seed).x
    dists = [float(distance(x))]
    for b_prev, b_next in zip(betas, betas[1:]):
        path = track_beta(sys, a, x, 1.0 / b_prev, 1.0 / b_next)
        if path.status is PathStatus.SINGULAR_STOP:
            raise SingularMatrix(f"singular Jacobian while tracking beta to {b_next:g}")
        if path.status is PathStatus.STEP_UNDERFLOW:
            raise NoConvergence(f"step underflow while tracking beta to {b_next:g}")
        x = path.end
        dists.append(float(distance(x)))
    d = np.array(dists)
    if np.all(d == 0.0):
        return EXACT
    if np.any(d <= 0.0):
        return EXACT
    slope, _ = np.polyfit(np.log(betas), np.log(d), 1)
    return float(slope)
