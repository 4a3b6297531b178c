"""Witness points of a real variety from critical points of the penalty
objective, plus a sufficient test for real emptiness.

Critical points are found by seeded multistart damped Newton.  This is not a
complete solver: finding a witness on every connected component is best
effort and improves with ``n_starts``.
"""

from __future__ import annotations

import enum
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import RankCurveError
from .linalg import lu_solve, sym_eigen
from .penalty import (
    CriticalPoint,
    PenaltyProblem,
    critical_point,
    grad_and_stability,
    gradient_noise_floor,
    mu_value,
)
from .poly import INFINITE, PolySystem, homogenize, restrict_to_ray, trailing_degree

ARMIJO_C = 1e-4
MIN_ALPHA = 1e-10
NEWTON_ITER = 30
DESCENT_ITER = 200
STAGNATION_WINDOW = 25
STAGNATION_RTOL = 1e-9
# A global min of the (halved) homogenized objective above 2 rules out real
# zeros.  Reported values use the un-halved objective, so the bound is 4.
EMPTY_THRESHOLD = 4.0


def worker_count() -> int:
    try:
        return max(int(os.environ.get("RANKCURVE_THREADS", "0")), 0)
    except ValueError:
        return 0


def _converged(prob, x, gn, tol):
    return gn <= tol or (gn <= 1e3 * tol and gn <= gradient_noise_floor(prob, x))


def damped_newton(prob: PenaltyProblem, x0, tol: float | None = None,
                  max_iter: int = NEWTON_ITER) -> CriticalPoint | None:
    """Newton on ``G = 0`` with Armijo backtracking on ``|G|^2 / 2``.

    Returns None when the start does not converge.
    """
    if tol is None:
        tol = prob.default_tol()
    x = np.array(x0, dtype=np.float64)
    G, S, _ = grad_and_stability(prob, x)
    phi = 0.5 * float(G @ G)
    for it in range(max_iter + 1):
        gn = np.sqrt(2.0 * phi)
        if not np.isfinite(gn):
            return None
        if _converged(prob, x, gn, tol):
            return critical_point(prob, x, it)
        if it == max_iter:
            return None
        try:
            d = -lu_solve(S, G)
        except (RankCurveError, ValueError):
            return None
        alpha = 1.0
        while True:
            x_new = x + alpha * d
            G_new, S_new, _ = grad_and_stability(prob, x_new)
            phi_new = 0.5 * float(G_new @ G_new)
            # Newton direction: d/dalpha phi = -2 phi
            if np.isfinite(phi_new) and phi_new <= (1.0 - 2.0 * ARMIJO_C * alpha) * phi:
                break
            alpha *= 0.5
            if alpha < MIN_ALPHA:
                return None
        x, G, S, phi = x_new, G_new, S_new, phi_new
        if np.linalg.norm(x) > 1e8:
            return None
    return None


def saddle_free_descent(prob: PenaltyProblem, x0, tol: float | None = None,
                        max_iter: int = DESCENT_ITER, lowest: list | None = None) -> CriticalPoint | None:
    """Minimize ``mu`` with Newton steps on ``|S|`` (eigenvalues replaced by
    their magnitudes, floored) and Armijo backtracking on ``mu``.

    Reaches local minima from far more starts than Newton on ``G``; near a
    nondegenerate minimum the step is the plain Newton step.  Gives up when
    ``mu`` stagnates (degenerate minima converge sublinearly); the last
    ``(mu, x)`` of an abandoned run is appended to ``lowest`` if given.
    """
    if tol is None:
        tol = prob.default_tol()
    x = np.array(x0, dtype=np.float64)
    mu = mu_value(prob, x)
    history = [mu]
    for it in range(max_iter + 1):
        G, S, _ = grad_and_stability(prob, x)
        gn = float(np.linalg.norm(G))
        if not np.isfinite(gn):
            break
        if _converged(prob, x, gn, tol):
            return critical_point(prob, x, it)
        if it == max_iter:
            break
        try:
            eig = sym_eigen(S)
        except RankCurveError:
            break
        lam = np.abs(eig.values)
        lam = np.maximum(lam, 1e-10 * max(lam.max(), 1.0))
        d = -eig.vectors @ ((eig.vectors.T @ G) / lam)
        slope = float(G @ d)
        alpha = 1.0
        while alpha >= MIN_ALPHA:
            x_new = x + alpha * d
            mu_new = mu_value(prob, x_new)
            if np.isfinite(mu_new) and mu_new <= mu + ARMIJO_C * alpha * slope:
                break
            alpha *= 0.5
        else:
            # rounding limits further descent
            if gn <= 1e3 * tol:
                return critical_point(prob, x, it)
            break
        x, mu = x_new, mu_new
        history.append(mu)
        if np.linalg.norm(x) > 1e8:
            return None
        if len(history) > STAGNATION_WINDOW and \
                history[-STAGNATION_WINDOW - 1] - mu <= STAGNATION_RTOL * (1.0 + abs(mu)):
            break
    if lowest is not None and np.isfinite(mu):
        lowest.append((mu, x))
    return None


def local_critical_point(prob: PenaltyProblem, x0, tol: float | None = None,
                         lowest: list | None = None) -> CriticalPoint | None:
    """Newton on ``G`` (finds saddles too), falling back to descent on ``mu``."""
    cp = damped_newton(prob, x0, tol)
    if cp is None:
        cp = saddle_free_descent(prob, x0, tol, lowest=lowest)
    return cp


def _ball_starts(rng, center, radius, count):
    n = center.shape[0]
    starts = np.empty((count, n))
    for i in range(count):
        v = rng.standard_normal(n)
        v /= np.linalg.norm(v)
        r = radius * rng.random() ** (1.0 / n)
        starts[i] = center + r * v
    return starts


def multistart_critical_points(prob: PenaltyProblem, n_starts: int, radius: float,
                               seed: int, tol: float | None = None,
                               workers: int | None = None,
                               lowest: list | None = None) -> list[CriticalPoint]:
    """Critical points of ``mu`` from seeded uniform starts in a ball around
    the anchor, deduplicated and sorted by ``mu`` ascending.

    ``lowest`` collects ``(mu, x)`` endpoints of abandoned descents.
    """
    if n_starts < 1:
        raise ValueError("n_starts must be >= 1")
    if radius <= 0:
        raise ValueError("radius must be positive")
    rng = np.random.default_rng(seed)
    starts = _ball_starts(rng, prob.anchor, radius, n_starts)
    workers = worker_count() if workers is None else workers

    def run(x0):
        trail: list = []
        return local_critical_point(prob, x0, tol, trail), trail

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run, starts))
    else:
        outcomes = [run(x0) for x0 in starts]
    results = [cp for cp, _ in outcomes]
    if lowest is not None:
        for _, trail in outcomes:
            lowest.extend(trail)

    dedup = 1e-6 * (1.0 + radius)
    kept: list[CriticalPoint] = []
    for cp in results:  # start-index order keeps the merge deterministic
        if cp is None:
            continue
        if all(np.linalg.norm(cp.x - other.x) > dedup for other in kept):
            kept.append(cp)
    kept.sort(key=lambda cp: cp.mu)
    return kept


def filter_witnesses(points, eps: float) -> list[CriticalPoint]:
    if eps <= 0:
        raise ValueError("eps must be positive")
    return [cp for cp in points if cp.residual < eps]


@dataclass
class WitnessSet:
    anchor: np.ndarray
    beta: float
    all_critical: list[CriticalPoint]
    witnesses: list[CriticalPoint]
    eps: float


def default_radius(anchor) -> float:
    return 5.0 * (1.0 + float(np.linalg.norm(anchor)))


def find_witnesses(sys: PolySystem, anchor, beta: float, eps: float, n_starts: int = 500,
                   radius: float | None = None, seed: int = 0) -> WitnessSet:
    prob = PenaltyProblem(sys, anchor, beta)
    radius = default_radius(prob.anchor) if radius is None else radius
    pts = multistart_critical_points(prob, n_starts, radius, seed)
    return WitnessSet(prob.anchor, beta, pts, filter_witnesses(pts, eps), eps)


class VerdictKind(str, enum.Enum):
    EMPTY = "Empty"
    UNKNOWN = "Unknown"


@dataclass
class Verdict:
    """Outcome of the emptiness test.

    ``mu_bar_min`` is the smallest value found of the un-halved homogenized
    objective ``beta * sum fbar_i^2 + |x - a|^2``; ``Empty`` requires it to
    exceed :data:`EMPTY_THRESHOLD`.  Global minimality is not proven, so an
    ``Empty`` verdict is heuristic.
    """

    kind: VerdictKind
    mu_bar_min: float
    minimizer: np.ndarray
    anchor: np.ndarray = field(default_factory=lambda: np.zeros(0))
    threshold: float = EMPTY_THRESHOLD
    n_critical: int = 0

    @property
    def is_empty(self) -> bool:
        return self.kind is VerdictKind.EMPTY

    def as_dict(self):
        return {
            "kind": self.kind.value,
            "mu_bar_min": self.mu_bar_min,
            "minimizer": [float(v) for v in self.minimizer],
            "anchor": [float(v) for v in self.anchor],
            "threshold": self.threshold,
            "n_critical": self.n_critical,
            "certified": False,
        }


def random_unit_ball_point(rng, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    return v * rng.random() ** (1.0 / dim) * (1.0 - 1e-12)


def emptiness_test(sys: PolySystem, beta: float, n_starts: int = 500, seed: int = 0,
                   anchor=None, radius: float = 2.0) -> Verdict:
    """Homogenize, minimize the sphere-constrained penalty from an anchor in
    the open unit ball, and compare the smallest value found with the bound.

    ``anchor`` (length n+1, homogenizing coordinate last) overrides the
    seeded random draw.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    hsys = homogenize(sys)
    rng = np.random.default_rng(seed)
    if anchor is None:
        anchor = random_unit_ball_point(rng, hsys.n_vars)
    anchor = np.asarray(anchor, dtype=np.float64)
    if np.linalg.norm(anchor) >= 1.0:
        raise ValueError("anchor must lie in the open unit ball")
    prob = PenaltyProblem(hsys, anchor, beta)
    lowest: list = []
    pts = multistart_critical_points(prob, n_starts, radius, int(rng.integers(2**31)), lowest=lowest)
    # any evaluated value bounds the global minimum from above
    seen = min((2.0 * mu for mu, _ in lowest), default=INFINITE)
    if not pts:
        x = min(lowest, key=lambda t: t[0])[1] if lowest else np.full(hsys.n_vars, np.nan)
        return Verdict(VerdictKind.UNKNOWN, seen, x, anchor, n_critical=0)
    best = pts[0]
    mu_bar = 2.0 * best.mu
    empty = mu_bar > EMPTY_THRESHOLD and seen > EMPTY_THRESHOLD
    kind = VerdictKind.EMPTY if empty else VerdictKind.UNKNOWN
    return Verdict(kind, mu_bar, best.x, anchor, n_critical=len(pts))


def degree_index_estimate(sys: PolySystem, p, trials: int = 8, seed: int = 0,
                          tol: float = 1e-10, reduce: str = "max") -> int:
    """Trailing degree of ``t -> f_i(p + t v)``, maximized over ``i``, for
    random unit directions ``v``.

    ``reduce="max"`` takes the largest value over directions: a lower bound
    on the degree index at a point of the variety.  ``reduce="mode"`` takes
    the most frequent value (ties to the smaller), which is steadier at
    approximate points where a nearly tangent direction inflates the count.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if reduce not in ("max", "mode"):
        raise ValueError("reduce must be 'max' or 'mode'")
    rng = np.random.default_rng(seed)
    p = np.asarray(p, dtype=np.float64)
    per_dir = []
    for _ in range(trials):
        v = rng.standard_normal(sys.n_vars)
        v /= np.linalg.norm(v)
        best = 0
        for poly in sys.polys:
            d = trailing_degree(restrict_to_ray(poly, p, v), tol)
            if d != INFINITE:
                best = max(best, int(d))
        per_dir.append(best)
    if reduce == "max":
        return max(per_dir)
    values, counts = np.unique(per_dir, return_counts=True)
    return int(values[np.argmax(counts)])
