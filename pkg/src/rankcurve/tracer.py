"""Companion-curve tracing.

A guiding point ``a`` (the companion) is dragged alongside the curve while
the critical point ``x`` of the penalty objective follows it.  Each step
moves along the eigenvector of ``S(x)`` whose eigenvalue ``c`` is nearest 1:
``x += h dir`` and ``a += h c dir``, then ``x`` is re-solved with ``a``
fixed.  When ``x`` drifts toward the edge of the tube (small eigenvalue of
``S``, residual growth, failed or stalled step) the companion is pulled back
with :func:`rankcurve.refine.move_toward_tube`.
"""

from __future__ import annotations

import enum
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import (
    ConfigError,
    DirectionAmbiguous,
    DivergedToInfinity,
    InvalidStart,
    NoConvergence,
    RankCurveError,
    SingularMatrix,
)
from .linalg import sym_eigen
from .penalty import CriticalPoint, PenaltyProblem, newton_refine, stability_matrix
from .poly import PolySystem
from .refine import move_toward_tube, refine_witness
from .witness import (
    Verdict,
    VerdictKind,
    default_radius,
    emptiness_test,
    filter_witnesses,
    multistart_critical_points,
    worker_count,
)

MAX_HALVINGS = 6
STALL_LIMIT = 3
LOOP_WARMUP = 5
DEDUP_SAMPLES = 20


@dataclass(frozen=True)
class TraceConfig:
    beta: float = 1e4
    lam: float = 0.1
    step: float = 0.01
    n_points: int = 200
    eps_residual: float = 1e-3
    eig_unit_window: float = 0.5
    eig_floor: float = 0.1
    seed: int = 0
    n_starts: int = 500
    both_directions: bool = True
    anchor: tuple | None = None
    search_radius: float | None = None
    # witnesses found at beta are carried here by beta-continuation before tracing
    trace_beta: float | None = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        checks = [
            (math.isfinite(self.beta) and self.beta > 0, "beta must be positive"),
            (0.0 < self.lam < 1.0, "lambda must lie in (0, 1)"),
            (math.isfinite(self.step) and self.step > 0, "step must be positive"),
            (int(self.n_points) == self.n_points and self.n_points >= 1, "n_points must be a positive integer"),
            (self.eps_residual > 0, "eps_residual must be positive"),
            (self.eig_unit_window > 0, "eig_unit_window must be positive"),
            (self.eig_floor > 0, "eig_floor must be positive"),
            (int(self.n_starts) == self.n_starts and self.n_starts >= 1, "n_starts must be a positive integer"),
            (self.search_radius is None or self.search_radius > 0, "search_radius must be positive"),
            (self.trace_beta is None or (math.isfinite(self.trace_beta) and self.trace_beta > 0),
             "trace_beta must be positive"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    def as_dict(self):
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        if d["anchor"] is not None:
            d["anchor"] = [float(v) for v in d["anchor"]]
        return d


class Termination(str, enum.Enum):
    BUDGET_REACHED = "BudgetReached"
    CLOSED_LOOP = "ClosedLoop"
    STALLED = "Stalled"
    DIRECTION_AMBIGUOUS = "DirectionAmbiguous"
    SINGULAR_FAILURE = "SingularFailure"


@dataclass(frozen=True, eq=False)
class TraceStep:
    x: np.ndarray
    a: np.ndarray
    eigenvalue_c: float
    min_eigenvalue: float
    retube_count: int
    residual: float = 0.0


def _as_rows(points):
    if not points:
        return np.zeros((0, 0))
    return np.array(points, dtype=np.float64)


@dataclass(eq=False)
class TracedBranch:
    curve_points: list = field(default_factory=list)
    companion_points: list = field(default_factory=list)
    origin_witness: CriticalPoint | None = None
    termination: Termination = Termination.BUDGET_REACHED
    steps: list = field(default_factory=list)
    reverse_termination: Termination | None = None

    def __len__(self):
        return len(self.curve_points)

    def curve_array(self) -> np.ndarray:
        return _as_rows(self.curve_points)

    def companion_array(self) -> np.ndarray:
        return _as_rows(self.companion_points)

    @property
    def retube_count(self) -> int:
        return self.steps[-1].retube_count if self.steps else 0


def _select(values, vectors, prev_dir, cfg):
    idx = int(np.argmin(np.abs(values - 1.0)))
    c = float(values[idx])
    for j, other in enumerate(values):
        if j == idx:
            continue
        other = float(other)
        near_unit = abs(other - 1.0) <= cfg.eig_unit_window and abs(c - 1.0) <= cfg.eig_unit_window
        if near_unit and abs(other - c) <= 0.1 * max(abs(other), abs(c)):
            raise DirectionAmbiguous(
                f"eigenvalues {c:.6g} and {other:.6g} both near 1", sorted([c, other]))
    d = vectors[:, idx].copy()
    if prev_dir is not None and float(d @ prev_dir) < 0:
        d = -d
    return d, c


def tracing_direction(prob: PenaltyProblem, x, prev_dir, cfg: TraceConfig):
    """Unit eigenvector of ``S(x)`` whose eigenvalue ``c`` is nearest 1.

    The sign follows ``prev_dir`` when given, else the first nonzero
    component is positive.  Raises DirectionAmbiguous when a second
    eigenvalue within ``eig_unit_window`` of 1 lies within 10% of ``c``.
    """
    x = np.asarray(x, dtype=np.float64)
    res = float(np.linalg.norm(prob.sys.evaluate(x)))
    if res > 10.0 * cfg.eps_residual:
        raise InvalidStart(f"residual {res:.3e} too large for a tracing direction")
    eig = sym_eigen(stability_matrix(prob, x))
    return _select(eig.values, eig.vectors, prev_dir, cfg)


class _Failure(Exception):
    pass


def _retube(sys, x, a, cfg):
    try:
        mv = move_toward_tube(sys, x, a, cfg.lam, cfg.beta)
    except (SingularMatrix, NoConvergence, DivergedToInfinity) as exc:
        raise _Failure(str(exc)) from exc
    return mv.x1, mv.a1


def _residual(sys, x):
    return float(np.linalg.norm(sys.evaluate(x)))


def _try_step(prob, x, a, d, c, cfg):
    """Predictor plus Newton with halving.  Returns (x, a) or None."""
    h = cfg.step
    for _ in range(MAX_HALVINGS + 1):
        a_try = a + h * c * d
        try:
            cp = newton_refine(prob.with_anchor(a_try), x + h * d)
        except (NoConvergence, DivergedToInfinity, SingularMatrix):
            cp = None
        if cp is not None and np.linalg.norm(cp.x - x) <= 3.0 * cfg.step and cp.residual <= cfg.eps_residual:
            return cp.x, a_try
        h /= 2.0
    return None


def trace_branch(sys: PolySystem, witness: CriticalPoint, anchor0, cfg: TraceConfig,
                 direction_sign: int = 1) -> TracedBranch:
    """Trace one half-branch from ``witness`` in the direction ``direction_sign``.

    Each iteration either takes a step or re-tubes.  A re-tube happens when
    no eigenvalue of ``S`` lies within ``eig_unit_window`` of 1 (no tangent
    to follow), when the step fails after all halvings or moves less than
    ``h/10``, and after a step whose smallest eigenvalue is below
    ``eig_floor``.  Three re-tubes without an intervening step end the
    branch as Stalled; the initial re-tube counts.  Runtime failures end
    the branch with a termination tag rather than an exception.
    """
    if direction_sign not in (1, -1):
        raise ValueError("direction_sign must be +1 or -1")
    if not witness.residual < cfg.eps_residual:
        raise InvalidStart(f"witness residual {witness.residual:.3e} is not below eps {cfg.eps_residual:g}")
    prob = PenaltyProblem(sys, anchor0, cfg.beta)
    branch = TracedBranch(origin_witness=witness)
    h = cfg.step
    x, a = np.array(witness.x, dtype=np.float64), prob.anchor.copy()
    retubes = 0
    stall = 0
    d = None

    def finish(tag):
        branch.termination = tag
        return branch

    try:
        x, a = _retube(sys, x, a, cfg)
        retubes = stall = 1
        eig = sym_eigen(stability_matrix(prob, x))
        c = float(eig.values[np.argmin(np.abs(eig.values - 1.0))])
    except (_Failure, RankCurveError):
        return finish(Termination.SINGULAR_FAILURE)
    if _residual(sys, x) > cfg.eps_residual:
        return finish(Termination.SINGULAR_FAILURE)

    def record():
        branch.curve_points.append(x.copy())
        branch.companion_points.append(a.copy())
        branch.steps.append(TraceStep(x.copy(), a.copy(), c, float(eig.values[0]), retubes, _residual(sys, x)))

    record()
    while len(branch.curve_points) < cfg.n_points:
        x_prev = x
        try:
            if np.min(np.abs(eig.values - 1.0)) > cfg.eig_unit_window:
                c = float(eig.values[np.argmin(np.abs(eig.values - 1.0))])
                x, a = _retube(sys, x, a, cfg)
                retubes += 1
                stall += 1
            else:
                d_new, c = _select(eig.values, eig.vectors, d, cfg)
                if d is None:
                    d_new = direction_sign * d_new
                d = d_new
                moved = _try_step(prob, x, a, d, c, cfg)
                if moved is not None and np.linalg.norm(moved[0] - x) >= h / 10.0:
                    x, a = moved
                    stall = 0
                    eig = sym_eigen(stability_matrix(prob, x))
                    if eig.values[0] < cfg.eig_floor:
                        x, a = _retube(sys, x, a, cfg)
                        retubes += 1
                        stall = 1
                else:
                    if moved is not None:
                        x, a = moved
                    x, a = _retube(sys, x, a, cfg)
                    retubes += 1
                    stall += 1
            eig = sym_eigen(stability_matrix(prob, x))
        except _Failure:
            return finish(Termination.SINGULAR_FAILURE)
        except DirectionAmbiguous:
            return finish(Termination.DIRECTION_AMBIGUOUS)
        except RankCurveError:
            return finish(Termination.SINGULAR_FAILURE)

        if _residual(sys, x) > cfg.eps_residual or np.linalg.norm(x - x_prev) > 3.0 * h:
            # a re-tube that leaves the tube or jumps is not recoverable
            return finish(Termination.SINGULAR_FAILURE)
        record()
        if stall >= STALL_LIMIT:
            return finish(Termination.STALLED)
        if len(branch.curve_points) > LOOP_WARMUP and \
                np.linalg.norm(x - branch.curve_points[0]) < h / 2.0:
            return finish(Termination.CLOSED_LOOP)
    return finish(Termination.BUDGET_REACHED)


def merge_halves(forward: TracedBranch, backward: TracedBranch) -> TracedBranch:
    """Join two half-branches from the same witness into one polyline."""
    if not backward.curve_points:
        merged = TracedBranch(list(forward.curve_points), list(forward.companion_points),
                              forward.origin_witness, forward.termination, list(forward.steps))
        merged.reverse_termination = backward.termination
        return merged
    if not forward.curve_points:
        fwd_pts, fwd_comp, fwd_steps = [], [], []
    else:
        skip = 1 if np.array_equal(forward.curve_points[0], backward.curve_points[0]) else 0
        fwd_pts = forward.curve_points[skip:]
        fwd_comp = forward.companion_points[skip:]
        fwd_steps = forward.steps[skip:]
    return TracedBranch(
        curve_points=backward.curve_points[::-1] + list(fwd_pts),
        companion_points=backward.companion_points[::-1] + list(fwd_comp),
        origin_witness=forward.origin_witness,
        termination=forward.termination,
        steps=backward.steps[::-1] + list(fwd_steps),
        reverse_termination=backward.termination,
    )


def _sample(points, k):
    idx = np.unique(np.linspace(0, len(points) - 1, num=min(k, len(points))).round().astype(int))
    return points[idx]


def covered_by(candidate: TracedBranch, kept: TracedBranch, radius: float) -> bool:
    """True when every sampled point of ``candidate`` lies within ``radius``
    of ``kept``."""
    if not candidate.curve_points or not kept.curve_points:
        return False
    sample = _sample(candidate.curve_array(), DEDUP_SAMPLES)
    full = kept.curve_array()
    d = np.sqrt(((sample[:, None, :] - full[None, :, :]) ** 2).sum(axis=2)).min(axis=1)
    return bool(d.max() < radius)


def dedup_branches(branches, radius: float):
    """Drop branches already covered by a longer kept branch.  Kept branches
    retain their original order."""
    order = sorted(range(len(branches)), key=lambda i: -len(branches[i]))
    kept_idx: list[int] = []
    for i in order:
        if not branches[i].curve_points:
            continue
        if any(covered_by(branches[i], branches[j], radius) for j in kept_idx):
            continue
        kept_idx.append(i)
    return [branches[i] for i in sorted(kept_idx)]


@dataclass
class TraceResult:
    verdict: Verdict
    anchor: np.ndarray
    critical_points: list
    witnesses: list
    branches: list
    timings: dict = field(default_factory=dict)


def draw_anchor(sys: PolySystem, cfg: TraceConfig) -> np.ndarray:
    if cfg.anchor is not None:
        a = np.asarray(cfg.anchor, dtype=np.float64)
        if a.shape != (sys.n_vars,):
            raise ConfigError(f"anchor has length {a.size}, expected {sys.n_vars}")
        return a
    rng = np.random.default_rng([cfg.seed, 1])
    return rng.uniform(-1.0, 1.0, sys.n_vars)


def trace_witness(sys, witness, anchor, cfg) -> TracedBranch:
    fwd = trace_branch(sys, witness, anchor, cfg, +1)
    if not cfg.both_directions or fwd.termination is not Termination.BUDGET_REACHED:
        # loops are already complete, and stalls or failures would repeat
        return fwd
    bwd = trace_branch(sys, witness, anchor, cfg, -1)
    return merge_halves(fwd, bwd)


def trace_all(sys: PolySystem, cfg: TraceConfig, empty_anchor=None) -> TraceResult:
    """Full pipeline: emptiness test, witness search, tracing, dedup.

    ``empty_anchor`` fixes the anchor of the emptiness test (length n+1).
    """
    timings = {}
    anchor = draw_anchor(sys, cfg)
    t0 = time.perf_counter()
    verdict = emptiness_test(sys, cfg.beta, cfg.n_starts, cfg.seed, anchor=empty_anchor)
    timings["emptiness_ms"] = 1e3 * (time.perf_counter() - t0)
    if verdict.kind is VerdictKind.EMPTY:
        return TraceResult(verdict, anchor, [], [], [], timings)

    t0 = time.perf_counter()
    prob = PenaltyProblem(sys, anchor, cfg.beta)
    radius = cfg.search_radius if cfg.search_radius is not None else default_radius(anchor)
    pts = multistart_critical_points(prob, cfg.n_starts, radius, cfg.seed)
    wits = filter_witnesses(pts, cfg.eps_residual)
    timings["witness_ms"] = 1e3 * (time.perf_counter() - t0)
    if not wits:
        return TraceResult(verdict, anchor, pts, [], [], timings)

    starts, trace_cfg = wits, cfg
    if cfg.trace_beta is not None and cfg.trace_beta != cfg.beta:
        t0 = time.perf_counter()
        starts = []
        for w in wits:
            try:
                cp = refine_witness(sys, anchor, w.x, cfg.beta, cfg.trace_beta)
            except RankCurveError:
                continue
            if cp.residual < cfg.eps_residual:
                starts.append(cp)
        trace_cfg = replace(cfg, beta=cfg.trace_beta)
        timings["refine_ms"] = 1e3 * (time.perf_counter() - t0)

    t0 = time.perf_counter()
    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            branches = list(pool.map(lambda w: trace_witness(sys, w, anchor, trace_cfg), starts))
    else:
        branches = [trace_witness(sys, w, anchor, trace_cfg) for w in starts]
    branches = dedup_branches(branches, 2.0 * cfg.step)
    timings["trace_ms"] = 1e3 * (time.perf_counter() - t0)
    return TraceResult(verdict, anchor, pts, wits, branches, timings)
