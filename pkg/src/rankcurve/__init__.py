"""Tracing real curves of rank-deficient polynomial systems with companion
curves of a penalty objective."""

from . import kernels
from .errors import (
    ConfigError,
    DimensionMismatch,
    DirectionAmbiguous,
    DivergedToInfinity,
    InvalidStart,
    NoConvergence,
    NotSymmetric,
    PolyParseError,
    RankCurveError,
    SingularMatrix,
)
from .linalg import EigenDecomposition, condition_probe, lu_solve, sym_eigen
from .penalty import (
    CriticalPoint,
    PenaltyProblem,
    grad_system,
    lagrangian_residual,
    mu_value,
    newton_refine,
    stability_matrix,
)
from .poly import (
    Monomial,
    Polynomial,
    PolySystem,
    homogenize,
    load_system_text,
    parse_polynomial,
    parse_system,
    restrict_to_ray,
    trailing_degree,
)
from .refine import (
    HomotopyPath,
    PathStatus,
    TubeMove,
    convergence_slope,
    move_toward_tube,
    refine_witness,
    track_beta,
)
from .tracer import (
    Termination,
    TraceConfig,
    TracedBranch,
    TraceStep,
    trace_all,
    trace_branch,
    tracing_direction,
)
from .witness import (
    Verdict,
    VerdictKind,
    degree_index_estimate,
    emptiness_test,
    filter_witnesses,
    multistart_critical_points,
)

__version__ = "0.1.0"
