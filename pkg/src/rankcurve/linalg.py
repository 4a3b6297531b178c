"""Small dense linear algebra: LU solves, symmetric eigenproblems, a
smallest-singular-value probe.

Matrices are plain 2-D float64 numpy arrays.  The numerical work happens in
:mod:`rankcurve.kernels`; this module owns validation, tolerances, ordering
and sign conventions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DimensionMismatch, NoConvergence, NotSymmetric, SingularMatrix

PIVOT_RTOL = 1e-14
SYMMETRY_RTOL = 1e-8
JACOBI_RTOL = 1e-12
JACOBI_MAX_SWEEPS = 50


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues ascending; ``vectors[:, i]`` pairs with ``values[i]``."""

    values: np.ndarray
    vectors: np.ndarray
    sweeps: int = 0

    def pairs(self):
        return [(self.values[i], self.vectors[:, i]) for i in range(len(self.values))]


def _square(A):
    A = np.ascontiguousarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {A.shape}")
    return A


def lu_solve(A, b) -> np.ndarray:
    """Solve ``A x = b`` by partial-pivoting LU.

    Raises SingularMatrix when a pivot is below ``1e-14 * ||A||_F``; callers
    in the tracer read this as the guiding point leaving the tube.
    """
    A = _square(A)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if b.shape != (A.shape[0],):
        raise DimensionMismatch(f"rhs has shape {b.shape}, expected ({A.shape[0]},)")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise ValueError("non-finite entries in linear system")
    fro = float(np.linalg.norm(A))
    x, ok = kernels.lu_solve(A, b, PIVOT_RTOL * fro)
    if not ok:
        raise SingularMatrix(f"pivot below {PIVOT_RTOL:g}*||A||_F (||A||_F={fro:.3e})")
    return x


def sym_eigen(S) -> EigenDecomposition:
    S = _square(S)
    fro = float(np.linalg.norm(S))
    if np.max(np.abs(S - S.T), initial=0.0) > SYMMETRY_RTOL * fro:
        raise NotSymmetric("matrix is not symmetric within 1e-8*||S||_F")
    values, V, sweeps, converged = kernels.jacobi_eigen(S, JACOBI_RTOL * fro, JACOBI_MAX_SWEEPS)
    if not converged:
        raise NoConvergence(f"Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps", sweeps)
    order = np.argsort(values, kind="stable")
    values = values[order]
    V = V[:, order]
    for i in range(V.shape[1]):
        col = V[:, i]
        nz = np.nonzero(np.abs(col) > 1e-12)[0]
        if nz.size and col[nz[0]] < 0:
            V[:, i] = -col
    return EigenDecomposition(values, V, sweeps)


def condition_probe(A, iterations: int = 20) -> float:
    """Estimate the smallest singular value of ``A`` by inverse iteration on
    ``A^T A``.  Diagnostics only; returns 0.0 if a solve fails."""
    A = _square(A)
    n = A.shape[0]
    v = np.random.default_rng(12345).standard_normal(n)
    v /= np.linalg.norm(v)
    sigma = 0.0
    try:
        for _ in range(iterations):
            z = lu_solve(A, v)
            y = lu_solve(A.T, z)
            ny = np.linalg.norm(y)
            if ny == 0.0 or not np.isfinite(ny):
                return 0.0
            sigma = 1.0 / np.sqrt(ny)
            v = y / ny
    except (SingularMatrix, ValueError):
        return 0.0
    return float(sigma)
