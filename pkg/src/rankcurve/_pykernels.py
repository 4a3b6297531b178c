"""Pure-Python/numpy implementations of the hot kernels.

Mirrors the compiled ``_ckernels`` module signature for signature.  Used when
the extension is not built, or when ``RANKCURVE_PURE_PYTHON=1`` is set.
"""

import math

import numpy as np

NAME = "python"


def _power_table(x, maxdeg):
    pw = np.empty((x.shape[0], maxdeg + 1))
    pw[:, 0] = 1.0
    for e in range(1, maxdeg + 1):
        pw[:, e] = pw[:, e - 1] * x
    return pw


def eval_system(coeffs, exps, owner, k, x, order):
    """Value, Jacobian and per-polynomial Hessians of a packed system.

    ``coeffs`` (T,), ``exps`` (T, n) and ``owner`` (T,) describe all terms of
    all ``k`` polynomials.  Returns ``(f, J, H)``; ``J`` is None for
    ``order < 1`` and ``H`` is None for ``order < 2``.
    """
    n = x.shape[0]
    T = coeffs.shape[0]
    f = np.zeros(k)
    J = np.zeros((k, n)) if order >= 1 else None
    H = np.zeros((k, n, n)) if order >= 2 else None
    if T == 0:
        return f, J, H
    maxdeg = int(exps.max()) if exps.size else 0
    pw = _power_table(x, max(maxdeg, 2))
    cols = np.arange(n)
    # P[t, i] = x_i ** e_ti ; D1[t, i] = e_ti * x_i ** (e_ti - 1)
    P = pw[cols, exps]
    f += np.bincount(owner, weights=coeffs * P.prod(axis=1), minlength=k)
    if order < 1:
        return f, J, H
    em1 = np.maximum(exps - 1, 0)
    D1 = exps * pw[cols, em1]
    for j in range(n):
        Q = P.copy()
        Q[:, j] = D1[:, j]
        J[:, j] = np.bincount(owner, weights=coeffs * Q.prod(axis=1), minlength=k)
    if order < 2:
        return f, J, H
    em2 = np.maximum(exps - 2, 0)
    D2 = exps * em1 * pw[cols, em2]
    for i in range(n):
        for j in range(i, n):
            Q = P.copy()
            if i == j:
                Q[:, i] = D2[:, i]
            else:
                Q[:, i] = D1[:, i]
                Q[:, j] = D1[:, j]
            col = np.bincount(owner, weights=coeffs * Q.prod(axis=1), minlength=k)
            H[:, i, j] = col
            H[:, j, i] = col
    return f, J, H


def lu_solve(A, b, pivot_tol):
    """Gaussian elimination with partial pivoting.

    Returns ``(x, ok)``; ``ok`` is False when a pivot falls below
    ``pivot_tol`` in magnitude.
    """
    n = len(b)
    M = [list(map(float, row)) for row in A]
    rhs = [float(v) for v in b]
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(M[r][col]))
        if abs(M[piv][col]) < pivot_tol or M[piv][col] == 0.0:
            return np.zeros(n), False
        if piv != col:
            M[col], M[piv] = M[piv], M[col]
            rhs[col], rhs[piv] = rhs[piv], rhs[col]
        inv = 1.0 / M[col][col]
        prow = M[col]
        for r in range(col + 1, n):
            m = M[r][col] * inv
            if m != 0.0:
                row = M[r]
                for c in range(col + 1, n):
                    row[c] -= m * prow[c]
                row[col] = 0.0
                rhs[r] -= m * rhs[col]
    out = [0.0] * n
    for r in range(n - 1, -1, -1):
        s = rhs[r]
        row = M[r]
        for c in range(r + 1, n):
            s -= row[c] * out[c]
        out[r] = s / row[r]
    return np.array(out), True


def jacobi_eigen(S, tol, max_sweeps):
    """Cyclic Jacobi rotations on a symmetric matrix.

    Returns ``(diag, V, sweeps, converged)`` with eigenvectors in the columns
    of ``V`` (unsorted).  Stops once the off-diagonal Frobenius norm is
    ``<= tol``.
    """
    n = S.shape[0]
    A = [list(map(float, row)) for row in S]
    V = [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]
    sweeps = 0
    converged = False
    while True:
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += 2.0 * A[p][q] * A[p][q]
        if math.sqrt(off) <= tol:
            converged = True
            break
        if sweeps >= max_sweeps:
            break
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p][q]
                if apq == 0.0:
                    continue
                theta = (A[q][q] - A[p][p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(1.0 + theta * theta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                for r in range(n):
                    arp = A[r][p]
                    arq = A[r][q]
                    A[r][p] = c * arp - s * arq
                    A[r][q] = s * arp + c * arq
                for r in range(n):
                    apr = A[p][r]
                    aqr = A[q][r]
                    A[p][r] = c * apr - s * aqr
                    A[q][r] = s * apr + c * aqr
                A[p][q] = 0.0
                A[q][p] = 0.0
                for r in range(n):
                    vrp = V[r][p]
                    vrq = V[r][q]
                    V[r][p] = c * vrp - s * vrq
                    V[r][q] = s * vrp + c * vrq
    return np.array([A[i][i] for i in range(n)]), np.array(V), sweeps, converged
