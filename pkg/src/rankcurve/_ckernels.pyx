# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: packed-system evaluation, LU solve, cyclic Jacobi.

Same signatures and return conventions as ``rankcurve._pykernels``.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, copysign

cnp.import_array()

NAME = "cython"


def eval_system(const double[::1] coeffs, const cnp.int64_t[:, ::1] exps,
                const cnp.int64_t[::1] owner, Py_ssize_t k,
                const double[::1] x, int order):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t T = coeffs.shape[0]
    cdef Py_ssize_t t, i, j, l, r, maxdeg = 2
    cdef double c, prod, d
    cdef cnp.int64_t e, ej, el

    for t in range(T):
        for i in range(n):
            if exps[t, i] > maxdeg:
                maxdeg = exps[t, i]

    pw_arr = np.empty((n, maxdeg + 1))
    cdef double[:, ::1] pw = pw_arr
    for i in range(n):
        pw[i, 0] = 1.0
        for r in range(1, maxdeg + 1):
            pw[i, r] = pw[i, r - 1] * x[i]

    f_arr = np.zeros(k)
    cdef double[::1] f = f_arr
    J_arr = None
    H_arr = None
    cdef double[:, ::1] J
    cdef double[:, :, ::1] H
    if order >= 1:
        J_arr = np.zeros((k, n))
        J = J_arr
    if order >= 2:
        H_arr = np.zeros((k, n, n))
        H = H_arr

    for t in range(T):
        c = coeffs[t]
        r = owner[t]
        prod = c
        for i in range(n):
            prod *= pw[i, exps[t, i]]
        f[r] += prod
        if order < 1:
            continue
        for j in range(n):
            ej = exps[t, j]
            if ej == 0:
                continue
            d = c * ej * pw[j, ej - 1]
            for i in range(n):
                if i != j:
                    d *= pw[i, exps[t, i]]
            J[r, j] += d
        if order < 2:
            continue
        for j in range(n):
            ej = exps[t, j]
            if ej == 0:
                continue
            if ej >= 2:
                d = c * ej * (ej - 1) * pw[j, ej - 2]
                for i in range(n):
                    if i != j:
                        d *= pw[i, exps[t, i]]
                H[r, j, j] += d
            for l in range(j + 1, n):
                el = exps[t, l]
                if el == 0:
                    continue
                d = c * ej * el * pw[j, ej - 1] * pw[l, el - 1]
                for i in range(n):
                    if i != j and i != l:
                        d *= pw[i, exps[t, i]]
                H[r, j, l] += d

    if order >= 2:
        for r in range(k):
            for j in range(n):
                for l in range(j + 1, n):
                    H[r, l, j] = H[r, j, l]
    return f_arr, J_arr, H_arr


def lu_solve(A, b, double pivot_tol):
    cdef Py_ssize_t n = b.shape[0]
    M_arr = np.array(A, dtype=np.float64, order="C", copy=True)
    x_arr = np.array(b, dtype=np.float64, copy=True)
    cdef double[:, ::1] M = M_arr
    cdef double[::1] rhs = x_arr
    cdef Py_ssize_t col, r, c, piv
    cdef double best, m, tmp, inv, s
    for col in range(n):
        piv = col
        best = fabs(M[col, col])
        for r in range(col + 1, n):
            if fabs(M[r, col]) > best:
                best = fabs(M[r, col])
                piv = r
        if best < pivot_tol or best == 0.0:
            return np.zeros(n), False
        if piv != col:
            for c in range(n):
                tmp = M[col, c]
                M[col, c] = M[piv, c]
                M[piv, c] = tmp
            tmp = rhs[col]
            rhs[col] = rhs[piv]
            rhs[piv] = tmp
        inv = 1.0 / M[col, col]
        for r in range(col + 1, n):
            m = M[r, col] * inv
            if m != 0.0:
                for c in range(col + 1, n):
                    M[r, c] -= m * M[col, c]
                M[r, col] = 0.0
                rhs[r] -= m * rhs[col]
    for r in range(n - 1, -1, -1):
        s = rhs[r]
        for c in range(r + 1, n):
            s -= M[r, c] * rhs[c]
        rhs[r] = s / M[r, r]
    return x_arr, True


def jacobi_eigen(S, double tol, int max_sweeps):
    cdef Py_ssize_t n = S.shape[0]
    A_arr = np.array(S, dtype=np.float64, order="C", copy=True)
    V_arr = np.eye(n)
    cdef double[:, ::1] A = A_arr
    cdef double[:, ::1] V = V_arr
    cdef Py_ssize_t p, q, r
    cdef double off, apq, theta, t, c, s, a1, a2
    cdef int sweeps = 0
    cdef bint converged = False
    while True:
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += 2.0 * A[p, q] * A[p, q]
        if sqrt(off) <= tol:
            converged = True
            break
        if sweeps >= max_sweeps:
            break
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if fabs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = copysign(1.0, theta) / (fabs(theta) + sqrt(1.0 + theta * theta))
                c = 1.0 / sqrt(1.0 + t * t)
                s = t * c
                for r in range(n):
                    a1 = A[r, p]
                    a2 = A[r, q]
                    A[r, p] = c * a1 - s * a2
                    A[r, q] = s * a1 + c * a2
                for r in range(n):
                    a1 = A[p, r]
                    a2 = A[q, r]
                    A[p, r] = c * a1 - s * a2
                    A[q, r] = s * a1 + c * a2
                A[p, q] = 0.0
                A[q, p] = 0.0
                for r in range(n):
                    a1 = V[r, p]
                    a2 = V[r, q]
                    V[r, p] = c * a1 - s * a2
                    V[r, q] = s * a1 + c * a2
    return np.array([A[r, r] for r in range(n)]), V_arr, sweeps, converged
