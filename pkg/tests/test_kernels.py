import numpy as np
import pytest

from rankcurve import _pykernels, kernels

compiled = kernels.compiled
needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled extension not built")

SYSTEMS = ("cubic", "choi_lam", "lax", "rankdef4", "rankdef6", "circle")


def test_backend_name():
    assert kernels.BACKEND in ("cython", "python")
    assert _pykernels.NAME == "python"


@needs_compiled
@pytest.mark.parametrize("name", SYSTEMS)
def test_eval_system_backends_agree(system, name):
    s = system(name)
    rng = np.random.default_rng(11)
    for _ in range(25):
        x = rng.uniform(-2, 2, s.n_vars)
        for order in (0, 1, 2):
            a = compiled.eval_system(*s._packed, s.k, x, order)
            b = _pykernels.eval_system(*s._packed, s.k, x, order)
            for u, v in zip(a, b):
                if u is None or v is None:
                    assert u is None and v is None
                    continue
                assert np.allclose(u, v, rtol=1e-12, atol=1e-12 * max(1.0, np.abs(v).max(initial=0)))


@needs_compiled
def test_lu_solve_backends_agree():
    rng = np.random.default_rng(3)
    for n in (1, 2, 5, 9):
        A = rng.normal(size=(n, n)) + n * np.eye(n)
        b = rng.normal(size=n)
        xa, oka = compiled.lu_solve(A, b, 1e-14)
        xb, okb = _pykernels.lu_solve(A, b, 1e-14)
        assert oka and okb
        assert np.allclose(xa, xb, rtol=1e-12, atol=1e-12)
    singular = np.array([[1.0, 2.0], [2.0, 4.0]])
    assert not compiled.lu_solve(singular, np.ones(2), 1e-12)[1]
    assert not _pykernels.lu_solve(singular, np.ones(2), 1e-12)[1]


@needs_compiled
def test_jacobi_backends_agree():
    rng = np.random.default_rng(4)
    for n in (1, 2, 4, 8):
        M = rng.normal(size=(n, n))
        S = M + M.T
        va, Va, _, oka = compiled.jacobi_eigen(S, 1e-12 * np.linalg.norm(S), 50)
        vb, Vb, _, okb = _pykernels.jacobi_eigen(S, 1e-12 * np.linalg.norm(S), 50)
        assert oka and okb
        assert np.allclose(np.sort(va), np.sort(vb), atol=1e-10 * max(1, np.abs(vb).max()))


def test_pure_backend_on_its_own():
    # the fallback must be usable even when the extension is present
    S = np.array([[2.0, 1.0], [1.0, 2.0]])
    vals, V, _, ok = _pykernels.jacobi_eigen(S, 1e-14, 50)
    assert ok
    assert np.allclose(np.sort(vals), [1.0, 3.0])
    x, ok = _pykernels.lu_solve(S, np.array([3.0, 3.0]), 1e-14)
    assert ok and np.allclose(x, [1.0, 1.0])


def test_fallback_selected_by_environment():
    import os
    import subprocess
    import sys
    code = ("from rankcurve import kernels\n"
            "from rankcurve.penalty import PenaltyProblem, stability_matrix\n"
            "from rankcurve.poly import parse_system\n"
            "s = parse_system('(x1^3 - x2)^2', ['x1', 'x2'])\n"
            "S = stability_matrix(PenaltyProblem(s, [0.0, -1.0], 1e4), [-0.8296, -0.5982])\n"
            "print(kernels.BACKEND, round(S[0, 0], 2))\n")
    env = dict(os.environ, RANKCURVE_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["python", "188.77"]
