import os
import subprocess
import sys

import numpy as np
import pytest

from gravdeco import _dcore_py
from gravdeco.decoherence import BACKEND

try:
    from gravdeco import _dcore
except ImportError:  # extension not built
    _dcore = None

needs_ext = pytest.mark.skipif(_dcore is None, reason="compiled kernel not built")


@needs_ext
@pytest.mark.parametrize("u", [1e-4, 0.05, 0.1, 0.3, 1.0, 2.0, 7.5, 100.0])
def test_compiled_and_python_kernels_agree(u):
    a = _dcore.finite_part(u, 4 * np.pi, 1e-12, 1e-12, 4000)
    b = _dcore_py.finite_part(u, 4 * np.pi, 1e-12, 1e-12, 4000)
    assert a[0] == pytest.approx(b[0], rel=1e-11, abs=1e-14)


@needs_ext
def test_compiled_integrand_matches_python():
    k = np.linspace(0.0, 20.0, 2001)
    for u in (0.01, 0.5, 3.0):
        ref = _dcore_py.integrand(k, u)
        got = np.array([_dcore.integrand(x, u) for x in k])
        np.testing.assert_allclose(got, ref, rtol=1e-13, atol=1e-300)


def test_python_integrand_series_branches_are_continuous():
    for u in (0.5, 1.0):
        edge = _dcore_py.S_SERIES_MAX
        lo = _dcore_py.integrand(np.array([edge * (1 - 1e-9)]), u)[0]
        hi = _dcore_py.integrand(np.array([edge * (1 + 1e-9)]), u)[0]
        assert lo == pytest.approx(hi, rel=1e-7)
    edge = _dcore_py.Q_SERIES_MAX
    lo = _dcore_py.integrand(np.array([edge * (1 - 1e-9)]), 1.0)[0]
    hi = _dcore_py.integrand(np.array([edge * (1 + 1e-9)]), 1.0)[0]
    assert lo == pytest.approx(hi, rel=1e-7)


def test_backend_is_reported():
    assert BACKEND in ("cython", "python")
    if _dcore is not None:
        assert BACKEND == "cython"


def test_pure_python_fallback_can_be_forced():
    env = dict(os.environ, GRAVDECO_PURE_PYTHON="1")
    code = "from gravdeco.decoherence import BACKEND, dexp_exact, BallParams; print(BACKEND, dexp_exact(0.1, BallParams(10, 1)))"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True).stdout.split()
    assert out[0] == "python"
    assert float(out[1]) == pytest.approx(8.9615, abs=5e-4)
