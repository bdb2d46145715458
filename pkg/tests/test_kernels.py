import os
import subprocess
import sys

import numpy as np
import pytest

from qccphase import _kernels_py, kernels
from qccphase.classical import GaussianSpec, sample_initial
from qccphase.hamiltonian import ModelParams, flow_field

compiled = pytest.mark.skipif("cython" not in kernels.available(), reason="extension not built")


@pytest.mark.parametrize("params", [ModelParams.quartic(), ModelParams.quartic(1.0, 1.0),
                                    ModelParams.quadratic((1.0, 1.3), 0.2)])
@compiled
def test_backends_agree(params):
    g0 = sample_initial(GaussianSpec.coherent(0.05), 257, seed=2)
    M0 = np.ascontiguousarray(np.broadcast_to(np.eye(4), (257, 4, 4)))
    out = {}
    for name in ("cython", "python"):
        g, M = g0.copy(), M0.copy()
        kernels.get(name).tangent_rk4(params.coefficients, g, M, 1e-3, 500)
        h = g0.copy()
        kernels.get(name).flow_rk4(params.coefficients, h, 1e-3, 500)
        out[name] = (g, M, h)
    for a, b in zip(out["cython"], out["python"]):
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)
    np.testing.assert_array_equal(out["python"][0], out["python"][2])


def test_python_kernel_single_step_matches_rk4_by_hand():
    params = ModelParams.quartic()
    x = np.array([[0.4, 0.6, 0.5, 0.414]])
    dt = 0.01
    k1 = flow_field(params, x)
    k2 = flow_field(params, x + dt / 2 * k1)
    k3 = flow_field(params, x + dt / 2 * k2)
    k4 = flow_field(params, x + dt * k3)
    expected = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    g = x.copy()
    _kernels_py.flow_rk4(params.coefficients, g, dt, 1)
    np.testing.assert_allclose(g, expected, rtol=1e-14)


def test_unknown_backend():
    with pytest.raises(ValueError, match="not available"):
        kernels.get("fortran")


def test_environment_variable_forces_fallback():
    env = dict(os.environ, QCCPHASE_PURE_PYTHON="1")
    res = subprocess.run([sys.executable, "-c", "from qccphase import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert res.stdout.strip() == "python"
