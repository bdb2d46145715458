"""Backend selection for the ensemble integrators.

The compiled ``_ckernels`` extension is used when it was built; otherwise the
numpy implementation in ``_kernels_py`` is used. Setting the environment
variable ``QCCPHASE_PURE_PYTHON=1`` forces the fallback.
"""
import os

from . import _kernels_py

_AVAILABLE = {"python": _kernels_py}
try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None
else:
    _AVAILABLE["cython"] = _ckernels

if os.environ.get("QCCPHASE_PURE_PYTHON", "") not in ("", "0") or _ckernels is None:
    BACKEND = "python"
else:
    BACKEND = "cython"

_active = _AVAILABLE[BACKEND]


def available():
    return sorted(_AVAILABLE)


def get(name=None):
    """Kernel module by name (``"cython"`` or ``"python"``); default is the active one."""
    if name is None:
        return _active
    try:
        return _AVAILABLE[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} is not available; have {available()}") from None


def flow_rk4(coef, gamma, dt, steps):
    _active.flow_rk4(coef, gamma, dt, steps)


def tangent_rk4(coef, gamma, M, dt, steps):
    _active.tangent_rk4(coef, gamma, M, dt, steps)
