"""Select the sweep kernels at import time.

The compiled ``_ckernels`` extension is used when it was built; otherwise, or
when ``GNBP_PURE_PYTHON`` is set to a non-empty value, the pure-Python
``_kernels_py`` module is used.
"""
import os

from . import _kernels_py

if os.environ.get("GNBP_PURE_PYTHON"):
    kernels = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _ckernels as kernels
    except ImportError:
        kernels = _kernels_py
        BACKEND = "python"
    else:
        BACKEND = "cython"

prior_sweep = kernels.prior_sweep
gauss_sweep = kernels.gauss_sweep


def compiled():
    """The compiled kernel module, or ``None`` if it is unavailable."""
    try:
        from . import _ckernels
    except ImportError:
        return None
    return _ckernels
