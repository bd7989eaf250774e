"""Kernel backend selection.

The compiled extension is preferred when importable; set
``DARCYFLOW_BACKEND=python`` to force the numpy fallback (useful for
benchmarking and for debugging suspected kernel differences), or
``DARCYFLOW_BACKEND=cython`` to fail loudly when the extension is missing.
"""

import os

from . import pykernels

_choice = os.environ.get("DARCYFLOW_BACKEND", "auto").lower()

if _choice == "python":
    kernels = pykernels
elif _choice == "cython":
    from . import _ckernels as kernels  # noqa: F401 - ImportError is the point
else:
    if _choice != "auto":
        raise ValueError(f"DARCYFLOW_BACKEND must be auto|python|cython, got {_choice!r}")
    try:
        from . import _ckernels as kernels
    except ImportError:
        kernels = pykernels

backend_name = kernels.BACKEND_NAME
mode_sum = kernels.mode_sum
mode_sum_grad = kernels.mode_sum_grad
mode_sum_lagged = kernels.mode_sum_lagged
