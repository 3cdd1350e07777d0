"""Pick the kernel implementation at import time.

The compiled ``_ckernels`` extension is used when it imports cleanly.
Setting ``MHDM_BACKEND=python`` forces the NumPy fallback.
"""

import importlib
import os

from . import _pykernels

PYTHON = _pykernels


def _load_compiled():
    try:
        return importlib.import_module("mhdm._ckernels")
    except ImportError:
        return None


COMPILED = _load_compiled()

if os.environ.get("MHDM_BACKEND", "").lower() == "python" or COMPILED is None:
    kernels = PYTHON
else:
    kernels = COMPILED

NAME = kernels.NAME


def available():
    """Names of the importable kernel backends."""
    names = ["python"]
    if COMPILED is not None:
        names.append(COMPILED.NAME)
    return names


def get(name):
    """Return the kernel module called ``name`` (``"python"`` or ``"cython"``)."""
    if name == "python":
        return PYTHON
    if name == "cython" and COMPILED is not None:
        return COMPILED
    raise ValueError(f"kernel backend {name!r} is not available")
