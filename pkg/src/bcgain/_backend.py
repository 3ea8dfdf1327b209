"""Pick the rollout kernel at import time.

The compiled extension is preferred. Setting ``BCGAIN_PURE_PYTHON=1``
forces the NumPy fallback.
"""

import os

from . import _fallback

fallback = _fallback

if os.environ.get("BCGAIN_PURE_PYTHON", "") == "1":
    compiled = None
else:
    try:
        from . import _kernels as compiled
    except ImportError:  # extension not built
        compiled = None

kernel = compiled if compiled is not None else fallback
NAME = "compiled" if compiled is not None else "numpy"


def get(name=None):
    """Return the kernel module called ``name`` (``"compiled"``/``"numpy"``)."""
    if name is None:
        return kernel
    if name == "numpy":
        return fallback
    if name == "compiled":
        if compiled is None:
            raise ImportError("compiled rollout kernel is not available")
        return compiled
    raise ValueError(f"unknown backend {name!r}")
