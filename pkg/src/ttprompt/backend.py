"""Kernel backend selection.

Hot kernels (CSR spmm, k-hop BFS means) exist twice: a numba @njit build and a
pure-numpy fallback. The env var TTPROMPT_BACKEND picks one:

    auto   (default) numba if importable, else numpy
    numba  require numba, error if missing
    numpy  force the fallback path

Resolution happens once, on first use.
"""

import os

from .errors import UsageError

ENV_VAR = "TTPROMPT_BACKEND"

_active = None


def _resolve():
    choice = os.environ.get(ENV_VAR, "auto").strip().lower()
    if choice not in ("auto", "numba", "numpy"):
        raise UsageError(
            f"{ENV_VAR} must be one of auto|numba|numpy, got {choice!r}"
        )
    if choice == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        if choice == "numba":
            raise UsageError(f"{ENV_VAR}=numba but numba is not importable")
        return "numpy"
    return "numba"


def active_backend():
    """Name of the kernel backend in use ('numba' or 'numpy')."""
    global _active
    if _active is None:
        _active = _resolve()
    return _active
