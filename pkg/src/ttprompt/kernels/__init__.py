"""Hot kernels, dispatched once per process by ttprompt.backend."""

from ..backend import active_backend

if active_backend() == "numba":
    from .numba_impl import khop_mean, spmm
else:
    from .numpy_impl import khop_mean, spmm

__all__ = ["spmm", "khop_mean"]
