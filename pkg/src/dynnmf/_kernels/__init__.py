"""Family kernels with backend selection at import time.

The compiled Cython module is preferred; the NumPy reference is used when
the extension is unavailable or DYNNMF_PURE_PYTHON is set. Both expose the
same functions with bit-compatible results (see tests/test_kernels.py and
benchmarks/bench_kernels.py).
"""

import os

from . import _ref

if os.environ.get("DYNNMF_PURE_PYTHON"):
    _impl = _ref
else:
    try:
        from . import _fast as _impl
    except ImportError:  # extension not built
        _impl = _ref

BACKEND = _impl.BACKEND
poisson_stats = _impl.poisson_stats
exponential_stats = _impl.exponential_stats

__all__ = ["BACKEND", "poisson_stats", "exponential_stats"]
