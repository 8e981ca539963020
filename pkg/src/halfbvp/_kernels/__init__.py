"""Hot kernels with a compiled backend and a pure-Python fallback.

The compiled extension is used when it was built and ``HALFBVP_PURE`` is not
set in the environment.  ``BACKEND`` names the active implementation.
"""
import os

from . import _pure

if os.environ.get("HALFBVP_PURE"):
    _impl = _pure
    BACKEND = "pure"
else:
    try:
        from . import _native as _impl
        BACKEND = "native"
    except ImportError:
        _impl = _pure
        BACKEND = "pure"

eval_program = _impl.eval_program
integrate_halfline_system = _impl.integrate_halfline_system

__all__ = ["BACKEND", "eval_program", "integrate_halfline_system"]
