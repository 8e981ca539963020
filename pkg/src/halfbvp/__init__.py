"""Positive solutions of ``(p u')' + f(t, u) = 0`` on the half-line with a functional condition at 0.

The problem is split at ``t = R``: a Hammerstein equation on ``[0, R]`` is
localised in cone annuli by index certificates and solved by a Nystrom
method, and the decay problem on ``[R, inf)`` is certified by Gronwall and
Sturm comparison bounds and integrated from ``u(R) = u0``, ``u'(R) = 0``.
"""
__version__ = "0.1.0"

from ._kernels import BACKEND  # noqa: E402

__all__ = ["__version__", "BACKEND"]
