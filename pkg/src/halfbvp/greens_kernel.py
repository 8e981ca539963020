"""Green's function of ``-(p u')' = 0``, ``alpha u(0) - beta u'(0) = 0``, ``u'(R) = 0``.

``k(t, s) = (1/alpha) (beta/p(0) + alpha Pi(min(s, t)))`` with ``Pi(t) = int_0^t 1/p``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import exprlang as el
from .numerics import Quadrature, cumulative, extremum_on_rect
from .problem_model import ProblemSpec

__all__ = ["GreenKernel", "KernelError", "build", "k_eval", "phi_eval", "c_eval", "k_t_eval"]


class KernelError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GreenKernel:
    alpha: float
    beta: float
    R: float
    a: float
    b: float
    p0: float
    p: el.Expr
    nodes: np.ndarray
    Pi_nodes: np.ndarray
    Pi_interp: PchipInterpolator
    Pi_antideriv: PchipInterpolator
    inv_m: float
    inv_M: float
    cone_c: float
    inv_m_arg: float
    inv_M_arg: float

    @property
    def cone_interval(self) -> tuple[float, float]:
        return (self.a, self.b)

    @property
    def gamma(self) -> float:
        """``beta / (alpha p(0))``, the value of ``Phi`` at 0."""
        return self.beta / (self.alpha * self.p0)

    def Pi(self, t) -> np.ndarray:
        return self.Pi_interp(np.clip(t, 0.0, self.R))

    def int_Pi(self, lo, hi) -> np.ndarray:
        return self.Pi_antideriv(hi) - self.Pi_antideriv(lo)

    def int_k(self, t, lo: float, hi: float) -> np.ndarray:
        """``int_lo^hi k(t, s) ds`` in closed form from the antiderivative of ``Pi``."""
        t = np.asarray(t, dtype=float)
        m = np.clip(t, lo, hi)
        # Pi(min(s, t)) is Pi(s) up to m and the constant Pi(t) after it
        return self.gamma * (hi - lo) + self.int_Pi(lo, m) + self.Pi(t) * (hi - m)


def _check(g: GreenKernel, *xs) -> None:
    for x in xs:
        x = np.asarray(x, dtype=float)
        slack = 1e-12 * max(1.0, g.R)
        if np.any(x < -slack) or np.any(x > g.R + slack) or not np.all(np.isfinite(x)):
            raise KernelError(f"argument outside [0, R] = [0, {g.R}]")


def build(spec: ProblemSpec, q: Quadrature = Quadrature(1e-13, 1e-12), n_nodes: int = 4097) -> GreenKernel:
    """Tabulate ``Pi`` and compute ``1/m``, ``1/M`` and the cone constant."""
    a, b, R = spec.a, spec.b, spec.R
    if not (spec.alpha > 0 and spec.beta >= 0 and R > 0):
        raise KernelError("need alpha > 0, beta >= 0, R > 0")
    if not (0 <= a < b <= R):
        raise KernelError(f"cone interval [{a}, {b}] must be a nondegenerate subinterval of [0, {R}]")
    if spec.beta == 0 and a == 0:
        raise KernelError("a > 0 is required when beta = 0")
    bps = [x for x in spec.p_breakpoints() if 0 < x < R]
    nodes = np.unique(np.concatenate([np.linspace(0.0, R, n_nodes), bps]))
    p_nodes = spec.p_of(nodes)
    if not np.all(p_nodes > 0):
        raise KernelError("p must be positive on [0, R]")
    Pi_nodes = cumulative(lambda t: 1.0 / spec.p_of(t), nodes, q, bps)
    if not np.all(np.diff(Pi_nodes) > 0):
        raise KernelError("Pi is not strictly increasing (p too large or quadrature failure)")
    interp = PchipInterpolator(nodes, Pi_nodes, extrapolate=False)
    anti = interp.antiderivative()
    p0 = float(p_nodes[0])
    alpha, beta = float(spec.alpha), float(spec.beta)

    proto = GreenKernel(alpha, beta, R, a, b, p0, spec.p, nodes, Pi_nodes, interp, anti,
                        0.0, 0.0, 0.0, 0.0, 0.0)
    big = extremum_on_rect(lambda t, v: proto.int_k(t, 0.0, R), ((0.0, R), (0.0, 0.0)), "max")
    small = extremum_on_rect(lambda t, v: proto.int_k(t, a, b), ((a, b), (0.0, 0.0)), "min")
    cmin = extremum_on_rect(lambda t, v: c_eval(proto, t), ((a, b), (0.0, 0.0)), "min")
    if not (big.value > 0 and small.value > 0 and 0 < cmin.value <= 1 + 1e-12):
        raise KernelError("degenerate kernel constants")
    return GreenKernel(alpha, beta, R, a, b, p0, spec.p, nodes, Pi_nodes, interp, anti,
                       big.value, small.value, min(cmin.value, 1.0), big.arg[0], small.arg[0])


def k_eval(g: GreenKernel, t, s):
    _check(g, t, s)
    return g.gamma + g.Pi(np.minimum(s, t))


def phi_eval(g: GreenKernel, s):
    _check(g, s)
    return g.gamma + g.Pi(s)


def c_eval(g: GreenKernel, t):
    _check(g, t)
    top = g.beta / g.p0 + g.alpha * g.Pi(t)
    return top / (g.beta / g.p0 + g.alpha * g.Pi_nodes[-1])


def k_t_eval(g: GreenKernel, t, s):
    """``dk/dt``: ``1/p(t)`` when ``s > t`` (also used at ``s = t``), 0 when ``s < t``."""
    _check(g, t, s)
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    pt = el.eval_array(g.p, {"t": t})
    return np.where(s >= t, 1.0 / pt, 0.0)
