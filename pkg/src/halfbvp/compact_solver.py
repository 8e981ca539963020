"""Nystrom solver for ``u = Fu + H[u]/alpha`` on ``[0, R]`` (trapezoid rule, Picard then Newton)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import exprlang as el
from .greens_kernel import GreenKernel
from .problem_model import ProblemSpec

__all__ = [
    "SolutionCurve", "SolverOptions", "Discretization", "NonConvergence", "ConvergedOutsideAnnulus",
    "discretize", "apply_T", "solve_in_annulus", "verify_solution", "functional_value",
]


class NonConvergence(RuntimeError):
    """No fixed point found.  This says nothing about existence."""

    def __init__(self, message: str, best: np.ndarray | None = None, history: list[float] | None = None):
        super().__init__(message)
        self.best = best
        self.history = history or []


class ConvergedOutsideAnnulus(RuntimeError):
    def __init__(self, message: str, found: list[float]):
        super().__init__(message)
        self.found = found


@dataclass
class SolutionCurve:
    nodes: np.ndarray
    values: np.ndarray
    flux: np.ndarray  # p u'
    derivative: np.ndarray
    domain: str = "compact"
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SolverOptions:
    N: int = 513
    damping: float = 0.5
    max_iter: int = 400
    tol: float = 1e-12
    newton_iter: int = 60
    n_starts: int = 12


@dataclass(frozen=True, eq=False)
class Discretization:
    """Grid, trapezoid weights and the weighted kernel matrix ``W[i, j] = w_j k(t_i, s_j)``."""

    nodes: np.ndarray
    weights: np.ndarray
    W: np.ndarray
    Pi: np.ndarray
    grad_L: np.ndarray  # H[u] = outer(grad_L @ u)
    alpha: float


def _grid(spec: ProblemSpec, N: int) -> np.ndarray:
    t = np.linspace(0.0, spec.R, N)
    for bp in spec.t_breakpoints():
        if 0 < bp < spec.R:
            k = int(np.argmin(np.abs(t - bp)))
            if 0 < k < N - 1:
                t[k] = bp
    if np.any(np.diff(t) <= 0):
        raise ValueError("grid too coarse for the breakpoints of the problem")
    return t


def discretize(spec: ProblemSpec, g: GreenKernel, N: int = 513) -> Discretization:
    if N < 3:
        raise ValueError("need at least 3 nodes")
    t = _grid(spec, N)
    w = _trapezoid_weights(t)
    Pi = g.Pi(t)
    Pi[0] = 0.0
    # the kink of k(t_i, .) sits at s = t_i, a node, so the trapezoid rule sees only smooth panels
    K = g.gamma + Pi[np.minimum.outer(np.arange(N), np.arange(N))]
    W = K * w[None, :]
    return Discretization(t, w, W, Pi, _functional_gradient(spec, t, w), spec.alpha)


def _trapezoid_weights(t: np.ndarray) -> np.ndarray:
    h = np.diff(t)
    w = np.zeros(t.size)
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


def _functional_gradient(spec: ProblemSpec, t: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Vector ``g`` with ``H[u] = outer(g @ u)`` on the grid ``t``."""
    fs = spec.functional
    grad = w * el.eval_array(fs.weight, {"t": t})
    for c, node in fs.point_terms:
        # linear interpolation weights of u(node)
        k = int(np.clip(np.searchsorted(t, node) - 1, 0, t.size - 2))
        lam = (node - t[k]) / (t[k + 1] - t[k])
        grad[k] += c * (1 - lam)
        grad[k + 1] += c * lam
    return grad


def functional_value(spec: ProblemSpec, disc: Discretization, u: np.ndarray) -> float:
    return el.evaluate(spec.functional.outer, {"v": float(disc.grad_L @ u)})


def apply_T(spec: ProblemSpec, disc: Discretization, u: np.ndarray) -> np.ndarray:
    """``(Tu)_i = sum_j w_j k(t_i, s_j) f(s_j, u_j) + H[u]/alpha``."""
    u = np.asarray(u, dtype=float)
    fu = spec.f_of(disc.nodes, u)
    return disc.W @ fu + functional_value(spec, disc, u) / disc.alpha


def _jacobian(spec: ProblemSpec, disc: Discretization, u: np.ndarray) -> np.ndarray:
    t = disc.nodes
    h = 1e-7 * np.maximum(1.0, np.abs(u))
    lo = np.maximum(u - h, 0.0)
    hi = u + h
    fu = (spec.f_of(t, hi) - spec.f_of(t, lo)) / (hi - lo)
    L = float(disc.grad_L @ u)
    hL = 1e-7 * max(1.0, abs(L))
    Llo = max(L - hL, 0.0)
    dout = (el.evaluate(spec.functional.outer, {"v": L + hL}) - el.evaluate(spec.functional.outer, {"v": Llo})) / (L + hL - Llo)
    J = -disc.W * fu[None, :]
    J -= np.outer(np.ones_like(u), disc.grad_L) * (dout / disc.alpha)
    J[np.diag_indices_from(J)] += 1.0
    return J


def _residual(spec, disc, u):
    return u - apply_T(spec, disc, u)


def _converged(r: np.ndarray, u: np.ndarray, tol: float) -> bool:
    return float(np.max(np.abs(r))) < tol * max(1.0, float(np.max(np.abs(u))))


def _picard(spec, disc, u, opt: SolverOptions, history: list[float]):
    theta = opt.damping
    for _ in range(opt.max_iter):
        Tu = apply_T(spec, disc, u)
        r = u - Tu
        res = float(np.max(np.abs(r)))
        history.append(res)
        if _converged(r, u, opt.tol):
            return u, True
        if not np.isfinite(res) or res > 1e12:
            return u, False
        if len(history) > 40 and res > 0.9 * history[-30]:
            return u, False  # stalled or diverging
        u = np.maximum((1 - theta) * u + theta * Tu, 0.0)
    return u, False


def _newton(spec, disc, u, opt: SolverOptions, history: list[float]):
    r = _residual(spec, disc, u)
    for _ in range(opt.newton_iter):
        res = float(np.max(np.abs(r)))
        history.append(res)
        if _converged(r, u, opt.tol):
            return u, True
        try:
            du = np.linalg.solve(_jacobian(spec, disc, u), -r)
        except np.linalg.LinAlgError:
            return u, False
        step = 1.0
        while step > 1e-4:
            cand = np.maximum(u + step * du, 0.0)
            try:
                rc = _residual(spec, disc, cand)
            except (el.ExprError, ArithmeticError):
                rc = None
            if rc is not None and np.max(np.abs(rc)) < (1 - 1e-4 * step) * res:
                u, r = cand, rc
                break
            step /= 2
        else:
            return u, False
    return u, _converged(r, u, opt.tol)


def _curve(spec: ProblemSpec, disc: Discretization, u: np.ndarray) -> SolutionCurve:
    t = disc.nodes
    fu = spec.f_of(t, u)
    # p u'(t) = int_t^R f(s, u(s)) ds (u'(R) = 0), trapezoid from the right
    panels = 0.5 * (fu[1:] + fu[:-1]) * np.diff(t)
    flux = np.concatenate([np.cumsum(panels[::-1])[::-1], [0.0]])
    return SolutionCurve(t.copy(), u.copy(), flux, flux / spec.p_of(t), "compact")


def solve_in_annulus(
    spec: ProblemSpec, g: GreenKernel, rho_lo: float, rho_hi: float, options: SolverOptions = SolverOptions()
) -> SolutionCurve:
    """Fixed point of ``T`` with ``rho_lo < u(R) < rho_hi``.

    Damped Picard from the constant ``sqrt(rho_lo rho_hi)``; if that stalls
    or lands outside the annulus, damped Newton from a sweep of constant
    starting guesses inside the annulus.
    """
    if not 0 < rho_lo < rho_hi:
        raise ValueError("need 0 < rho_lo < rho_hi")
    disc = discretize(spec, g, options.N)
    N = disc.nodes.size
    history: list[float] = []
    outside: list[float] = []
    best, best_res = None, math.inf

    def accept(u, how):
        uR = float(u[-1])
        if rho_lo < uR < rho_hi:
            curve = _curve(spec, disc, u)
            curve.diagnostics.update(method=how, iterations=len(history),
                                     fixed_point_residual=float(np.max(np.abs(_residual(spec, disc, u)))))
            return curve
        outside.append(uR)
        return None

    def track(u):
        nonlocal best, best_res
        try:
            res = float(np.max(np.abs(_residual(spec, disc, u))))
        except (el.ExprError, ArithmeticError):
            return
        if res < best_res:
            best, best_res = u.copy(), res

    failed = 0
    u0 = np.full(N, math.sqrt(rho_lo * rho_hi))
    try:
        u, ok = _picard(spec, disc, u0.copy(), options, history)
    except (el.ExprError, ArithmeticError):
        u, ok = u0, False
    if ok:
        if (c := accept(u, "picard")) is not None:
            return c
    else:
        track(u)

    starts = [math.sqrt(rho_lo * rho_hi)]
    starts += list(np.geomspace(rho_lo, rho_hi, options.n_starts + 2)[1:-1])
    for c0 in starts:
        try:
            u, ok = _newton(spec, disc, np.full(N, c0), options, history)
        except (el.ExprError, ArithmeticError):
            failed += 1
            continue
        if ok:
            if (c := accept(u, "newton")) is not None:
                return c
        else:
            failed += 1
            track(u)
    if outside and failed == 0:
        found = sorted(set(round(x, 12) for x in outside))
        raise ConvergedOutsideAnnulus(f"every fixed point found has u(R) outside ({rho_lo}, {rho_hi}): {found}", outside)
    raise NonConvergence(
        f"no fixed point found in ({rho_lo}, {rho_hi}); best residual {best_res:.3g}"
        + (f"; fixed points outside at u(R) = {sorted(set(round(x, 12) for x in outside))}" if outside else ""),
        best, history,
    )


def verify_solution(spec: ProblemSpec, g: GreenKernel, u: SolutionCurve, tol: float = 1e-9) -> dict:
    """Independent structural checks of a computed curve on ``[0, R]``."""
    t, v = u.nodes, u.values
    N = t.size
    Pi = g.Pi(t)
    fu = spec.f_of(t, v)
    # conservative second difference: flux at midpoints is du / dPi
    flux_mid = np.diff(v) / np.diff(Pi)
    ode = (flux_mid[1:] - flux_mid[:-1]) / (0.5 * (t[2:] - t[:-2])) + fu[1:-1]
    ode_sup = float(np.max(np.abs(ode))) if N > 2 else 0.0
    # one-sided second-order slopes at both ends
    h0, h1 = t[1] - t[0], t[-1] - t[-2]
    du0 = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * h0)
    duR = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * h1)
    H = el.evaluate(spec.functional.outer, {"v": float(_functional_gradient(spec, t, _trapezoid_weights(t)) @ v)})
    bc = abs(spec.alpha * v[0] - spec.beta * u.derivative[0] - H)
    bc_fd = abs(spec.alpha * v[0] - spec.beta * du0 - H)
    norm = float(np.max(np.abs(v)))
    scale = tol * max(1.0, norm)
    monotone = bool(np.all(np.diff(v) >= -scale))
    mask = (t >= g.a) & (t <= g.b)
    cone_ok = bool(np.all(v >= -scale) and np.min(v[mask]) >= g.cone_c * norm - scale)
    return {
        "residual_sup": ode_sup,
        "bc_residual": float(bc),
        "bc_residual_fd": float(bc_fd),
        "slope_R": float(abs(u.derivative[-1])),
        "slope_R_fd": float(abs(duR)),
        "monotone": monotone,
        "cone_ok": cone_ok,
        "u_at_R": float(v[-1]),
        "norm": norm,
        "norm_at_R": bool(abs(v[-1] - norm) <= scale),
    }

