"""Dormand-Prince 5(4) integrator with dense output and event location.

The step controller and event bisection are mirrored exactly by the native
half-line kernel in ``halfbvp._kernels._native``; change both together.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = ["Event", "Trajectory", "solve_ivp", "DOPRI"]


@dataclass(frozen=True)
class Event:
    """Sign-change monitor ``fn(t, y)``; a terminal event stops integration."""

    fn: Callable[[float, np.ndarray], float]
    kind: str = "event"
    terminal: bool = False


@dataclass
class Trajectory:
    nodes: np.ndarray
    states: np.ndarray
    events: list[tuple[str, float]] = field(default_factory=list)
    status: str = "completed"  # completed | event_stop | step_failure
    message: str = ""
    nfev: int = 0
    naccept: int = 0
    nreject: int = 0

    @property
    def ok(self) -> bool:
        return self.status != "step_failure"


class DOPRI:
    c = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
    a21 = 1 / 5
    a31, a32 = 3 / 40, 9 / 40
    a41, a42, a43 = 44 / 45, -56 / 15, 32 / 9
    a51, a52, a53, a54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
    a61, a62, a63, a64, a65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
    a71, a73, a74, a75, a76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
    e1, e3, e4, e5, e6, e7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40
    d1, d3, d4 = -12715105075 / 11282082432, 87487479700 / 32700410799, -10690763975 / 1880347072
    d5, d6, d7 = 701980252875 / 199316789632, -1453857185 / 822651844, 69997945 / 29380423


SAFETY, FAC_MIN, FAC_MAX = 0.9, 0.2, 5.0


def _norm(err: np.ndarray, y0: np.ndarray, y1: np.ndarray, tol: float) -> float:
    scale = tol + tol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.max(np.abs(err) / scale))


def _initial_step(rhs, t0, y0, f0, tol, span) -> float:
    scale = tol + tol * np.abs(y0)
    d0 = float(np.max(np.abs(y0) / scale))
    d1 = float(np.max(np.abs(f0) / scale))
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, span)
    y1 = y0 + h0 * f0
    f1 = rhs(t0 + h0, y1)
    d2 = float(np.max(np.abs(f1 - f0) / scale)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100.0 * h0, h1, span)


def _dense(y0, y1, k1, k3, k4, k5, k6, k7, h):
    D = DOPRI
    ydiff = y1 - y0
    bspl = h * k1 - ydiff
    r4 = ydiff - h * k7 - bspl
    r5 = h * (D.d1 * k1 + D.d3 * k3 + D.d4 * k4 + D.d5 * k5 + D.d6 * k6 + D.d7 * k7)
    return y0, ydiff, bspl, r4, r5


def _interp(coef, theta: float) -> np.ndarray:
    r1, r2, r3, r4, r5 = coef
    th1 = 1.0 - theta
    return r1 + theta * (r2 + th1 * (r3 + theta * (r4 + th1 * r5)))


def solve_ivp(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    y0: Sequence[float],
    t_end: float,
    tol: float = 1e-9,
    events: Sequence[Event] = (),
    t_eval: Sequence[float] | None = None,
    max_steps: int = 1_000_000,
) -> Trajectory:
    """Integrate ``y' = rhs(t, y)`` from ``t0`` to ``t_end`` (``t0 < t_end``).

    ``tol`` is used as both relative and absolute tolerance.  Output is on
    ``t_eval`` (dense interpolation) when given, else on the accepted steps.
    Events are located by bisection on the dense interpolant to
    ``1e-10 * (t_end - t0)``.
    """
    if not t0 < t_end:
        raise ValueError("solve_ivp requires t0 < t_end")
    D = DOPRI
    span = t_end - t0
    t_tol = 1e-10 * span
    y = np.array(y0, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("non-finite initial state")
    if t_eval is not None:
        t_eval = np.asarray(t_eval, dtype=float)
        if np.any(np.diff(t_eval) <= 0) or t_eval[0] < t0 or t_eval[-1] > t_end:
            raise ValueError("t_eval must be strictly increasing inside [t0, t_end]")

    nfev = 0

    def f(t, yy):
        nonlocal nfev
        nfev += 1
        return np.asarray(rhs(t, yy), dtype=float)

    out_t: list[float] = []
    out_y: list[np.ndarray] = []
    ie = 0  # next t_eval index
    if t_eval is None:
        out_t.append(t0)
        out_y.append(y.copy())
    else:
        while ie < len(t_eval) and t_eval[ie] <= t0:
            out_t.append(float(t_eval[ie]))
            out_y.append(y.copy())
            ie += 1

    ev_vals = [float(e.fn(t0, y)) for e in events]
    found: list[tuple[str, float]] = []
    k1 = f(t0, y)
    h = _initial_step(f, t0, y, k1, tol, span)
    t = t0
    naccept = nreject = 0
    status, message = "completed", ""
    last_rejected = False

    while t < t_end:
        if naccept + nreject >= max_steps:
            status, message = "step_failure", "maximum number of steps exceeded"
            break
        if h < 1e-14 * max(1.0, abs(t)):
            status, message = "step_failure", f"step size underflow at t={t!r}"
            break
        if t + h > t_end or t_end - (t + h) < 1e-12 * span:
            h = t_end - t
        k2 = f(t + D.c[1] * h, y + h * D.a21 * k1)
        k3 = f(t + D.c[2] * h, y + h * (D.a31 * k1 + D.a32 * k2))
        k4 = f(t + D.c[3] * h, y + h * (D.a41 * k1 + D.a42 * k2 + D.a43 * k3))
        k5 = f(t + D.c[4] * h, y + h * (D.a51 * k1 + D.a52 * k2 + D.a53 * k3 + D.a54 * k4))
        k6 = f(t + h, y + h * (D.a61 * k1 + D.a62 * k2 + D.a63 * k3 + D.a64 * k4 + D.a65 * k5))
        y_new = y + h * (D.a71 * k1 + D.a73 * k3 + D.a74 * k4 + D.a75 * k5 + D.a76 * k6)
        k7 = f(t + h, y_new)
        err_vec = h * (D.e1 * k1 + D.e3 * k3 + D.e4 * k4 + D.e5 * k5 + D.e6 * k6 + D.e7 * k7)
        if not (np.all(np.isfinite(y_new)) and np.all(np.isfinite(err_vec))):
            err = math.inf
        else:
            err = _norm(err_vec, y, y_new, tol)

        if err > 1.0:
            nreject += 1
            fac = FAC_MIN if not math.isfinite(err) else max(FAC_MIN, SAFETY * err ** -0.2)
            h *= min(1.0, fac)
            last_rejected = True
            continue

        naccept += 1
        t_new = t + h if t + h < t_end else t_end
        coef = _dense(y, y_new, k1, k3, k4, k5, k6, k7, h)

        # event detection on the accepted step
        stop_at = None
        new_vals = [float(e.fn(t_new, y_new)) for e in events]
        hits = []
        for j, e in enumerate(events):
            g0, g1 = ev_vals[j], new_vals[j]
            if (g0 < 0.0 < g1) or (g0 > 0.0 > g1) or (g1 == 0.0 and g0 != 0.0):
                hits.append((_locate(e, coef, t, h, g0, t_tol), j))
        hits.sort()
        for te, j in hits:
            if stop_at is not None and te > stop_at:
                break
            found.append((events[j].kind, te))
            if events[j].terminal:
                stop_at = te
        ev_vals = new_vals

        t_stop = t_new if stop_at is None else stop_at
        if t_eval is None:
            out_t.append(t_stop)
            out_y.append(y_new.copy() if stop_at is None else _interp(coef, (stop_at - t) / h))
        else:
            while ie < len(t_eval) and t_eval[ie] <= t_stop:
                out_t.append(float(t_eval[ie]))
                out_y.append(_interp(coef, (t_eval[ie] - t) / h))
                ie += 1
            if stop_at is not None:
                out_t.append(stop_at)
                out_y.append(_interp(coef, (stop_at - t) / h))

        if stop_at is not None:
            status = "event_stop"
            break

        t, y, k1 = t_new, y_new, k7
        fac = FAC_MAX if err == 0.0 else min(FAC_MAX, max(FAC_MIN, SAFETY * err ** -0.2))
        if last_rejected:
            fac = min(fac, 1.0)
        last_rejected = False
        h *= fac

    nodes = np.asarray(out_t, dtype=float)
    states = np.asarray(out_y, dtype=float).reshape(len(out_t), -1)
    # a terminal event exactly on an output node would duplicate it
    if nodes.size > 1 and nodes[-1] <= nodes[-2]:
        nodes, states = nodes[:-1], states[:-1]
    return Trajectory(nodes, states, found, status, message, nfev, naccept, nreject)


def _locate(event: Event, coef, t: float, h: float, g0: float, t_tol: float) -> float:
    lo, hi = t, t + h
    glo = g0
    while hi - lo > t_tol:
        mid = 0.5 * (lo + hi)
        gm = float(event.fn(mid, _interp(coef, (mid - t) / h)))
        if gm == 0.0:
            return mid
        if (gm < 0.0) == (glo < 0.0):
            lo, glo = mid, gm
        else:
            hi = mid
    return hi
