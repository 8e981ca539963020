"""Initial value problem on ``[R, T]`` from ``u(R) = u0``, ``u'(R) = 0`` with envelope monitoring."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .compact_solver import SolutionCurve
from .halfline_certificates import HalflineCertificate
from .problem_model import ProblemSpec

__all__ = ["HalflineRun", "TailClass", "PreconditionError", "integrate_halfline", "classify_tail",
           "admissible_u0_scan", "output_grid"]


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class TailClass:
    kind: str  # decays_to_zero | bounded_positive | inconclusive
    slope: float
    window: tuple[float, float]
    u_end_ratio: float
    u_prime_sign: str  # negative | nonpositive | positive | mixed

    def to_dict(self) -> dict:
        return {"kind": self.kind, "slope": self.slope, "window": list(self.window),
                "u_end_ratio": self.u_end_ratio, "u_prime_sign": self.u_prime_sign}


@dataclass
class HalflineRun:
    curve: SolutionCurve
    u0: float
    T_trunc: float
    Pi: np.ndarray  # int_R^t 1/p on the output nodes
    status: str  # positive | hit_zero
    hit_zero_at: float | None
    envelope_rate: float | None
    envelope_violations: list[tuple[float, float]] = field(default_factory=list)
    crossings: list[float] = field(default_factory=list)
    tail: TailClass | None = None
    nfev: int = 0
    naccept: int = 0
    backend: str = ""

    @property
    def completed(self) -> bool:
        return self.status == "positive"

    def summary(self) -> dict:
        v = self.curve.values
        return {
            "u0": self.u0, "T_trunc": self.T_trunc, "status": self.status, "hit_zero_at": self.hit_zero_at,
            "sup": float(np.max(v)), "inf": float(np.min(v)), "u_end": float(v[-1]),
            "envelope_rate": self.envelope_rate,
            "envelope_violations": len(self.envelope_violations),
            "max_envelope_excess": max((e for _, e in self.envelope_violations), default=0.0),
            "envelope_crossings": list(self.crossings), "tail": None if self.tail is None else self.tail.to_dict(),
            "nfev": self.nfev, "naccept": self.naccept, "backend": self.backend,
        }


def output_grid(R: float, T: float, n_log: int = 2001) -> np.ndarray:
    """Log-spaced reporting nodes plus a fine uniform patch near ``R``."""
    near = R + np.arange(0, 101) * 1e-4
    lin = np.linspace(R, min(R + 50.0, T), 5001)
    base = max(R, 1e-3)
    logs = R + (np.geomspace(base, base + (T - R), n_log) - base)
    t = np.unique(np.concatenate([near[near <= T], lin, logs, [T]]))
    return t[(t >= R) & (t <= T)]


def integrate_halfline(
    spec: ProblemSpec, u0: float, cert: HalflineCertificate | None = None, T_trunc: float | None = None,
    tol: float = 1e-10, *, envelope_tol: float = 1e-9, t_eval: np.ndarray | None = None,
) -> HalflineRun:
    """Integrate ``(p u')' + f(t, u) = 0`` in the variables ``(u, p u')``.

    With a certificate the precondition ``0 < u0 <= d/k`` is enforced and the
    Gronwall envelope is monitored, both as a non-terminal event and on every
    output node.
    """
    R = spec.R
    if not u0 > 0:
        raise PreconditionError("u0 must be positive")
    rate = None
    if cert is not None:
        if u0 > cert.admissible_u0_max * (1 + 1e-12):
            raise PreconditionError(f"u0={u0} exceeds d/k = {cert.admissible_u0_max}")
        if cert.cG is not None and cert.cG.verdict == "pass":
            rate = cert.M1_d * cert.B1_minus
    T = 1e3 * max(R, 1.0) if T_trunc is None else float(T_trunc)
    if not T > R:
        raise PreconditionError("T_trunc must exceed R")
    te = output_grid(R, T) if t_eval is None else np.asarray(t_eval, dtype=float)
    traj = _kernels.integrate_halfline_system(spec.p, spec.f, R, float(u0), T, tol, te, rate)
    if not traj.ok:
        raise ArithmeticError(f"half-line integration failed: {traj.message}")
    t = traj.nodes
    u, w, Pi = traj.states[:, 0], traj.states[:, 1], traj.states[:, 2]
    hit = next((tt for kind, tt in traj.events if kind == "hit_zero"), None)
    crossings = [tt for kind, tt in traj.events if kind == "envelope_crossing"]
    violations: list[tuple[float, float]] = []
    if rate is not None:
        E = u0 * np.exp(rate * Pi)
        excess = u - E
        bad = excess > envelope_tol
        violations = [(float(a), float(b)) for a, b in zip(t[bad], excess[bad])]
    curve = SolutionCurve(t, u, w, w / spec.p_of(t), "halfline")
    run = HalflineRun(
        curve, float(u0), T, Pi, "hit_zero" if hit is not None else "positive", hit, rate, violations,
        crossings, None, traj.nfev, traj.naccept, _kernels.BACKEND,
    )
    if run.completed:
        run.tail = classify_tail(run)
    return run


def classify_tail(run: HalflineRun) -> TailClass:
    """Log-log fit of ``u`` over the last decade ``[T/10, T]``."""
    t, u, du = run.curve.nodes, run.curve.values, run.curve.derivative
    T = float(t[-1])
    lo = max(T / 10.0, float(t[0]))
    m = t >= lo
    ratio = float(u[-1] / run.u0)
    if run.status != "positive" or m.sum() < 3 or np.any(u[m] <= 0):
        return TailClass("inconclusive", math.nan, (lo, T), ratio, "mixed")
    x, y = np.log(t[m]), np.log(u[m])
    if x[-1] - x[0] <= 0:
        return TailClass("inconclusive", math.nan, (lo, T), ratio, "mixed")
    slope = float(np.polyfit(x, y, 1)[0])
    d = du[m]
    if np.all(d < 0):
        sign = "negative"
    elif np.all(d <= 0):
        sign = "nonpositive"
    elif np.all(d > 0):
        sign = "positive"
    else:
        sign = "mixed"
    if ratio < 0.05 and slope < -0.1:
        kind = "decays_to_zero"
    elif -0.02 < slope < 0.02 and ratio > 0.1:
        kind = "bounded_positive"
    else:
        kind = "inconclusive"
    return TailClass(kind, slope, (lo, T), ratio, sign)


def admissible_u0_scan(
    spec: ProblemSpec, cert: HalflineCertificate, u0_grid, T_trunc: float | None = None, tol: float = 1e-10,
) -> list[dict]:
    """One run per ``u0``; errors are recorded per row."""
    rows = []
    for u0 in u0_grid:
        u0 = float(u0)
        if not 0 < u0 <= cert.admissible_u0_max * (1 + 1e-12):
            raise PreconditionError(f"u0={u0} outside (0, d/k] = (0, {cert.admissible_u0_max}]")
        try:
            run = integrate_halfline(spec, u0, cert, T_trunc, tol)
            rows.append({"u0": u0, "status": run.status, "tail": run.tail.kind if run.tail else "inconclusive",
                         "envelope_violations": len(run.envelope_violations), "error": ""})
        except (ArithmeticError, ValueError) as exc:
            rows.append({"u0": u0, "status": "error", "tail": "", "envelope_violations": 0, "error": str(exc)})
    return rows
