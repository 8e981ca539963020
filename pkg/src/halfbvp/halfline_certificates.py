"""Hypotheses of the half-line existence result: P, B1^-, (b1+), M_j(d), (cG-), (cconf1),
plus the comparison functions (Euler majorant, Gronwall envelope, minorant barrier)."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import exprlang as el
from .numerics import (
    DivergenceError, Quadrature, QuadratureError, cumulative, extremum_on_rect, integrate_improper, solve_ivp,
)
from .problem_model import ProblemSpec, screen_ff2

__all__ = [
    "MarginRecord", "B1PlusScreen", "HalflineCertificate", "FF2Error", "NoAdmissibleN", "EnvelopeError",
    "compute_P", "compute_B1_minus", "screen_b1_plus", "compute_Mj", "check_cG", "check_cconf1",
    "find_min_n", "power_u0_bound", "euler_majorant", "gronwall_envelope", "minorant_barrier",
    "certify_halfline", "Pi_from_R",
]

DEFAULT_Q = Quadrature(1e-13, 1e-11)


class FF2Error(ValueError):
    """``F_j(v)/v`` is not (or not demonstrably) bounded near 0."""


class NoAdmissibleN(ValueError):
    pass


class EnvelopeError(ValueError):
    pass


@dataclass(frozen=True)
class MarginRecord:
    name: str
    margin: float
    verdict: str  # pass | fail | inconclusive
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _tol(scale: float, rel: float = 1e-9) -> float:
    return rel * max(1.0, abs(scale))


# ----------------------------------------------------------------- integrals


def compute_P(spec: ProblemSpec, q: Quadrature = DEFAULT_Q) -> float:
    """``int_R^inf 1/p``; raises :class:`DivergenceError` when it is infinite."""
    return integrate_improper(lambda t: 1.0 / spec.p_of(t), spec.R, q, spec.p_breakpoints(), vectorized=True)


def compute_B1_minus(spec: ProblemSpec, q: Quadrature = DEFAULT_Q) -> float:
    """``int_R^inf b1^-``; raises :class:`DivergenceError` when it is infinite."""
    return integrate_improper(
        lambda t: np.maximum(-spec.b1_of(t), 0.0), spec.R, q, el.breakpoints(spec.b1, "t"), vectorized=True
    )


def Pi_from_R(spec: ProblemSpec, t, q: Quadrature = DEFAULT_Q) -> np.ndarray:
    """``int_R^t 1/p`` at the points ``t >= R`` (any order)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < spec.R):
        raise ValueError("points must be >= R")
    flat = t.ravel()
    uniq, inv = np.unique(np.concatenate([[spec.R], flat]), return_inverse=True)
    cum = cumulative(lambda s: 1.0 / spec.p_of(s), uniq, q, spec.p_breakpoints())
    return cum[inv[1:]].reshape(t.shape)


@dataclass(frozen=True)
class B1PlusScreen:
    verdict: str
    slope: float
    T: np.ndarray
    D: np.ndarray
    note: str = ""
    overridden: bool = False


def screen_b1_plus(spec: ProblemSpec, horizon: float | None = None, override: str | None = None) -> B1PlusScreen:
    """Divergence screen for ``D(T) = int_R^T (1/p(t)) int_R^t b1^+(s) ds dt``.

    ``pass`` when the log-log slope of ``D`` over the last decade exceeds 0.1,
    ``fail`` when ``D`` has visibly converged (increments over doubling
    ranges shrink geometrically, or the slope is below 1e-3), otherwise
    ``inconclusive``.
    """
    R = spec.R
    if horizon is None:
        horizon = 1e4 * max(R, 1.0)
    if not horizon > R:
        raise ValueError("horizon must exceed R")
    base = max(R, 1.0)
    t = np.unique(np.concatenate([
        np.linspace(R, horizon, 200_001),
        R + np.geomspace(1e-6 * base, horizon - R, 2001),
    ]))
    bp = spec.b1_of(t)
    inner = np.concatenate([[0.0], np.cumsum(0.5 * (np.maximum(bp[1:], 0) + np.maximum(bp[:-1], 0)) * np.diff(t))])
    integrand = inner / spec.p_of(t)
    D = np.concatenate([[0.0], np.cumsum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(t))])
    T_ladder = base * 2.0 ** np.arange(0, math.floor(math.log2(horizon / base)) + 1)
    T_ladder = T_ladder[T_ladder > R]
    D_ladder = np.interp(T_ladder, t, D)
    slope = math.nan
    lo = horizon / 10.0
    D_lo, D_hi = float(np.interp(max(lo, t[1]), t, D)), float(D[-1])
    if D_lo > 0 and D_hi > 0:
        slope = math.log(D_hi / D_lo) / math.log(horizon / max(lo, t[1]))
    incs = np.diff(D_ladder)
    geometric = incs.size >= 6 and np.all(incs[-5:] >= 0) and np.all(incs[-4:] <= 0.9 * incs[-5:-1] + 1e-300)
    if override in ("pass", "fail"):
        return B1PlusScreen(override, slope, T_ladder, D_ladder, "user override", True)
    if D_hi == 0.0:
        return B1PlusScreen("fail", 0.0, T_ladder, D_ladder, "b1^+ vanishes on the screened range")
    if slope > 0.1:
        return B1PlusScreen("pass", slope, T_ladder, D_ladder, "D(T) still growing over the last decade")
    if geometric or slope < 1e-3:
        return B1PlusScreen("fail", slope, T_ladder, D_ladder, "D(T) converges")
    return B1PlusScreen("inconclusive", slope, T_ladder, D_ladder, "slow growth: cannot decide divergence")


# --------------------------------------------------------------- M_j and (cG)


def compute_Mj(spec: ProblemSpec, j: int, d: float) -> float:
    """``sup_{0 < v <= d} F_j(v)/v``."""
    if j not in (1, 2):
        raise ValueError("j must be 1 or 2")
    if not d > 0:
        raise ValueError("d must be positive")
    F = spec.F1 if j == 1 else spec.F2
    verdict, _, qs = screen_ff2(F, d)
    if verdict.status != "pass":
        raise FF2Error(f"F{j}(v)/v is not bounded near 0 ({verdict.status}: {verdict.note}); supply M{j} manually")
    vmin = d * 2.0 ** -40

    def quot(t, v):
        return el.eval_array(F, {"v": v}) / v

    ext = extremum_on_rect(quot, ((0.0, 0.0), (vmin, d)), "max", refine_rounds=8)
    vg = np.geomspace(vmin, d, 513)
    return float(max(ext.value, np.max(quot(None, vg)), np.max(qs)))


def check_cG(
    spec: ProblemSpec, d: float, k_factor: float = 2.0, *, P: float | None = None, B1_minus: float | None = None,
    M1: float | None = None, rel_tol: float = 1e-9,
) -> MarginRecord:
    """``log(k) / (M1(d) P) - B1^-``, passing when ``>= -tol`` (non-strict inequality)."""
    if not k_factor > 1:
        raise ValueError("k_factor must exceed 1")
    P = compute_P(spec) if P is None else P
    B1_minus = compute_B1_minus(spec) if B1_minus is None else B1_minus
    M1 = compute_Mj(spec, 1, d) if M1 is None else M1
    bound = math.log(k_factor) / (M1 * P)
    margin = bound - B1_minus
    verdict = "pass" if margin >= -_tol(bound, rel_tol) else "fail"
    return MarginRecord("cG", margin, verdict, {"bound": bound, "B1_minus": B1_minus, "M1": M1, "P": P,
                                                "k_factor": k_factor, "d": d})


# ------------------------------------------------------------------ (cconf1)


def _tail_ok(t: np.ndarray, small: np.ndarray, large: np.ndarray, margin: np.ndarray, top: float) -> bool:
    """Either the margin is nondecreasing or ``small/large`` is nonincreasing over ``[top/10, top]``."""
    m = t >= top / 10.0
    if m.sum() < 3:
        return False
    mg = margin[m]
    if np.all(np.diff(mg) >= -1e-9 * np.maximum(1.0, np.abs(mg[1:]))):
        return True
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = small[m] / large[m]
    if not np.all(np.isfinite(ratio)):
        return False
    return bool(np.all(np.diff(ratio) <= 1e-9 * np.maximum(1.0, np.abs(ratio[1:]))))


def check_cconf1(
    spec: ProblemSpec, d: float, n: float, window: float | None = None, *, M2: float | None = None,
    tail_attested: bool = False, rel_tol: float = 1e-9,
) -> MarginRecord:
    """``p(t) >= t^n`` and ``b2(t) <= (n-1)^2/(4 M2(d)) t^(n-2)`` on ``[R, window]`` plus a tail disposition."""
    if not n > 1:
        raise ValueError("n must exceed 1")
    R = spec.R
    window = max(10.0 * R, 100.0) if window is None else window
    if window < R:
        raise ValueError("window must be >= R")
    M2 = compute_Mj(spec, 2, d) if M2 is None else M2
    coef = (n - 1.0) ** 2 / (4.0 * M2)
    bps = [x for x in spec.t_breakpoints() if R <= x <= window]
    start = R if R > 0 else min(1e-3, window)
    t = np.unique(np.concatenate([np.linspace(R, window, 4097), np.geomspace(start, window, 2049), bps]))
    with np.errstate(divide="ignore", over="ignore"):
        tn = np.power(t, n)
        tn2 = coef * np.power(t, n - 2.0)
    p = spec.p_of(t)
    b2 = spec.b2_of(t)
    pm = p - tn
    bm = tn2 - b2
    ip, ib = int(np.argmin(pm)), int(np.argmin(bm))
    tol_p = _tol(max(abs(p[ip]), abs(tn[ip])), rel_tol)
    tol_b = _tol(max(abs(b2[ib]), abs(tn2[ib])) if np.isfinite(tn2[ib]) else 1.0, rel_tol)
    p_ok = pm[ip] >= -tol_p
    b_ok = bm[ib] >= -tol_b
    tail = tail_attested or (_tail_ok(t, tn, p, pm, window) and _tail_ok(t, b2, tn2, bm, window))
    if not (p_ok and b_ok):
        verdict = "fail"
    elif not tail:
        verdict = "inconclusive"
    else:
        verdict = "pass"
    details = {
        "n": n, "d": d, "M2": M2, "window": window, "p_margin": float(pm[ip]), "p_argmin": float(t[ip]),
        "b2_margin": float(bm[ib]), "b2_argmin": float(t[ib]), "p_ok": bool(p_ok), "b2_ok": bool(b_ok),
        "tail": "attested" if tail_attested else
        ("monotone" if tail else "undetermined"),
    }
    return MarginRecord("cconf1", float(min(pm[ip], bm[ib])), verdict, details)


def find_min_n(
    spec: ProblemSpec, d: float, n_range: tuple[float, float] = (1.0 + 1e-9, 40.0), window: float | None = None,
    *, tail_attested: bool = False, grid: int = 400, xtol: float = 1e-11,
) -> float:
    """Smallest ``n`` in ``n_range`` at which (cconf1) passes.

    The admissible set can be a thin interval, so the ``b2`` condition (which
    only improves as ``n`` grows when ``R >= 1``) is located first by scan
    and bisection; the full check is then tried there and, failing that,
    scanned upwards.
    """
    lo, hi = n_range
    if not 1 < lo < hi:
        raise ValueError("n_range must satisfy 1 < lo < hi")
    M2 = compute_Mj(spec, 2, d)

    def rec(n):
        return check_cconf1(spec, d, n, window, M2=M2, tail_attested=tail_attested)

    def ok(n):
        return rec(n).verdict == "pass"

    def b2_ok(n):
        return rec(n).details["b2_ok"]

    def first(pred, a, b):
        ns = np.linspace(a, b, grid)
        hit = next((i for i, n in enumerate(ns) if pred(n)), None)
        if hit is None:
            return None
        if hit == 0:
            return float(ns[0])
        x, y = float(ns[hit - 1]), float(ns[hit])
        while y - x > xtol * max(1.0, y):
            m = 0.5 * (x + y)
            if pred(m):
                y = m
            else:
                x = m
        return y

    nb = first(b2_ok, lo, hi)
    if nb is not None and ok(nb):
        return nb
    n_star = first(ok, lo if nb is None else nb, hi)
    if n_star is None:
        raise NoAdmissibleN(f"(cconf1) fails for every n in [{lo}, {hi}] at d={d}")
    return n_star


def power_u0_bound(beta_exp: float, P: float, B1_minus: float, k_factor: float = 2.0) -> float:
    """Largest admissible ``k u0`` for ``F1(v) = v^beta``: ``(log k / (P B1^-))^(1/(beta-1))``."""
    if not beta_exp > 1:
        raise ValueError("beta_exp must exceed 1")
    if B1_minus < 0 or P <= 0:
        raise ValueError("need P > 0 and B1_minus >= 0")
    if B1_minus == 0:
        return math.inf
    return (math.log(k_factor) / (P * B1_minus)) ** (1.0 / (beta_exp - 1.0))


# ------------------------------------------------------ comparison functions


@dataclass(frozen=True)
class EulerMajorant:
    """``y = t^(-(n-1)/2)`` solving ``t^2 y'' + n t y' + ((n-1)/2)^2 y = 0``."""

    n: float

    @property
    def q(self) -> float:
        return (self.n - 1.0) / 2.0

    def __call__(self, t):
        return np.power(np.asarray(t, dtype=float), -self.q)

    def d1(self, t):
        return -self.q * np.power(np.asarray(t, dtype=float), -self.q - 1.0)

    def d2(self, t):
        return self.q * (self.q + 1.0) * np.power(np.asarray(t, dtype=float), -self.q - 2.0)

    def residual(self, t):
        t = np.asarray(t, dtype=float)
        return t * t * self.d2(t) + self.n * t * self.d1(t) + self.q ** 2 * self(t)


def euler_majorant(n: float) -> EulerMajorant:
    if not n > 1:
        raise ValueError("n must exceed 1")
    return EulerMajorant(float(n))


@dataclass(frozen=True, eq=False)
class GronwallEnvelope:
    """``E(t) = u0 exp(rate (Pi(t) - Pi(R)))`` with ``rate = M1(d) B1^-``."""

    spec: ProblemSpec
    u0: float
    rate: float
    P: float

    @property
    def at_infinity(self) -> float:
        return self.u0 * math.exp(self.rate * self.P)

    def from_Pi(self, pi) -> np.ndarray:
        return self.u0 * np.exp(self.rate * np.asarray(pi, dtype=float))

    def __call__(self, t) -> np.ndarray:
        return self.from_Pi(Pi_from_R(self.spec, t))


def gronwall_envelope(
    spec: ProblemSpec, d: float, u0: float, k_factor: float = 2.0, *, P: float | None = None,
    B1_minus: float | None = None, M1: float | None = None, rel_tol: float = 1e-9,
) -> GronwallEnvelope:
    P = compute_P(spec) if P is None else P
    B1_minus = compute_B1_minus(spec) if B1_minus is None else B1_minus
    M1 = compute_Mj(spec, 1, d) if M1 is None else M1
    cg = check_cG(spec, d, k_factor, P=P, B1_minus=B1_minus, M1=M1, rel_tol=rel_tol)
    if cg.verdict != "pass":
        raise EnvelopeError(f"(cG-) fails at d={d}, k={k_factor} (margin {cg.margin:.3g})")
    if not 0 < u0 <= d / k_factor * (1 + 1e-12):
        raise EnvelopeError(f"u0={u0} outside (0, d/k] = (0, {d / k_factor}]")
    return GronwallEnvelope(spec, float(u0), float(M1 * B1_minus), float(P))


@dataclass(frozen=True, eq=False)
class MinorantBarrier:
    """Approximate principal solution of ``(p w')' = M1 b1^- w`` on ``[R, T]``, scaled to ``w(R) = 1``."""

    nodes: np.ndarray
    values: np.ndarray
    T_trunc: float
    positive: bool
    status: str

    def __call__(self, t) -> np.ndarray:
        return np.interp(t, self.nodes, self.values)


def minorant_barrier(
    spec: ProblemSpec, d: float, T_trunc: float, *, M1: float | None = None, tol: float = 1e-10, points: int = 2001,
) -> MinorantBarrier:
    """Integrate backwards from ``w(T) = 0``, ``p w'(T) = -1`` (the decaying direction) and normalise."""
    R = spec.R
    if not T_trunc > R:
        raise ValueError("T_trunc must exceed R")
    M1 = compute_Mj(spec, 1, d) if M1 is None else M1
    pf = el.compile_scalar(spec.p, ("t",))
    bf = el.compile_scalar(spec.b1, ("t",))
    span = T_trunc - R

    def rhs(tau, y):
        t = T_trunc - tau
        neg = -bf(t)
        return np.array([-y[1] / pf(t), -M1 * (neg if neg > 0 else 0.0) * y[0]])

    out_t = R + np.geomspace(1e-9 * max(R, 1.0), span, points) if R > 0 else np.linspace(R, T_trunc, points)
    out_t = np.unique(np.concatenate([[R], out_t[out_t < T_trunc], [T_trunc]]))
    tau = (T_trunc - out_t)[::-1]
    tau[0] = 0.0
    traj = solve_ivp(rhs, 0.0, [0.0, -1.0], span, tol, t_eval=tau)
    if not traj.ok or traj.nodes.size != tau.size:
        raise QuadratureError(f"backward integration failed: {traj.message}")
    w = traj.states[::-1, 0]
    nodes = out_t
    if not w[0] > 0:
        raise QuadratureError("barrier vanishes at R")
    w = w / w[0]
    positive = bool(np.all(w[:-1] > 0))
    return MinorantBarrier(nodes, w, float(T_trunc), positive, traj.status)


# ------------------------------------------------------------- certificate


@dataclass(frozen=True)
class HalflineCertificate:
    d: float
    k_factor: float
    n: float | None
    P: float | None
    B1_minus: float | None
    M1_d: float | None
    M2_d: float | None
    b1_plus: str
    b1_plus_slope: float
    cG: MarginRecord | None
    cconf1: MarginRecord | None
    verdicts: dict
    notes: tuple[str, ...] = ()

    @property
    def admissible_u0_max(self) -> float:
        return self.d / self.k_factor

    @property
    def passes(self) -> bool:
        return all(self.verdicts.get(k) == "pass" for k in ("P", "b1_minus", "FF2", "cG", "cconf1"))

    @property
    def route(self) -> str:
        return {"pass": "decay", "fail": "bounded"}.get(self.b1_plus, "both")

    def to_dict(self) -> dict:
        return {
            "d": self.d, "k_factor": self.k_factor, "n": self.n, "P": self.P, "B1_minus": self.B1_minus,
            "M1_d": self.M1_d, "M2_d": self.M2_d, "b1_plus": self.b1_plus, "b1_plus_slope": self.b1_plus_slope,
            "cG": None if self.cG is None else self.cG.to_dict(),
            "cconf1": None if self.cconf1 is None else self.cconf1.to_dict(),
            "admissible_u0_max": self.admissible_u0_max, "verdicts": dict(self.verdicts),
            "passes": self.passes, "route": self.route, "notes": list(self.notes),
        }


def certify_halfline(
    spec: ProblemSpec, d: float, *, n: float | None = None, k_factor: float = 2.0, window: float | None = None,
    horizon: float | None = None, tail_attested: bool = False, b1_plus_override: str | None = None,
    q: Quadrature = DEFAULT_Q, rel_tol: float = 1e-9, P: float | None = None, B1_minus: float | None = None,
    b1_screen: B1PlusScreen | None = None,
) -> HalflineCertificate:
    """Run every half-line check at level ``d``; failures become verdicts."""
    verdicts: dict[str, str] = {}
    notes: list[str] = []
    try:
        P = compute_P(spec, q) if P is None else P
        verdicts["P"] = "pass"
    except DivergenceError as exc:
        P = None
        verdicts["P"] = "fail"
        notes.append(f"P diverges: {exc}")
    except QuadratureError as exc:
        P = None
        verdicts["P"] = "inconclusive"
        notes.append(f"P: {exc}")
    try:
        B1_minus = compute_B1_minus(spec, q) if B1_minus is None else B1_minus
        verdicts["b1_minus"] = "pass"
    except DivergenceError as exc:
        B1_minus = None
        verdicts["b1_minus"] = "fail"
        notes.append(f"B1^- diverges: {exc}")
    except QuadratureError as exc:
        B1_minus = None
        verdicts["b1_minus"] = "inconclusive"
        notes.append(f"B1^-: {exc}")
    scr = b1_screen or screen_b1_plus(spec, horizon, b1_plus_override)
    verdicts["b1_plus"] = scr.verdict
    M1 = M2 = None
    try:
        M1 = compute_Mj(spec, 1, d)
        M2 = compute_Mj(spec, 2, d)
        verdicts["FF2"] = "pass"
    except FF2Error as exc:
        verdicts["FF2"] = "fail"
        notes.append(str(exc))
    cg = cc = None
    if P is not None and B1_minus is not None and M1 is not None:
        cg = check_cG(spec, d, k_factor, P=P, B1_minus=B1_minus, M1=M1, rel_tol=rel_tol)
        verdicts["cG"] = cg.verdict
    else:
        verdicts["cG"] = "inconclusive"
    if M2 is not None:
        if n is None:
            try:
                n = find_min_n(spec, d, window=window, tail_attested=tail_attested)
                notes.append(f"n chosen as the smallest admissible value {n:.12g}")
            except NoAdmissibleN as exc:
                notes.append(str(exc))
        if n is not None:
            cc = check_cconf1(spec, d, n, window, M2=M2, tail_attested=tail_attested, rel_tol=rel_tol)
            verdicts["cconf1"] = cc.verdict
        else:
            verdicts["cconf1"] = "fail"
    else:
        verdicts["cconf1"] = "inconclusive"
    return HalflineCertificate(d, k_factor, n, P, B1_minus, M1, M2, scr.verdict, scr.slope, cg, cc, verdicts,
                               tuple(notes))
