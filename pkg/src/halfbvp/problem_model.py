"""Problem specification, config loading and numerical screening of the standing assumptions."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from . import exprlang as el

__all__ = [
    "ConfigError", "FunctionalSpec", "ProblemSpec", "Ladder", "HalflineConfig", "Tolerances",
    "RunConfig", "ScreenGrid", "Verdict", "AssumptionReport", "PROFILES",
    "load_config", "load_spec", "validate", "screen_ff2",
]


class ConfigError(ValueError):
    """Schema or expression error in a config, tagged with the offending key path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class FunctionalSpec:
    """``H[u] = outer(sum c_i u(t_i) + int_0^R weight(t) u(t) dt)``."""

    point_terms: tuple[tuple[float, float], ...] = ()
    weight: el.Expr = el.Num(0.0)
    outer: el.Expr = el.Var("v")
    bound_mode: str = "auto"
    manual_lower: el.Expr | None = None
    manual_upper: el.Expr | None = None

    @property
    def is_zero(self) -> bool:
        return not self.point_terms and self.weight == el.Num(0.0)


@dataclass(frozen=True)
class ProblemSpec:
    p: el.Expr
    f: el.Expr
    alpha: float
    beta: float
    R: float
    a: float
    b: float
    b1: el.Expr
    b2: el.Expr
    F1: el.Expr
    F2: el.Expr
    functional: FunctionalSpec = field(default_factory=FunctionalSpec)

    @property
    def cone_interval(self) -> tuple[float, float]:
        return (self.a, self.b)

    # vectorised evaluation helpers
    def p_of(self, t) -> np.ndarray:
        return el.eval_array(self.p, {"t": t})

    def f_of(self, t, u) -> np.ndarray:
        return el.eval_array(self.f, {"t": t, "u": u})

    def b1_of(self, t) -> np.ndarray:
        return el.eval_array(self.b1, {"t": t})

    def b2_of(self, t) -> np.ndarray:
        return el.eval_array(self.b2, {"t": t})

    def F_of(self, j: int, v) -> np.ndarray:
        return el.eval_array(self.F1 if j == 1 else self.F2, {"v": v})

    def p_breakpoints(self) -> list[float]:
        return el.breakpoints(self.p, "t")

    def t_breakpoints(self) -> list[float]:
        pts: set[float] = set()
        for e in (self.p, self.f, self.b1, self.b2, self.functional.weight):
            pts.update(el.breakpoints(e, "t"))
        return sorted(pts)


@dataclass(frozen=True)
class Ladder:
    values: tuple[float, ...] = ()
    targets: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if len(self.values) != len(self.targets):
            raise ValueError("ladder values and targets differ in length")
        if any(v <= 0 for v in self.values):
            raise ValueError("ladder values must be positive")
        if any(x >= y for x, y in zip(self.values, self.values[1:])):
            raise ValueError("ladder values must be strictly increasing")
        if any(t not in ("index0", "index1") for t in self.targets):
            raise ValueError("ladder targets must be 'index0' or 'index1'")


@dataclass(frozen=True)
class HalflineConfig:
    d: tuple[float, ...] | None = None  # one per annulus; default k_factor * upper ladder value
    n: float | None = None  # None: search the smallest admissible n
    k_factor: float = 2.0
    T_trunc: float | None = None
    horizon: float | None = None
    window: float | None = None
    tail_attested: bool = False
    b1_plus_override: str | None = None


@dataclass(frozen=True)
class Tolerances:
    quad_rel: float = 1e-11
    quad_abs: float = 1e-13
    ivp: float = 1e-10
    solver: float = 1e-12
    certify_rel: float = 1e-9
    glue: float = 1e-6
    grid_N: int = 513
    damping: float = 0.5
    max_iter: int = 400
    screen_points: int = 256
    T_screen: float | None = None
    u_screen: float | None = None


PROFILES: dict[str, dict[str, Any]] = {
    "fast": {"quad_rel": 1e-9, "quad_abs": 1e-11, "ivp": 1e-8, "solver": 1e-10, "grid_N": 257},
    "default": {},
    "tight": {"quad_rel": 1e-12, "quad_abs": 1e-14, "ivp": 1e-12, "solver": 1e-13, "grid_N": 1025},
}


@dataclass(frozen=True)
class RunConfig:
    spec: ProblemSpec
    ladder: Ladder
    halfline: HalflineConfig
    tolerances: Tolerances
    parameters: Mapping[str, float]
    raw: Mapping[str, Any]
    config_hash: str

    def with_parameters(self, **params: float) -> "RunConfig":
        merged = dict(self.raw)
        merged["parameters"] = {**dict(self.raw.get("parameters", {})), **params}
        return load_config(merged, tolerances=self.tolerances)


# ------------------------------------------------------------------ loading

_SECTIONS = {
    "problem": {"p", "f", "alpha", "beta", "R", "a", "b"},
    "bounds": {"b1", "b2", "F1", "F2"},
    "functional": {"point_terms", "weight", "outer", "bound_mode", "manual_lower", "manual_upper"},
    "ladder": {"values", "targets"},
    "halfline": {"d", "n", "k_factor", "T_trunc", "horizon", "window", "tail_attested", "b1_plus_override"},
    "tolerances": set(Tolerances.__dataclass_fields__),
}
_TOP = set(_SECTIONS) | {"parameters", "definitions", "name", "description"}


class _Loader:
    def __init__(self, raw: Mapping[str, Any]):
        self.raw = raw
        params = raw.get("parameters", {}) or {}
        if not isinstance(params, Mapping):
            raise ConfigError("parameters", "must be an object")
        self.params: dict[str, float] = {}
        for k, v in params.items():
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise ConfigError(f"parameters.{k}", "must be a finite number")
            self.params[k] = float(v)
        self.defs: dict[str, el.Expr] = {}
        defs = raw.get("definitions", {}) or {}
        if not isinstance(defs, Mapping):
            raise ConfigError("definitions", "must be an object")
        for name, src in defs.items():
            # definitions are written in t (first), may use u, v and earlier definitions
            self.defs[name] = self._parse(f"definitions.{name}", src, ("t", "u", "v"))

    def _parse(self, path: str, src: Any, free: tuple[str, ...]) -> el.Expr:
        if isinstance(src, (int, float)) and not isinstance(src, bool):
            return el.Num(float(src))
        if not isinstance(src, str):
            raise ConfigError(path, "expected an expression string or number")
        names = list(free) + [k for k in self.params if k not in free] + [k for k in self.defs if k not in free]
        try:
            e = el.parse(src, names)
            e = el.substitute(e, self.defs)
            e = el.substitute(e, {k: el.Num(v) for k, v in self.params.items()})
        except el.ExprError as exc:
            raise ConfigError(path, str(exc)) from exc
        extra = el.free_variables(e) - set(free)
        if extra:
            raise ConfigError(path, f"uses variable(s) {sorted(extra)} not allowed here (allowed: {list(free)})")
        return e

    def expr(self, section: str, key: str, free: tuple[str, ...], default: Any = None) -> el.Expr | None:
        sec = self.raw.get(section, {}) or {}
        if key not in sec:
            if default is None:
                raise ConfigError(f"{section}.{key}", "missing required key")
            src = default
        else:
            src = sec[key]
        return self._parse(f"{section}.{key}", src, free)

    def scalar(self, section: str, key: str, default: Any = ..., path: str | None = None) -> float:
        sec = self.raw.get(section, {}) or {}
        path = path or f"{section}.{key}"
        if key not in sec or sec[key] is None:
            if default is ...:
                raise ConfigError(path, "missing required key")
            return default
        return self.number(path, sec[key])

    def number(self, path: str, v: Any) -> float:
        if isinstance(v, bool):
            raise ConfigError(path, "expected a number")
        if isinstance(v, (int, float)):
            x = float(v)
        elif isinstance(v, str):
            e = self._parse(path, v, ())
            try:
                x = el.evaluate(e, {})
            except el.ExprError as exc:
                raise ConfigError(path, str(exc)) from exc
        else:
            raise ConfigError(path, "expected a number or a constant expression")
        if not math.isfinite(x):
            raise ConfigError(path, "must be finite")
        return x


def _read(source: Any) -> dict:
    if isinstance(source, Mapping):
        return json.loads(json.dumps(source))  # deep copy, JSON types only
    path = Path(source)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    return data


def load_config(source: Any, profile: str = "default", tolerances: Tolerances | None = None) -> RunConfig:
    """Load a JSON config (path or already-parsed mapping) into a :class:`RunConfig`."""
    raw = _read(source)
    for key in raw:
        if key not in _TOP:
            raise ConfigError(key, "unknown top-level key")
    for sec, allowed in _SECTIONS.items():
        body = raw.get(sec, {})
        if body is None:
            continue
        if not isinstance(body, Mapping):
            raise ConfigError(sec, "must be an object")
        for key in body:
            if key not in allowed:
                raise ConfigError(f"{sec}.{key}", "unknown key")
    if "problem" not in raw:
        raise ConfigError("problem", "missing required section")
    ld = _Loader(raw)

    R = ld.scalar("problem", "R")
    spec = ProblemSpec(
        p=ld.expr("problem", "p", ("t",)),
        f=ld.expr("problem", "f", ("t", "u")),
        alpha=ld.scalar("problem", "alpha"),
        beta=ld.scalar("problem", "beta"),
        R=R,
        a=ld.scalar("problem", "a"),
        b=ld.scalar("problem", "b"),
        b1=ld.expr("bounds", "b1", ("t",)),
        b2=ld.expr("bounds", "b2", ("t",)),
        F1=ld.expr("bounds", "F1", ("v",)),
        F2=ld.expr("bounds", "F2", ("v",)),
        functional=_load_functional(ld),
    )

    lad = raw.get("ladder", {}) or {}
    values = tuple(ld.number(f"ladder.values[{i}]", v) for i, v in enumerate(lad.get("values", [])))
    targets = tuple(lad.get("targets", []))
    try:
        ladder = Ladder(values, targets)
    except ValueError as exc:
        raise ConfigError("ladder", str(exc)) from exc

    hl = raw.get("halfline", {}) or {}
    d = hl.get("d")
    if d is not None:
        d_list = d if isinstance(d, list) else [d]
        d = tuple(ld.number(f"halfline.d[{i}]", x) for i, x in enumerate(d_list))
    override = hl.get("b1_plus_override")
    if override not in (None, "pass", "fail"):
        raise ConfigError("halfline.b1_plus_override", "must be 'pass', 'fail' or null")
    tail_attested = hl.get("tail_attested", False)
    if not isinstance(tail_attested, bool):
        raise ConfigError("halfline.tail_attested", "must be a boolean")
    halfline = HalflineConfig(
        d=d,
        n=ld.scalar("halfline", "n", None),
        k_factor=ld.scalar("halfline", "k_factor", 2.0),
        T_trunc=ld.scalar("halfline", "T_trunc", None),
        horizon=ld.scalar("halfline", "horizon", None),
        window=ld.scalar("halfline", "window", None),
        tail_attested=tail_attested,
        b1_plus_override=override,
    )
    if halfline.k_factor <= 1:
        raise ConfigError("halfline.k_factor", "must exceed 1")

    if tolerances is None:
        if profile not in PROFILES:
            raise ConfigError("tol-profile", f"unknown profile {profile!r}")
        tolerances = Tolerances(**PROFILES[profile])
        tol_sec = raw.get("tolerances", {}) or {}
        updates = {}
        for key, v in tol_sec.items():
            ftype = Tolerances.__dataclass_fields__[key].type
            x = ld.number(f"tolerances.{key}", v)
            updates[key] = int(x) if ftype == "int" else x
        tolerances = replace(tolerances, **updates)

    digest = hashlib.sha256(json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()).hexdigest()
    return RunConfig(spec, ladder, halfline, tolerances, dict(ld.params), raw, digest)


def _load_functional(ld: _Loader) -> FunctionalSpec:
    sec = ld.raw.get("functional", {}) or {}
    terms = []
    for i, term in enumerate(sec.get("point_terms", []) or []):
        path = f"functional.point_terms[{i}]"
        if not isinstance(term, (list, tuple)) or len(term) != 2:
            raise ConfigError(path, "expected [coefficient, node]")
        terms.append((ld.number(path + "[0]", term[0]), ld.number(path + "[1]", term[1])))
    mode = sec.get("bound_mode", "auto")
    if mode not in ("auto", "manual"):
        raise ConfigError("functional.bound_mode", "must be 'auto' or 'manual'")
    lower = ld.expr("functional", "manual_lower", ("rho",), "0") if "manual_lower" in sec else None
    upper = ld.expr("functional", "manual_upper", ("rho",), "0") if "manual_upper" in sec else None
    if mode == "manual" and (lower is None or upper is None):
        raise ConfigError("functional.manual_lower", "manual bound mode needs manual_lower and manual_upper")
    return FunctionalSpec(
        point_terms=tuple(terms),
        weight=ld.expr("functional", "weight", ("t",), "0"),
        outer=ld.expr("functional", "outer", ("v",), "v"),
        bound_mode=mode,
        manual_lower=lower,
        manual_upper=upper,
    )


def load_spec(source: Any) -> ProblemSpec:
    return load_config(source).spec


# ---------------------------------------------------------------- screening


@dataclass(frozen=True)
class ScreenGrid:
    points: int = 256
    T_screen: float | None = None
    u_screen: float | None = None

    def resolved(self, spec: ProblemSpec, ladder: Ladder | None = None) -> "ScreenGrid":
        T = self.T_screen if self.T_screen is not None else max(10.0 * spec.R, 100.0)
        if self.u_screen is not None:
            U = self.u_screen
        elif ladder is not None and ladder.values:
            U = 2.0 * max(ladder.values)
        else:
            U = 10.0
        return ScreenGrid(self.points, T, U)


@dataclass(frozen=True)
class Verdict:
    status: str  # pass | fail | inconclusive
    witness: tuple[float, ...] | None = None
    magnitude: float = 0.0
    note: str = ""

    def __post_init__(self) -> None:
        if self.status == "fail" and self.witness is None:
            raise ValueError("a failing verdict needs a witness")

    def to_dict(self) -> dict:
        return {"status": self.status, "witness": None if self.witness is None else list(self.witness),
                "magnitude": self.magnitude, "note": self.note}


@dataclass(frozen=True)
class AssumptionReport:
    verdicts: dict[str, Verdict]
    grid: dict[str, float]

    @property
    def status(self) -> str:
        st = {v.status for v in self.verdicts.values()}
        return "fail" if "fail" in st else "inconclusive" if "inconclusive" in st else "pass"

    def to_dict(self) -> dict:
        return {"status": self.status, "grid": dict(self.grid),
                "verdicts": {k: v.to_dict() for k, v in self.verdicts.items()}}


def _grid(lo: float, hi: float, n: int, extra=()) -> np.ndarray:
    pts = np.linspace(lo, hi, n)
    ext = [x for x in extra if lo <= x <= hi]
    if ext:
        # breakpoints and their immediate right neighbours
        ext = ext + [np.nextafter(x, math.inf) for x in ext if x < hi]
    return np.unique(np.concatenate([pts, np.asarray(ext, dtype=float)]))


def _sign_check(values: np.ndarray, where: tuple[np.ndarray, ...], tol: float, want: str) -> Verdict:
    """``want`` is 'nonneg' (values >= -tol) or 'pos' (values > 0)."""
    if want == "pos":
        bad = ~(values > 0.0)
    else:
        bad = values < -tol
    if not np.any(bad):
        return Verdict("pass", magnitude=float(np.min(values)) if values.size else 0.0)
    k = int(np.argmin(values))
    return Verdict("fail", tuple(float(w[k]) for w in where), float(values[k]))


def screen_ff2(F: el.Expr, d: float, levels: int = 40) -> tuple[Verdict, np.ndarray, np.ndarray]:
    """Boundedness screen of ``F(v)/v`` on ``v = d 2^-k``, ``k = 0..levels``."""
    v = d * 2.0 ** -np.arange(levels + 1, dtype=float)
    q = el.eval_array(F, {"v": v}) / v
    if not np.all(np.isfinite(q)):
        k = int(np.flatnonzero(~np.isfinite(q))[0])
        return Verdict("fail", (float(v[k]), float(q[k])), math.inf, "non-finite quotient"), v, q
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = q[1:] / q[:-1]
    tail = ratios[-10:]
    if np.all(q[-11:] > 0) and np.all(tail >= 1.05):
        return Verdict("fail", (float(v[-1]), float(q[-1])), float(q[-1]), "quotient grows geometrically as v -> 0"), v, q
    if q[-1] > q[-2] * (1.0 + 1e-9) and q[-1] > 0:
        return Verdict("inconclusive", (float(v[-1]), float(q[-1])), float(q[-1]), "quotient still growing at the last level"), v, q
    return Verdict("pass", magnitude=float(np.max(q))), v, q


def validate(spec: ProblemSpec, screen: ScreenGrid | None = None, ladder: Ladder | None = None) -> AssumptionReport:
    """Screen the standing assumptions on sampling grids; failures are verdicts, not errors."""
    g = (screen or ScreenGrid()).resolved(spec, ladder)
    n, T, U = g.points, g.T_screen, g.u_screen
    bps = spec.t_breakpoints()
    out: dict[str, Verdict] = {}

    ok = spec.alpha > 0 and spec.beta >= 0 and 0 <= spec.a < spec.b <= spec.R and (spec.beta > 0 or spec.a > 0)
    out["parameters"] = Verdict("pass") if ok else Verdict(
        "fail", (spec.alpha, spec.beta, spec.a, spec.b, spec.R), 0.0,
        "need alpha > 0, beta >= 0, 0 <= a < b <= R, and a > 0 when beta = 0",
    )

    def guarded(name, fn):
        try:
            out[name] = fn()
        except (el.ExprError, ArithmeticError) as exc:
            sub = getattr(exc, "subexpr", None)
            out[name] = Verdict("fail", (math.nan,), math.nan, f"evaluation error: {exc} ({sub})")

    tt = _grid(0.0, T, n, bps)
    guarded("p_positive", lambda: _sign_check(spec.p_of(tt), (tt,), 0.0, "pos"))

    tc = _grid(0.0, spec.R, n, bps)
    uc = np.linspace(0.0, U, n)
    TC, UC = np.meshgrid(tc, uc, indexing="ij")
    TC, UC = TC.ravel(), UC.ravel()
    guarded("f_nonnegative", lambda: _sign_check(spec.f_of(TC, UC), (TC, UC), 0.0, "nonneg"))

    def f_zero():
        vals = np.abs(spec.f_of(tt, np.zeros_like(tt)))
        k = int(np.argmax(vals))
        if vals[k] <= 1e-12:
            return Verdict("pass", magnitude=float(vals[k]))
        return Verdict("fail", (float(tt[k]), 0.0), float(vals[k]), "f(t, 0) != 0")
    guarded("f_zero_at_zero", f_zero)

    th = _grid(spec.R, T, n, bps)
    guarded("b2_nonnegative", lambda: _sign_check(spec.b2_of(th), (th,), 0.0, "nonneg"))

    vv = np.linspace(0.0, U, n)
    for j in (1, 2):
        def fj(j=j):
            F = spec.F_of(j, vv)
            if abs(F[0]) > 1e-14:
                return Verdict("fail", (0.0,), float(F[0]), f"F{j}(0) != 0")
            if not np.all(F[1:] > 0):
                k = 1 + int(np.argmin(F[1:] > 0))
                return Verdict("fail", (float(vv[k]),), float(F[k]), f"F{j}(v) must be positive for v > 0")
            dF = np.diff(F)
            if np.any(dF < -1e-12 * np.maximum(1.0, np.abs(F[1:]))):
                k = int(np.argmin(dF))
                return Verdict("fail", (float(vv[k]), float(vv[k + 1])), float(dF[k]), f"F{j} decreases")
            return Verdict("pass")
        guarded(f"F{j}_admissible", fj)
        guarded(f"FF2_F{j}", lambda j=j: screen_ff2(spec.F1 if j == 1 else spec.F2, U)[0])

    TH, VH = np.meshgrid(th, vv, indexing="ij")
    TH, VH = TH.ravel(), VH.ravel()

    def sandwich():
        f = spec.f_of(TH, VH)
        lo = spec.b1_of(TH) * spec.F_of(1, VH)
        hi = spec.b2_of(TH) * spec.F_of(2, VH)
        scale = 1e-12 * np.maximum(1.0, np.abs(f))
        gap_lo = f - lo  # must be >= 0
        gap_hi = hi - f
        worst = np.minimum(gap_lo + scale, gap_hi + scale)
        k = int(np.argmin(worst))
        if worst[k] >= 0:
            return Verdict("pass", magnitude=float(worst[k]))
        side = "lower" if gap_lo[k] < gap_hi[k] else "upper"
        return Verdict("fail", (float(TH[k]), float(VH[k])), float(min(gap_lo[k], gap_hi[k])), f"{side} bound violated")
    guarded("sandwich_FF1", sandwich)

    def functional():
        fs = spec.functional
        bad = [(c, x) for c, x in fs.point_terms if c < 0 or not 0 <= x <= spec.R]
        if bad:
            return Verdict("fail", bad[0], bad[0][0], "point terms need c >= 0 and nodes in [0, R]")
        w = el.eval_array(fs.weight, {"t": tc})
        if np.any(w < 0):
            k = int(np.argmin(w))
            return Verdict("fail", (float(tc[k]),), float(w[k]), "integral weight must be >= 0")
        if fs.bound_mode == "manual":
            return Verdict("pass", note="manual bounds: outer map not screened")
        top = 2.0 * U * (sum(c for c, _ in fs.point_terms) + float(np.sum(0.5 * (w[1:] + w[:-1]) * np.diff(tc))) + 1.0)
        vo = np.linspace(0.0, top, n)
        o = el.eval_array(fs.outer, {"v": vo})
        if abs(o[0]) > 1e-14:
            return Verdict("fail", (0.0,), float(o[0]), "outer(0) != 0")
        do = np.diff(o)
        if np.any(do < -1e-12 * np.maximum(1.0, np.abs(o[1:]))):
            k = int(np.argmin(do))
            return Verdict("fail", (float(vo[k]),), float(do[k]), "outer map decreases")
        return Verdict("pass")
    guarded("functional", functional)

    return AssumptionReport(out, {"points": float(n), "T_screen": float(T), "u_screen": float(U)})
