"""Index-one / index-zero certificates on cone shells and the multiplicity ladders."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

from . import exprlang as el
from .greens_kernel import GreenKernel
from .numerics import Quadrature, extremum_on_rect, integrate
from .problem_model import Ladder, ProblemSpec

__all__ = [
    "CertRecord", "CertificateReport", "FunctionalBoundError",
    "f_bar", "f_lower", "H_bounds", "check_I1", "check_I0", "evaluate_ladder", "ladder_from_records",
    "certify_tol",
]

# S-label -> required run of certificate kinds on consecutive ladder values
S_PATTERNS = {
    "S1": ("index0", "index1"),
    "S2": ("index1", "index0"),
    "S3": ("index0", "index1", "index0"),
    "S4": ("index1", "index0", "index1"),
    "S5": ("index0", "index1", "index0", "index1"),
    "S6": ("index1", "index0", "index1", "index0"),
}


class FunctionalBoundError(ValueError):
    pass


@dataclass(frozen=True)
class CertRecord:
    rho: float
    kind: str  # index0 | index1
    lhs: float
    rhs: float
    margin: float
    verdict: str  # pass | fail | marginal
    f_value: float
    f_witness: tuple[float, float]
    H_bound: float
    tol: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["f_witness"] = list(self.f_witness)
        return d


@dataclass(frozen=True)
class CertificateReport:
    records: tuple[CertRecord, ...]
    holds: dict[str, bool]
    annuli: tuple[tuple[float, float], ...]
    annulus_kinds: tuple[tuple[str, str], ...] = field(default=())

    @property
    def multiplicity(self) -> int:
        return len(self.annuli)

    @property
    def all_pass(self) -> bool:
        return all(r.verdict == "pass" for r in self.records)

    def to_dict(self) -> dict:
        return {
            "records": [r.to_dict() for r in self.records],
            "holds": dict(self.holds),
            "multiplicity": self.multiplicity,
            "annuli": [list(a) for a in self.annuli],
        }


def certify_tol(rho: float, rel: float = 1e-9) -> float:
    return rel * max(1.0, rho)


def f_bar(spec: ProblemSpec, g: GreenKernel, rho: float):
    """Max of ``f`` over ``[0, R] x [0, rho]``."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    return extremum_on_rect(lambda t, u: spec.f_of(t, u), ((0.0, g.R), (0.0, rho)), "max")


def f_lower(spec: ProblemSpec, g: GreenKernel, rho: float):
    """Min of ``f`` over ``[a, b] x [c rho, rho]``."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    return extremum_on_rect(lambda t, u: spec.f_of(t, u), ((g.a, g.b), (g.cone_c * rho, rho)), "min")


def _weight_integral(spec: ProblemSpec, lo: float, hi: float) -> float:
    w = spec.functional.weight
    if isinstance(w, el.Num):
        return w.value * (hi - lo)
    return integrate(lambda t: el.eval_array(w, {"t": t}), lo, hi, Quadrature(1e-14, 1e-12),
                     el.breakpoints(w, "t"), vectorized=True)


def H_bounds(spec: ProblemSpec, g: GreenKernel, rho: float) -> tuple[float, float]:
    """``(inf, sup)`` of ``H`` over the cone shell ``||u|| = rho``."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    fs = spec.functional
    if fs.bound_mode == "manual":
        lo = el.evaluate(fs.manual_lower, {"rho": rho})
        hi = el.evaluate(fs.manual_upper, {"rho": rho})
        if lo > hi:
            raise FunctionalBoundError(f"manual bounds out of order at rho={rho}: {lo} > {hi}")
        return lo, hi
    if any(c < 0 for c, _ in fs.point_terms):
        raise FunctionalBoundError("auto bounds need nonnegative point coefficients")
    wR = _weight_integral(spec, 0.0, g.R)
    wab = _weight_integral(spec, g.a, g.b)
    if wR < 0 or wab < 0:
        raise FunctionalBoundError("auto bounds need a nonnegative integral weight")
    c = g.cone_c
    arg_hi = sum(ci for ci, _ in fs.point_terms) * rho + rho * wR
    arg_lo = sum(ci for ci, ti in fs.point_terms if g.a <= ti <= g.b) * c * rho + c * rho * wab
    lo = el.evaluate(fs.outer, {"v": arg_lo})
    hi = el.evaluate(fs.outer, {"v": arg_hi})
    if lo > hi + 1e-15 * max(1.0, abs(hi)):
        raise FunctionalBoundError("outer map is not monotone on the shell range")
    return lo, hi


def _verdict(margin: float, tol: float) -> str:
    if margin > tol:
        return "pass"
    if margin >= -tol:
        return "marginal"
    return "fail"


def check_I1(spec: ProblemSpec, g: GreenKernel, rho: float, rel_tol: float = 1e-9) -> CertRecord:
    """``inv_m f_bar + H_sup / alpha < rho``."""
    fb = f_bar(spec, g, rho)
    _, Hu = H_bounds(spec, g, rho)
    lhs = g.inv_m * fb.value + Hu / g.alpha
    tol = certify_tol(rho, rel_tol)
    margin = rho - lhs
    return CertRecord(rho, "index1", lhs, rho, margin, _verdict(margin, tol), fb.value, fb.arg, Hu, tol)


def check_I0(spec: ProblemSpec, g: GreenKernel, rho: float, rel_tol: float = 1e-9) -> CertRecord:
    """``inv_M f_lower + H_inf / alpha > rho``."""
    fl = f_lower(spec, g, rho)
    Hl, _ = H_bounds(spec, g, rho)
    lhs = g.inv_M * fl.value + Hl / g.alpha
    tol = certify_tol(rho, rel_tol)
    margin = lhs - rho
    return CertRecord(rho, "index0", lhs, rho, margin, _verdict(margin, tol), fl.value, fl.arg, Hl, tol)


def ladder_from_records(records) -> CertificateReport:
    """Ladder conclusions from per-value records only."""
    records = tuple(records)
    ok = [r.verdict == "pass" for r in records]
    kinds = [r.kind for r in records]
    holds = {}
    for label, pat in S_PATTERNS.items():
        L = len(pat)
        holds[label] = any(
            all(ok[i + j] for j in range(L)) and tuple(kinds[i:i + L]) == pat
            for i in range(len(records) - L + 1)
        )
    annuli, ak = [], []
    for r0, r1 in zip(records, records[1:]):
        if r0.verdict == "pass" and r1.verdict == "pass" and r0.kind != r1.kind:
            annuli.append((r0.rho, r1.rho))
            ak.append((r0.kind, r1.kind))
    return CertificateReport(records, holds, tuple(annuli), tuple(ak))


def evaluate_ladder(spec: ProblemSpec, g: GreenKernel, ladder: Ladder, rel_tol: float = 1e-9) -> CertificateReport:
    recs = []
    for rho, target in zip(ladder.values, ladder.targets):
        check = check_I0 if target == "index0" else check_I1
        recs.append(check(spec, g, float(rho), rel_tol))
    return ladder_from_records(recs)

