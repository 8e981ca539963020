"""End-to-end runs: validate, certify, solve on both pieces, glue, report; plus parameter sweeps."""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from . import __version__, _kernels
from . import greens_kernel as gk
from .compact_certificates import CertificateReport, evaluate_ladder
from .compact_solver import (
    ConvergedOutsideAnnulus, NonConvergence, SolutionCurve, SolverOptions, solve_in_annulus, verify_solution,
)
from .halfline_certificates import HalflineCertificate, certify_halfline, screen_b1_plus
from .halfline_solver import HalflineRun, PreconditionError, integrate_halfline
from .numerics import Quadrature
from .problem_model import RunConfig, ScreenGrid, validate

__all__ = [
    "GlobalSolution", "JunctionMismatch", "RunReport", "glue", "run_pipeline", "sweep", "write_sweep_csv",
    "write_curve_csv", "EXIT_OK", "EXIT_CERT_FAIL", "EXIT_NONCONVERGENCE", "EXIT_CONFIG",
]

EXIT_OK, EXIT_CERT_FAIL, EXIT_NONCONVERGENCE, EXIT_CONFIG = 0, 2, 3, 4


class JunctionMismatch(ValueError):
    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass
class GlobalSolution:
    nodes: np.ndarray
    values: np.ndarray
    flux: np.ndarray
    junction: dict
    annulus: tuple[float, float] | None
    route: str  # decay | bounded | both
    compact: SolutionCurve
    halfline: HalflineRun

    @property
    def sup(self) -> float:
        return float(np.max(self.values))

    def summary(self) -> dict:
        return {
            "annulus": None if self.annulus is None else list(self.annulus), "route": self.route,
            "u_at_R": float(self.compact.values[-1]), "sup": self.sup, "junction": dict(self.junction),
            "compact": dict(self.compact.diagnostics), "halfline": self.halfline.summary(),
        }


def _slope_left(t, u) -> float:
    h1, h2 = t[-1] - t[-2], t[-2] - t[-3]
    if abs(h1 - h2) > 1e-9 * h1:
        return float((u[-1] - u[-2]) / h1)
    return float((3 * u[-1] - 4 * u[-2] + u[-3]) / (2 * h1))


def _slope_right(t, u) -> float:
    h1, h2 = t[1] - t[0], t[2] - t[1]
    if abs(h1 - h2) > 1e-9 * h1:
        return float((u[1] - u[0]) / h1)
    return float((-3 * u[0] + 4 * u[1] - u[2]) / (2 * h1))


def glue(u_compact: SolutionCurve, run: HalflineRun, tol: float = 1e-6, annulus=None, route: str = "") -> GlobalSolution:
    """Concatenate at ``R`` after checking value continuity and both one-sided slopes."""
    tc, uc = u_compact.nodes, u_compact.values
    th, uh = run.curve.nodes, run.curve.values
    if abs(th[0] - tc[-1]) > 1e-12 * max(1.0, abs(tc[-1])):
        raise JunctionMismatch("the pieces do not meet at the same point", {"R_compact": float(tc[-1]),
                                                                           "R_halfline": float(th[0])})
    diag = {
        "value_jump": float(abs(uc[-1] - run.u0)),
        "start_jump": float(abs(uh[0] - run.u0)),
        "slope_left": abs(_slope_left(tc, uc)),
        "slope_right": abs(_slope_right(th, uh)),
        "tol": tol,
    }
    bad = [k for k in ("value_jump", "start_jump", "slope_left", "slope_right") if diag[k] > tol]
    if bad:
        raise JunctionMismatch(f"junction mismatch at R: {', '.join(f'{k}={diag[k]:.3g}' for k in bad)}", diag)
    nodes = np.concatenate([tc, th[1:]])
    values = np.concatenate([uc, uh[1:]])
    flux = np.concatenate([u_compact.flux, run.curve.flux[1:]])
    return GlobalSolution(nodes, values, flux, diag, annulus, route, u_compact, run)


# ----------------------------------------------------------------- report


@dataclass
class RunReport:
    data: dict
    solutions: list[GlobalSolution] = field(default_factory=list)
    exit_code: int = EXIT_OK

    def to_json(self) -> str:
        return json.dumps(_clean(self.data), indent=2, sort_keys=True, allow_nan=False)


def _clean(x: Any) -> Any:
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_clean(v) for v in x.tolist()]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else ("nan" if math.isnan(x) else ("inf" if x > 0 else "-inf"))
    return x


def _quad(rc: RunConfig) -> Quadrature:
    return Quadrature(rc.tolerances.quad_abs, rc.tolerances.quad_rel)


def _options(rc: RunConfig) -> SolverOptions:
    t = rc.tolerances
    return SolverOptions(N=t.grid_N, damping=t.damping, max_iter=t.max_iter, tol=t.solver)


def _d_for(rc: RunConfig, i: int, hi: float) -> float:
    hl = rc.halfline
    if hl.d is not None:
        return float(hl.d[min(i, len(hl.d) - 1)])
    return hl.k_factor * hi


def _route(verdict: str) -> str:
    return {"pass": "decay", "fail": "bounded"}.get(verdict, "both")


def _header(rc: RunConfig) -> dict:
    return {
        "tool": "halfbvp", "version": __version__, "backend": _kernels.BACKEND, "config_hash": rc.config_hash,
        "parameters": dict(rc.parameters), "tolerances": asdict(rc.tolerances), "halfline_config": asdict(rc.halfline),
        "name": rc.raw.get("name", ""),
    }


def certify_compact(rc: RunConfig):
    g = gk.build(rc.spec, _quad(rc))
    kernel = {"inv_m": g.inv_m, "inv_M": g.inv_M, "cone_c": g.cone_c, "gamma": g.gamma,
              "inv_m_arg": g.inv_m_arg, "inv_M_arg": g.inv_M_arg}
    if not rc.ladder.values:
        return g, kernel, CertificateReport((), {}, ())
    return g, kernel, evaluate_ladder(rc.spec, g, rc.ladder, rc.tolerances.certify_rel)


def certify_halfline_all(rc: RunConfig, annuli: Sequence[tuple[float, float]], screen=None) -> list[HalflineCertificate]:
    hl, tol = rc.halfline, rc.tolerances
    screen = screen or screen_b1_plus(rc.spec, hl.horizon, hl.b1_plus_override)
    ds = [_d_for(rc, i, hi) for i, (_, hi) in enumerate(annuli)]
    if not annuli and hl.d is not None:
        ds = list(hl.d)
    return [
        certify_halfline(rc.spec, d, n=hl.n, k_factor=hl.k_factor, window=hl.window or tol.T_screen,
                         tail_attested=hl.tail_attested, q=_quad(rc), rel_tol=tol.certify_rel, b1_screen=screen)
        for d in ds
    ]


def run_pipeline(rc: RunConfig, out_dir: str | Path | None = None) -> RunReport:
    """The whole chain; only validation failures stop it early."""
    spec, tol = rc.spec, rc.tolerances
    data: dict[str, Any] = _header(rc)
    stages: dict[str, str] = {}
    data["stages"] = stages
    failing = nonconv = False

    screen = ScreenGrid(tol.screen_points, tol.T_screen, tol.u_screen)
    assumptions = validate(spec, screen, rc.ladder)
    data["assumptions"] = assumptions.to_dict()
    stages["validate"] = assumptions.status
    if assumptions.status == "fail":
        data["solutions"] = []
        return RunReport(data, [], EXIT_CERT_FAIL)

    try:
        g, kernel, cert = certify_compact(rc)
    except (gk.KernelError, ArithmeticError) as exc:
        stages["kernel"] = f"error: {exc}"
        data["solutions"] = []
        return RunReport(data, [], EXIT_NONCONVERGENCE)
    stages["kernel"] = "ok"
    data["kernel"] = kernel
    data["compact_certificates"] = cert.to_dict()
    stages["ladder"] = "pass" if cert.all_pass else "fail"
    failing |= not cert.all_pass

    hl = rc.halfline
    b1 = screen_b1_plus(spec, hl.horizon, hl.b1_plus_override)
    data["b1_plus_screen"] = {"verdict": b1.verdict, "slope": b1.slope, "note": b1.note, "overridden": b1.overridden,
                              "route": _route(b1.verdict)}
    hcerts = certify_halfline_all(rc, cert.annuli, b1)
    data["halfline_certificates"] = [c.to_dict() for c in hcerts]
    stages["halfline_certificates"] = "pass" if all(c.passes for c in hcerts) else "fail"
    failing |= not all(c.passes for c in hcerts)

    solutions: list[GlobalSolution] = []
    items: list[dict] = []
    for i, (annulus, hc) in enumerate(zip(cert.annuli, hcerts)):
        item: dict[str, Any] = {"annulus": list(annulus), "d": hc.d}
        items.append(item)
        try:
            curve = solve_in_annulus(spec, g, *annulus, _options(rc))
        except (NonConvergence, ConvergedOutsideAnnulus) as exc:
            item["status"] = f"compact_nonconvergence: {exc}"
            nonconv = True
            continue
        curve.diagnostics["verify"] = verify_solution(spec, g, curve)
        u0 = float(curve.values[-1])
        item["u0"] = u0
        if not hc.passes:
            item["status"] = "halfline_certificate_fail"
            continue
        try:
            run = integrate_halfline(spec, u0, hc, hl.T_trunc, tol.ivp)
        except PreconditionError as exc:
            item["status"] = f"precondition: {exc}"
            failing = True
            continue
        except ArithmeticError as exc:
            item["status"] = f"halfline_failure: {exc}"
            nonconv = True
            continue
        if not run.completed:
            item["status"] = f"halfline_hit_zero at t={run.hit_zero_at}"
            item["halfline"] = run.summary()
            failing = True
            continue
        try:
            sol = glue(curve, run, tol.glue, annulus, _route(b1.verdict))
        except JunctionMismatch as exc:
            item["status"] = f"junction_mismatch: {exc}"
            item["junction"] = exc.diagnostics
            nonconv = True
            continue
        item["status"] = "accepted"
        item["solution_index"] = len(solutions)
        item.update(sol.summary())
        solutions.append(sol)
    data["solutions"] = items
    data["n_solutions"] = len(solutions)
    stages["solve"] = "ok" if all(it.get("status") == "accepted" for it in items) else "partial"

    code = EXIT_NONCONVERGENCE if nonconv else EXIT_CERT_FAIL if failing else EXIT_OK
    data["exit_code"] = code
    report = RunReport(data, solutions, code)
    if out_dir is not None:
        write_outputs(report, out_dir)
    return report


def write_curve_csv(path: str | Path, t, u, flux) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "u", "p_u_prime"])
        for row in zip(t, u, flux):
            w.writerow([repr(float(x)) for x in row])


def write_outputs(report: RunReport, out_dir: str | Path) -> None:
    out = Path(out_dir)
    (out / "curves").mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json() + "\n")
    for i, s in enumerate(report.solutions):
        write_curve_csv(out / "curves" / f"solution_{i}.csv", s.nodes, s.values, s.flux)


# ------------------------------------------------------------------ sweeps


def _grid_points(grid: Mapping[str, Sequence[float]]) -> list[dict[str, float]]:
    names = list(grid)
    if not names or any(len(grid[n]) == 0 for n in names):
        return []
    return [dict(zip(names, map(float, combo))) for combo in itertools.product(*(grid[n] for n in names))]


def _sweep_row(args) -> dict:
    rc, point, solve = args
    row: dict[str, Any] = dict(point)
    try:
        rcp = rc.with_parameters(**point)
    except ValueError as exc:
        row["status"] = f"config_error: {exc}"
        return row
    try:
        if solve:
            rep = run_pipeline(rcp)
            d = rep.data
            row["status"] = {0: "ok", 2: "certificate_fail", 3: "nonconvergence"}[rep.exit_code]
            row["n_solutions"] = d.get("n_solutions", 0)
            certs = d.get("compact_certificates", {})
            hcs = d.get("halfline_certificates", [])
            b1 = d.get("b1_plus_screen", {}).get("verdict", "")
        else:
            _, _, cr = certify_compact(rcp)
            certs = cr.to_dict()
            hcs = [c.to_dict() for c in certify_halfline_all(rcp, cr.annuli)]
            row["status"] = "ok" if all(c["passes"] for c in hcs) else "certificate_fail"
            b1 = hcs[0]["b1_plus"] if hcs else ""
    except (ArithmeticError, ValueError) as exc:
        row["status"] = f"error: {exc}"
        return row
    row["multiplicity"] = certs.get("multiplicity", 0)
    for rec in certs.get("records", []):
        row[f"margin_rho={rec['rho']:g}"] = rec["margin"]
        row[f"verdict_rho={rec['rho']:g}"] = rec["verdict"]
    row["b1_plus"] = b1
    for i, c in enumerate(hcs):
        row[f"d_{i}"] = c["d"]
        row[f"n_{i}"] = c["n"]
        row[f"cG_margin_{i}"] = None if c["cG"] is None else c["cG"]["margin"]
        row[f"cG_{i}"] = c["verdicts"].get("cG", "")
        row[f"cconf1_margin_{i}"] = None if c["cconf1"] is None else c["cconf1"]["margin"]
        row[f"cconf1_{i}"] = c["verdicts"].get("cconf1", "")
    return row


def sweep(rc: RunConfig, grid: Mapping[str, Sequence[float]], *, solve: bool = True, jobs: int = 1) -> list[dict]:
    """One row per grid point in lexicographic order of the grid; rows may run in parallel."""
    points = _grid_points(grid)
    work = [(rc, p, solve) for p in points]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_sweep_row, work))
    return [_sweep_row(w) for w in work]


def sweep_columns(grid: Mapping[str, Sequence[float]], rows: list[dict]) -> list[str]:
    cols = list(grid)
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    if not rows:
        cols += ["status", "n_solutions", "multiplicity", "b1_plus"]
    return cols


def write_sweep_csv(grid: Mapping[str, Sequence[float]], rows: list[dict], path: str | Path | None = None) -> str:
    cols = sweep_columns(grid, rows)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow(["" if r.get(c) is None else repr(r[c]) if isinstance(r.get(c), float) else r[c] for c in cols])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text
