"""Command-line entry point: ``halfbvp <verb> --config PATH [--out DIR]``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import pipeline as pl
from .compact_solver import ConvergedOutsideAnnulus, NonConvergence, solve_in_annulus, verify_solution
from .problem_model import PROFILES, ConfigError, ScreenGrid, load_config, validate

VERBS = ("validate", "certify-compact", "certify-halfline", "solve", "pipeline", "sweep")


def _parse_grid(items: list[str]) -> dict[str, list[float]]:
    grid: dict[str, list[float]] = {}
    for item in items:
        name, sep, vals = item.partition("=")
        if not sep or not name.strip():
            raise argparse.ArgumentTypeError(f"bad --grid entry {item!r}; expected name=v1,v2,...")
        try:
            grid[name.strip()] = [float(v) for v in vals.split(",") if v.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad number in --grid entry {item!r}") from None
    return grid


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="halfbvp", description=__doc__)
    sub = ap.add_subparsers(dest="verb", required=True)
    for verb in VERBS:
        sp = sub.add_parser(verb)
        sp.add_argument("--config", required=True, help="JSON problem config")
        sp.add_argument("--out", default=None, help="output directory (default: print JSON to stdout)")
        sp.add_argument("--tol-profile", choices=sorted(PROFILES), default="default")
        sp.add_argument("--seed", type=int, default=None, help="reserved; every computation is deterministic")
        if verb == "sweep":
            sp.add_argument("--grid", action="append", default=[], metavar="NAME=V1,V2",
                            help="parameter grid (repeatable)")
            sp.add_argument("--no-solve", action="store_true", help="certificates only")
            sp.add_argument("--jobs", type=int, default=1)
    return ap


def _emit(args, payload: dict, name: str = "report.json") -> None:
    text = json.dumps(pl._clean(payload), indent=2, sort_keys=True, allow_nan=False)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text + "\n")
    else:
        print(text)


def _run(args) -> int:
    rc = load_config(args.config, args.tol_profile)
    tol = rc.tolerances
    if args.verb == "validate":
        rep = validate(rc.spec, ScreenGrid(tol.screen_points, tol.T_screen, tol.u_screen), rc.ladder)
        _emit(args, rep.to_dict())
        return pl.EXIT_CERT_FAIL if rep.status == "fail" else pl.EXIT_OK
    if args.verb == "certify-compact":
        _, kernel, cert = pl.certify_compact(rc)
        _emit(args, {**pl._header(rc), "kernel": kernel, "compact_certificates": cert.to_dict()})
        return pl.EXIT_OK if cert.all_pass else pl.EXIT_CERT_FAIL
    if args.verb == "certify-halfline":
        _, _, cert = pl.certify_compact(rc)
        hcs = pl.certify_halfline_all(rc, cert.annuli)
        _emit(args, {**pl._header(rc), "halfline_certificates": [c.to_dict() for c in hcs]})
        return pl.EXIT_OK if all(c.passes for c in hcs) else pl.EXIT_CERT_FAIL
    if args.verb == "solve":
        g, _, cert = pl.certify_compact(rc)
        items, code = [], pl.EXIT_OK
        for i, ann in enumerate(cert.annuli):
            try:
                c = solve_in_annulus(rc.spec, g, *ann, pl._options(rc))
            except (NonConvergence, ConvergedOutsideAnnulus) as exc:
                items.append({"annulus": list(ann), "status": str(exc)})
                code = pl.EXIT_NONCONVERGENCE
                continue
            items.append({"annulus": list(ann), "status": "ok", "u_at_R": float(c.values[-1]),
                          "diagnostics": c.diagnostics, "verify": verify_solution(rc.spec, g, c)})
            if args.out:
                (Path(args.out) / "curves").mkdir(parents=True, exist_ok=True)
                pl.write_curve_csv(Path(args.out) / "curves" / f"compact_{i}.csv", c.nodes, c.values, c.flux)
        _emit(args, {**pl._header(rc), "compact_solutions": items})
        return code
    if args.verb == "pipeline":
        rep = pl.run_pipeline(rc, args.out)
        if not args.out:
            print(rep.to_json())
        return rep.exit_code
    # sweep
    grid = _parse_grid(args.grid)
    rows = pl.sweep(rc, grid, solve=not args.no_solve, jobs=args.jobs)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        pl.write_sweep_csv(grid, rows, Path(args.out) / "sweep.csv")
    else:
        sys.stdout.write(pl.write_sweep_csv(grid, rows))
    if any(str(r.get("status", "")).startswith(("error", "nonconvergence")) for r in rows):
        return pl.EXIT_NONCONVERGENCE
    return pl.EXIT_OK if all(r.get("status") == "ok" for r in rows) else pl.EXIT_CERT_FAIL


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _run(args)
    except (ConfigError, argparse.ArgumentTypeError, FileNotFoundError) as exc:
        print(f"halfbvp: config error: {exc}", file=sys.stderr)
        return pl.EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
