"""Compare the compiled and pure-Python hot kernels on the shipped example.

    python3 benchmarks/bench_kernels.py [--repeat 3]
"""
from __future__ import annotations

import argparse
import time
from pathlib import Path

import numpy as np

from halfbvp import exprlang as el
from halfbvp._kernels import _pure
from halfbvp.halfline_solver import output_grid
from halfbvp.problem_model import load_config

try:
    from halfbvp._kernels import _native
except ImportError:  # extension not built
    _native = None

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "example.json"


def best_of(fn, repeat: int) -> tuple[float, object]:
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--T", type=float, default=1000.0)
    args = ap.parse_args()

    spec = load_config(CONFIG).spec
    te = output_grid(spec.R, args.T)
    backends = {"pure": _pure} | ({"native": _native} if _native else {})

    prog = el.compile_program(spec.f, ("t", "u"))
    pts = [(float(t), 0.5) for t in np.linspace(0.0, 50.0, 20000)]
    print(f"{'kernel':<28}{'backend':<10}{'seconds':>12}")
    evals = {}
    for name, mod in backends.items():
        secs, vals = best_of(lambda: [mod.eval_program(prog, a) for a in pts], args.repeat)
        evals[name] = np.array(vals)
        print(f"{'eval_program x20000':<28}{name:<10}{secs:>12.4f}")

    runs = {}
    for name, mod in backends.items():
        secs, traj = best_of(
            lambda: mod.integrate_halfline_system(spec.p, spec.f, spec.R, 0.3336921701649, args.T, 1e-10, te),
            args.repeat,
        )
        runs[name] = traj
        print(f"{'halfline IVP to T':<28}{name:<10}{secs:>12.4f}   steps={traj.naccept} nfev={traj.nfev}")

    if len(backends) == 2:
        print("max |eval difference|      ", float(np.max(np.abs(evals["pure"] - evals["native"]))))
        print("max |state difference|     ", float(np.max(np.abs(runs["pure"].states - runs["native"].states))))


if __name__ == "__main__":
    main()
