"""Deterministic grid-plus-refinement extremum search on rectangles."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class Extremum:
    arg: tuple[float, float]
    value: float


def extremum_on_rect(
    g: Callable[[np.ndarray, np.ndarray], np.ndarray],
    rect: tuple[tuple[float, float], tuple[float, float]],
    mode: str = "max",
    refine_rounds: int = 4,
    grid: int = 64,
) -> Extremum:
    """Extremum of vectorised ``g(t, v)`` over ``[t1, t2] x [v1, v2]``.

    A ``grid x grid`` scan (endpoints included) is followed by
    ``refine_rounds`` scans of a box a quarter the size of the previous one,
    centred on the incumbent and clipped to the rectangle.  Degenerate sides
    are allowed.
    """
    if mode not in ("min", "max"):
        raise ValueError("mode must be 'min' or 'max'")
    (t1, t2), (v1, v2) = rect
    if t2 < t1 or v2 < v1:
        raise ValueError("rectangle bounds must be ordered")
    sign = 1.0 if mode == "max" else -1.0

    def scan(tlo, thi, vlo, vhi):
        ts = np.linspace(tlo, thi, grid) if thi > tlo else np.array([tlo])
        vs = np.linspace(vlo, vhi, grid) if vhi > vlo else np.array([vlo])
        T, V = np.meshgrid(ts, vs, indexing="ij")
        vals = np.asarray(g(T.ravel(), V.ravel()), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ArithmeticError("non-finite sample in extremum search")
        k = int(np.argmax(sign * vals))
        return float(T.ravel()[k]), float(V.ravel()[k]), float(vals[k])

    bt, bv, best = scan(t1, t2, v1, v2)
    wt, wv = t2 - t1, v2 - v1
    for _ in range(refine_rounds):
        wt, wv = wt / 4.0, wv / 4.0
        tlo, thi = max(t1, bt - wt / 2), min(t2, bt + wt / 2)
        vlo, vhi = max(v1, bv - wv / 2), min(v2, bv + wv / 2)
        ct, cv, cand = scan(tlo, thi, vlo, vhi)
        if sign * cand > sign * best:
            bt, bv, best = ct, cv, cand
    return Extremum((bt, bv), best)
