"""Pure-Python implementations of the hot kernels (fallback for ``_native``)."""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .. import exprlang as el
from ..numerics.ode import Event, Trajectory, solve_ivp


def eval_program(prog: el.Program, args: Sequence[float]) -> float:
    """Run the bytecode of ``prog``; mirrors the native stack machine."""
    code = prog.code.tolist()
    consts = prog.consts.tolist()
    stack: list[float] = []
    pc = 0
    n = len(code)
    while pc < n:
        op, a, b, c = code[pc]
        if op == el.OP_CONST:
            stack.append(consts[a])
        elif op == el.OP_VAR:
            stack.append(float(args[a]))
        elif op == el.OP_NEG:
            stack[-1] = -stack[-1]
        elif op == el.OP_JGT:
            if args[a] > consts[b]:
                pc = c
                continue
        elif op == el.OP_JMP:
            pc = a
            continue
        elif op in (el.OP_ADD, el.OP_SUB, el.OP_MUL, el.OP_DIV, el.OP_POW, el.OP_MIN, el.OP_MAX):
            y = stack.pop()
            x = stack[-1]
            if op == el.OP_ADD:
                r = x + y
            elif op == el.OP_SUB:
                r = x - y
            elif op == el.OP_MUL:
                r = x * y
            elif op == el.OP_DIV:
                if y == 0.0:
                    raise el.ExprDomainError("division by zero", prog.describe(pc))
                r = x / y
            elif op == el.OP_POW:
                if x < 0.0 and y != math.floor(y):
                    raise el.ExprDomainError("negative base with non-integer exponent", prog.describe(pc))
                if x == 0.0 and y < 0.0:
                    raise el.ExprDomainError("zero raised to a negative power", prog.describe(pc))
                try:
                    r = math.pow(x, y)
                except OverflowError:
                    r = math.inf
            elif op == el.OP_MIN:
                r = x if x <= y else y
            else:
                r = x if x >= y else y
            if not math.isfinite(r):
                raise el.ExprDomainError("non-finite result", prog.describe(pc))
            stack[-1] = r
        else:
            x = stack[-1]
            if op == el.OP_SIN:
                r = math.sin(x)
            elif op == el.OP_COS:
                r = math.cos(x)
            elif op == el.OP_EXP:
                try:
                    r = math.exp(x)
                except OverflowError:
                    r = math.inf
            elif op == el.OP_LOG:
                if x <= 0.0:
                    raise el.ExprDomainError("log of non-positive value", prog.describe(pc))
                r = math.log(x)
            elif op == el.OP_SQRT:
                if x < 0.0:
                    raise el.ExprDomainError("sqrt of negative value", prog.describe(pc))
                r = math.sqrt(x)
            elif op == el.OP_ABS:
                r = abs(x)
            elif op == el.OP_POSPART:
                r = x if x > 0.0 else 0.0
            elif op == el.OP_NEGPART:
                r = -x if x < 0.0 else 0.0
            else:
                raise ValueError(f"bad opcode {op}")
            if not math.isfinite(r):
                raise el.ExprDomainError("non-finite result", prog.describe(pc))
            stack[-1] = r
        pc += 1
    result = stack[-1]
    if not math.isfinite(result):
        raise el.ExprDomainError("non-finite result", prog.describe(n - 1))
    return result


def integrate_halfline_system(
    p: el.Expr,
    f: el.Expr,
    t0: float,
    u0: float,
    t_end: float,
    tol: float,
    t_eval: np.ndarray,
    envelope_rate: float | None = None,
    max_steps: int = 1_000_000,
) -> Trajectory:
    """Integrate ``u' = w/p``, ``w' = -f(t, max(u, 0))``, ``P' = 1/p`` from ``(u0, 0, 0)``.

    ``w`` is ``p u'`` and ``P`` accumulates the integral of ``1/p``.  Events:
    ``hit_zero`` (terminal) when ``u`` reaches 0, ``envelope_crossing`` when
    ``u`` crosses ``u0 exp(envelope_rate P)`` (only if a rate is given).
    """
    pf = el.compile_scalar(p, ("t",))
    ff = el.compile_scalar(f, ("t", "u"))

    def rhs(t, y):
        pv = pf(t)
        uu = y[0] if y[0] > 0.0 else 0.0
        fv = ff(t, uu)
        return np.array([y[1] / pv, -fv, 1.0 / pv])

    events = [Event(lambda t, y: y[0], "hit_zero", terminal=True)]
    if envelope_rate is not None:
        rate = float(envelope_rate)
        events.append(Event(lambda t, y: y[0] - u0 * math.exp(rate * y[2]), "envelope_crossing"))
    return solve_ivp(rhs, t0, [u0, 0.0, 0.0], t_end, tol, events, t_eval, max_steps)
