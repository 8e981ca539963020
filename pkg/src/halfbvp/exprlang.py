"""Small arithmetic expression language for problem definitions.

Grammar (lowest to highest precedence)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := ('-' | '+') unary | power
    power   := atom ('^' unary)?          # right-associative
    atom    := NUMBER | NAME | NAME '(' args ')' | '(' expr ')'

Functions: sin cos exp log sqrt abs min max pow pospart negpart, plus
``piecewise(boundary, left, right)`` which evaluates ``left`` when the
context's primary variable is ``<= boundary`` and ``right`` otherwise.  The
four-argument form ``piecewise(var, boundary, left, right)`` names the
variable explicitly.  ``pi`` is the only named constant.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Expr", "Num", "Const", "Var", "Unary", "Binary", "Call", "Piecewise",
    "ExprError", "ExprSyntaxError", "UnknownIdentifierError", "ExprDomainError",
    "UnboundVariableError", "parse", "evaluate", "eval_array", "to_source",
    "free_variables", "breakpoints", "substitute", "compile_scalar", "compile_program",
    "Program", "FUNCTIONS",
]


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, position: int, source: str = ""):
        super().__init__(f"{message} at position {position}")
        self.position = position
        self.source = source


class UnknownIdentifierError(ExprError):
    def __init__(self, name: str, position: int | None = None):
        where = "" if position is None else f" at position {position}"
        super().__init__(f"unknown identifier {name!r}{where}")
        self.name = name
        self.position = position


class UnboundVariableError(ExprError):
    def __init__(self, name: str):
        super().__init__(f"variable {name!r} is not bound")
        self.name = name


class ExprDomainError(ExprError, ArithmeticError):
    def __init__(self, message: str, subexpr: "Expr | str | None" = None):
        text = subexpr if isinstance(subexpr, str) or subexpr is None else to_source(subexpr)
        super().__init__(message if text is None else f"{message} in '{text}'")
        self.subexpr = text


# --------------------------------------------------------------------- AST


class Expr:
    """Base class of expression nodes. Nodes are immutable and hashable."""

    __slots__ = ()

    def __call__(self, **bindings: float) -> float:
        return evaluate(self, bindings)

    def __str__(self) -> str:
        return to_source(self)


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Const(Expr):
    name: str

    @property
    def value(self) -> float:
        return CONSTANTS[self.name]


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Unary(Expr):
    op: str
    operand: Expr


@dataclass(frozen=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call(Expr):
    name: str
    args: tuple[Expr, ...]


@dataclass(frozen=True)
class Piecewise(Expr):
    var: str
    boundary: Expr
    left: Expr
    right: Expr


CONSTANTS = {"pi": math.pi}

# name -> arity
FUNCTIONS = {
    "sin": 1, "cos": 1, "exp": 1, "log": 1, "sqrt": 1, "abs": 1,
    "pospart": 1, "negpart": 1, "min": 2, "max": 2, "pow": 2,
}

# ------------------------------------------------------------------ parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(source: str) -> list[_Tok]:
    toks: list[_Tok] = []
    i = 0
    n = len(source)
    while i < n:
        if source[i].isspace():
            i += 1
            continue
        m = _TOKEN.match(source, i)
        if m is None or m.end() == i:
            raise ExprSyntaxError(f"unexpected character {source[i]!r}", i, source)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append(_Tok(kind, m.group(kind), start))
        i = m.end()
    toks.append(_Tok("end", "", n))
    return toks


class _Parser:
    def __init__(self, source: str, free_vars: Iterable[str]):
        self.source = source
        self.toks = _tokenize(source)
        self.i = 0
        self.free = list(free_vars)
        self.free_set = set(self.free)

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> _Tok:
        if self.tok.text != text or self.tok.kind != "op":
            found = "end of input" if self.tok.kind == "end" else repr(self.tok.text)
            raise ExprSyntaxError(f"expected {text!r}, found {found}", self.tok.pos, self.source)
        return self.take()

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "end":
            raise ExprSyntaxError(f"unexpected {self.tok.text!r}", self.tok.pos, self.source)
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.take().text
            left = Binary(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.take().text
            left = Binary(op, left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.take()
            return Unary("-", self.unary())
        if self.tok.kind == "op" and self.tok.text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.take()
            return Binary("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.take()
            return Num(float(t.text))
        if t.kind == "name":
            self.take()
            if self.tok.kind == "op" and self.tok.text == "(":
                return self.call(t)
            if t.text in self.free_set:
                return Var(t.text)
            if t.text in CONSTANTS:
                return Const(t.text)
            raise UnknownIdentifierError(t.text, t.pos)
        if t.kind == "op" and t.text == "(":
            self.take()
            e = self.expr()
            self.expect(")")
            return e
        found = "end of input" if t.kind == "end" else repr(t.text)
        raise ExprSyntaxError(f"unexpected {found}", t.pos, self.source)

    def call(self, name_tok: _Tok) -> Expr:
        name = name_tok.text
        self.expect("(")
        args: list[Expr] = []
        if not (self.tok.kind == "op" and self.tok.text == ")"):
            args.append(self.expr())
            while self.tok.kind == "op" and self.tok.text == ",":
                self.take()
                args.append(self.expr())
        self.expect(")")
        if name == "piecewise":
            return self._piecewise(name_tok, args)
        if name not in FUNCTIONS:
            raise UnknownIdentifierError(name, name_tok.pos)
        if len(args) != FUNCTIONS[name]:
            raise ExprSyntaxError(
                f"{name} takes {FUNCTIONS[name]} argument(s), got {len(args)}", name_tok.pos, self.source
            )
        return Call(name, tuple(args))

    def _piecewise(self, name_tok: _Tok, args: list[Expr]) -> Expr:
        if len(args) == 4:
            if not isinstance(args[0], Var):
                raise ExprSyntaxError("piecewise variable must be a name", name_tok.pos, self.source)
            var, args = args[0].name, args[1:]
        elif len(args) == 3:
            if not self.free:
                raise ExprSyntaxError("piecewise needs a free variable", name_tok.pos, self.source)
            var = self.free[0]
        else:
            raise ExprSyntaxError("piecewise takes 3 or 4 arguments", name_tok.pos, self.source)
        if free_variables(args[0]):
            raise ExprSyntaxError("piecewise boundary must be constant", name_tok.pos, self.source)
        return Piecewise(var, args[0], args[1], args[2])


def parse(source: str, free_vars: Iterable[str] = ()) -> Expr:
    """Parse ``source`` with the given free variables (the first one is primary)."""
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 0, source)
    return _Parser(source, free_vars).parse()


# ---------------------------------------------------------------- printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _fmt_num(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def to_source(e: Expr) -> str:
    """Render with minimal parentheses; ``parse(to_source(e))`` rebuilds ``e``."""
    return _src(e)


def _src(e: Expr) -> str:
    if isinstance(e, Num):
        s = _fmt_num(e.value)
        return f"({s})" if e.value < 0 or s.startswith("-") else s
    if isinstance(e, Const):
        return e.name
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        inner = _src(e.operand)
        if _prec(e.operand) < _PREC["neg"]:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(e, Binary):
        p = _PREC[e.op]
        ls, rs = _src(e.left), _src(e.right)
        lp, rp = _prec(e.left), _prec(e.right)
        if e.op == "^":
            # base must be an atom; exponent may be a unary chain
            if lp <= p:
                ls = f"({ls})"
            if rp < _PREC["neg"]:
                rs = f"({rs})"
        else:
            if lp < p:
                ls = f"({ls})"
            if rp <= p:
                rs = f"({rs})"
        return f"{ls}^{rs}" if e.op == "^" else f"{ls} {e.op} {rs}"
    if isinstance(e, Call):
        return f"{e.name}({', '.join(_src(a) for a in e.args)})"
    if isinstance(e, Piecewise):
        return f"piecewise({e.var}, {_src(e.boundary)}, {_src(e.left)}, {_src(e.right)})"
    raise TypeError(f"not an expression node: {e!r}")


def _prec(e: Expr) -> int:
    if isinstance(e, Binary):
        return _PREC[e.op]
    if isinstance(e, Unary):
        return _PREC["neg"]
    return 5


# -------------------------------------------------------------- inspection


def free_variables(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, (Num, Const)):
        return set()
    if isinstance(e, Unary):
        return free_variables(e.operand)
    if isinstance(e, Binary):
        return free_variables(e.left) | free_variables(e.right)
    if isinstance(e, Call):
        out: set[str] = set()
        for a in e.args:
            out |= free_variables(a)
        return out
    if isinstance(e, Piecewise):
        return {e.var} | free_variables(e.left) | free_variables(e.right)
    raise TypeError(e)


def breakpoints(e: Expr, var: str) -> list[float]:
    """Sorted breakpoint values of ``piecewise`` nodes switching on ``var``."""
    found: set[float] = set()

    def walk(x: Expr) -> None:
        if isinstance(x, Piecewise):
            if x.var == var:
                found.add(float(evaluate(x.boundary, {})))
            walk(x.left)
            walk(x.right)
        elif isinstance(x, Unary):
            walk(x.operand)
        elif isinstance(x, Binary):
            walk(x.left)
            walk(x.right)
        elif isinstance(x, Call):
            for a in x.args:
                walk(a)

    walk(e)
    return sorted(found)


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace variables by expressions and fold fully constant subtrees."""
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, (Num, Const)):
        return e
    if isinstance(e, Unary):
        return Unary(e.op, substitute(e.operand, mapping))
    if isinstance(e, Binary):
        return Binary(e.op, substitute(e.left, mapping), substitute(e.right, mapping))
    if isinstance(e, Call):
        return Call(e.name, tuple(substitute(a, mapping) for a in e.args))
    if isinstance(e, Piecewise):
        left, right = substitute(e.left, mapping), substitute(e.right, mapping)
        if e.var in mapping:
            sel = mapping[e.var]
            if free_variables(sel):
                raise ExprError(f"cannot substitute a non-constant for piecewise variable {e.var!r}")
            return left if evaluate(sel, {}) <= evaluate(e.boundary, {}) else right
        return Piecewise(e.var, e.boundary, left, right)
    raise TypeError(e)


# -------------------------------------------------------------- evaluation


def _pow(x: float, y: float, node: Expr | None = None) -> float:
    if x < 0.0 and y != math.floor(y):
        raise ExprDomainError("negative base with non-integer exponent", node)
    if x == 0.0 and y < 0.0:
        raise ExprDomainError("zero raised to a negative power", node)
    try:
        r = math.pow(x, y)
    except OverflowError:
        raise ExprDomainError("overflow", node) from None
    return r


def _div(x: float, y: float, node: Expr | None = None) -> float:
    if y == 0.0:
        raise ExprDomainError("division by zero", node)
    return x / y


def _log(x: float, node: Expr | None = None) -> float:
    if x <= 0.0:
        raise ExprDomainError("log of non-positive value", node)
    return math.log(x)


def _sqrt(x: float, node: Expr | None = None) -> float:
    if x < 0.0:
        raise ExprDomainError("sqrt of negative value", node)
    return math.sqrt(x)


def _exp(x: float, node: Expr | None = None) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        raise ExprDomainError("overflow", node) from None


_SCALAR_FUNCS: dict[str, Callable[..., float]] = {
    "sin": lambda x, node=None: math.sin(x),
    "cos": lambda x, node=None: math.cos(x),
    "exp": _exp,
    "log": _log,
    "sqrt": _sqrt,
    "abs": lambda x, node=None: abs(x),
    "pospart": lambda x, node=None: x if x > 0.0 else 0.0,
    "negpart": lambda x, node=None: -x if x < 0.0 else 0.0,
    "min": lambda x, y, node=None: x if x <= y else y,
    "max": lambda x, y, node=None: x if x >= y else y,
    "pow": _pow,
}


def evaluate(e: Expr, bindings: Mapping[str, float]) -> float:
    """Evaluate at scalar bindings; raises on domain errors and non-finite results."""
    v = _eval(e, bindings)
    if not math.isfinite(v):
        raise ExprDomainError("non-finite result", e)
    return v


def _eval(e: Expr, b: Mapping[str, float]) -> float:
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            return float(b[e.name])
        except KeyError:
            raise UnboundVariableError(e.name) from None
    if isinstance(e, Unary):
        return -_eval(e.operand, b)
    if isinstance(e, Binary):
        x = _eval(e.left, b)
        y = _eval(e.right, b)
        op = e.op
        if op == "+":
            r = x + y
        elif op == "-":
            r = x - y
        elif op == "*":
            r = x * y
        elif op == "/":
            r = _div(x, y, e)
        else:
            r = _pow(x, y, e)
        if not math.isfinite(r):
            raise ExprDomainError("non-finite result", e)
        return r
    if isinstance(e, Call):
        args = [_eval(a, b) for a in e.args]
        r = _SCALAR_FUNCS[e.name](*args, node=e)
        if not math.isfinite(r):
            raise ExprDomainError("non-finite result", e)
        return r
    if isinstance(e, Piecewise):
        try:
            x = float(b[e.var])
        except KeyError:
            raise UnboundVariableError(e.var) from None
        return _eval(e.left if x <= _eval(e.boundary, b) else e.right, b)
    raise TypeError(e)


def eval_array(e: Expr, bindings: Mapping[str, "np.ndarray | float"]) -> np.ndarray:
    """Vectorised evaluation over broadcast arrays with the scalar domain rules."""
    names = sorted(free_variables(e))
    for n in names:
        if n not in bindings:
            raise UnboundVariableError(n)
    arrays = np.broadcast_arrays(*[np.asarray(bindings[n], dtype=float) for n in names]) if names else []
    shape = arrays[0].shape if names else np.shape(next(iter(bindings.values()), 0.0))
    flat = {n: a.ravel() for n, a in zip(names, arrays)}
    size = int(np.prod(shape)) if shape else 1
    with np.errstate(all="ignore"):
        out = _eval_arr(e, flat, size)
    out = np.broadcast_to(out, (size,)).reshape(shape)
    if not np.all(np.isfinite(out)):
        raise ExprDomainError("non-finite result", e)
    return np.array(out, dtype=float)


def _eval_arr(e: Expr, b: Mapping[str, np.ndarray], size: int) -> np.ndarray:
    if isinstance(e, (Num, Const)):
        return np.full(size, e.value)
    if isinstance(e, Var):
        return b[e.name]
    if isinstance(e, Unary):
        return -_eval_arr(e.operand, b, size)
    if isinstance(e, Binary):
        x = _eval_arr(e.left, b, size)
        y = _eval_arr(e.right, b, size)
        if e.op == "+":
            r = x + y
        elif e.op == "-":
            r = x - y
        elif e.op == "*":
            r = x * y
        elif e.op == "/":
            if np.any(y == 0.0):
                raise ExprDomainError("division by zero", e)
            r = x / y
        else:
            r = _pow_arr(x, y, e)
        if not np.all(np.isfinite(r)):
            raise ExprDomainError("non-finite result", e)
        return r
    if isinstance(e, Call):
        args = [_eval_arr(a, b, size) for a in e.args]
        r = _call_arr(e, args)
        if not np.all(np.isfinite(r)):
            raise ExprDomainError("non-finite result", e)
        return r
    if isinstance(e, Piecewise):
        x = b[e.var]
        mask = x <= float(evaluate(e.boundary, {}))
        out = np.empty(size)
        if mask.any():
            sub = {k: v[mask] for k, v in b.items()}
            out[mask] = _eval_arr(e.left, sub, int(mask.sum()))
        if (~mask).any():
            sub = {k: v[~mask] for k, v in b.items()}
            out[~mask] = _eval_arr(e.right, sub, int((~mask).sum()))
        return out
    raise TypeError(e)


def _pow_arr(x: np.ndarray, y: np.ndarray, node: Expr) -> np.ndarray:
    if np.any((x < 0.0) & (y != np.floor(y))):
        raise ExprDomainError("negative base with non-integer exponent", node)
    if np.any((x == 0.0) & (y < 0.0)):
        raise ExprDomainError("zero raised to a negative power", node)
    return np.power(x, y)


def _call_arr(e: Call, args: list[np.ndarray]) -> np.ndarray:
    name = e.name
    x = args[0]
    if name == "sin":
        return np.sin(x)
    if name == "cos":
        return np.cos(x)
    if name == "exp":
        return np.exp(x)
    if name == "log":
        if np.any(x <= 0.0):
            raise ExprDomainError("log of non-positive value", e)
        return np.log(x)
    if name == "sqrt":
        if np.any(x < 0.0):
            raise ExprDomainError("sqrt of negative value", e)
        return np.sqrt(x)
    if name == "abs":
        return np.abs(x)
    if name == "pospart":
        return np.where(x > 0.0, x, 0.0)
    if name == "negpart":
        return np.where(x < 0.0, -x, 0.0)
    if name == "min":
        return np.minimum(x, args[1])
    if name == "max":
        return np.maximum(x, args[1])
    if name == "pow":
        return _pow_arr(x, args[1], e)
    raise TypeError(name)


# ------------------------------------------------------------- compilation


def compile_scalar(e: Expr, argnames: Sequence[str]) -> Callable[..., float]:
    """Build a positional-argument closure; faster than ``evaluate`` in tight loops."""
    missing = free_variables(e) - set(argnames)
    if missing:
        raise UnboundVariableError(sorted(missing)[0])
    index = {n: i for i, n in enumerate(argnames)}
    fn = _closure(e, index)

    def call(*args: float) -> float:
        r = fn(args)
        if not math.isfinite(r):
            raise ExprDomainError("non-finite result", e)
        return r

    call.expr = e  # type: ignore[attr-defined]
    return call


def _closure(e: Expr, idx: Mapping[str, int]) -> Callable[[Sequence[float]], float]:
    if isinstance(e, (Num, Const)):
        v = e.value
        return lambda a: v
    if isinstance(e, Var):
        i = idx[e.name]
        return lambda a: a[i]
    if isinstance(e, Unary):
        f = _closure(e.operand, idx)
        return lambda a: -f(a)
    if isinstance(e, Binary):
        fl, fr = _closure(e.left, idx), _closure(e.right, idx)
        if e.op == "+":
            return lambda a: fl(a) + fr(a)
        if e.op == "-":
            return lambda a: fl(a) - fr(a)
        if e.op == "*":
            return lambda a: fl(a) * fr(a)
        if e.op == "/":
            return lambda a: _div(fl(a), fr(a), e)
        return lambda a: _pow(fl(a), fr(a), e)
    if isinstance(e, Call):
        fs = [_closure(x, idx) for x in e.args]
        fn = _SCALAR_FUNCS[e.name]
        if len(fs) == 1:
            f0 = fs[0]
            if e.name in ("log", "sqrt", "exp"):
                return lambda a: fn(f0(a), node=e)
            return lambda a: fn(f0(a))
        f0, f1 = fs
        if e.name == "pow":
            return lambda a: _pow(f0(a), f1(a), e)
        return lambda a: fn(f0(a), f1(a))
    if isinstance(e, Piecewise):
        i = idx[e.var]
        bnd = evaluate(e.boundary, {})
        fl, fr = _closure(e.left, idx), _closure(e.right, idx)
        return lambda a: fl(a) if a[i] <= bnd else fr(a)
    raise TypeError(e)


# Bytecode shared by the native and pure kernels.  Each instruction is
# (opcode, a, b, c); a domain error reports the failing instruction index.
OP_CONST, OP_VAR, OP_ADD, OP_SUB, OP_MUL, OP_DIV, OP_POW, OP_NEG = range(8)
OP_SIN, OP_COS, OP_EXP, OP_LOG, OP_SQRT, OP_ABS, OP_POSPART, OP_NEGPART = range(8, 16)
OP_MIN, OP_MAX, OP_JGT, OP_JMP = range(16, 20)

_BIN_OPS = {"+": OP_ADD, "-": OP_SUB, "*": OP_MUL, "/": OP_DIV, "^": OP_POW}
_CALL_OPS = {
    "sin": OP_SIN, "cos": OP_COS, "exp": OP_EXP, "log": OP_LOG, "sqrt": OP_SQRT,
    "abs": OP_ABS, "pospart": OP_POSPART, "negpart": OP_NEGPART,
    "min": OP_MIN, "max": OP_MAX, "pow": OP_POW,
}


@dataclass(frozen=True)
class Program:
    """Stack-machine form of an expression over positional argument slots."""

    code: np.ndarray  # int64, shape (n, 4)
    consts: np.ndarray  # float64
    argnames: tuple[str, ...]
    origins: tuple[str, ...]  # source text of the node behind each instruction
    stack_size: int

    def describe(self, pc: int) -> str:
        return self.origins[pc] if 0 <= pc < len(self.origins) else "<program>"


def compile_program(e: Expr, argnames: Sequence[str]) -> Program:
    missing = free_variables(e) - set(argnames)
    if missing:
        raise UnboundVariableError(sorted(missing)[0])
    index = {n: i for i, n in enumerate(argnames)}
    code: list[list[int]] = []
    origins: list[str] = []
    consts: list[float] = []
    depth = [0, 0]  # current, max

    def const(v: float) -> int:
        consts.append(float(v))
        return len(consts) - 1

    def emit(op: int, node: Expr, a: int = 0, b: int = 0, c: int = 0, delta: int = 0) -> int:
        code.append([op, a, b, c])
        origins.append(to_source(node))
        depth[0] += delta
        depth[1] = max(depth[1], depth[0])
        return len(code) - 1

    def gen(x: Expr) -> None:
        if isinstance(x, (Num, Const)):
            emit(OP_CONST, x, const(x.value), delta=1)
        elif isinstance(x, Var):
            emit(OP_VAR, x, index[x.name], delta=1)
        elif isinstance(x, Unary):
            gen(x.operand)
            emit(OP_NEG, x)
        elif isinstance(x, Binary):
            gen(x.left)
            gen(x.right)
            emit(_BIN_OPS[x.op], x, delta=-1)
        elif isinstance(x, Call):
            for arg in x.args:
                gen(arg)
            emit(_CALL_OPS[x.name], x, delta=-(len(x.args) - 1))
        elif isinstance(x, Piecewise):
            jgt = emit(OP_JGT, x, index[x.var], const(evaluate(x.boundary, {})))
            base = depth[0]
            gen(x.left)
            jmp = emit(OP_JMP, x)
            depth[0] = base
            code[jgt][3] = len(code)
            gen(x.right)
            code[jmp][1] = len(code)
        else:
            raise TypeError(x)

    gen(e)
    return Program(
        code=np.asarray(code, dtype=np.int64).reshape(-1, 4),
        consts=np.asarray(consts, dtype=np.float64),
        argnames=tuple(argnames),
        origins=tuple(origins),
        stack_size=max(depth[1], 1),
    )
