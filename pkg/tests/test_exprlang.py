import math

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from halfbvp import exprlang as el
from halfbvp._kernels import _pure


def ev(src, **b):
    return el.evaluate(el.parse(src, tuple(b)), b)


@pytest.mark.parametrize(
    "src, value",
    [
        ("1 + 2*3", 7.0),
        ("2^3^2", 512.0),
        ("-2^2", -4.0),
        ("2^-1", 0.5),
        ("(1 + 2)*3", 9.0),
        ("8/4/2", 1.0),
        ("10 - 4 - 3", 3.0),
        ("pospart(-3) + negpart(-3)", 3.0),
        ("min(2, 5) + max(2, 5)", 7.0),
        ("pow(2, 10)", 1024.0),
        ("abs(-1.5e0)", 1.5),
        (".5 + 1.", 1.5),
        ("sin(pi/2)", 1.0),
    ],
)
def test_literal_values(src, value):
    assert ev(src) == pytest.approx(value, rel=1e-15)


def test_piecewise_forms():
    e3 = el.parse("piecewise(1, 1, t^2)", ("t",))
    e4 = el.parse("piecewise(u, 2, 0, u)", ("t", "u"))
    assert el.evaluate(e3, {"t": 1.0}) == 1.0  # boundary belongs to the left branch
    assert el.evaluate(e3, {"t": 3.0}) == 9.0
    assert el.evaluate(e4, {"t": 0.0, "u": 3.0}) == 3.0
    assert el.evaluate(e4, {"t": 0.0, "u": 1.0}) == 0.0
    assert el.breakpoints(e3, "t") == [1.0]
    assert el.breakpoints(e4, "t") == []


def test_vectorized_matches_scalar():
    e = el.parse("piecewise(1, 1, pospart(sin(pi/2*t)) - (0.25/t^2)*negpart(sin(pi/2*t))) * u^2", ("t", "u"))
    t = np.linspace(0, 20, 401)
    u = np.linspace(0, 3, 401)
    vec = el.eval_array(e, {"t": t, "u": u})
    sca = np.array([el.evaluate(e, {"t": a, "u": b}) for a, b in zip(t, u)])
    np.testing.assert_allclose(vec, sca, rtol=1e-14, atol=1e-300)  # numpy and libm sin may differ by an ulp


@pytest.mark.parametrize(
    "src, err",
    [
        ("1 +", el.ExprSyntaxError),
        ("(1", el.ExprSyntaxError),
        ("", el.ExprSyntaxError),
        ("foo(1)", el.UnknownIdentifierError),
        ("x + 1", el.UnknownIdentifierError),
        ("sin(1, 2)", el.ExprSyntaxError),
        ("piecewise(t, 1)", el.ExprSyntaxError),
        ("1 $ 2", el.ExprSyntaxError),
    ],
)
def test_syntax_errors(src, err):
    with pytest.raises(err):
        el.parse(src, ("t",))


def test_syntax_error_position():
    with pytest.raises(el.ExprSyntaxError) as info:
        el.parse("1 + * 2")
    assert info.value.position == 4


@pytest.mark.parametrize("src", ["log(0)", "sqrt(-1)", "1/0", "(-8)^(1/3)", "exp(1000)"])
def test_domain_errors_name_subexpression(src):
    with pytest.raises(el.ExprDomainError) as info:
        ev(src)
    assert info.value.subexpr is not None


def test_unbound_variable():
    with pytest.raises(el.UnboundVariableError):
        el.evaluate(el.parse("t + u", ("t", "u")), {"t": 1.0})


def test_substitute_folds_piecewise():
    e = el.parse("piecewise(1, t, 2*t) + n", ("t", "n"))
    s = el.substitute(e, {"n": el.Num(3.0)})
    assert el.free_variables(s) == {"t"}
    assert el.evaluate(s, {"t": 2.0}) == 7.0


def test_compiled_forms_agree():
    e = el.parse("piecewise(1, 1 + u, t^3) * exp(-u) + negpart(sin(t))", ("t", "u"))
    f = el.compile_scalar(e, ("t", "u"))
    prog = el.compile_program(e, ("t", "u"))
    for t in np.linspace(0, 5, 41):
        for u in (0.0, 0.3, 2.0):
            ref = el.evaluate(e, {"t": t, "u": u})
            assert f(t, u) == ref
            assert _pure.eval_program(prog, (t, u)) == ref


def test_program_reports_failing_node():
    prog = el.compile_program(el.parse("1 + log(t - 2)", ("t",)), ("t",))
    with pytest.raises(el.ExprDomainError) as info:
        _pure.eval_program(prog, (1.0,))
    assert "log" in str(info.value.subexpr)


# ------------------------------------------------------------------ properties

_names = st.sampled_from(["t", "u"])
_leaf = st.one_of(
    st.floats(0, 1e6, allow_nan=False, allow_infinity=False).map(el.Num),
    _names.map(el.Var),
    st.just(el.Const("pi")),
)


def _extend(children):
    return st.one_of(
        st.tuples(st.sampled_from("+-*/^"), children, children).map(lambda x: el.Binary(*x)),
        children.map(lambda c: el.Unary("-", c)),
        st.tuples(st.sampled_from(["sin", "exp", "pospart", "abs"]), children).map(lambda x: el.Call(x[0], (x[1],))),
        st.tuples(children, children).map(lambda x: el.Call("max", x)),
        st.tuples(st.floats(-5, 5, allow_nan=False), children, children).map(
            lambda x: el.Piecewise("t", el.Num(abs(x[0])), x[1], x[2])
        ),
    )


trees = st.recursive(_leaf, _extend, max_leaves=12)


@settings(max_examples=1000, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(trees)
def test_round_trip(tree):
    src = el.to_source(tree)
    back = el.parse(src, ("t", "u"))
    assert back == tree
    assert el.to_source(back) == src


_atoms = st.integers(0, 9).map(lambda k: f"{k}.0")
_ops = st.sampled_from(["+", "-", "*", "/", "^"])


@st.composite
def flat_expressions(draw):
    n = draw(st.integers(1, 6))
    parts = []
    for i in range(n):
        if draw(st.booleans()):
            parts.append("-")
        parts.append(draw(_atoms))
        if i < n - 1:
            parts.append(draw(_ops))
    return " ".join(parts)


@settings(max_examples=1000, deadline=None)
@given(flat_expressions())
def test_precedence_matches_python(src):
    """Python's grammar has the same precedence and associativity for these operators."""
    py = src.replace("^", "**")
    try:
        want = eval(py, {"__builtins__": {}})  # noqa: S307 - digits and operators only
    except (ZeroDivisionError, OverflowError):
        with pytest.raises(el.ExprError):
            el.evaluate(el.parse(src), {})
        return
    assume(isinstance(want, float) and math.isfinite(want))
    got = el.evaluate(el.parse(src), {})
    assert got == pytest.approx(want, rel=1e-12, abs=1e-300)
