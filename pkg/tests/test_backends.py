"""The compiled kernels must reproduce the pure-Python ones exactly."""
import numpy as np
import pytest

from halfbvp import exprlang as el
from halfbvp._kernels import _pure
from halfbvp.halfline_solver import output_grid

native = pytest.importorskip("halfbvp._kernels._native")


def test_backend_selection():
    import halfbvp._kernels as k

    assert k.BACKEND in ("native", "pure")


@pytest.mark.parametrize(
    "src",
    ["piecewise(1, 1, pospart(sin(pi/2*t)) - (0.25/t^2)*negpart(sin(pi/2*t))) * u^2",
     "exp(-t)*max(u, 0.5) + abs(cos(3*t))", "pow(t + 1, 2.5) / (1 + u^2) - min(t, u)",
     "piecewise(u, 0.7, sqrt(t + u), log(1 + t*u))"],
)
def test_eval_program_identical(src):
    prog = el.compile_program(el.parse(src, ("t", "u")), ("t", "u"))
    for t in np.linspace(0.0, 9.0, 37):
        for u in np.linspace(0.0, 2.0, 9):
            assert native.eval_program(prog, (t, u)) == _pure.eval_program(prog, (t, u))


@pytest.mark.parametrize("src", ["log(t - 5)", "sqrt(t - 5)", "1/(t - 2)", "(t - 5)^0.5"])
def test_eval_program_errors_identical(src):
    prog = el.compile_program(el.parse(src, ("t", "u")), ("t", "u"))
    with pytest.raises(el.ExprDomainError) as a:
        _pure.eval_program(prog, (2.0, 0.0))
    with pytest.raises(el.ExprDomainError) as b:
        native.eval_program(prog, (2.0, 0.0))
    assert str(a.value.subexpr) == str(b.value.subexpr)


@pytest.mark.parametrize("u0, rate", [(0.3336921701649, None), (1.71325408529579, 1.59), (5.0, None)])
def test_halfline_integration_identical(example, u0, rate):
    s = example.spec
    te = output_grid(1.0, 300.0)
    a = _pure.integrate_halfline_system(s.p, s.f, 1.0, u0, 300.0, 1e-10, te, rate)
    b = native.integrate_halfline_system(s.p, s.f, 1.0, u0, 300.0, 1e-10, te, rate)
    assert a.status == b.status
    assert (a.naccept, a.nreject, a.nfev) == (b.naccept, b.nreject, b.nfev)
    np.testing.assert_array_equal(a.nodes, b.nodes)
    np.testing.assert_array_equal(a.states, b.states)
    assert [k for k, _ in a.events] == [k for k, _ in b.events]
    np.testing.assert_allclose([t for _, t in a.events], [t for _, t in b.events], rtol=0, atol=1e-12)


def test_hit_zero_identical():
    p, f = el.parse("1", ("t",)), el.parse("1 + 0*u", ("t", "u"))
    te = np.linspace(0, 5, 51)
    a = _pure.integrate_halfline_system(p, f, 0.0, 1.0, 5.0, 1e-10, te)
    b = native.integrate_halfline_system(p, f, 0.0, 1.0, 5.0, 1e-10, te)
    assert a.status == b.status == "event_stop"
    ta = [t for k, t in a.events if k == "hit_zero"][0]
    tb = [t for k, t in b.events if k == "hit_zero"][0]
    assert ta == pytest.approx(2 ** 0.5, abs=1e-9) and tb == pytest.approx(ta, abs=1e-12)
