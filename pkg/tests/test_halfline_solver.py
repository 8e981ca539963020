import math

import numpy as np
import pytest

from conftest import simple_raw
from halfbvp import halfline_certificates as hc
from halfbvp import halfline_solver as hs
from halfbvp.problem_model import load_spec


def manufactured(u0=0.7):
    # u*(t) = u0 / (1 + (t - 1)^2) solves (u')' + f = 0 with f = -u*''
    raw = simple_raw(p="1", f="-u0*(6*(t-1)^2 - 2)/(1 + (t-1)^2)^3")
    raw["parameters"] = {"u0": u0}
    return load_spec(raw)


def exact(t, u0=0.7):
    return u0 / (1 + (t - 1) ** 2)


def test_manufactured_accuracy():
    run = hs.integrate_halfline(manufactured(), 0.7, None, 1000.0)
    t = run.curve.nodes
    m = t <= 51.0
    assert np.max(np.abs(run.curve.values[m] - exact(t[m]))) < 1e-6
    assert run.tail.kind == "decays_to_zero"
    assert run.tail.slope == pytest.approx(-2.0, abs=0.05)
    assert run.tail.u_prime_sign == "negative"


def test_manufactured_order():
    errs, steps = [], []
    for tol in (1e-10, 5e-11):
        run = hs.integrate_halfline(manufactured(), 0.7, None, 51.0, tol)
        errs.append(np.max(np.abs(run.curve.values - exact(run.curve.nodes))))
        steps.append(run.naccept)
    order = math.log(errs[0] / errs[1]) / math.log(steps[1] / steps[0])
    assert order >= 4.0


def test_short_truncation_inconclusive():
    run = hs.integrate_halfline(manufactured(), 0.7, None, 2.0)
    assert run.tail.kind == "inconclusive"


def test_constant_solution():
    spec = load_spec(simple_raw(f="0"))
    run = hs.integrate_halfline(spec, 0.4, None, 100.0)
    np.testing.assert_array_equal(run.curve.values, 0.4)
    np.testing.assert_array_equal(run.curve.flux, 0.0)
    assert run.tail.kind == "bounded_positive"


def test_hit_zero_is_terminal():
    spec = load_spec(simple_raw(f="1 + 0*u"))
    run = hs.integrate_halfline(spec, 0.5, None, 100.0)
    assert run.status == "hit_zero" and run.hit_zero_at == pytest.approx(2.0, abs=1e-8)
    assert run.curve.nodes[-1] == pytest.approx(run.hit_zero_at)
    assert run.tail is None


@pytest.fixture(scope="module")
def example_runs(example):
    out = []
    for d, u0 in ((1.5, 0.333692170164937), (30.0, 1.7132540852957912)):
        cert = hc.certify_halfline(example.spec, d, n=12)
        out.append((cert, hs.integrate_halfline(example.spec, u0, cert, 1000.0)))
    return out


def test_example_runs_stay_under_envelope(example_runs):
    for cert, run in example_runs:
        assert run.status == "positive"
        assert run.envelope_violations == []
        E = run.u0 * np.exp(run.envelope_rate * run.Pi)
        assert np.all(run.curve.values <= E + 1e-9)
        assert np.max(run.curve.values) <= 2 * run.u0


def test_energy_form_residual(example, example_runs):
    """Cell form of (p u')' + f = 0 re-evaluated from the stored u and p u' channels.

    Each cell uses Simpson's rule with the midpoint value of u from the cubic
    Hermite interpolant of (u, u').  Cells touching a zero of sin(pi t / 2)
    (a kink of b) are skipped.
    """
    spec = example.spec
    for _, run in example_runs:
        t, w, u = run.curve.nodes, run.curve.flux, run.curve.values
        du = w / spec.p_of(t)
        lo, hi = t[:-1], t[1:]
        h = hi - lo
        tm = 0.5 * (lo + hi)
        um = 0.5 * (u[:-1] + u[1:]) + h * (du[:-1] - du[1:]) / 8
        f = spec.f_of(t, u)
        fm = spec.f_of(tm, um)
        res = (w[1:] - w[:-1]) / h + (f[:-1] + 4 * fm + f[1:]) / 6
        kink = np.floor((hi + 1e-9) / 2) > np.floor((lo - 1e-9) / 2)
        m = (lo >= 1.0) & (hi <= 51.0) & ~kink
        assert np.max(np.abs(res[m])) < 1e-5 * max(1.0, np.max(np.abs(f)))


def test_tail_stable_under_doubling(example, example_runs):
    for cert, run in example_runs:
        longer = hs.integrate_halfline(example.spec, run.u0, cert, 2000.0)
        assert longer.tail.kind == run.tail.kind


def test_admissible_scan(example):
    cert = hc.certify_halfline(example.spec, 1.5, n=12)
    rows = hs.admissible_u0_scan(example.spec, cert, [1.5 / 8, 1.5 / 4, 1.5 / 2], 500.0)
    assert [r["status"] for r in rows] == ["positive"] * 3
    assert all(r["envelope_violations"] == 0 for r in rows)
    for bad in (0.0, 0.8):
        with pytest.raises(hs.PreconditionError):
            hs.admissible_u0_scan(example.spec, cert, [bad])


def test_output_grid():
    t = hs.output_grid(1.0, 1000.0)
    assert t[0] == 1.0 and t[-1] == 1000.0 and np.all(np.diff(t) > 0)
    assert t[1] - t[0] == pytest.approx(1e-4)
