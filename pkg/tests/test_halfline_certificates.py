import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from conftest import simple_raw
from halfbvp import halfline_certificates as hc
from halfbvp.numerics import DivergenceError
from halfbvp.problem_model import load_spec


def b1_minus_oracle(mu: float, arches: int = 200_000) -> float:
    """int_1^inf (mu/t^2) sin^-(pi t/2) dt, arch by arch through the cosine integral.

    On an arch (4k+2, 4k+4) the sine is negative and
    int |sin(w t)|/t^2 = w (Ci(w a) - Ci(w b)); the tail beyond the last arch
    is ~ 1 / (8 w K).
    """
    w = math.pi / 2
    k = np.arange(arches, dtype=float)
    _, ci_a = special.sici(w * (4 * k + 2))
    _, ci_b = special.sici(w * (4 * k + 4))
    total = float(np.sum(w * (ci_a - ci_b)))
    return mu * (total + 1.0 / (8 * w * arches))


def power_spec(n, **kw):
    base = dict(p=f"piecewise(1, 1, t^{n})", f="u^2", b2="1")
    base.update(kw)
    return load_spec(simple_raw(**base))


@pytest.mark.parametrize("n, exact", [(2, 1.0), (3, 0.5), (4, 1 / 3), (12, 1 / 11), (2.5, 2 / 3)])
def test_P_power_law(n, exact):
    assert hc.compute_P(power_spec(n)) == pytest.approx(exact, rel=1e-9)


def test_P_diverges():
    with pytest.raises(DivergenceError):
        hc.compute_P(power_spec(1))
    cert = hc.certify_halfline(power_spec(1), 1.5, n=3)
    assert cert.verdicts["P"] == "fail" and not cert.passes


def test_B1_minus_power_law():
    assert hc.compute_B1_minus(power_spec(3, b1="piecewise(1, 1, -t^-3)")) == pytest.approx(0.5, rel=1e-9)
    assert hc.compute_B1_minus(power_spec(3, b1="1")) == 0.0


def test_B1_minus_example_against_cosine_integral(example):
    oracle = b1_minus_oracle(0.25)
    assert oracle == pytest.approx(0.25 * 0.2123424826, rel=1e-8)
    assert hc.compute_B1_minus(example.spec) == pytest.approx(oracle, rel=1e-7)


@pytest.mark.parametrize(
    "kw, verdict",
    [
        (dict(p="1", b1="1"), "pass"),
        (dict(p="1", b1="piecewise(1, 1, t^-2)"), "pass"),
        (dict(p="piecewise(1, 1, t^2)", b1="piecewise(1, 1, t^-2)"), "fail"),
        (dict(p="piecewise(1, 1, t^12)", b1="piecewise(1, 1, pospart(sin(pi/2*t)))"), "fail"),
        (dict(p="1", b1="-1"), "fail"),
    ],
)
def test_b1_plus_screen(kw, verdict):
    assert hc.screen_b1_plus(load_spec(simple_raw(f="u^2", b2="1", **kw))).verdict == verdict


def test_b1_plus_example_and_override(example):
    scr = hc.screen_b1_plus(example.spec)
    assert scr.verdict == "fail"  # D(T) converges for p = t^12
    forced = hc.screen_b1_plus(example.spec, override="pass")
    assert forced.verdict == "pass" and forced.overridden


@pytest.mark.parametrize("src, d, expected", [("v^2", 1.5, 1.5), ("v^2", 30, 30), ("v/(1+v)", 5, 1.0),
                                             ("v^3 + v", 2, 5.0)])
def test_Mj(src, d, expected):
    spec = load_spec(simple_raw(f="u^2", b2="1", F1=src, F2=src))
    assert hc.compute_Mj(spec, 1, d) == pytest.approx(expected, rel=1e-9)


def test_Mj_rejects_superlinear_at_zero():
    spec = load_spec(simple_raw(f="u^2", b2="1", F1="sqrt(v)"))
    with pytest.raises(hc.FF2Error):
        hc.compute_Mj(spec, 1, 1.0)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.1, 50.0), st.floats(0.1, 50.0))
def test_cG_margin_nonincreasing_in_d(example, d1, d2):
    P, B = 1 / 11, 0.05308562064
    lo, hi = sorted((d1, d2))
    m_lo = hc.check_cG(example.spec, lo, P=P, B1_minus=B).margin
    m_hi = hc.check_cG(example.spec, hi, P=P, B1_minus=B).margin
    assert m_hi <= m_lo + 1e-12


def test_cG_example_levels(example):
    P, B = hc.compute_P(example.spec), hc.compute_B1_minus(example.spec)
    r = hc.check_cG(example.spec, 30.0, P=P, B1_minus=B)
    assert r.verdict == "pass"
    assert r.margin == pytest.approx(11 * math.log(2) / 30 - B, rel=1e-10)


@pytest.mark.parametrize("d, exact", [(1.5, 1 + math.sqrt(6)), (30.0, 1 + math.sqrt(120))])
def test_find_min_n(example, d, exact):
    n_star = hc.find_min_n(example.spec, d)
    assert n_star == pytest.approx(exact, abs=1e-6)
    assert hc.check_cconf1(example.spec, d, n_star).verdict == "pass"
    assert hc.check_cconf1(example.spec, d, n_star - 1e-3).verdict == "fail"


def test_find_min_n_b2_zero():
    spec = power_spec(12, b2="0")
    assert hc.find_min_n(spec, 1.5, n_range=(1.01, 20)) == pytest.approx(1.01)


def test_find_min_n_none():
    with pytest.raises(hc.NoAdmissibleN):
        hc.find_min_n(power_spec(3, b2="100"), 1.5, n_range=(1.5, 3.5))


def test_cconf1_tail_attestation():
    # margin decreasing while b2 closes in on the bound relative to it: undetermined tail
    coef = 0.25 ** 2 / (4 * 1.0)
    spec = power_spec(2, b2=f"piecewise(1, 0, 0.5*{coef}*t^-0.5*(1 - 1/t))", F2="v")
    r = hc.check_cconf1(spec, 1.0, 1.5)
    assert r.verdict == "inconclusive"
    assert hc.check_cconf1(spec, 1.0, 1.5, tail_attested=True).verdict == "pass"


@pytest.mark.parametrize("beta, P, B, bound", [(2, 0.5, math.log(2), 2.0), (3, 1.0, math.log(2), 1.0),
                                               (2, 1.0, 0.0, math.inf)])
def test_power_u0_bound(beta, P, B, bound):
    assert hc.power_u0_bound(beta, P, B) == pytest.approx(bound)


def test_power_u0_bound_limit():
    assert hc.power_u0_bound(2, 1.0, 1e-12) > 1e11


@pytest.mark.parametrize("n", [2, 3, 5, 11.96])
def test_euler_majorant(n):
    y = hc.euler_majorant(n)
    t = np.geomspace(1.0, 1e4, 400)
    assert np.max(np.abs(y.residual(t))) < 1e-10
    v = y(t)
    assert np.all(v > 0) and np.all(np.diff(v) < 0)


def test_euler_majorant_n3_is_inverse():
    t = np.geomspace(1.0, 1e4, 50)
    np.testing.assert_allclose(hc.euler_majorant(3)(t), 1 / t, rtol=1e-15)


def _equality_spec():
    # P = 1 (p = t^2), M1(2) = 2 (F1 = v^2), B1^- = log(2)/2: (cG-) holds with equality at d = 2
    return power_spec(2, b1="piecewise(1, 1, -log(2)*t^-3)")


def test_gronwall_equality_case():
    spec = _equality_spec()
    r = hc.check_cG(spec, 2.0)
    assert abs(r.margin) < 1e-12 and r.verdict == "pass"
    E = hc.gronwall_envelope(spec, 2.0, 1.0)
    assert E.at_infinity == pytest.approx(2.0, abs=1e-9)
    assert E.at_infinity <= 2.0 + 1e-9
    vals = E(np.geomspace(1.0, 1e6, 200))
    assert vals[0] == 1.0 and np.all(np.diff(vals) >= 0) and vals[-1] <= 2.0 * (1 + 1e-12)


def test_gronwall_flat_when_no_negative_part():
    E = hc.gronwall_envelope(power_spec(3, b1="1"), 2.0, 0.5)
    np.testing.assert_array_equal(E(np.linspace(1, 100, 20)), 0.5)


def test_gronwall_preconditions():
    spec = _equality_spec()
    with pytest.raises(hc.EnvelopeError):
        hc.gronwall_envelope(spec, 2.0, 1.5)  # u0 > d/2
    with pytest.raises(hc.EnvelopeError):
        hc.gronwall_envelope(spec, 4.0, 1.0)  # (cG-) fails at d = 4


def test_minorant_without_negative_part():
    spec = power_spec(2, b1="1")
    bar = hc.minorant_barrier(spec, 1.0, 500.0)
    t = bar.nodes
    exact = (1 / t - 1 / 500.0) / (1 - 1 / 500.0)  # int_t^T ds/s^2, normalised
    np.testing.assert_allclose(bar.values, exact, atol=1e-8)
    assert bar.positive


def test_minorant_stable_under_doubling(example):
    spec = example.with_parameters(n=4, mu=0.5).spec
    a = hc.minorant_barrier(spec, 1.5, 1e3)
    b = hc.minorant_barrier(spec, 1.5, 2e3)
    t = np.linspace(1.0, 100.0, 400)
    assert a.positive and b.positive
    np.testing.assert_allclose(a(t), b(t), rtol=1e-2)


def test_certificate_example(example):
    cert = hc.certify_halfline(example.spec, 30.0, n=12)
    assert cert.passes and cert.route == "bounded"
    assert cert.admissible_u0_max == 15.0
    d = cert.to_dict()
    assert d["verdicts"]["cconf1"] == "pass" and d["M1_d"] == 30.0
