import math

import pytest

from conftest import simple_raw
from halfbvp import greens_kernel as gk
from halfbvp.compact_certificates import (
    CertRecord, H_bounds, check_I0, check_I1, evaluate_ladder, f_bar, f_lower, ladder_from_records,
)
from halfbvp.problem_model import Ladder, load_spec


def _i0(rho):  # inv_M f(c rho) + (1/2) sqrt(c rho (b - a)) - rho with b(t) = 1 on [1/2, 1]
    return 0.25 * (rho / 2) ** 2 + 0.5 * math.sqrt(rho / 4) - rho


def _i1(rho):  # rho - inv_m rho^2 - (1/2) sqrt(rho R)
    return rho - 0.5 * rho ** 2 - 0.5 * math.sqrt(rho)


def test_margins_match_direct_arithmetic(example, kernel):
    s = example.spec
    assert check_I0(s, kernel, 0.05).margin == pytest.approx(_i0(0.05), abs=1e-12)
    assert check_I1(s, kernel, 0.75).margin == pytest.approx(_i1(0.75), abs=1e-12)
    assert check_I0(s, kernel, 15.0).margin == pytest.approx(_i0(15.0), abs=1e-10)


def test_extremal_values(example, kernel):
    fb = f_bar(example.spec, kernel, 2.0)
    assert fb.value == pytest.approx(4.0) and fb.arg[1] == 2.0
    fl = f_lower(example.spec, kernel, 2.0)
    assert fl.value == pytest.approx(1.0)
    lo, hi = H_bounds(example.spec, kernel, 4.0)
    assert (lo, hi) == pytest.approx((0.5, 1.0))


def test_example_ladder(example, kernel):
    rep = evaluate_ladder(example.spec, kernel, example.ladder)
    assert [r.verdict for r in rep.records] == ["pass"] * 3
    assert rep.holds["S1"] and rep.holds["S3"]
    assert not rep.holds["S4"] and not rep.holds["S5"]
    assert rep.annuli == ((0.05, 0.75), (0.75, 15.0))
    assert rep.multiplicity == 2


def test_failing_value_breaks_ladder(example, kernel):
    rep = evaluate_ladder(example.spec, kernel, Ladder((0.05, 1.5, 15.0), ("index0", "index1", "index0")))
    assert rep.records[1].verdict == "fail"  # 1.5 - 1.125 - 0.61 < 0
    assert rep.annuli == ()
    assert not rep.holds["S1"]


def _rec(rho, kind, verdict):
    return CertRecord(rho, kind, 0, 0, 0, verdict, 0, (0, 0), 0, 0)


def test_ladder_patterns():
    recs = [_rec(1, "index1", "pass"), _rec(2, "index0", "pass"), _rec(3, "index1", "pass"),
            _rec(4, "index0", "pass")]
    rep = ladder_from_records(recs)
    assert rep.holds == {"S1": True, "S2": True, "S3": True, "S4": True, "S5": False, "S6": True}
    assert rep.multiplicity == 3
    rep = ladder_from_records([_rec(1, "index0", "pass"), _rec(2, "index0", "pass")])
    assert rep.multiplicity == 0
    rep = ladder_from_records([_rec(1, "index0", "marginal"), _rec(2, "index1", "pass")])
    assert rep.multiplicity == 0 and not rep.holds["S1"]


def test_marginal_verdict():
    # f = u, H = 0, p = 1, beta = 0: inv_m = R^2/2 = 1/2 so rho - rho/2 > 0; use R = sqrt(2) for equality
    spec = load_spec(simple_raw(f="u", R="sqrt(2)", a=0.5, b=1, b2="1"))
    g = gk.build(spec)
    assert g.inv_m == pytest.approx(1.0, rel=1e-12)
    assert check_I1(spec, g, 3.0).verdict == "marginal"


def test_manual_functional_bounds():
    raw = simple_raw(f="u^2", b2="1", functional={"weight": "0", "outer": "v", "bound_mode": "manual",
                                                   "manual_lower": "rho/10", "manual_upper": "rho/5"})
    spec = load_spec(raw)
    g = gk.build(spec)
    assert H_bounds(spec, g, 2.0) == (0.2, 0.4)
    rec = check_I1(spec, g, 0.5)
    assert rec.lhs == pytest.approx(0.5 * 0.25 + 0.1)
