import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sci

from conftest import simple_raw
from halfbvp import greens_kernel as gk
from halfbvp.problem_model import load_spec


def test_example_constants(kernel):
    assert kernel.inv_m == pytest.approx(0.5, abs=1e-12)
    assert kernel.inv_M == pytest.approx(0.25, abs=1e-12)
    assert kernel.cone_c == pytest.approx(0.5, abs=1e-12)
    assert kernel.gamma == 0.0


def test_example_values(kernel):
    assert gk.k_eval(kernel, 1.0, 0.5) == pytest.approx(0.5)
    assert gk.k_eval(kernel, 0.3, 0.7) == pytest.approx(0.3)
    assert gk.k_t_eval(kernel, 0.3, 0.7) == 1.0
    assert gk.k_t_eval(kernel, 0.7, 0.3) == 0.0
    assert gk.c_eval(kernel, 0.5) == pytest.approx(0.5)


def test_domain_checked(kernel):
    for bad in (-0.1, 1.5, math.nan):
        with pytest.raises(gk.KernelError):
            gk.k_eval(kernel, bad, 0.5)


@pytest.mark.parametrize("kw", [dict(a=0.6, b=0.6), dict(a=0.0, beta=0), dict(a=0.2, b=1.5)])
def test_bad_cone_interval(kw):
    with pytest.raises(gk.KernelError):
        gk.build(load_spec(simple_raw(**kw)))


def test_closed_form_constants_variable_p():
    # p = 1 + t, alpha = 2, beta = 1/2: Pi = log(1 + t), gamma = 1/4
    g = gk.build(load_spec(simple_raw(p="1 + t", alpha=2, beta=0.5, a=0.25, b=0.75)))
    gamma = 0.25
    assert g.gamma == gamma
    assert g.inv_m == pytest.approx(gamma + 2 * math.log(2) - 1, rel=1e-10)
    assert g.inv_M == pytest.approx(0.5 * (gamma + math.log(1.25)), rel=1e-10)
    c = (0.5 + 2 * math.log(1.25)) / (0.5 + 2 * math.log(2))
    assert g.cone_c == pytest.approx(c, rel=1e-10)


def test_int_k_against_scipy():
    g = gk.build(load_spec(simple_raw(p="exp(t)*(1 + t^2)", alpha=1.5, beta=0.3, R=2, a=0.5, b=1.5)))
    for t in (0.0, 0.4, 1.1, 2.0):
        ref, _ = sci.quad(lambda s: g.gamma + sci.quad(lambda r: 1 / (math.exp(r) * (1 + r * r)), 0, min(s, t))[0],
                          0.5, 1.5, points=[t] if 0.5 < t < 1.5 else None, epsabs=1e-13)
        assert g.int_k(t, 0.5, 1.5) == pytest.approx(ref, rel=1e-9)


_p_choices = st.sampled_from(["1", "1 + t", "exp(t)", "2 + sin(3*t)", "piecewise(0.5, 1, 2)"])


@settings(max_examples=25, deadline=None)
@given(_p_choices, st.floats(0.2, 3.0), st.floats(0.0, 2.0), st.floats(0.05, 0.45), st.floats(0.55, 1.0))
def test_sandwich_and_symmetry(p, alpha, beta, a, b):
    g = gk.build(load_spec(simple_raw(p=p, alpha=alpha, beta=beta, a=a, b=b)), n_nodes=1025)
    x = np.linspace(0.0, 1.0, 64)
    T, S = np.meshgrid(x, x, indexing="ij")
    K = gk.k_eval(g, T, S)
    phi = gk.phi_eval(g, S)
    c = gk.c_eval(g, T)
    tol = 1e-12 * max(1.0, float(np.max(phi)))
    np.testing.assert_array_equal(K, K.T)
    assert np.all(K <= phi + tol)
    assert np.all(c * phi <= K + tol)
    assert np.all(K >= 0)
