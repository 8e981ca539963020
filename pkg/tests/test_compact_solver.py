import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sci

from conftest import simple_raw
from halfbvp import greens_kernel as gk
from halfbvp.compact_solver import (
    ConvergedOutsideAnnulus, NonConvergence, SolverOptions, apply_T, discretize, solve_in_annulus, verify_solution,
)
from halfbvp.problem_model import load_spec


@pytest.fixture(scope="module")
def solutions(example, kernel):
    return [solve_in_annulus(example.spec, kernel, *ann) for ann in ((0.05, 0.75), (0.75, 15.0))]


def test_two_ordered_solutions(solutions):
    u1, u2 = (s.values[-1] for s in solutions)
    assert 0.05 < u1 < 0.75 < u2 < 15.0
    # regression values at N = 513
    assert u1 == pytest.approx(0.333692170164937, rel=1e-9)
    assert u2 == pytest.approx(1.7132540852957912, rel=1e-9)


def test_solution_invariants(example, kernel, solutions):
    for s in solutions:
        assert s.diagnostics["fixed_point_residual"] < 1e-8
        v = verify_solution(example.spec, kernel, s)
        assert v["monotone"] and v["cone_ok"] and v["norm_at_R"]
        assert v["residual_sup"] < 1e-6
        assert v["bc_residual"] < 1e-9
        assert v["slope_R_fd"] < 1e-6


def test_grid_convergence_order(example, kernel):
    uR = [solve_in_annulus(example.spec, kernel, 0.05, 0.75, SolverOptions(N=N)).values[-1]
          for N in (65, 129, 257, 513)]
    orders = [math.log2((uR[i] - uR[i + 1]) / (uR[i + 1] - uR[i + 2])) for i in range(2)]
    assert all(round(o, 2) >= 2.0 for o in orders), orders


def _linear_oracle(p, q, gamma, R, t):
    Q = lambda s: sci.quad(q, s, R, epsabs=1e-13)[0]  # noqa: E731
    return gamma * Q(0.0) + sci.quad(lambda s: Q(s) / p(s), 0.0, t, epsabs=1e-13)[0]


@pytest.mark.parametrize("seed", range(10))
def test_linear_reproduction(seed):
    """With a u-independent load, T(0) is the solution of the linear problem."""
    rng = np.random.default_rng(seed)
    coef = rng.uniform(0.0, 2.0, size=rng.integers(1, 5))
    load = " + ".join(f"{float(c)!r}*t^{k}" for k, c in enumerate(coef))
    spec = load_spec(simple_raw(p="1 + t", f=load, alpha=1, beta=0.5, a=0.25, b=0.75))
    g = gk.build(spec)
    disc = discretize(spec, g, 513)
    u = apply_T(spec, disc, np.zeros(513))
    q = lambda s: float(np.polyval(coef[::-1], s))  # noqa: E731
    for i in (0, 100, 256, 400, 512):
        ref = _linear_oracle(lambda s: 1 + s, q, g.gamma, 1.0, disc.nodes[i])
        assert abs(u[i] - ref) < 1e-5 * max(1.0, abs(ref))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_cone_invariance(kernel, example, seed):
    disc = discretize(example.spec, kernel, 257)
    u = np.random.default_rng(seed).uniform(0.0, 20.0, 257)
    Tu = apply_T(example.spec, disc, u)
    mask = (disc.nodes >= kernel.a) & (disc.nodes <= kernel.b)
    norm = float(np.max(Tu))
    assert np.all(Tu >= 0)
    assert np.min(Tu[mask]) >= kernel.cone_c * norm - 1e-12 * norm


def test_converged_outside_annulus():
    spec = load_spec(simple_raw(f="0", b2="1"))
    with pytest.raises(ConvergedOutsideAnnulus) as info:
        solve_in_annulus(spec, gk.build(spec), 0.05, 0.75)
    assert max(info.value.found) < 0.05


def test_no_solution_reported(example, kernel):
    with pytest.raises((NonConvergence, ConvergedOutsideAnnulus)):
        solve_in_annulus(example.spec, kernel, 5.0, 14.0, SolverOptions(n_starts=3))


def test_bad_annulus(example, kernel):
    with pytest.raises(ValueError):
        solve_in_annulus(example.spec, kernel, 1.0, 0.5)
