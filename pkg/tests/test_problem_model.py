import json

import numpy as np
import pytest

from conftest import EXAMPLE, make_config, simple_raw
from halfbvp import exprlang as el
from halfbvp.problem_model import (
    ConfigError, Ladder, ScreenGrid, load_config, load_spec, screen_ff2, validate,
)


def test_example_loads(example):
    s = example.spec
    assert (s.alpha, s.beta, s.R, s.a, s.b) == (1.0, 0.0, 1.0, 0.5, 1.0)
    assert example.parameters == {"n": 12.0, "mu": 0.25}
    assert example.ladder.values == (0.05, 0.75, 15.0)
    assert example.halfline.n == 12.0
    assert s.p_breakpoints() == [1.0]
    # b(t) = sin^+ - (mu / t^2) sin^- beyond 1, and 1 before
    assert s.b1_of(np.array([0.5, 3.0])) == pytest.approx([1.0, -0.25 / 9])


def test_parameters_substitute(example):
    rc = example.with_parameters(n=4, mu=0.5)
    assert rc.spec.p_of(np.array([2.0]))[0] == 16.0
    assert rc.halfline.n == 4.0
    assert rc.config_hash != example.config_hash


def test_config_hash_stable():
    assert load_config(EXAMPLE).config_hash == load_config(json.loads(EXAMPLE.read_text())).config_hash


@pytest.mark.parametrize(
    "mutate, path",
    [
        (lambda r: r.update(extra=1), "extra"),
        (lambda r: r["problem"].update(q=1), "problem.q"),
        (lambda r: r["problem"].pop("R"), "problem.R"),
        (lambda r: r["problem"].update(f="b*u^2 + w"), "problem.f"),
        (lambda r: r["problem"].update(p="log("), "problem.p"),
        (lambda r: r["bounds"].update(F1="t*v"), "bounds.F1"),
        (lambda r: r["ladder"].update(values=[1, 0.5, 2]), "ladder"),
        (lambda r: r["ladder"].update(targets=["index0"]), "ladder"),
        (lambda r: r["halfline"].update(k_factor=1), "halfline.k_factor"),
        (lambda r: r["halfline"].update(b1_plus_override="maybe"), "halfline.b1_plus_override"),
        (lambda r: r["functional"].update(bound_mode="manual"), "functional.manual_lower"),
        (lambda r: r.update(parameters={"n": "x"}), "parameters.n"),
        (lambda r: r.pop("problem"), "problem"),
    ],
)
def test_config_errors_carry_path(mutate, path):
    raw = make_config()
    mutate(raw)
    with pytest.raises(ConfigError) as info:
        load_config(raw)
    assert info.value.path == path


def test_missing_file():
    with pytest.raises((ConfigError, FileNotFoundError)):
        load_config("/nonexistent/config.json")


def test_numbers_may_be_expressions():
    rc = load_config(make_config(problem={"R": "2*n/12"}, ladder={"values": ["1/20", 0.75, 15],
                                                                  "targets": ["index0", "index1", "index0"]}))
    assert rc.spec.R == 2.0
    assert rc.ladder.values[0] == 0.05


def test_ladder_validation():
    with pytest.raises(ValueError):
        Ladder((0.0, 1.0), ("index0", "index1"))
    with pytest.raises(ValueError):
        Ladder((1.0,), ("index2",))
    assert Ladder((), ()).values == ()


def test_profiles():
    assert load_config(EXAMPLE, "fast").tolerances.grid_N == 257
    assert load_config(EXAMPLE, "tight").tolerances.ivp == 1e-12
    with pytest.raises(ConfigError):
        load_config(EXAMPLE, "bogus")


def test_example_validates(example):
    rep = validate(example.spec, ladder=example.ladder)
    assert rep.status == "pass", rep.to_dict()
    assert rep.grid["u_screen"] == 30.0
    assert rep.grid["T_screen"] == 100.0


@pytest.mark.parametrize(
    "kw, key",
    [
        ({"p": "1 - t"}, "p_positive"),
        ({"f": "-u"}, "f_nonnegative"),
        ({"f": "1 + u"}, "f_zero_at_zero"),
        ({"b2": "-1"}, "b2_nonnegative"),
        ({"F1": "v - 1"}, "F1_admissible"),
        ({"F1": "sqrt(v)"}, "FF2_F1"),
        ({"f": "2*u^2", "b1": "0", "b2": "1"}, "sandwich_FF1"),
        ({"f": "0", "b1": "1", "b2": "1"}, "sandwich_FF1"),
        ({"beta": 0, "a": 0}, "parameters"),
    ],
)
def test_validate_catches_violations(kw, key):
    base = dict(f="u^2", b1="0", b2="1")
    base.update(kw)
    rep = validate(load_spec(simple_raw(**base)))
    assert rep.verdicts[key].status == "fail"
    assert rep.verdicts[key].witness is not None
    assert rep.status == "fail"


def test_validate_reports_domain_error_as_failure():
    rep = validate(load_spec(simple_raw(p="log(t)", f="u^2", b2="1")))
    assert rep.verdicts["p_positive"].status == "fail"


def test_functional_checks():
    rep = validate(load_spec(simple_raw(f="u^2", b2="1", functional={"weight": "t - 0.5", "outer": "v"})))
    assert rep.verdicts["functional"].status == "fail"
    rep = validate(load_spec(simple_raw(f="u^2", b2="1", functional={"point_terms": [[1, 2]], "outer": "v"})))
    assert rep.verdicts["functional"].status == "fail"
    rep = validate(load_spec(simple_raw(f="u^2", b2="1", functional={"weight": "1", "outer": "-v"})))
    assert rep.verdicts["functional"].status == "fail"


@pytest.mark.parametrize("src, status", [("v^2", "pass"), ("v/(1+v)", "pass"), ("sqrt(v)", "fail"),
                                         ("v*(1 - log(v/1e6))", "inconclusive")])
def test_ff2_screen(src, status):
    verdict, _, _ = screen_ff2(el.parse(src, ("v",)), 1.0)
    assert verdict.status == status


def test_screen_grid_defaults(example):
    g = ScreenGrid().resolved(example.spec)
    assert (g.T_screen, g.u_screen) == (100.0, 10.0)
