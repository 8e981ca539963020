import copy
import json
from pathlib import Path

import pytest

from halfbvp import greens_kernel as gk
from halfbvp.problem_model import load_config

ROOT = Path(__file__).resolve().parents[1]
EXAMPLE = ROOT / "configs" / "example.json"

# criterion number -> (passed, description); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def example_raw() -> dict:
    return json.loads(EXAMPLE.read_text())


def make_config(**sections):
    """Config dict from the shipped example with sections (or top-level keys) replaced."""
    raw = copy.deepcopy(example_raw())
    for key, val in sections.items():
        if isinstance(val, dict) and isinstance(raw.get(key), dict) and key != "parameters":
            raw[key] = {**raw[key], **val}
        else:
            raw[key] = val
    return raw


def simple_raw(p="1", f="0", alpha=1, beta=0, R=1, a=0.5, b=1, b1="0", b2="0", F1="v^2", F2="v^2",
               functional=None, ladder=None, halfline=None) -> dict:
    return {
        "problem": {"p": p, "f": f, "alpha": alpha, "beta": beta, "R": R, "a": a, "b": b},
        "bounds": {"b1": b1, "b2": b2, "F1": F1, "F2": F2},
        "functional": functional or {"weight": "0", "outer": "v"},
        "ladder": ladder or {"values": [], "targets": []},
        "halfline": halfline or {},
    }


@pytest.fixture(scope="session")
def example():
    return load_config(EXAMPLE)


@pytest.fixture(scope="session")
def kernel(example):
    return gk.build(example.spec)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, text = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {text}")
