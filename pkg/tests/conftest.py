import numpy as np
import pytest

from blochhom.fiber import PlaneWaveBasis
from blochhom.torus import load_coefficient


def laminate(n=65, values=(1.0, 4.0)):
    return load_coefficient({"dim": 1, "kind": "laminate",
                             "payload": {"values": list(values), "fraction": 0.5}, "n_per_axis": n})


def trig2d(n=33):
    return load_coefficient({"dim": 2, "kind": "trig", "n_per_axis": n,
                             "payload": {"scalar": [{"c": 2.0}, {"c": 1.0, "f": ["sin:1", "sin:1"]}]}})


def identity(d=1, n=17):
    return load_coefficient({"dim": d, "kind": "constant", "payload": {"value": 1.0}, "n_per_axis": n})


def basis(d, N):
    return PlaneWaveBasis.create(d, N)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE = []


@pytest.fixture
def criterion():
    """Record one acceptance line and fail the test if the check did not pass."""
    def record(label, passed, detail):
        line = f"criterion {label}: {'PASS' if passed else 'FAIL'}  {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        assert passed, line
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
