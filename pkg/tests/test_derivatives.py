import json

import numpy as np
import pytest
import sympy

from blochhom.derivatives import (beta_label, corrector_relation_defect, cross_check_hessian,
                                  derivative_recursion, multi_indices, multinomial, uniform_estimate_sweep,
                                  write_table_json)
from blochhom.tensor import tensor_from_cell, tensor_from_hessian
from blochhom.torus import load_coefficient

from conftest import basis, identity, laminate, trig2d


def _symbolic_derivatives(A0, rho, d, order=4):
    """Taylor data of eta.A0 eta + rho^2 |eta|^4 at 0 (the first band of a constant coefficient)."""
    eta = sympy.symbols(f"e1:{d + 1}")
    M = sympy.Matrix(A0)
    v = sympy.Matrix(eta)
    lam = (v.T * M * v)[0] + sympy.Rational(rho) ** 2 * (v.T * v)[0] ** 2
    out = {}
    for beta in multi_indices(d, order, 1):
        expr = lam
        for i, b in enumerate(beta):
            expr = sympy.diff(expr, eta[i], b)
        out[beta] = float(expr.subs({e: 0 for e in eta}))
    return out


def test_multi_indices_and_labels():
    assert multi_indices(2, 2, 1) == [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
    assert len(multi_indices(3, 4)) == 35
    assert beta_label((2, 0)) == "e1+e1"
    assert multinomial((2, 1), (1, 1)) == 2
    assert multinomial((4,), (2,)) == 6


@pytest.mark.parametrize("rho", [0.0, 1.0, 3.0])
def test_identity_against_sympy(rho):
    t = derivative_recursion(identity(1, 9), basis(1, 4), rho)
    ref = _symbolic_derivatives([[1]], rho, 1)
    for beta, v in ref.items():
        assert t.lambdas[beta].real == pytest.approx(v, abs=1e-8)
        assert np.abs(t.phis[beta]).max() < 1e-12
    assert t.lambdas[(4,)].real == pytest.approx(24 * rho ** 2, abs=1e-8)


def test_anisotropic_constant_2d_against_sympy():
    A0 = [[2.0, 0.5], [0.5, 1.0]]
    A = load_coefficient({"dim": 2, "kind": "constant", "n_per_axis": 7, "payload": {"matrix": A0}})
    t = derivative_recursion(A, basis(2, 3), 2.0)
    ref = _symbolic_derivatives([[2, sympy.Rational(1, 2)], [sympy.Rational(1, 2), 1]], 2, 2)
    for beta, v in ref.items():
        assert t.lambdas[beta].real == pytest.approx(v, abs=1e-8), beta_label(beta)
    assert t.lambdas[(2, 2)].real == pytest.approx(8 * 4.0, abs=1e-8)


def test_laminate_rho_zero_half_hessian():
    A = laminate(129)
    b = basis(1, 64)
    t = derivative_recursion(A, b, 0.0)
    assert 0.5 * t.hessian()[0, 0] == pytest.approx(tensor_from_cell(A, b, 0.0).matrix[0, 0], rel=1e-10)
    assert abs(0.5 * t.hessian()[0, 0] - 1.6) < 5e-3


def test_odd_derivatives_vanish_and_compatibility():
    t = derivative_recursion(trig2d(17), basis(2, 6), 1.0)
    for beta, v in t.lambdas.items():
        if sum(beta) % 2:
            assert abs(v) < 1e-10
    assert max(t.compatibility.values()) < 1e-8


def test_corrector_relation():
    A = laminate(65)
    b = basis(1, 32)
    for rho in (0.5, 1.0, 4.0):
        t = derivative_recursion(A, b, rho, max_order=1)
        assert max(corrector_relation_defect(t)) < 1e-10


def test_cross_check_against_fd_hessian():
    A = trig2d(33)
    b = basis(2, 8)
    t = derivative_recursion(A, b, 2.0, max_order=2)
    res = cross_check_hessian(t, tensor_from_hessian(None, A, b, 2.0))
    assert res["ok"]


def test_uniform_estimates_identity():
    s = uniform_estimate_sweep(identity(1, 9), basis(1, 4), [1, 2, 4])
    for row in s["rows"]:
        assert row["phi1_h1"] == 0 and row["phi4_l2"] == 0
        assert row["lambda4_axis"][0] == pytest.approx(24 * row["rho"] ** 2, abs=1e-8)


def test_table_json(tmp_path):
    t = derivative_recursion(laminate(17), basis(1, 8), 1.0)
    write_table_json(t, tmp_path / "d.json")
    data = json.loads((tmp_path / "d.json").read_text())
    assert set(data) >= {"rho", "N", "lambda", "phi_h1", "compatibility_defect"}
    assert "e1+e1+e1+e1" in data["lambda"]


def test_max_order_validation():
    with pytest.raises(ValueError):
        derivative_recursion(laminate(17), basis(1, 8), 1.0, max_order=5)
