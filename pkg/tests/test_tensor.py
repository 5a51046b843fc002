import numpy as np
import pytest

from blochhom.errors import RegimeMismatch, StepTooLarge
from blochhom.tensor import (regime_tensor, stability_sweep, tensor_from_cell, tensor_from_hessian,
                             write_tensor_csv)

from conftest import basis, identity, laminate, trig2d


def test_identity_tensor():
    for rho in (0.0, 2.0):
        assert np.allclose(tensor_from_cell(identity(2, 9), basis(2, 4), rho).matrix, np.eye(2), atol=1e-15)
    t = tensor_from_hessian(None, identity(1, 9), basis(1, 4), 1.0)
    assert t.matrix[0, 0] == pytest.approx(1.0, abs=1e-6)


def test_laminate_rho_zero_is_discrete_harmonic_mean():
    A = laminate(129)
    t = tensor_from_cell(A, basis(1, 64), 0.0)
    # 128 full cells split evenly plus a cut cell averaging to 2.5
    discrete = 129 / (64 + 16 + 0.4)
    assert A.harmonic_mean()[0, 0] == pytest.approx(discrete, rel=1e-14)
    assert t.matrix[0, 0] == pytest.approx(discrete, rel=1e-10)
    assert abs(t.matrix[0, 0] - 1.6) < 5e-3


def test_laminate_trend_toward_mean():
    A = laminate(65)
    b = basis(1, 32)
    vals = [tensor_from_cell(A, b, r).matrix[0, 0] for r in (0, 1, 2, 4, 8, 16, 32, 64)]
    assert np.all(np.diff(vals) > 0)
    assert vals[-1] < 2.5
    assert 2.5 - vals[-1] < 1e-2


def test_regime_tensors():
    A = laminate(65)
    b = basis(1, 32)
    assert regime_tensor(A, b, "infinity").matrix[0, 0] == 2.5
    assert np.array_equal(regime_tensor(A, b, "theta", 1.0).matrix, tensor_from_cell(A, b, 1.0).matrix)
    assert np.array_equal(regime_tensor(A, b, "zero").matrix, tensor_from_cell(A, b, 0.0).matrix)
    with pytest.raises(RegimeMismatch):
        regime_tensor(A, b, "theta")
    with pytest.raises(RegimeMismatch):
        regime_tensor(A, b, "sideways")


def test_hessian_matches_cell_2d():
    A = trig2d(33)
    b = basis(2, 8)
    cell = tensor_from_cell(A, b, 2.0).matrix
    hess = tensor_from_hessian(None, A, b, 2.0)
    assert np.abs(hess.matrix - cell).max() / np.abs(cell).max() < 1e-5
    assert hess.diagnostics["richardson_gap"] < 1e-4


def test_step_too_large():
    with pytest.raises(StepTooLarge):
        tensor_from_hessian(None, laminate(33), basis(1, 16), 1.0, h=0.2)


def test_stability_sweep_2d_brackets():
    s = stability_sweep(trig2d(17), basis(2, 6), [0.5, 1, 2, 4])
    assert s["bracketed"]
    assert np.all(np.diff(s["distance_to_mean"]) < 0)
    c = stability_sweep(identity(1, 9), basis(1, 4), [1, 2])
    assert max(c["distance_to_mean"] + c["distance_to_zero"]) == 0.0


def test_tensor_csv(tmp_path):
    ts = [tensor_from_cell(trig2d(9), basis(2, 3), r) for r in (0.0, 1.0)]
    write_tensor_csv(ts, tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "route,rho,k,l,value"
    assert len(lines) == 1 + 8
