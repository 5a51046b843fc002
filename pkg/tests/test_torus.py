import numpy as np
import pytest

from blochhom.errors import BadDimension, NotElliptic, NotSymmetric
from blochhom.torus import (PeriodicCoefficient, PeriodicFunction, TorusGrid, load_coefficient,
                            mean_value, sobolev_norm)

from conftest import identity, laminate, trig2d


def test_grid_rejects_even_or_tiny():
    for n in (2, 4, 16):
        with pytest.raises(BadDimension):
            TorusGrid(1, n)
    with pytest.raises(BadDimension):
        TorusGrid(0, 5)


def test_identity_coefficient():
    A = identity(1, 9)
    assert A.alpha == 1.0
    assert np.allclose(A.hat([[0]]), 1.0)
    others = A.fourier.reshape(-1)[1:]
    assert np.abs(others).max() < 1e-15


def test_laminate_mean_and_alpha():
    A = laminate(129)
    assert A.alpha == 1.0
    assert A.upper == 4.0
    assert A.mean[0, 0] == pytest.approx(2.5, abs=1e-14)


def test_trig2d_alpha_and_shape():
    A = trig2d(33)
    assert A.fourier.shape == (33, 33, 2, 2)
    # grid minimum of 2 - sin y1 sin y2 approaches 1 from above
    assert 1.0 <= A.alpha < 1.01
    assert A.mean == pytest.approx(2 * np.eye(2), abs=1e-14)
    assert A.bandwidth() == 1


def test_hat_is_conjugate_symmetric():
    A = trig2d(17)
    k = np.array([[1, 1], [2, -3], [0, 4]])
    assert np.allclose(A.hat(-k), np.conj(A.hat(k)), atol=0)


def test_rejects_nonsymmetric_and_nonelliptic():
    g = TorusGrid(1, 5)
    with pytest.raises(NotElliptic):
        PeriodicCoefficient.from_samples(g, np.array([1.0, 0.0, 1.0, 1.0, 1.0]))
    g2 = TorusGrid(2, 3)
    s = np.broadcast_to(np.array([[2.0, 1.0], [0.0, 2.0]]), (3, 3, 2, 2))
    with pytest.raises(NotSymmetric):
        PeriodicCoefficient.from_samples(g2, s)


def test_samples_are_read_only():
    A = laminate(9)
    with pytest.raises(ValueError):
        A.samples[0, 0, 0] = 5.0


def test_mean_value_examples():
    g = TorusGrid(2, 9)
    y1, y2 = g.mesh()
    assert mean_value(PeriodicFunction.from_values(g, 3.0 + 0 * y1)) == pytest.approx(3.0)
    assert abs(mean_value(PeriodicFunction.from_values(g, np.exp(1j * (2 * y1 - y2))))) < 1e-15
    assert mean_value(PeriodicFunction.from_values(g, 2 + np.sin(y1))) == pytest.approx(2.0)


def test_sobolev_norm_direct_summation():
    g = TorusGrid(1, 9)
    (y,) = g.mesh()
    u = PeriodicFunction.from_values(g, np.exp(1j * y))
    # (2 pi)^(1/2) * ((1 + 1)^2 * 1)^(1/2)
    assert sobolev_norm(u, 2) == pytest.approx(np.sqrt(2 * np.pi) * 2.0, rel=1e-14)
    assert sobolev_norm(PeriodicFunction.from_values(g, 0 * y), 1) == 0.0
    c = PeriodicFunction.from_values(g, 0 * y - 3.0)
    assert sobolev_norm(c, 3) == pytest.approx(3.0 * np.sqrt(2 * np.pi), rel=1e-14)


def test_l2_norm_matches_quadrature():
    g = TorusGrid(2, 15)
    y1, y2 = g.mesh()
    v = np.sin(y1) + 0.5 * np.cos(2 * y2) + 1.0
    u = PeriodicFunction.from_values(g, v)
    quad = np.sqrt(np.sum(np.abs(v) ** 2) * g.spacing ** 2)
    assert u.l2_norm() == pytest.approx(quad, rel=1e-13)


def test_gradient_of_trig():
    g = TorusGrid(1, 11)
    (y,) = g.mesh()
    u = PeriodicFunction.from_values(g, np.sin(3 * y))
    assert np.allclose(u.gradient()[0].values, 3 * np.cos(3 * y), atol=1e-12)


def test_load_coefficient_from_json_and_npy(tmp_path):
    samples = 2.0 + np.cos(TorusGrid(1, 7).points)
    np.save(tmp_path / "a.npy", samples)
    (tmp_path / "c.json").write_text(
        '{"version": 1, "dim": 1, "kind": "samples", "n_per_axis": 7, "payload": {"path": "a.npy"}}')
    A = load_coefficient(tmp_path / "c.json")
    assert np.allclose(A.samples[:, 0, 0], samples)
    assert A.alpha == pytest.approx(samples.min())


def test_load_coefficient_future_version():
    with pytest.raises(BadDimension):
        load_coefficient({"version": 99, "dim": 1, "kind": "constant", "payload": {"value": 1.0}})


def test_constant_matrix_and_trig_entries():
    A = load_coefficient({"dim": 2, "kind": "constant", "n_per_axis": 5,
                          "payload": {"matrix": [[2.0, 0.5], [0.5, 1.0]]}})
    assert np.allclose(A.mean, [[2.0, 0.5], [0.5, 1.0]])
    B = load_coefficient({"dim": 2, "kind": "trig", "n_per_axis": 9, "payload": {"entries": {
        "1,1": [{"c": 3.0}], "2,2": [{"c": 3.0}, {"c": 1.0, "f": ["cos:1", "1"]}],
        "1,2": [{"c": 0.5, "f": ["sin:1", "sin:1"]}]}}})
    assert np.allclose(B.mean, 3 * np.eye(2))
    assert B.alpha > 1.0
