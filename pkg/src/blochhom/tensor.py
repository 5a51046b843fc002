"""Homogenized tensors: cell-average route, Bloch-Hessian route, regime limits."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._parallel import pmap
from .cell import CorrectorSet, _slope, solve_cell
from .errors import RegimeMismatch, StepTooLarge
from .fiber import PlaneWaveBasis, assemble_fiber
from .spectra import solve_fiber
from .torus import PeriodicCoefficient


@dataclass(frozen=True)
class HomogenizedTensor:
    matrix: np.ndarray = field(repr=False)
    route: str
    rho_or_regime: object
    diagnostics: dict = field(default_factory=dict)


def _finish(raw: np.ndarray, route: str, label, extra=None) -> HomogenizedTensor:
    raw = np.real_if_close(np.asarray(raw), tol=1e6).real
    sym = 0.5 * (raw + raw.T)
    diag = {"symmetry_defect": float(np.abs(raw - raw.T).max()),
            "min_eigenvalue": float(np.linalg.eigvalsh(sym)[0])}
    diag.update(extra or {})
    sym.setflags(write=False)
    return HomogenizedTensor(sym, route, label, diag)


def cell_average(A: PeriodicCoefficient, correctors: CorrectorSet) -> np.ndarray:
    """Unsymmetrized ``M_Y(e_k . A e_l + e_k . A grad chi_l)``."""
    basis = correctors.basis
    ahat_neg = A.hat(-basis.index)
    n = basis.index.astype(float)
    flux = 1j * np.einsum("pkj,pj,pl->kl", ahat_neg, n, correctors.coeffs)
    return A.mean + flux


def tensor_from_cell(A: PeriodicCoefficient, basis: PlaneWaveBasis, rho: float,
                     correctors: CorrectorSet | None = None) -> HomogenizedTensor:
    """Cell-average tensor; the (k,l)/(l,k) average is returned and its defect reported."""
    cs = correctors or solve_cell(A, basis, rho)
    return _finish(cell_average(A, cs), "cell-average", float(rho),
                   {"corrector_residual": cs.residual})


def first_eigenvalue(A: PeriodicCoefficient, basis: PlaneWaveBasis, rho: float) -> Callable:
    def lam(eta):
        w, _ = solve_fiber(assemble_fiber(A, basis, rho, eta), 1)
        return float(w[0])
    return lam


def hessian_fd(lam: Callable, d: int, h: float) -> np.ndarray:
    """Central second differences of ``lam`` at the origin (4-point stencil off the diagonal)."""
    e = np.eye(d)
    l0 = lam(np.zeros(d))
    Hs = np.zeros((d, d))
    for k in range(d):
        Hs[k, k] = (lam(h * e[k]) - 2 * l0 + lam(-h * e[k])) / h ** 2
        for l in range(k + 1, d):
            pp = lam(h * (e[k] + e[l]))
            pm = lam(h * (e[k] - e[l]))
            mp = lam(h * (-e[k] + e[l]))
            mm = lam(-h * (e[k] + e[l]))
            Hs[k, l] = Hs[l, k] = (pp - pm - mp + mm) / (4 * h ** 2)
    return Hs


def tensor_from_hessian(band_builder: Callable | None, A: PeriodicCoefficient, basis: PlaneWaveBasis,
                        rho: float, h: float = 1e-3, richardson_tol: float = 1e-4) -> HomogenizedTensor:
    """Half the finite-difference Hessian of the first band at eta = 0.

    ``band_builder(eta) -> lambda_1`` defaults to a plane-wave fiber solve.  The
    step is checked against ``h/2``; a relative disagreement above
    ``richardson_tol`` raises StepTooLarge.
    """
    lam = band_builder or first_eigenvalue(A, basis, rho)
    coarse, fine = pmap(lambda s: 0.5 * hessian_fd(lam, basis.d, s), [h, h / 2])
    scale = max(np.abs(fine).max(), 1e-300)
    gap = float(np.abs(coarse - fine).max() / scale)
    if gap > richardson_tol:
        raise StepTooLarge(f"h={h} and h/2 disagree by {gap:.2e} relative")
    return _finish(coarse, "bloch-hessian", float(rho),
                   {"step": h, "richardson_gap": gap, "richardson_value": ((4 * fine - coarse) / 3).tolist()})


REGIMES = ("zero", "theta", "infinity")


def regime_tensor(A: PeriodicCoefficient, basis: PlaneWaveBasis, regime: str,
                  theta: float | None = None) -> HomogenizedTensor:
    """Tensor of the limit problem: rho -> 0, rho -> theta, or rho -> infinity (the mean of A)."""
    if regime == "zero":
        t = tensor_from_cell(A, basis, 0.0)
    elif regime == "theta":
        if theta is None or not 0 < theta < np.inf:
            raise RegimeMismatch("theta regime needs 0 < theta < inf")
        t = tensor_from_cell(A, basis, theta)
    elif regime == "infinity":
        return _finish(A.mean, "regime-limit", "infinity")
    else:
        raise RegimeMismatch(f"unknown regime {regime!r}")
    return HomogenizedTensor(t.matrix, "regime-limit", regime if regime == "zero" else float(theta),
                             t.diagnostics)


def _psd_margin(M: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])


def stability_sweep(A: PeriodicCoefficient, basis: PlaneWaveBasis, rho_list) -> dict:
    """Tensors over rho: distance to the rho = 0 tensor and to the mean, large-rho slope, ordering."""
    rhos = sorted(float(r) for r in rho_list)
    zero = tensor_from_cell(A, basis, 0.0).matrix
    mean = A.mean
    tensors = pmap(lambda r: tensor_from_cell(A, basis, r).matrix, rhos)
    to_mean = [float(np.linalg.norm(T - mean)) for T in tensors]
    to_zero = [float(np.linalg.norm(T - zero)) for T in tensors]
    top = [i for i, r in enumerate(rhos) if r >= rhos[-1] / 10]
    slope = _slope([rhos[i] for i in top], [to_mean[i] for i in top])
    lower = min(_psd_margin(T - zero) for T in tensors)
    upper = min(_psd_margin(mean - T) for T in tensors)
    return {
        "rho": rhos,
        "tensors": [T.tolist() for T in tensors],
        "distance_to_mean": to_mean,
        "distance_to_zero": to_zero,
        "large_rho_slope": slope,
        "lower_margin": lower,
        "upper_margin": upper,
        "bracketed": bool(lower >= -1e-9 and upper >= -1e-9),
        "zero_tensor": zero.tolist(),
        "mean": mean.tolist(),
    }


def write_tensor_csv(tensors, path) -> None:
    """Rows (route, rho, k, l, value) for each HomogenizedTensor in order."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["route", "rho", "k", "l", "value"])
        for t in tensors:
            d = t.matrix.shape[0]
            for k in range(d):
                for l in range(d):
                    w.writerow([t.route, t.rho_or_regime, k + 1, l + 1, repr(float(t.matrix[k, l]))])
