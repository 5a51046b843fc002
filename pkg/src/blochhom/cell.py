"""Cell problems for the correctors, their estimates, and coefficient smoothing."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from ._parallel import pmap
from .errors import SingularSystem
from .fiber import PlaneWaveBasis, assemble_fiber
from .torus import PeriodicCoefficient, PeriodicFunction


class ZeroMeanSolver:
    """Factorization of a fiber matrix at eta = 0 restricted to non-constant modes.

    The constant mode is the first basis entry; solutions are returned with a
    zero constant coefficient.
    """

    def __init__(self, H: np.ndarray):
        K = np.asarray(H)[1:, 1:]
        diag = np.real(np.diag(K))
        if K.size and diag.min() <= 0:
            raise SingularSystem("non-positive diagonal on the zero-mean subspace")
        self.s = 1.0 / np.sqrt(diag)
        try:
            self.factor = sla.cho_factor(self.s[:, None] * K * self.s[None, :], lower=True,
                                         check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(str(exc)) from exc
        self.size = H.shape[0]

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=complex)
        out = np.zeros(rhs.shape, dtype=complex)
        scaled = self.s.reshape((-1,) + (1,) * (rhs.ndim - 1))
        out[1:] = scaled * sla.cho_solve(self.factor, scaled * rhs[1:], check_finite=False)
        return out


def corrector_rhs(A: PeriodicCoefficient, basis: PlaneWaveBasis) -> np.ndarray:
    """Column j holds ``i m . A_hat(m) e_j``, the load of the j-th cell problem."""
    ahat = A.hat(basis.index)
    return 1j * np.einsum("pi,pij->pj", basis.index.astype(float), ahat)


@dataclass(frozen=True)
class CorrectorSet:
    rho: float
    basis: PlaneWaveBasis = field(repr=False)
    coeffs: np.ndarray = field(repr=False)
    energies: tuple
    residual: float
    bound: float

    @property
    def chi(self) -> tuple:
        return tuple(self.basis.to_function(self.coeffs[:, j]) for j in range(self.basis.d))

    def grad_l2(self, j: int | None = None) -> float:
        c = self.coeffs if j is None else self.coeffs[:, j]
        return self.basis.seminorm(c, 1)


def solve_cell(A: PeriodicCoefficient, basis: PlaneWaveBasis, rho: float, fiber=None) -> CorrectorSet:
    """Zero-mean correctors ``chi_j`` of ``rho^2 Lap^2 chi - div A(e_j + grad chi) = 0``.

    Galerkin on the plane-wave basis with the constant mode removed.  The
    reported residual is the largest weak-form defect against a basis
    function, divided by that function's H2 norm.
    """
    F = fiber or assemble_fiber(A, basis, rho, np.zeros(basis.d))
    solver = ZeroMeanSolver(F.matrix)
    rhs = corrector_rhs(A, basis)
    coeffs = solver.solve(rhs)
    d = basis.d
    n2 = basis.norm_sq()
    defect = np.abs(F.matrix[1:] @ coeffs - rhs[1:])
    weight = (2 * np.pi) ** (d / 2) / (1.0 + n2[1:])
    residual = float((defect * weight[:, None]).max()) if defect.size else 0.0
    energies = []
    for j in range(d):
        c = coeffs[:, j]
        energies.append({
            "rho_laplacian": rho * basis.seminorm(c, 2),
            "h1": basis.hs(c, 1),
            "rho2_grad3": rho ** 2 * basis.seminorm(c, 3),
        })
    bound = max(e["rho_laplacian"] + e["h1"] for e in energies)
    coeffs.setflags(write=False)
    return CorrectorSet(float(rho), basis, coeffs, tuple(energies), residual, bound)


def corrector_rho_stability(A: PeriodicCoefficient, basis: PlaneWaveBasis, rho1: float, rho2: float) -> dict:
    """Compare ``||grad chi^rho1 - grad chi^rho2||`` with ``|1 - (rho1/rho2)^2|``."""
    if rho1 <= 0 or rho2 <= 0:
        raise ValueError("both rho values must be positive")
    c1, c2 = pmap(lambda r: solve_cell(A, basis, r), [rho1, rho2])
    diff = basis.seminorm(c1.coeffs - c2.coeffs, 1)
    scale = abs(1.0 - (rho1 / rho2) ** 2)
    if diff <= 1e-13:
        const = 0.0
    else:
        const = diff / scale if scale > 0 else np.inf
    return {"rho1": rho1, "rho2": rho2, "difference": diff, "scale": scale,
            "constant": const, "finite": bool(np.isfinite(const))}


@dataclass(frozen=True)
class MollifiedCoefficient:
    B: PeriodicCoefficient
    kernel_width: float
    q: float
    achieved: float
    kappa_target: float | None = None

    @property
    def meets_target(self) -> bool:
        return self.kappa_target is None or self.achieved <= self.kappa_target


def fejer_weights(n: int, K: int) -> np.ndarray:
    """Grid samples of the 1D Fejer kernel of order K, normalized to unit sum."""
    y = 2 * np.pi * np.arange(n) / n
    with np.errstate(invalid="ignore", divide="ignore"):
        w = (np.sin((K + 1) * y / 2) / np.sin(y / 2)) ** 2 / (K + 1)
    w[0] = K + 1
    return w / w.sum()


def lq_distance(A: PeriodicCoefficient, B: PeriodicCoefficient, q: float) -> float:
    """Grid quadrature of ``||A - B||_{L^q(Y)}`` with the Frobenius norm pointwise."""
    diff = np.linalg.norm(A.samples - B.samples, axis=(-2, -1))
    h = A.grid.spacing ** A.d
    return float((np.sum(diff ** q) * h) ** (1.0 / q))


def mollify(A: PeriodicCoefficient, kernel_width: float, q: float = 2.0,
            kappa_target: float | None = None) -> MollifiedCoefficient:
    """Periodic convolution with a tensor-product Fejer kernel.

    The kernel order is ``ceil(2*pi / kernel_width)``; the sampled kernel is
    nonnegative with unit mass, so B stays symmetric with ellipticity at least
    that of A.  Width 0 returns A unchanged.
    """
    if not 1.0 < q < np.inf:
        raise ValueError("q must lie in (1, inf)")
    if kernel_width <= 0:
        return MollifiedCoefficient(A, 0.0, q, 0.0, kappa_target)
    K = int(np.ceil(2 * np.pi / kernel_width))
    n = A.grid.n_per_axis
    mult = np.fft.fft(fejer_weights(n, K)).real
    full = np.ones(A.grid.shape)
    for axis in range(A.d):
        shape = [1] * A.d
        shape[axis] = n
        full = full * mult.reshape(shape)
    coeffs = A.fourier * full[..., None, None]
    samples = A.grid.inverse(coeffs).real
    B = PeriodicCoefficient.from_samples(A.grid, samples, kind="mollified",
                                         description={"source": A.kind, "kernel_width": kernel_width})
    return MollifiedCoefficient(B, float(kernel_width), float(q), lq_distance(A, B, q), kappa_target)


def _slope(x, y) -> float:
    x, y = np.asarray(x, float), np.asarray(y, float)
    ok = (x > 0) & (y > 0)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def zero_rho_consistency(A: PeriodicCoefficient, basis: PlaneWaveBasis, rho_list,
                         kernel_width: float = 0.0, q: float = 2.0) -> dict:
    """Compare correctors of A at small rho, of A at rho = 0 and of the smoothed B at rho = 0.

    Fitted constants: ``C_rho = ||grad chi^rho - grad chi^B|| / (rho ||chi^B||_H2 + kappa)``
    and ``C_0 = ||grad chi^0 - grad chi^B|| / kappa`` (kappa = achieved distance).
    """
    moll = mollify(A, kernel_width, q)
    kappa = moll.achieved
    chi0 = solve_cell(A, basis, 0.0)
    chiB = chi0 if kernel_width <= 0 else solve_cell(moll.B, basis, 0.0)
    h2B = basis.hs(chiB.coeffs, 2)
    d0 = basis.seminorm(chi0.coeffs - chiB.coeffs, 1)
    rows = []
    for rho, c in zip(rho_list, pmap(lambda r: solve_cell(A, basis, r), rho_list)):
        d_b = basis.seminorm(c.coeffs - chiB.coeffs, 1)
        d_0 = basis.seminorm(c.coeffs - chi0.coeffs, 1)
        term = rho * h2B + kappa
        rows.append({"rho": float(rho), "diff_to_B": d_b, "diff_to_zero": d_0,
                     "bound_term": term, "constant": d_b / term if term > 0 else 0.0})
    c0 = d0 / kappa if kappa > 0 else 0.0
    return {
        "kappa": kappa,
        "chiB_h2": h2B,
        "diff_zero_to_B": d0,
        "constant_zero": c0,
        "rows": rows,
        "slope_to_zero": _slope([r["rho"] for r in rows], [r["diff_to_zero"] for r in rows]),
        "max_constant": max([r["constant"] for r in rows] + [c0]),
    }


def write_corrector_csv(cs: CorrectorSet, path, energies_path=None) -> None:
    """Rows (j, n_1..n_d, re, im) in basis order; optional JSON energies sidecar."""
    d = cs.basis.d
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["j"] + [f"n_{i + 1}" for i in range(d)] + ["re", "im"])
        for j in range(d):
            for n, c in zip(cs.basis.index, cs.coeffs[:, j]):
                w.writerow([j + 1] + [int(v) for v in n] + [repr(float(c.real)), repr(float(c.imag))])
    if energies_path is not None:
        with open(energies_path, "w") as fh:
            json.dump({"rho": cs.rho, "energies": list(cs.energies), "residual": cs.residual,
                       "bound": cs.bound}, fh, indent=2, sort_keys=True)


def corrector_function(cs: CorrectorSet, j: int) -> PeriodicFunction:
    return cs.basis.to_function(cs.coeffs[:, j])
