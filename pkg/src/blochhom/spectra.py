"""Bloch eigenvalues, gauge-fixed eigenvectors and band sweeps."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from ._parallel import pmap
from .errors import DegenerateGauge, EigensolverFailure
from .fiber import FiberOperator, PlaneWaveBasis, assemble_fiber
from .torus import PeriodicCoefficient

# Neumann spectrum of -Lap on [0, 2*pi]^d is {|k|^2 / 4 : k in N^d}; the second value is 1/4.
LAMBDA2_NEUMANN = 0.25
# Second periodic eigenvalue of the bilaplacian on Y: |n|^4 with |n| = 1.
KAPPA2_BILAPLACIAN = 1.0
GAUGE_TOL = 1e-8


def _scaled_cholesky(H: np.ndarray, shift: float = 1.0):
    """Cholesky factor of ``S (H + shift) S`` with the Jacobi scaling ``S``."""
    s = 1.0 / np.sqrt(np.abs(np.real(np.diag(H))) + shift)
    K = s[:, None] * H * s[None, :]
    K[np.diag_indices_from(K)] += shift * s ** 2
    return sla.cho_factor(K, lower=True, check_finite=False), s


def _refine(H: np.ndarray, V: np.ndarray, factor, s) -> tuple[np.ndarray, np.ndarray]:
    """One shifted inverse-iteration step followed by Rayleigh-Ritz.

    Removes the roundoff that a direct solve leaves in high-frequency
    components, where ``H`` is as large as ``rho^2 N^4``.
    """
    X = s[:, None] * sla.cho_solve(factor, s[:, None] * V, check_finite=False)
    Q, _ = np.linalg.qr(X)
    G = Q.conj().T @ (H @ Q)
    w, Z = np.linalg.eigh(0.5 * (G + G.conj().T))
    return w, Q @ Z


def _phase_fix(V: np.ndarray) -> np.ndarray:
    V = V.copy()
    for j in range(V.shape[1]):
        c = V[0, j]
        if abs(c) > GAUGE_TOL:
            V[:, j] *= abs(c) / c
            V[0, j] = abs(c)
    return V


def solve_fiber(F: FiberOperator, M: int, gauge: bool = False, refine: int = 2):
    """Lowest ``M`` eigenpairs of a fiber matrix.

    Eigenvectors are unit vectors in coefficient space (``||phi||_{L2} = 1`` for
    ``phi = (2*pi)^(-d/2) sum v_n e_n``), with the constant-mode entry made real
    and positive where it is not negligible.  With ``gauge=True`` the first
    vector must have a constant-mode amplitude above 1e-8.
    """
    H = F.matrix
    P = H.shape[0]
    if not 1 <= M <= P:
        raise ValueError(f"mode count {M} outside [1, {P}]")
    try:
        w, V = sla.eigh(H, subset_by_index=[0, M - 1], check_finite=False)
        if M < P and refine:
            factor, s = _scaled_cholesky(H)
            for _ in range(refine):
                w, V = _refine(H, V, factor, s)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolverFailure(str(exc)) from exc
    res = np.linalg.norm(H @ V - V * w, axis=0)
    if not np.all(np.isfinite(w)) or np.any(res > 1e-8 * (1.0 + np.abs(w))):
        raise EigensolverFailure(f"eigen-residual {res.max():.3e} too large")
    V = _phase_fix(V)
    if gauge and abs(V[0, 0]) < GAUGE_TOL:
        raise DegenerateGauge(f"constant-mode amplitude {abs(V[0, 0]):.2e} at eta={F.eta}")
    return w, V


@dataclass(frozen=True)
class GaugeFixedEigenfunction:
    coeffs: np.ndarray = field(repr=False)
    eta: tuple
    normalization_residual: float
    l2_norm: float


def gauge_fix(vec, d: int, eta=None) -> GaugeFixedEigenfunction:
    """Rotate and scale so the constant coefficient equals ``(2*pi)^(-d/2)``.

    The constant mode must come first.  The L2 norm of the result is reported,
    not re-imposed.
    """
    vec = np.asarray(vec, dtype=complex)
    c0 = vec[0]
    if abs(c0) < GAUGE_TOL * max(1.0, np.linalg.norm(vec)):
        raise DegenerateGauge(f"constant-mode amplitude {abs(c0):.2e} too small")
    target = (2 * np.pi) ** (-d / 2)
    coeffs = vec * (target / c0)
    coeffs[0] = target
    l2 = float((2 * np.pi) ** (d / 2) * np.linalg.norm(coeffs))
    eta = tuple(np.zeros(d)) if eta is None else tuple(np.atleast_1d(eta).tolist())
    return GaugeFixedEigenfunction(coeffs, eta, abs(coeffs[0] - target), l2)


def sorted_symbol_values(d: int, m: int, power: int) -> float:
    """m-th smallest value (1-based, with multiplicity) of ``1 + |n|^power`` over Z^d."""
    r = 1
    while True:
        axes = np.meshgrid(*([np.arange(-r, r + 1)] * d), indexing="ij")
        n2 = sum(a.astype(float) ** 2 for a in axes).reshape(-1)
        vals = np.sort(1.0 + n2 ** (power / 2))
        # values up to 1 + r^power are complete inside the box
        if vals.size >= m and vals[m - 1] <= 1.0 + r ** power:
            break
        r *= 2
    return float(vals[m - 1])


def mu_m(d: int, m: int) -> float:
    return sorted_symbol_values(d, m, 2)


def nu_m(d: int, m: int) -> float:
    return sorted_symbol_values(d, m, 4)


@dataclass(frozen=True)
class BlochBand:
    rho: float
    etas: np.ndarray = field(repr=False)
    lambdas: np.ndarray = field(repr=False)
    modes_requested: int
    eigvecs: np.ndarray = field(repr=False)
    gauge_residual: np.ndarray = field(repr=False)
    lipschitz: np.ndarray = field(repr=False)
    lipschitz_constant: float
    gauge_radius: float | None


def band_sweep(A: PeriodicCoefficient, basis: PlaneWaveBasis, rho: float, eta_grid, M: int) -> BlochBand:
    """Solve every fiber on ``eta_grid`` (rows of shape (d,)).

    ``lipschitz[m]`` is the largest difference quotient of band m between
    consecutive grid points; ``lipschitz_constant`` is the fitted C in
    ``|lambda_m(eta) - lambda_m(eta')| <= C (mu_m + rho^2 nu_m) |eta - eta'|``.
    ``gauge_radius`` is the smallest |eta| at which the first band could not be
    gauge fixed (None if it always could).
    """
    etas = np.asarray(eta_grid, dtype=float).reshape(-1, basis.d)

    def work(eta):
        return solve_fiber(assemble_fiber(A, basis, rho, eta), M)

    out = pmap(work, etas)
    lambdas = np.array([w for w, _ in out])
    vecs = np.array([V for _, V in out])
    d = basis.d
    resid = np.full((len(etas), M), np.nan)
    fixed = vecs.copy()
    radius = None
    for i, eta in enumerate(etas):
        for m in range(M):
            try:
                g = gauge_fix(vecs[i, :, m], d, eta)
            except DegenerateGauge:
                if m == 0:
                    r = float(np.linalg.norm(eta))
                    radius = r if radius is None else min(radius, r)
                continue
            fixed[i, :, m] = g.coeffs
            resid[i, m] = g.normalization_residual
    if len(etas) > 1:
        step = np.linalg.norm(np.diff(etas, axis=0), axis=1)
        ok = step > 0
        quot = np.abs(np.diff(lambdas, axis=0))[ok] / step[ok, None]
        lip = quot.max(axis=0) if quot.size else np.zeros(M)
    else:
        lip = np.zeros(M)
    scale = np.array([mu_m(d, m + 1) + rho ** 2 * nu_m(d, m + 1) for m in range(M)])
    for a in (lambdas, fixed, resid, lip, etas):
        a.setflags(write=False)
    return BlochBand(float(rho), etas, lambdas, M, fixed, resid, lip,
                     float(np.max(lip / scale)), radius)


def write_band_csv(band: BlochBand, path) -> None:
    """Columns eta_1..eta_d, m, lambda, gauge_residual; rows by eta then m."""
    d = band.etas.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"eta_{i + 1}" for i in range(d)] + ["m", "lambda", "gauge_residual"])
        for i, eta in enumerate(band.etas):
            for m in range(band.modes_requested):
                w.writerow([repr(float(e)) for e in eta]
                           + [m + 1, repr(float(band.lambdas[i, m])), repr(float(band.gauge_residual[i, m]))])


def biharmonic_energy(F: FiberOperator, v) -> float:
    """``<(grad + i eta)^4 phi, phi>`` for the unit coefficient vector ``v``."""
    k2 = np.sum(F.shifted ** 2, axis=1)
    return float(np.sum(k2 ** 2 * np.abs(v) ** 2))


def rho_monotonicity(A: PeriodicCoefficient, basis: PlaneWaveBasis, eta, theta: float, rho: float) -> dict:
    """Two-sided bound on ``lambda_1^rho(eta) - lambda_1^theta(eta)`` for ``theta <= rho``.

    Min-max with the first eigenvectors as trial functions gives
    ``(rho^2 - theta^2) D(rho) <= lambda^rho - lambda^theta <= (rho^2 - theta^2) D(theta)``
    where ``D(r)`` is the biharmonic energy of the first eigenvector at ``r``.
    """
    if not 0 <= theta <= rho:
        raise ValueError("need 0 <= theta <= rho")
    Ft = assemble_fiber(A, basis, theta, eta)
    Fr = assemble_fiber(A, basis, rho, eta)
    wt, Vt = solve_fiber(Ft, 1)
    wr, Vr = solve_fiber(Fr, 1)
    gap = rho ** 2 - theta ** 2
    diff = float(wr[0] - wt[0])
    lower = gap * biharmonic_energy(Fr, Vr[:, 0])
    upper = gap * biharmonic_energy(Ft, Vt[:, 0])
    return {"difference": diff, "lower": lower, "upper": upper,
            "holds": bool(lower - 1e-10 * (1 + abs(diff)) <= diff <= upper + 1e-10 * (1 + abs(diff)))}
