"""Bloch decomposition at scale epsilon on a periodic supercell.

The supercell ``S = [0, 2*pi*eps*M)^d`` holds ``M^d`` copies of the scaled cell.
Its Fourier modes ``exp(i k.x / (eps*M))`` split as ``k = M n + q`` with
``q`` in ``{-floor(M/2), ..., ceil(M/2) - 1}^d``, so each mode belongs to exactly
one fiber ``eta_q = q / M`` (``xi_q = eta_q / eps``) and one plane wave ``n``.
With ``kappa = rho * eps`` the fiber operator is ``eps^-2 H^rho(eta_q)``.

Bloch coefficients use L2(Y)-normalized eigenfunctions
``phi_m(y) = (2*pi)^(-d/2) sum_n v_nm exp(i n.y)``:

    b_mq = integral_S g(x) exp(-i x.xi_q) conj(phi_m(x/eps; eta_q)) dx
         = (2*pi)^(-d/2) |S| sum_n conj(v_nm) g_hat(M n + q),

and the xi-integrals of the whole-space theory become sums with weight
``dxi = (eps*M)^-d``, e.g. ``sum |b_mq|^2 dxi = ||g||^2_{L2(S)}``.
"""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._parallel import pmap
from .cell import _slope
from .errors import IncommensurateGrid, RegimeMismatch
from .fiber import PlaneWaveBasis, assemble_fiber
from .spectra import solve_fiber
from .tensor import regime_tensor
from .torus import PeriodicCoefficient, _eval_terms, load_coefficient


def collocation_coefficient(A: PeriodicCoefficient, N: int) -> PeriodicCoefficient:
    """``A`` resampled on the ``2N + 1`` grid the supercell operator needs."""
    if A.grid.n_per_axis == 2 * N + 1:
        return A
    if not A.description or A.description.get("kind") in (None, "samples"):
        raise IncommensurateGrid(f"sampled coefficient needs n_per_axis = {2 * N + 1} for the supercell")
    desc = dict(A.description)
    desc["n_per_axis"] = 2 * N + 1
    return load_coefficient(desc)


def fiber_offsets(M: int, d: int) -> np.ndarray:
    q1 = np.arange(-(M // 2), (M + 1) // 2)
    return np.array(list(itertools.product(q1, repeat=d)), dtype=np.int64).reshape(-1, d)


@dataclass(frozen=True)
class SupercellProblem:
    A: PeriodicCoefficient
    basis: PlaneWaveBasis
    epsilon: float
    M: int
    kappa: float

    def __post_init__(self):
        if self.A.d != self.basis.d:
            raise IncommensurateGrid("coefficient and basis dimensions differ")
        if self.M < 1 or self.epsilon <= 0 or self.kappa < 0:
            raise ValueError("need M >= 1, epsilon > 0, kappa >= 0")

    @property
    def d(self) -> int:
        return self.basis.d

    @property
    def rho(self) -> float:
        return self.kappa / self.epsilon

    @property
    def L(self) -> int:
        """Grid points per axis of the supercell."""
        return self.M * (2 * self.basis.N + 1)

    @property
    def period(self) -> float:
        return 2 * np.pi * self.epsilon * self.M

    @property
    def volume(self) -> float:
        return self.period ** self.d

    @property
    def dxi(self) -> float:
        return (self.epsilon * self.M) ** (-self.d)

    @property
    def grid_shape(self) -> tuple:
        return (self.L,) * self.d

    def points(self) -> list[np.ndarray]:
        x = self.period * np.arange(self.L) / self.L
        return np.meshgrid(*([x] * self.d), indexing="ij")

    @cached_property
    def offsets(self) -> np.ndarray:
        return fiber_offsets(self.M, self.d)

    @property
    def etas(self) -> np.ndarray:
        return self.offsets / self.M

    @property
    def xis(self) -> np.ndarray:
        return self.etas / self.epsilon

    @cached_property
    def mode_index(self) -> np.ndarray:
        """Flat supercell-FFT position of mode ``M n + q``, shape (fibers, basis)."""
        k = self.M * self.basis.index[None, :, :] + self.offsets[:, None, :]
        stride = self.L ** np.arange(self.d - 1, -1, -1, dtype=np.int64)
        return (k % self.L) @ stride

    @cached_property
    def wavevectors(self) -> np.ndarray:
        """Physical wavevector ``(M n + q) / (eps M)`` at every supercell-FFT position."""
        k = self.M * self.basis.index[None, :, :] + self.offsets[:, None, :]
        out = np.zeros((self.L ** self.d, self.d))
        out[self.mode_index.reshape(-1)] = k.reshape(-1, self.d) / (self.epsilon * self.M)
        return out.reshape(self.grid_shape + (self.d,))

    @cached_property
    def spectra(self) -> list:
        """Per fiber: (eps^-2 eigenvalues, unit eigenvectors) over the full basis."""
        P = self.basis.size

        def work(eta):
            w, V = solve_fiber(assemble_fiber(self.A, self.basis, self.rho, eta), P)
            return w / self.epsilon ** 2, V

        return pmap(work, self.etas)

    def forward(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=complex)
        if values.shape != self.grid_shape:
            raise IncommensurateGrid(f"expected samples of shape {self.grid_shape}, got {values.shape}")
        return np.fft.fftn(values) / self.L ** self.d

    def inverse(self, coeffs) -> np.ndarray:
        return np.fft.ifftn(coeffs) * self.L ** self.d

    def l2(self, values) -> float:
        c = self.forward(values)
        return float(np.sqrt(self.volume * np.sum(np.abs(c) ** 2)))

    def coefficient_samples(self) -> np.ndarray:
        """``A(x/eps)`` on the supercell grid (needs the coefficient grid to be 2N+1 per axis)."""
        if self.A.grid.n_per_axis != 2 * self.basis.N + 1:
            raise IncommensurateGrid(
                f"coefficient grid {self.A.grid.n_per_axis} must equal 2N+1 = {2 * self.basis.N + 1}")
        return np.tile(self.A.samples, (self.M,) * self.d + (1, 1))

    def apply_operator(self, values) -> np.ndarray:
        """``kappa^2 Lap^2 u - div(A(x/eps) grad u)`` by Fourier collocation on the supercell."""
        c = self.forward(values)
        kv = self.wavevectors
        grad = np.stack([self.inverse(1j * kv[..., i] * c) for i in range(self.d)], axis=-1)
        flux = np.einsum("...ij,...j->...i", self.coefficient_samples(), grad)
        div = sum(1j * kv[..., i] * self.forward(flux[..., i]) for i in range(self.d))
        k2 = np.sum(kv ** 2, axis=-1)
        return self.inverse(self.kappa ** 2 * k2 ** 2 * c - div)


@dataclass(frozen=True)
class BlochCoefficients:
    values: np.ndarray = field(repr=False)
    modes: int
    dxi: float

    def energy(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self.dxi)


def bloch_transform(P: SupercellProblem, g, M_modes: int | None = None) -> BlochCoefficients:
    """Bloch coefficients ``b[m, q]`` of supercell samples ``g``."""
    modes = M_modes or P.basis.size
    c = P.forward(g).reshape(-1)
    scale = (2 * np.pi) ** (-P.d / 2) * P.volume
    out = np.empty((modes, len(P.offsets)), dtype=complex)
    for iq, (_, V) in enumerate(P.spectra):
        out[:, iq] = scale * (V[:, :modes].conj().T @ c[P.mode_index[iq]])
    return BlochCoefficients(out, modes, P.dxi)


def inverse_bloch(P: SupercellProblem, b: BlochCoefficients) -> np.ndarray:
    """Samples of ``sum_q dxi sum_m b[m,q] exp(i x.xi_q) phi_m(x/eps; eta_q)``."""
    scale = P.dxi * (2 * np.pi) ** (-P.d / 2)
    c = np.zeros(P.L ** P.d, dtype=complex)
    for iq, (_, V) in enumerate(P.spectra):
        c[P.mode_index[iq]] = scale * (V[:, :b.modes] @ b.values[:, iq])
    return P.inverse(c.reshape(P.grid_shape))


def bloch_eigenvalues(P: SupercellProblem) -> np.ndarray:
    """``lambda_m^{kappa,eps}(xi_q) = eps^-2 lambda_m^rho(eps xi_q)`` as (modes, fibers)."""
    return np.stack([w for w, _ in P.spectra], axis=1)


def smooth_test_function(P: SupercellProblem, seed: int = 0, bandwidth: int = 3) -> np.ndarray:
    """Random band-limited supercell function mixing slow and eps-scale modes."""
    rng = np.random.default_rng(seed)
    c = np.zeros(P.grid_shape, dtype=complex)
    kv = P.wavevectors * P.epsilon * P.M
    mask = np.all(np.abs(kv) <= bandwidth, axis=-1)
    fast = np.all(np.abs(kv - np.round(kv / P.M) * P.M) <= 1, axis=-1) & \
        np.all(np.abs(np.round(kv / P.M)) <= 1, axis=-1)
    live = mask | fast
    c[live] = rng.standard_normal(live.sum()) + 1j * rng.standard_normal(live.sum())
    return P.inverse(c)


def identity_report(P: SupercellProblem, seed: int = 0) -> dict:
    """Parseval, Plancherel, inversion and diagonalization on seeded test functions."""
    f = smooth_test_function(P, seed)
    g = smooth_test_function(P, seed + 1)
    bf, bg = bloch_transform(P, f), bloch_transform(P, g)
    norm2 = P.l2(g) ** 2
    parseval = abs(bg.energy() - norm2) / norm2
    inner = P.volume * np.vdot(P.forward(g), P.forward(f))
    inner_b = np.sum(bf.values * bg.values.conj()) * P.dxi
    plancherel = abs(inner - inner_b) / (P.l2(f) * P.l2(g))
    inversion = P.l2(inverse_bloch(P, bg) - g) / P.l2(g)
    diag = diagonalization_check(P, f)
    return {"parseval": float(parseval), "plancherel": float(plancherel),
            "inversion": float(inversion), "diagonalization": diag["relative_residual"],
            "energy_identity": diag["energy_defect"]}


def diagonalization_check(P: SupercellProblem, u, floor: float = 1e-10) -> dict:
    """Compare ``b(A u)`` with ``lambda * b(u)``.

    The headline residual is the relative L2 defect over all (m, xi), matching
    the other identities.  The coefficientwise worst ratio over coefficients
    above ``floor`` times the largest is reported as a diagnostic.
    """
    bu = bloch_transform(P, u)
    Au = P.apply_operator(u)
    bAu = bloch_transform(P, Au)
    lam = bloch_eigenvalues(P)
    pred = lam * bu.values
    err = np.abs(bAu.values - pred)
    relative = float(np.linalg.norm(err) / max(np.linalg.norm(pred), 1e-300))
    big = np.abs(pred) > floor * np.abs(pred).max()
    coefwise = float((err[big] / np.abs(pred[big])).max()) if big.any() else 0.0
    energy_direct = P.volume * np.vdot(P.forward(u), P.forward(Au)).real
    energy_bloch = float(np.sum(lam * np.abs(bu.values) ** 2) * P.dxi)
    return {
        "relative_residual": relative,
        "coefficientwise": coefwise,
        "checked": int(big.sum()),
        "energy": float(energy_direct),
        "energy_defect": float(abs(energy_direct - energy_bloch) / max(abs(energy_bloch), 1e-300)),
    }


def kappa_for(regime: str, eps: float, theta: float | None = None) -> float:
    """Scaling of kappa with eps that realizes each regime."""
    if regime == "zero":
        return eps ** 2
    if regime == "infinity":
        return eps ** 0.5
    if regime == "theta":
        if theta is None or theta <= 0:
            raise RegimeMismatch("theta regime needs theta > 0")
        return theta * eps
    raise RegimeMismatch(f"unknown regime {regime!r}")


def check_regime(regime: str, eps_list, kappas, theta=None) -> None:
    """RegimeMismatch unless rho = kappa/eps tends the declared way as eps decreases."""
    order = np.argsort(eps_list)[::-1]
    rho = np.array([kappas[i] / eps_list[i] for i in order])
    if len(rho) < 2:
        return
    if regime == "zero" and not np.all(np.diff(rho) < 0):
        raise RegimeMismatch("kappa/eps must decrease as eps decreases in the zero regime")
    if regime == "infinity" and not np.all(np.diff(rho) > 0):
        raise RegimeMismatch("kappa/eps must increase as eps decreases in the infinity regime")
    if regime == "theta" and not np.allclose(rho, theta, rtol=1e-12):
        raise RegimeMismatch("kappa/eps must equal theta in the theta regime")


def _unit_problem(A, basis, eps, kappa) -> SupercellProblem:
    M = int(round(1.0 / eps))
    if abs(M * eps - 1.0) > 1e-12:
        raise IncommensurateGrid(f"1/eps = {1 / eps} is not an integer")
    return SupercellProblem(A, basis, eps, M, kappa)


def solve_supercell(P: SupercellProblem, f) -> tuple[np.ndarray, BlochCoefficients]:
    """Zero-mean solution of ``A^{kappa,eps} u = f`` by dividing Bloch coefficients."""
    bf = bloch_transform(P, f)
    lam = bloch_eigenvalues(P)
    zero = int(np.flatnonzero(np.all(P.offsets == 0, axis=1))[0])
    vals = np.zeros_like(bf.values)
    live = np.ones(lam.shape, dtype=bool)
    live[0, zero] = False
    vals[live] = bf.values[live] / lam[live]
    bu = BlochCoefficients(vals, bf.modes, bf.dxi)
    return inverse_bloch(P, bu), bu


def higher_mode_energy(P: SupercellProblem, u_eps) -> dict:
    """L2 norm of the part of ``u_eps`` carried by Bloch modes m >= 2."""
    b = bloch_transform(P, u_eps)
    v = b.values.copy()
    v[0] = 0.0
    norm = P.l2(inverse_bloch(P, BlochCoefficients(v, b.modes, b.dxi)))
    return {"higher_mode_norm": norm, "first_mode_energy": float(np.sum(np.abs(b.values[0]) ** 2) * b.dxi)}


def _weak_norm(P: SupercellProblem, field_values) -> float:
    """``(|S| sum_k (1+|k|^2)^-1 |F_hat(k)|^2)^(1/2)`` summed over vector components."""
    k2 = np.sum(P.wavevectors ** 2, axis=-1)
    tot = 0.0
    for i in range(field_values.shape[-1]):
        tot += np.sum(np.abs(P.forward(field_values[..., i])) ** 2 / (1.0 + k2))
    return float(np.sqrt(P.volume * tot))


def homogenization_experiment(A: PeriodicCoefficient, basis: PlaneWaveBasis, f_terms, regime: str,
                              eps_list, theta: float | None = None, kappas=None,
                              alternative: np.ndarray | None = None) -> dict:
    """Compare the supercell solution with the homogenized one on the fixed torus [0, 2*pi)^d.

    ``f_terms`` uses the trigonometric term syntax of coefficient descriptions
    and must have zero mean.  ``kappas`` defaults to the regime scaling.  If
    ``alternative`` (a d x d tensor) is given, the error of the homogenized
    solution built from it is reported as well.
    """
    eps_list = [float(e) for e in eps_list]
    kappas = [kappa_for(regime, e, theta) for e in eps_list] if kappas is None else list(kappas)
    check_regime(regime, eps_list, kappas, theta)
    T = regime_tensor(A, basis, regime, theta).matrix
    rows = []
    for eps, kappa in zip(eps_list, kappas):
        P = _unit_problem(A, basis, eps, kappa)
        x = P.points()
        f = _eval_terms(f_terms, x, P.d).astype(complex)
        fc = P.forward(f)
        if abs(fc.reshape(-1)[0]) > 1e-12 * max(1.0, np.abs(fc).max()):
            raise ValueError("forcing must have zero mean")
        u, bu = solve_supercell(P, f)
        kv = P.wavevectors
        uc = P.forward(u)

        def homogenized(tensor):
            sym = np.einsum("...i,ij,...j->...", kv, tensor, kv)
            c = np.zeros_like(fc)
            nz = sym > 0
            c[nz] = fc[nz] / sym[nz]
            return c

        sc = homogenized(T)
        ustar = P.inverse(sc)
        l2 = P.l2(u - ustar) / P.l2(ustar)
        grad_u = np.stack([P.inverse(1j * kv[..., i] * uc) for i in range(P.d)], axis=-1)
        flux = np.einsum("...ij,...j->...i", P.coefficient_samples(), grad_u)
        grad_s = np.stack([P.inverse(1j * kv[..., i] * sc) for i in range(P.d)], axis=-1)
        flux_s = np.einsum("ij,...j->...i", T, grad_s)
        flux_err = _weak_norm(P, flux - flux_s) / _weak_norm(P, flux_s)
        hm = higher_mode_energy(P, u)
        lam = bloch_eigenvalues(P)
        row = {"epsilon": eps, "kappa": kappa, "rho": kappa / eps, "regime": regime,
               "l2_error": l2, "flux_weak_error": flux_err,
               "higher_mode_norm": hm["higher_mode_norm"],
               "energy": float(np.sum(lam * np.abs(bu.values) ** 2) * bu.dxi)}
        if alternative is not None:
            alt = P.inverse(homogenized(np.asarray(alternative)))
            row["alternative_l2_error"] = P.l2(u - alt) / P.l2(alt)
        rows.append(row)
    return {
        "regime": regime,
        "tensor": T.tolist(),
        "rows": rows,
        "l2_slope": _slope(eps_list, [r["l2_error"] for r in rows]),
        "higher_mode_slope": _slope(eps_list, [r["higher_mode_norm"] for r in rows]),
    }


def write_convergence_csv(results, path) -> None:
    """Rows (epsilon, kappa, regime, l2_error, flux_weak_error, higher_mode_norm)."""
    cols = ["epsilon", "kappa", "regime", "l2_error", "flux_weak_error", "higher_mode_norm"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for res in results:
            for r in res["rows"]:
                w.writerow([r["regime"] if c == "regime" else repr(float(r[c])) for c in cols])


def gaussian_bump(x: list[np.ndarray], center: float, width: float) -> np.ndarray:
    r2 = sum((xi - center) ** 2 for xi in x)
    return np.exp(-r2 / (2 * width ** 2))


def transform_to_fourier_limit(A: PeriodicCoefficient, basis: PlaneWaveBasis, regime: str, eps_list,
                               theta: float | None = None, radius: float = 4.0, width: float = 1.5,
                               window: float = 1.0) -> dict:
    """First Bloch coefficient of a fixed Gaussian against its Fourier transform.

    The supercell has fixed period ``2*pi*radius`` (``M = radius / eps``) and
    the Gaussian sits at its centre, so the xi-grid ``q / radius`` does not
    change with eps.  The Fourier transform is
    ``g_hat(xi) = (2*pi)^(-d/2) integral g(x) exp(-i x.xi) dx``.
    """
    d = basis.d
    center = np.pi * radius
    rows = []
    for eps in eps_list:
        kappa = kappa_for(regime, eps, theta)
        M = int(round(radius / eps))
        if abs(M * eps - radius) > 1e-9:
            raise IncommensurateGrid("radius / eps must be an integer")
        P = SupercellProblem(A, basis, eps, M, kappa)
        g = gaussian_bump(P.points(), center, width)
        tail = float(np.max(np.abs(g[(0,) * d])))
        gc = P.forward(g).reshape(-1)
        scale = (2 * np.pi) ** (-d / 2) * P.volume
        worst = 0.0
        for iq, q in enumerate(P.offsets):
            xi = q / radius
            if np.max(np.abs(xi)) > window:
                continue
            w, V = solve_fiber(assemble_fiber(A, basis, P.rho, q / M), 1)
            b1 = scale * np.vdot(V[:, 0], gc[P.mode_index[iq]])
            exact = width ** d * np.exp(-width ** 2 * np.sum(xi ** 2) / 2) * np.exp(-1j * center * np.sum(xi))
            worst = max(worst, abs(b1 - exact))
        rows.append({"epsilon": float(eps), "kappa": kappa, "rho": kappa / eps,
                     "max_error": worst, "boundary_tail": tail})
    return {"regime": regime, "rows": rows,
            "slope": _slope([r["epsilon"] for r in rows], [r["max_error"] for r in rows])}
