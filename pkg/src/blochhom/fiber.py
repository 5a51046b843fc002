"""Plane-wave Galerkin matrices of the shifted form and the Garding certificate.

Matrices are stored in coefficient space: entry (m, n) is the form evaluated on
``e_n, e_m`` divided by ``(2*pi)^d``, so the mass matrix is the identity and a
coefficient vector ``c`` stands for ``sum_n c_n exp(i n.y)``.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadDimension, EtaOutOfCell, GardingViolation
from .kernels import toeplitz_form
from .torus import PeriodicCoefficient, PeriodicFunction, TorusGrid


@dataclass(frozen=True)
class PlaneWaveBasis:
    """Modes ``|n|_inf <= N`` ordered by (|n|_inf, |n|^2, lexicographic); zero first."""

    d: int
    N: int
    index: np.ndarray = field(repr=False, compare=False)

    @classmethod
    def create(cls, d: int, N: int) -> "PlaneWaveBasis":
        if d < 1 or N < 1:
            raise BadDimension(f"need d >= 1 and N >= 1, got d={d}, N={N}")
        axes = np.meshgrid(*([np.arange(-N, N + 1)] * d), indexing="ij")
        pts = np.stack([a.reshape(-1) for a in axes], axis=1)
        keys = [pts[:, i] for i in reversed(range(d))]
        keys += [np.sum(pts ** 2, axis=1), np.max(np.abs(pts), axis=1)]
        order = np.lexsort(keys)
        index = np.ascontiguousarray(pts[order])
        index.setflags(write=False)
        return cls(d, N, index)

    @property
    def size(self) -> int:
        return self.index.shape[0]

    @property
    def grid(self) -> TorusGrid:
        return TorusGrid(self.d, 2 * self.N + 1)

    def norm_sq(self) -> np.ndarray:
        return np.sum(self.index.astype(float) ** 2, axis=1)

    def to_function(self, coeffs, grid: TorusGrid | None = None) -> PeriodicFunction:
        grid = grid or self.grid
        if grid.N < self.N:
            raise BadDimension("grid too coarse for the basis")
        full = np.zeros(grid.n_per_axis ** self.d, dtype=complex)
        full[grid.flat_index(self.index)] = coeffs
        return PeriodicFunction.from_coeffs(grid, full.reshape(grid.shape))

    def from_function(self, u: PeriodicFunction) -> np.ndarray:
        if u.grid.N < self.N:
            raise BadDimension("function grid too coarse for the basis")
        return u.coeffs.reshape(-1)[u.grid.flat_index(self.index)].copy()

    def l2(self, coeffs) -> float:
        """L2(Y) norm of the function with these coefficients."""
        return float((2 * np.pi) ** (self.d / 2) * np.linalg.norm(coeffs))

    def seminorm(self, coeffs, order: int) -> float:
        """L2(Y) norm of the order-th derivative tensor (``sum |n|^(2 order) |c_n|^2``)."""
        return self._weighted(coeffs, self.norm_sq() ** order)

    def hs(self, coeffs, s: float) -> float:
        return self._weighted(coeffs, (1.0 + self.norm_sq()) ** s)

    def _weighted(self, coeffs, w) -> float:
        """Weighted coefficient norm; extra columns of ``coeffs`` are summed over."""
        c = np.asarray(coeffs)
        w = w.reshape((-1,) + (1,) * (c.ndim - 1))
        return float((2 * np.pi) ** (self.d / 2) * np.sqrt(np.sum(w * np.abs(c) ** 2)))


def garding_constants(alpha: float, upper: float, d: int, rho: float) -> dict:
    """Explicit constants of the Garding shift.

    The cross term ``2 Re int A grad u . conj(i eta u)`` is bounded by
    ``C1 ||grad u|| ||u||`` with ``C1 = 2 |A|_inf |eta|_max`` and then by
    ``(alpha/2)||grad u||^2 + C1 C2 ||u||^2`` with ``C2 = C1 / (2 alpha)``;
    ``C4 = |A|_inf d / 4`` bounds the ``|eta|^2`` term.  ``|eta|_max = sqrt(d)/2``
    on the dual cell.  The biharmonic part contributes ``16 rho^2``.
    """
    eta_max = np.sqrt(d) / 2.0
    c1 = 2.0 * upper * eta_max
    c2 = c1 / (2.0 * alpha)
    c4 = upper * d / 4.0
    cstar = alpha / 2.0 + c1 * c2 + c4 + 16.0 * rho ** 2
    return {"C1": c1, "C2": c2, "C1C2": c1 * c2, "C4": c4, "Cstar": cstar}


@dataclass(frozen=True)
class FiberOperator:
    basis: PlaneWaveBasis
    rho: float
    eta: tuple
    matrix: np.ndarray = field(repr=False)
    garding_constant: float
    alpha: float
    upper: float
    flags: tuple = ()
    hermitian_defect: float = 0.0
    coefficient: PeriodicCoefficient | None = field(default=None, repr=False, compare=False)

    @property
    def shifted(self) -> np.ndarray:
        """Basis wavevectors ``n + eta``."""
        return self.basis.index + np.asarray(self.eta)


def _check_eta(eta, d: int) -> np.ndarray:
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    if eta.shape != (d,):
        raise BadDimension(f"quasimomentum must have {d} components")
    if np.any(np.abs(eta) > 0.5 + 1e-12):
        raise EtaOutOfCell(f"eta={eta.tolist()} lies outside [-1/2, 1/2]^d")
    return eta


def coefficient_table(A: PeriodicCoefficient) -> np.ndarray:
    return A.fourier.reshape((-1, A.d, A.d))


def form_matrix(A: PeriodicCoefficient, basis: PlaneWaveBasis, left, right) -> np.ndarray:
    """``left[m] . A_hat(m - n) . right[n]`` over the basis."""
    return toeplitz_form(left, right, coefficient_table(A), A.grid.n_per_axis, basis.index)


def assemble_fiber(A: PeriodicCoefficient, basis: PlaneWaveBasis, rho: float, eta) -> FiberOperator:
    """Hermitian matrix of the shifted form at quasimomentum ``eta``.

    Entry (m, n) is ``(m+eta).A_hat(m-n)(n+eta) + rho^2 delta_mn |n+eta|^4``.
    Coefficient lookups are periodic in the coefficient grid, so a grid with
    exactly ``2N + 1`` points gives Fourier collocation and a finer grid gives
    exact Galerkin for band-limited coefficients.  Non-fatal flags:
    ``truncation`` (coefficient bandwidth beyond 2N) and ``aliased``.
    """
    if A.d != basis.d:
        raise BadDimension(f"coefficient is {A.d}-dimensional, basis is {basis.d}-dimensional")
    rho = float(rho)
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    eta = _check_eta(eta, basis.d)
    k = basis.index + eta
    H = form_matrix(A, basis, k, k)
    H[np.diag_indices_from(H)] += rho ** 2 * np.sum(k ** 2, axis=1) ** 2
    defect = float(np.abs(H - H.conj().T).max())
    H = 0.5 * (H + H.conj().T)
    H.setflags(write=False)

    flags = []
    band = A.bandwidth()
    if band > 2 * basis.N:
        flags.append("truncation")
    if 2 * basis.N > A.grid.N and A.grid.n_per_axis < 2 * basis.N + band + 1:
        flags.append("aliased")
    cst = garding_constants(A.alpha, A.upper, basis.d, rho)["Cstar"]
    return FiberOperator(basis, rho, tuple(eta.tolist()), H, cst, A.alpha, A.upper,
                         tuple(flags), defect, A)


@dataclass(frozen=True)
class GardingReport:
    trials: int
    min_slack: float
    worst_case: float
    constants: dict
    slacks: np.ndarray = field(repr=False)


def garding_slack(F: FiberOperator, u) -> float:
    """``a(u,u) + C*||u||^2 - (rho^2/6)||Lap u||^2 - (alpha/2)||u||_{H1}^2`` in coefficient units."""
    u = np.asarray(u, dtype=complex)
    n2 = F.basis.norm_sq()
    p = np.abs(u) ** 2
    lhs = np.real(np.vdot(u, F.matrix @ u)) + F.garding_constant * p.sum()
    rhs = F.rho ** 2 / 6.0 * np.sum(n2 ** 2 * p) + F.alpha / 2.0 * np.sum((1.0 + n2) * p)
    return float(lhs - rhs)


def garding_margin(F: FiberOperator) -> float:
    """Smallest slack over all unit vectors (lowest eigenvalue of the slack form)."""
    n2 = F.basis.norm_sq()
    shift = F.garding_constant - F.rho ** 2 / 6.0 * n2 ** 2 - F.alpha / 2.0 * (1.0 + n2)
    return float(np.linalg.eigvalsh(F.matrix + np.diag(shift))[0])


def garding_check(F: FiberOperator, trials: int, seed: int = 0, tol: float = 1e-9) -> GardingReport:
    """Evaluate the Garding slack on seeded random unit vectors.

    Trial vectors have Gaussian entries damped by ``(1 + |n|^2)^(-s)`` with a
    random ``s`` in [0, 3], so smooth and rough trials are both sampled.

    Raises GardingViolation if any slack is below ``-tol``.  The report also
    carries the exact worst case over all unit vectors.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    P = F.basis.size
    slacks = np.empty(trials)
    n2 = F.basis.norm_sq()
    for t in range(trials):
        u = rng.standard_normal(P) + 1j * rng.standard_normal(P)
        u *= (1.0 + n2) ** (-rng.uniform(0.0, 3.0))
        u /= np.linalg.norm(u)
        slacks[t] = garding_slack(F, u)
    worst = float(slacks.min())
    if worst < -tol:
        raise GardingViolation(f"Garding slack {worst:.3e} below {-tol:.1e}")
    consts = garding_constants(F.alpha, F.upper, F.basis.d, F.rho)
    return GardingReport(trials, worst, garding_margin(F), consts, slacks)


# binary dump: magic, version, d, N, rho, eta[d], then P*P complex128 row-major
_MAGIC = b"BHFB"


def write_fiber_binary(F: FiberOperator, path) -> None:
    d = F.basis.d
    header = struct.pack(f"<4sIiid{d}d", _MAGIC, 1, d, F.basis.N, F.rho, *F.eta)
    with open(Path(path), "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(F.matrix, dtype="<c16").tobytes())


def read_fiber_binary(path) -> dict:
    raw = Path(path).read_bytes()
    magic, version, d, N = struct.unpack_from("<4sIii", raw, 0)
    if magic != _MAGIC:
        raise ValueError("not a fiber dump")
    off = struct.calcsize("<4sIii")
    rho, *eta = struct.unpack_from(f"<d{d}d", raw, off)
    off += struct.calcsize(f"<d{d}d")
    P = (2 * N + 1) ** d
    mat = np.frombuffer(raw, dtype="<c16", offset=off, count=P * P).reshape(P, P)
    return {"version": version, "d": d, "N": N, "rho": rho, "eta": tuple(eta), "matrix": mat}
