"""Periodic fields on the torus Y = [0, 2*pi)^d.

Fourier convention used everywhere in the package::

    u_hat(n) = (2*pi)^(-d) * integral_Y u(y) exp(-i n.y) dy,   u(y) = sum_n u_hat(n) exp(i n.y)

so the mean value of ``u`` is ``u_hat(0)``.  On a grid with ``n`` points per
axis the coefficients are the DFT divided by ``n^d`` and are stored in numpy
FFT order.  Coefficients are periodic in the index (``k`` and ``k + n`` name
the same stored entry); this is what makes the fiber matrices reduce to
Fourier collocation when the coefficient grid has exactly ``2N + 1`` points.

L2 and Sobolev norms are *unnormalized* integrals over Y, i.e.
``||u||_{L2}^2 = integral_Y |u|^2 = (2*pi)^d * sum |u_hat|^2``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .errors import BadDimension, NotElliptic, NotSymmetric

TWO_PI = 2.0 * np.pi
SCHEMA_VERSION = 1


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TorusGrid:
    """Uniform collocation lattice ``y_k = 2*pi*k/n`` on ``[0, 2*pi)^d``."""

    d: int
    n_per_axis: int

    def __post_init__(self):
        if self.d < 1:
            raise BadDimension(f"dimension must be >= 1, got {self.d}")
        if self.n_per_axis < 3 or self.n_per_axis % 2 == 0:
            raise BadDimension(f"n_per_axis must be odd and >= 3, got {self.n_per_axis}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_per_axis,) * self.d

    @property
    def N(self) -> int:
        """Largest resolved frequency per axis."""
        return (self.n_per_axis - 1) // 2

    @property
    def spacing(self) -> float:
        return TWO_PI / self.n_per_axis

    @property
    def cell_volume(self) -> float:
        return TWO_PI ** self.d

    @property
    def points(self) -> np.ndarray:
        return TWO_PI * np.arange(self.n_per_axis) / self.n_per_axis

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*([self.points] * self.d), indexing="ij")

    def frequencies(self) -> list[np.ndarray]:
        """Integer wavenumbers per axis, broadcast to the grid shape (FFT order)."""
        k = np.fft.fftfreq(self.n_per_axis, d=1.0 / self.n_per_axis).round().astype(int)
        return np.meshgrid(*([k] * self.d), indexing="ij")

    def wavenumber_sq(self) -> np.ndarray:
        return sum(k.astype(float) ** 2 for k in self.frequencies())

    def forward(self, values: np.ndarray) -> np.ndarray:
        axes = tuple(range(self.d))
        return np.fft.fftn(values, axes=axes) / self.n_per_axis ** self.d

    def inverse(self, coeffs: np.ndarray) -> np.ndarray:
        axes = tuple(range(self.d))
        return np.fft.ifftn(coeffs, axes=axes) * self.n_per_axis ** self.d

    def flat_index(self, k: np.ndarray) -> np.ndarray:
        """Row-major position of integer index ``k`` (last axis of size d) in FFT order."""
        k = np.asarray(k) % self.n_per_axis
        out = np.zeros(k.shape[:-1], dtype=np.int64)
        for i in range(self.d):
            out = out * self.n_per_axis + k[..., i]
        return out


def _reflect(coeffs: np.ndarray, d: int) -> np.ndarray:
    """Return ``c(-k)`` laid out at position ``k`` (FFT order, first d axes)."""
    axes = tuple(range(d))
    return np.roll(np.flip(coeffs, axis=axes), shift=1, axis=axes)


@dataclass(frozen=True)
class PeriodicFunction:
    grid: TorusGrid
    values: np.ndarray
    coeffs: np.ndarray

    @classmethod
    def from_values(cls, grid: TorusGrid, values) -> "PeriodicFunction":
        values = np.asarray(values, dtype=complex)
        if values.shape != grid.shape:
            raise BadDimension(f"expected values of shape {grid.shape}, got {values.shape}")
        return cls(grid, _freeze(values), _freeze(grid.forward(values)))

    @classmethod
    def from_coeffs(cls, grid: TorusGrid, coeffs) -> "PeriodicFunction":
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.shape != grid.shape:
            raise BadDimension(f"expected coefficients of shape {grid.shape}, got {coeffs.shape}")
        return cls(grid, _freeze(grid.inverse(coeffs)), _freeze(coeffs))

    def coefficient(self, k) -> complex:
        k = np.asarray(k, dtype=int)
        return complex(self.coeffs.reshape(-1)[self.grid.flat_index(k)])

    def l2_norm(self) -> float:
        return sobolev_norm(self, 0)

    def gradient(self) -> list["PeriodicFunction"]:
        return [PeriodicFunction.from_coeffs(self.grid, 1j * k * self.coeffs)
                for k in self.grid.frequencies()]


def mean_value(u: PeriodicFunction) -> complex:
    """Average of ``u`` over the cell, ``(2*pi)^-d * integral_Y u``."""
    return complex(u.coeffs.reshape(-1)[0])


def sobolev_norm(u: PeriodicFunction, s: float) -> float:
    """``(2*pi)^(d/2) * (sum_n (1 + |n|^2)^s |u_hat(n)|^2)^(1/2)``.

    The ``(2*pi)^(d/2)`` factor makes ``s = 0`` the plain L2(Y) norm.
    """
    weight = (1.0 + u.grid.wavenumber_sq()) ** s
    total = np.sum(weight * np.abs(u.coeffs) ** 2)
    return float(np.sqrt(u.grid.cell_volume * total))


@dataclass(frozen=True)
class PeriodicCoefficient:
    """Symmetric, uniformly elliptic matrix field ``A(y)`` sampled on a grid.

    ``fourier`` has shape ``grid.shape + (d, d)``; ``hat(k)`` looks entries up
    with periodic indexing.  ``alpha`` is the grid minimum of the smallest
    eigenvalue and ``upper`` the grid maximum of the spectral norm.
    """

    grid: TorusGrid
    samples: np.ndarray
    fourier: np.ndarray
    alpha: float
    upper: float
    kind: str = "samples"
    description: Mapping[str, Any] = field(default_factory=dict, compare=False)

    @property
    def d(self) -> int:
        return self.grid.d

    @property
    def mean(self) -> np.ndarray:
        """``M_Y(A)``, the cell average, as a real d x d matrix."""
        return self.fourier.reshape((-1, self.d, self.d))[0].real.copy()

    def harmonic_mean(self) -> np.ndarray:
        """``M_Y(A^-1)^-1`` from the grid samples (quadrature is exact on the grid)."""
        inv = np.linalg.inv(self.samples.reshape((-1, self.d, self.d)))
        return np.linalg.inv(inv.mean(axis=0))

    def hat(self, k) -> np.ndarray:
        """Fourier coefficient matrices at integer indices ``k`` (shape ``(..., d)``)."""
        flat = self.fourier.reshape((-1, self.d, self.d))
        return flat[self.grid.flat_index(np.asarray(k, dtype=int))]

    def bandwidth(self, tol: float = 1e-13) -> int:
        """Largest |k|_inf carrying a coefficient above ``tol`` (relative to |A_hat(0)|)."""
        mag = np.abs(self.fourier).max(axis=(-2, -1))
        scale = max(mag.reshape(-1)[0], 1e-300)
        kmax = np.max(np.abs(np.stack(self.grid.frequencies())), axis=0)
        live = mag > tol * scale
        return int(kmax[live].max()) if live.any() else 0

    @classmethod
    def from_samples(cls, grid: TorusGrid, samples, kind="samples", description=None):
        d = grid.d
        samples = np.asarray(samples, dtype=float)
        if samples.shape == grid.shape:
            samples = samples[..., None, None] * np.eye(d)
        if samples.shape != grid.shape + (d, d):
            raise BadDimension(f"expected samples of shape {grid.shape + (d, d)}, got {samples.shape}")
        scale = max(1.0, float(np.abs(samples).max()))
        if np.abs(samples - np.swapaxes(samples, -1, -2)).max() > 1e-12 * scale:
            raise NotSymmetric("coefficient samples are not symmetric")
        samples = 0.5 * (samples + np.swapaxes(samples, -1, -2))
        eig = np.linalg.eigvalsh(samples.reshape((-1, d, d)))
        alpha = float(eig[:, 0].min())
        if alpha <= 1e-12:
            raise NotElliptic(f"smallest eigenvalue {alpha:.3e} is not positive")
        upper = float(np.abs(eig).max())
        fourier = grid.forward(samples.astype(complex))
        # exact conjugate symmetry A_hat(-k) = conj(A_hat(k))
        fourier = 0.5 * (fourier + np.conj(_reflect(fourier, d)))
        return cls(grid, _freeze(samples), _freeze(fourier), alpha, upper, kind,
                   dict(description or {}))


# ---------------------------------------------------------------------------
# coefficient descriptions
# ---------------------------------------------------------------------------

def _trig_factor(token: str, y: np.ndarray) -> np.ndarray:
    token = token.strip()
    if token in ("1", ""):
        return np.ones_like(y)
    name, _, freq = token.partition(":")
    k = int(freq or 1)
    if name == "cos":
        return np.cos(k * y)
    if name == "sin":
        return np.sin(k * y)
    raise BadDimension(f"unknown trig factor {token!r}")


def _eval_terms(terms, mesh, d) -> np.ndarray:
    out = np.zeros(mesh[0].shape)
    for term in terms:
        factors = term.get("f", ["1"] * d)
        if len(factors) != d:
            raise BadDimension(f"trig term {term} needs {d} factors")
        val = float(term["c"]) * np.ones(mesh[0].shape)
        for axis, tok in enumerate(factors):
            val = val * _trig_factor(tok, mesh[axis])
        out += val
    return out


def _laminate_fraction(grid: TorusGrid, length: float) -> np.ndarray:
    """Fraction of each cell ``[y_k - h/2, y_k + h/2)`` lying in ``[0, length)`` mod 2*pi."""
    h = grid.spacing
    lo = grid.points - h / 2
    hi = grid.points + h / 2
    frac = np.zeros(grid.n_per_axis)
    for shift in (-TWO_PI, 0.0, TWO_PI):
        a = np.maximum(lo, shift)
        b = np.minimum(hi, shift + length)
        frac += np.clip(b - a, 0.0, None)
    frac = frac / h
    # snap roundoff so fully covered cells carry the exact phase value
    frac[np.abs(frac - 1.0) < 1e-12] = 1.0
    frac[np.abs(frac) < 1e-12] = 0.0
    return frac


def _build_samples(spec: Mapping[str, Any], grid: TorusGrid, base: Path | None) -> np.ndarray:
    d = grid.d
    kind = spec["kind"]
    payload = spec.get("payload", {})
    if kind == "constant":
        if "matrix" in payload:
            mat = np.asarray(payload["matrix"], dtype=float)
        else:
            mat = float(payload.get("value", 1.0)) * np.eye(d)
        if mat.shape != (d, d):
            raise BadDimension(f"constant matrix must be {d}x{d}")
        return np.broadcast_to(mat, grid.shape + (d, d)).copy()
    if kind == "trig":
        mesh = grid.mesh()
        if "scalar" in payload:
            return _eval_terms(payload["scalar"], mesh, d)[..., None, None] * np.eye(d)
        out = np.zeros(grid.shape + (d, d))
        for key, terms in payload["entries"].items():
            i, j = (int(s) - 1 for s in key.split(","))
            if not (0 <= i < d and 0 <= j < d):
                raise BadDimension(f"entry {key} out of range for d={d}")
            vals = _eval_terms(terms, mesh, d)
            out[..., i, j] = vals
            out[..., j, i] = vals
        return out
    if kind == "laminate":
        a1, a2 = (float(v) for v in payload["values"])
        theta = float(payload.get("fraction", 0.5))
        axis = int(payload.get("axis", 1)) - 1
        if not 0 <= axis < d:
            raise BadDimension(f"laminate axis {axis + 1} out of range for d={d}")
        frac = _laminate_fraction(grid, TWO_PI * theta)
        profile = frac * a1 + (1.0 - frac) * a2
        shape = [1] * d
        shape[axis] = grid.n_per_axis
        scalar = np.broadcast_to(profile.reshape(shape), grid.shape)
        return scalar[..., None, None] * np.eye(d)
    if kind == "samples":
        if "path" in payload:
            path = Path(payload["path"])
            if base is not None and not path.is_absolute():
                path = base / path
            return np.load(path)
        return np.asarray(payload["values"], dtype=float)
    raise BadDimension(f"unknown coefficient kind {kind!r}")


def load_coefficient(spec) -> PeriodicCoefficient:
    """Build a validated coefficient from a description mapping or a JSON file path.

    A description has the fields ``version``, ``dim``, ``kind``
    (``constant | trig | laminate | samples``), ``payload`` and
    ``n_per_axis``; see README for the payload of each kind.
    """
    base = None
    if isinstance(spec, (str, Path)):
        path = Path(spec)
        base = path.parent
        spec = json.loads(path.read_text())
    spec = dict(spec)
    version = int(spec.get("version", SCHEMA_VERSION))
    if version > SCHEMA_VERSION:
        raise BadDimension(f"coefficient description version {version} is newer than supported")
    d = int(spec["dim"])
    n = int(spec.get("n_per_axis", 33))
    grid = TorusGrid(d, n)
    samples = _build_samples(spec, grid, base)
    return PeriodicCoefficient.from_samples(grid, samples, kind=spec["kind"], description=spec)
