"""Taylor data of the first Bloch branch at eta = 0 by the derivative recursion.

Differentiating ``H(eta) phi(eta) = lambda(eta) phi(eta)`` with the gauge
``mean(phi) = (2*pi)^(-d/2)`` gives, for every multi-index beta > 0,

    H(0) d^b phi = - sum_{0<g<=b} C(b,g) d^g H d^(b-g) phi + sum_{0<g<=b} C(b,g) d^g lambda d^(b-g) phi

on the non-constant modes (``d^b phi`` has zero mean), while the constant
mode of the same identity yields ``d^b lambda``.  Only derivatives of order
<= 4 of ``H`` are nonzero.  All entries are raw partial derivatives; the
Taylor coefficient of ``eta^b`` is ``d^b lambda / b!`` and the Hessian entry
(k, l) is ``d^(e_k + e_l) lambda`` itself.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from math import comb, prod

import numpy as np

from ._parallel import pmap
from .cell import ZeroMeanSolver, _slope, solve_cell
from .errors import CompatibilityViolation
from .fiber import PlaneWaveBasis, assemble_fiber, form_matrix
from .torus import PeriodicCoefficient

MAX_ORDER = 4


def multi_indices(d: int, max_order: int, min_order: int = 0) -> list[tuple]:
    """Multi-indices graded by order, lexicographically descending within an order."""
    out = []
    for order in range(min_order, max_order + 1):
        level = [b for b in itertools.product(range(order + 1), repeat=d) if sum(b) == order]
        out.extend(sorted(level, reverse=True))
    return out


def beta_label(beta) -> str:
    parts = [f"e{i + 1}" for i, b in enumerate(beta) for _ in range(b)]
    return "+".join(parts) or "0"


def multinomial(beta, gamma) -> int:
    return prod(comb(b, g) for b, g in zip(beta, gamma))


def _axes(gamma) -> list[int]:
    return [i for i, g in enumerate(gamma) for _ in range(g)]


def bilaplacian_symbol_derivative(x: np.ndarray, gamma) -> np.ndarray:
    """``d^gamma |x|^4`` for rows x of shape (P, d)."""
    ax = _axes(gamma)
    r2 = np.sum(x ** 2, axis=1)
    dl = lambda a, b: 1.0 if a == b else 0.0
    if len(ax) == 0:
        return r2 ** 2
    if len(ax) == 1:
        return 4 * r2 * x[:, ax[0]]
    if len(ax) == 2:
        k, l = ax
        return 8 * x[:, k] * x[:, l] + 4 * r2 * dl(k, l)
    if len(ax) == 3:
        k, l, p = ax
        return 8 * (dl(k, p) * x[:, l] + dl(l, p) * x[:, k] + dl(k, l) * x[:, p])
    if len(ax) == 4:
        k, l, p, q = ax
        val = 8 * (dl(k, p) * dl(l, q) + dl(l, p) * dl(k, q) + dl(k, l) * dl(p, q))
        return np.full(x.shape[0], val)
    return np.zeros(x.shape[0])


class OperatorDerivatives:
    """Exact eta-derivatives of the fiber matrix at eta = 0.

    First order: ``e_k.A_hat(m-n) n + m.A_hat(m-n) e_k + 4 rho^2 |n|^2 n_k``;
    second: ``2 A_hat_kl(m-n) + rho^2 (8 n_k n_l + 4 |n|^2 delta_kl)``;
    third and fourth orders come from the biharmonic symbol alone.
    """

    def __init__(self, A: PeriodicCoefficient, basis: PlaneWaveBasis, rho: float):
        self.A, self.basis, self.rho = A, basis, float(rho)
        self.n = basis.index.astype(float)
        self._dense = {}

    def _matrix(self, gamma) -> np.ndarray:
        if gamma not in self._dense:
            ax = _axes(gamma)
            P, d = self.n.shape
            e = np.eye(d)
            if len(ax) == 1:
                ek = np.broadcast_to(e[ax[0]], (P, d))
                M = form_matrix(self.A, self.basis, ek, self.n) + form_matrix(self.A, self.basis, self.n, ek)
            else:
                k, l = ax
                ek = np.broadcast_to(e[k], (P, d))
                el = np.broadcast_to(e[l], (P, d))
                M = form_matrix(self.A, self.basis, ek, el) + form_matrix(self.A, self.basis, el, ek)
            self._dense[gamma] = M
        return self._dense[gamma]

    def diagonal(self, gamma) -> np.ndarray:
        return self.rho ** 2 * bilaplacian_symbol_derivative(self.n, gamma)

    def apply(self, gamma, vec: np.ndarray) -> np.ndarray:
        out = self.diagonal(gamma) * vec
        if sum(gamma) <= 2:
            out = out + self._matrix(gamma) @ vec
        return out


@dataclass(frozen=True)
class DerivativeTable:
    rho: float
    basis: PlaneWaveBasis = field(repr=False)
    lambdas: dict
    phis: dict = field(repr=False)
    compatibility: dict = field(repr=False)
    stencils: OperatorDerivatives = field(repr=False, compare=False, default=None)

    def lam(self, beta) -> complex:
        return self.lambdas[tuple(beta)]

    def phi(self, beta):
        return self.basis.to_function(self.phis[tuple(beta)])

    def hessian(self) -> np.ndarray:
        d = self.basis.d
        Hs = np.zeros((d, d))
        for k in range(d):
            for l in range(d):
                beta = tuple(int(i == k) + int(i == l) for i in range(d))
                Hs[k, l] = self.lambdas[beta].real
        return Hs

    def to_json(self) -> dict:
        return {
            "rho": self.rho,
            "N": self.basis.N,
            "lambda": {beta_label(b): [v.real, v.imag] for b, v in self.lambdas.items()},
            "phi_h1": {beta_label(b): self.basis.hs(c, 1) for b, c in self.phis.items()},
            "compatibility_defect": {beta_label(b): v for b, v in self.compatibility.items()},
        }


def _mean_value_lambda(A: PeriodicCoefficient, basis: PlaneWaveBasis, rho: float, beta,
                       phis: dict, phi0_amp: float) -> complex:
    """``d^b lambda`` from means of products with the coefficient.

    ``(2*pi)^(d/2) [ -i sum_k b_k M(e_k . A grad d^(b-e_k) phi)
    + 2 sum_{|g|=2} C(b,g) M(a_kl d^(b-g) phi) ] + rho^2 d^b |eta|^4``,
    with the means evaluated as grid averages of pointwise products when the
    coefficient grid resolves the basis.
    """
    d = basis.d
    grid = A.grid
    on_grid = grid.N >= basis.N
    total = 0j
    for gamma in multi_indices(d, 2, 1):
        if any(g > b for g, b in zip(gamma, beta)):
            continue
        rest = tuple(b - g for b, g in zip(beta, gamma))
        psi = phis[rest]
        c = multinomial(beta, gamma)
        ax = _axes(gamma)
        if on_grid:
            u = basis.to_function(psi, grid)
            if len(ax) == 1:
                k = ax[0]
                grads = np.stack([g.values for g in u.gradient()], axis=-1)
                flux = np.einsum("...j,...j->...", A.samples[..., k, :], grads)
                total += c * (-1j) * flux.mean()
            else:
                k, l = ax
                total += c * 2 * (A.samples[..., k, l] * u.values).mean()
        else:
            ahat = A.hat(-basis.index)
            if len(ax) == 1:
                k = ax[0]
                total += c * np.sum(ahat[:, k, :] * basis.index * psi[:, None])
            else:
                k, l = ax
                total += c * 2 * np.sum(ahat[:, k, l] * psi)
    bil = rho ** 2 * bilaplacian_symbol_derivative(np.zeros((1, d)), beta)[0]
    return total / phi0_amp + bil


def derivative_recursion(A: PeriodicCoefficient, basis: PlaneWaveBasis, rho: float,
                         max_order: int = MAX_ORDER, tol: float = 1e-8) -> DerivativeTable:
    """``d^b lambda_1`` and ``d^b phi_1`` at eta = 0 for ``|b| <= max_order``.

    One factorization of the eta = 0 fiber on the non-constant modes serves
    every right-hand side.  The eigenvalue derivative is computed twice (from
    the constant row of the differentiated identity and from the mean-value
    formula); disagreement beyond ``tol`` raises CompatibilityViolation.
    """
    if not 0 <= max_order <= MAX_ORDER:
        raise ValueError(f"max_order must lie in [0, {MAX_ORDER}]")
    d = basis.d
    F = assemble_fiber(A, basis, rho, np.zeros(d))
    solver = ZeroMeanSolver(F.matrix)
    ops = OperatorDerivatives(A, basis, rho)
    amp = (2 * np.pi) ** (-d / 2)
    zero = (0,) * d
    phi0 = np.zeros(basis.size, dtype=complex)
    phi0[0] = amp
    phis = {zero: phi0}
    lambdas = {zero: 0j}
    compat = {}
    for beta in multi_indices(d, max_order, 1):
        lower = [g for g in multi_indices(d, sum(beta), 1)
                 if all(gi <= bi for gi, bi in zip(g, beta))]
        acc = np.zeros(basis.size, dtype=complex)
        for gamma in lower:
            rest = tuple(b - g for b, g in zip(beta, gamma))
            acc += multinomial(beta, gamma) * ops.apply(gamma, phis[rest])
        lam_row = acc[0] / amp
        lam_mean = _mean_value_lambda(A, basis, rho, beta, phis, amp)
        scale = 1.0 + abs(lam_row) + rho ** 2
        defect = abs(lam_row - lam_mean) / scale
        compat[beta] = float(defect)
        if defect > tol:
            raise CompatibilityViolation(
                f"beta={beta_label(beta)}: constant-row value {lam_row:.6e} vs mean-value {lam_mean:.6e}")
        lambdas[beta] = complex(lam_row)
        rhs = -acc
        for gamma in lower:
            if gamma == beta:
                continue
            rest = tuple(b - g for b, g in zip(beta, gamma))
            rhs += multinomial(beta, gamma) * lambdas[gamma] * phis[rest]
        phis[beta] = solver.solve(rhs)
    return DerivativeTable(float(rho), basis, lambdas, phis, compat, ops)


def corrector_relation_defect(table: DerivativeTable, correctors=None) -> list[float]:
    """Grid variance of ``d^(e_j) phi - i phi(0) chi_j`` (mean removed) for each j."""
    basis = table.basis
    cs = correctors or solve_cell(table.stencils.A, basis, table.rho)
    amp = table.phis[(0,) * basis.d][0]
    out = []
    for j in range(basis.d):
        beta = tuple(int(i == j) for i in range(basis.d))
        diff = basis.to_function(table.phis[beta] - 1j * amp * cs.coeffs[:, j])
        v = diff.values - diff.values.mean()
        out.append(float(np.mean(np.abs(v) ** 2)))
    return out


def uniform_estimate_sweep(A: PeriodicCoefficient, basis: PlaneWaveBasis, rho_list) -> dict:
    """Log-log slopes of derivative norms over rho (expected -2 for orders 1-3, +2 for the quartic lambda)."""
    rhos = [float(r) for r in rho_list]
    d = basis.d
    mean = A.mean
    tables = pmap(lambda r: derivative_recursion(A, basis, r), rhos)
    rows = []
    for rho, t in zip(rhos, tables):
        by_order = {k: [b for b in t.phis if sum(b) == k] for k in range(1, 5)}
        second_gap = 0.0
        for b in by_order[2]:
            k, l = _axes(b)
            second_gap = max(second_gap, abs(t.lambdas[b] - 2 * mean[k, l]))
        rows.append({
            "rho": rho,
            "phi1_h1": max(basis.hs(t.phis[b], 1) for b in by_order[1]),
            "phi2_h1": max(basis.hs(t.phis[b], 1) for b in by_order[2]),
            "lambda2_gap": second_gap,
            "phi3_h1": max(basis.hs(t.phis[b], 1) for b in by_order[3]),
            "phi4_l2": max(basis.l2(t.phis[b]) for b in by_order[4]),
            "lambda4": max(abs(t.lambdas[b]) for b in by_order[4]),
            "lambda4_axis": [t.lambdas[tuple(4 * int(i == j) for i in range(d))].real for j in range(d)],
        })
    slopes = {key: _slope(rhos, [r[key] for r in rows])
              for key in ("phi1_h1", "phi2_h1", "lambda2_gap", "phi3_h1", "phi4_l2", "lambda4")}
    return {"rows": rows, "slopes": slopes}


def cross_check_hessian(table: DerivativeTable, hess_tensor, tol: float = 1e-5) -> dict:
    """Compare half the recursion Hessian with a finite-difference tensor."""
    ours = 0.5 * table.hessian()
    other = np.asarray(hess_tensor.matrix)
    rel = float(np.abs(ours - other).max() / max(np.abs(other).max(), 1e-300))
    return {"recursion": ours.tolist(), "other": other.tolist(), "relative_error": rel, "ok": rel <= tol}


def write_table_json(table: DerivativeTable, path) -> None:
    with open(path, "w") as fh:
        json.dump(table.to_json(), fh, indent=2, sort_keys=True)
