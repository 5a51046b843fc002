"""The property suite behind the ``verify-all`` scenario.

Each check yields a record ``{name, value, tol, passed}``; the run stops at the
first breach.  Defaults are sized to finish in about a minute for a 1D
coefficient at N = 32.
"""
from __future__ import annotations

import itertools
from typing import Callable, Iterator

import numpy as np

from .cell import solve_cell
from .derivatives import corrector_relation_defect, derivative_recursion
from .fiber import PlaneWaveBasis, assemble_fiber, garding_check
from .spectra import LAMBDA2_NEUMANN, gauge_fix, rho_monotonicity, solve_fiber
from .supercell import SupercellProblem, collocation_coefficient, homogenization_experiment, identity_report
from .tensor import tensor_from_cell, tensor_from_hessian
from .torus import PeriodicCoefficient

DEFAULT_TOLERANCES = {
    "hermitian": 1e-12,
    "evenness": 1e-9,
    "lambda_zero": 1e-9,
    "nonnegative": 1e-10,
    "gap": 1e-9,
    "garding": 1e-9,
    "gauge": 1e-10,
    "route_agreement": 1e-4,
    "critical_point": 1e-8,
    "bounds": 1e-9,
    "corrector_mean": 1e-12,
    "corrector_residual": 1e-8,
    "corrector_relation": 1e-10,
    "odd_derivatives": 1e-8,
    "identities": 1e-7,
    "higher_mode_slope": 0.8,
}


def _rec(name: str, value: float, tol: float, passed: bool) -> dict:
    return {"name": name, "value": float(value), "tol": float(tol), "passed": bool(passed)}


def _eta_grid(d: int, n: int) -> np.ndarray:
    t = -0.5 + np.arange(n) / n
    return np.array(list(itertools.product(t, repeat=d)))


def checks(A: PeriodicCoefficient, N: int, params: dict, seed: int, tol: dict) -> Iterator[dict]:
    d = A.d
    basis = PlaneWaveBasis.create(d, N)
    rhos = params.get("rhos", [0.0, 1.0, 4.0])
    etas = _eta_grid(d, params.get("n_eta", 8))
    fd = params.get("fd_step", 1e-3)

    for rho in rhos:
        worst_h = worst_even = worst_neg = 0.0
        gap = np.inf
        for eta in etas:
            F = assemble_fiber(A, basis, rho, eta)
            worst_h = max(worst_h, F.hermitian_defect / max(1.0, np.abs(F.matrix).max()))
            w, _ = solve_fiber(F, 2)
            w_neg, _ = solve_fiber(assemble_fiber(A, basis, rho, -np.clip(eta, -0.5, 0.5)), 2)
            worst_even = max(worst_even, abs(w[0] - w_neg[0]))
            worst_neg = max(worst_neg, -w[0])
            gap = min(gap, w[1])
        yield _rec(f"hermitian[rho={rho}]", worst_h, tol["hermitian"], worst_h <= tol["hermitian"])
        yield _rec(f"evenness[rho={rho}]", worst_even, tol["evenness"], worst_even <= tol["evenness"])
        yield _rec(f"lambda1_nonnegative[rho={rho}]", worst_neg, tol["nonnegative"], worst_neg <= tol["nonnegative"])
        bound = A.alpha * LAMBDA2_NEUMANN
        yield _rec(f"spectral_gap[rho={rho}]", gap - bound, tol["gap"], gap >= bound - tol["gap"])

        F0 = assemble_fiber(A, basis, rho, np.zeros(d))
        w0, V0 = solve_fiber(F0, 1, gauge=True)
        yield _rec(f"lambda1_at_zero[rho={rho}]", abs(w0[0]), tol["lambda_zero"], abs(w0[0]) <= tol["lambda_zero"])
        g = gauge_fix(V0[:, 0], d)
        yield _rec(f"gauge_mean[rho={rho}]", g.normalization_residual, tol["gauge"],
                   g.normalization_residual <= tol["gauge"])

        Fb = assemble_fiber(A, basis, rho, np.full(d, 0.5 - 1e-6))
        rep = garding_check(Fb, params.get("garding_trials", 100), seed=seed)
        yield _rec(f"garding[rho={rho}]", rep.min_slack, tol["garding"], rep.min_slack >= -tol["garding"])

        cs = solve_cell(A, basis, rho)
        mean = float(np.abs(cs.coeffs[0]).max())
        yield _rec(f"corrector_mean[rho={rho}]", mean, tol["corrector_mean"], mean <= tol["corrector_mean"])
        yield _rec(f"corrector_residual[rho={rho}]", cs.residual, tol["corrector_residual"],
                   cs.residual <= tol["corrector_residual"])

        cell = tensor_from_cell(A, basis, rho, cs).matrix
        hess = tensor_from_hessian(None, A, basis, rho, h=fd).matrix
        table = derivative_recursion(A, basis, rho)
        rec = 0.5 * table.hessian()
        scale = np.abs(cell).max()
        agree = max(np.abs(cell - hess).max(), np.abs(cell - rec).max(), np.abs(hess - rec).max()) / scale
        yield _rec(f"route_agreement[rho={rho}]", agree, tol["route_agreement"], agree <= tol["route_agreement"])

        lam1 = lambda eta: solve_fiber(assemble_fiber(A, basis, rho, eta), 1)[0][0]
        grad = max(abs(lam1(fd * e) - lam1(-fd * e)) / (2 * fd) for e in np.eye(d))
        yield _rec(f"critical_point[rho={rho}]", grad, tol["critical_point"], grad <= tol["critical_point"])

        lower = np.linalg.eigvalsh(cell - A.harmonic_mean())[0]
        upper = np.linalg.eigvalsh(A.mean - cell)[0]
        margin = min(lower, upper)
        yield _rec(f"tensor_bounds[rho={rho}]", margin, tol["bounds"], margin >= -tol["bounds"])

        rel = max(corrector_relation_defect(table, cs))
        yield _rec(f"corrector_relation[rho={rho}]", rel, tol["corrector_relation"], rel <= tol["corrector_relation"])
        odd = max(abs(v) for b, v in table.lambdas.items() if sum(b) % 2 == 1)
        yield _rec(f"odd_derivatives[rho={rho}]", odd, tol["odd_derivatives"], odd <= tol["odd_derivatives"])

    srt = sorted(float(r) for r in rhos)
    for lo, hi in zip(srt, srt[1:]):
        mono = rho_monotonicity(A, basis, np.full(d, 0.25), lo, hi)
        slack = min(mono["difference"] - mono["lower"], mono["upper"] - mono["difference"])
        yield _rec(f"rho_monotone[{lo}->{hi}]", slack, tol["bounds"], mono["holds"])

    Nsc = params.get("supercell_N", min(N, 16 if d == 1 else 4))
    Asc = collocation_coefficient(A, Nsc)
    bsc = PlaneWaveBasis.create(d, Nsc)
    eps = 1.0 / 8 if d == 1 else 1.0 / 4
    ident = identity_report(SupercellProblem(Asc, bsc, eps, int(round(1 / eps)), eps), seed=seed)
    for key in ("parseval", "plancherel", "inversion", "diagonalization"):
        yield _rec(f"supercell_{key}", ident[key], tol["identities"], ident[key] <= tol["identities"])

    eps_list = params.get("eps_list", [1 / 4, 1 / 8, 1 / 16, 1 / 32] if d == 1 else [1 / 2, 1 / 4])
    forcing = [{"c": 1.0, "f": ["sin:1"] + ["1"] * (d - 1)}]
    for regime, theta in (("zero", None), ("theta", 1.0), ("infinity", None)):
        res = homogenization_experiment(Asc, bsc, forcing, regime, eps_list, theta=theta)
        slope = res["higher_mode_slope"]
        ok = not np.isfinite(slope) or slope >= tol["higher_mode_slope"]
        norms = [r["higher_mode_norm"] for r in res["rows"]]
        if not np.isfinite(slope):
            ok = max(norms) <= 1e-10
        yield _rec(f"higher_mode_slope[{regime}]", slope if np.isfinite(slope) else max(norms),
                   tol["higher_mode_slope"], ok)


def run_checks(A: PeriodicCoefficient, N: int, params: dict, seed: int = 0, tolerances: dict | None = None,
               on_record: Callable | None = None) -> dict:
    """Run the suite, stopping at the first failed record."""
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    records = []
    for rec in checks(A, N, params, seed, tol):
        records.append(rec)
        if on_record:
            on_record(rec)
        if not rec["passed"]:
            return {"passed": False, "records": records, "failure": rec}
    return {"passed": True, "records": records, "failure": None}
