"""Acceptance suite: one recorded PASS/FAIL line per criterion at the stated tolerances.

Two literal checks are expected to fail and carry a passing companion check:
3a (sampled laminate converges to the discrete, not the continuum, harmonic mean)
and 10 (the window error decays like eps^2, faster than the stated eps rate).
"""
import itertools
import time

import numpy as np
import pytest

from blochhom.derivatives import corrector_relation_defect, derivative_recursion, uniform_estimate_sweep
from blochhom.fiber import assemble_fiber, garding_check
from blochhom.spectra import band_sweep
from blochhom.supercell import SupercellProblem, homogenization_experiment, identity_report, \
    transform_to_fourier_limit
from blochhom.tensor import regime_tensor, stability_sweep, tensor_from_cell, tensor_from_hessian

from conftest import basis, identity, laminate, trig2d

EPS = [1 / 4, 1 / 8, 1 / 16, 1 / 32]
SINE = [{"c": 1.0, "f": ["sin:1"]}]
REGIMES = (("zero", None), ("theta", 1.0), ("infinity", None))


def _benchmarks():
    return [("laminate", laminate(65), basis(1, 32)), ("trig2d", trig2d(33), basis(2, 8))]


def test_c01_constant_coefficient_exactness(criterion):
    t0 = time.perf_counter()
    A, b = identity(1, 33), basis(1, 16)
    etas = np.linspace(-0.5, 0.5, 41)[:, None]
    worst = 0.0
    for rho in (0.0, 0.5, 1.0, 4.0):
        band = band_sweep(A, b, rho, etas, 1)
        e2 = etas[:, 0] ** 2
        worst = max(worst, np.abs(band.lambdas[:, 0] - e2 - rho ** 2 * e2 ** 2).max())
    dt = time.perf_counter() - t0
    criterion("1", worst <= 1e-10 and dt < 1.0, f"max error {worst:.2e} (tol 1e-10), {dt:.2f}s (< 1s)")


def test_c02_hessian_identity(criterion):
    t0 = time.perf_counter()
    cases = [(laminate(129), basis(1, 64), r) for r in (0.0, 1.0, 4.0)]
    cases += [(trig2d(65), basis(2, 16), r) for r in (0.5, 2.0)]
    worst = 0.0
    for A, b, rho in cases:
        cell = tensor_from_cell(A, b, rho).matrix
        hess = tensor_from_hessian(None, A, b, rho).matrix
        rec = 0.5 * derivative_recursion(A, b, rho, max_order=2).hessian()
        scale = np.abs(cell).max()
        for X, Y in itertools.combinations((cell, hess, rec), 2):
            worst = max(worst, np.abs(X - Y).max() / scale)
    dt = time.perf_counter() - t0
    criterion("2", worst <= 1e-4 and dt < 120, f"worst pairwise relative gap {worst:.2e} (tol 1e-4), {dt:.1f}s (< 120s)")


def test_c03a_classical_limit_literal(criterion):
    A, b = laminate(129), basis(1, 64)
    val = tensor_from_cell(A, b, 0.0).matrix[0, 0]
    criterion("3a", abs(val - 1.6) <= 1e-6, f"A0hom = {val:.8f} vs 1.6, gap {abs(val - 1.6):.2e} (tol 1e-6)")


def test_c03a_companion_discrete_harmonic_mean(criterion):
    A, b = laminate(129), basis(1, 64)
    val = tensor_from_cell(A, b, 0.0).matrix[0, 0]
    hm = A.harmonic_mean()[0, 0]
    criterion("3a-companion", abs(val - hm) <= 1e-6,
              f"A0hom = {val:.10f} vs harmonic mean of the samples {hm:.10f} (tol 1e-6)")


def test_c03b_infinity_regime(criterion):
    val = float(regime_tensor(laminate(129), basis(1, 64), "infinity").matrix[0, 0])
    criterion("3b", val == 2.5, f"regime-infinity tensor = {val!r} (exactly 2.5)")


def test_c04_large_rho_rate(criterion):
    s = stability_sweep(laminate(129), basis(1, 64), [4, 8, 16, 32, 64])
    slope = s["large_rho_slope"]
    criterion("4", abs(slope + 2) <= 0.3, f"slope {slope:.3f} (-2 +- 0.3)")


def test_c05_spectral_gap(criterion):
    worst = np.inf
    for name, A, b in _benchmarks():
        t = np.linspace(-0.5, 0.5, 21 if A.d == 1 else 9)
        etas = np.array(list(itertools.product(t, repeat=A.d)))
        for rho in (0.0, 0.1, 1.0, 10.0):
            lam2 = band_sweep(A, b, rho, etas, 2).lambdas[:, 1].min()
            worst = min(worst, lam2 - A.alpha / 4)
    criterion("5", worst >= 0, f"min over eta, rho, benchmarks of lambda2 - alpha/4 = {worst:.4f} (>= 0)")


def test_c06_corrector_relation(criterion):
    worst = 0.0
    for name, A, b in _benchmarks():
        for rho in (0.5, 1.0, 4.0):
            t = derivative_recursion(A, b, rho, max_order=1)
            worst = max(worst, max(corrector_relation_defect(t)))
    criterion("6", worst < 1e-10, f"max variance {worst:.2e} (< 1e-10)")


def test_c07_uniform_estimates(criterion):
    rhos = [1, 2, 4, 8, 16, 32, 64]
    slopes = {}
    for name, A, b in [("laminate", laminate(129), basis(1, 64)), ("trig2d", trig2d(33), basis(2, 8))]:
        s = uniform_estimate_sweep(A, b, rhos)["slopes"]
        slopes[name] = (s["phi1_h1"], s["lambda4"])
    ok = all(abs(p + 2) <= 0.3 and abs(q - 2) <= 0.3 for p, q in slopes.values())
    ident = uniform_estimate_sweep(identity(1, 9), basis(1, 4), rhos)["rows"]
    gap = max(abs(r["lambda4_axis"][0] - 24 * r["rho"] ** 2) for r in ident)
    detail = ", ".join(f"{k}: phi1 H1 {p:+.3f}, lambda4 {q:+.3f}" for k, (p, q) in slopes.items())
    criterion("7", ok and gap <= 1e-8, f"{detail} (-2/+2 +- 0.3); identity 24 rho^2 gap {gap:.1e} (tol 1e-8)")


def test_c08_eps_identities(criterion):
    t0 = time.perf_counter()
    P = SupercellProblem(laminate(33), basis(1, 16), 1 / 8, 8, 1 / 8)
    rep = identity_report(P, seed=0)
    keys = ("parseval", "plancherel", "inversion", "diagonalization")
    worst = max(rep[k] for k in keys)
    dt = time.perf_counter() - t0
    detail = ", ".join(f"{k} {rep[k]:.1e}" for k in keys)
    criterion("8", worst < 1e-7 and dt < 60, f"{detail} (tol 1e-7), {dt:.2f}s (< 60s)")


@pytest.fixture(scope="module")
def experiments():
    A, b = laminate(33), basis(1, 16)
    harmonic = regime_tensor(A, b, "zero").matrix
    arithmetic = regime_tensor(A, b, "infinity").matrix
    wrong = {"zero": arithmetic, "theta": arithmetic, "infinity": harmonic}
    return {r: homogenization_experiment(A, b, SINE, r, EPS, theta=th, alternative=wrong[r]) for r, th in REGIMES}


def test_c09_higher_mode_bound(criterion, experiments):
    slopes = {r: e["higher_mode_slope"] for r, e in experiments.items()}
    criterion("9", min(slopes.values()) >= 0.8,
              ", ".join(f"{r} {s:.2f}" for r, s in slopes.items()) + " (>= 0.8)")


@pytest.fixture(scope="module")
def transform_slopes():
    A, b = laminate(33), basis(1, 16)
    return {r: transform_to_fourier_limit(A, b, r, EPS, theta=th)["slope"] for r, th in REGIMES}


def test_c10_transform_limit_literal(criterion, transform_slopes):
    ok = all(abs(s - 1) <= 0.3 for s in transform_slopes.values())
    criterion("10", ok, ", ".join(f"{r} {s:.2f}" for r, s in transform_slopes.items()) + " (1 +- 0.3)")


def test_c10_companion_rate_bound(criterion, transform_slopes):
    ok = all(s >= 0.7 for s in transform_slopes.values())
    criterion("10-companion", ok,
              ", ".join(f"{r} {s:.2f}" for r, s in transform_slopes.items()) + " (at least linear: >= 0.7)")


def test_c11_homogenization_convergence(criterion, experiments):
    parts, ok = [], True
    for r, e in experiments.items():
        errs = [row["l2_error"] for row in e["rows"]]
        ratio = e["rows"][-1]["alternative_l2_error"] / errs[-1]
        ok &= bool(np.all(np.diff(errs) < 0)) and ratio >= 5
        parts.append(f"{r}: {errs[0]:.3f}->{errs[-1]:.4f}, wrong/right {ratio:.0f}x")
    criterion("11", ok, "; ".join(parts) + " (strictly decreasing, >= 5x)")


def test_c12_garding_certificate(criterion):
    worst = np.inf
    for name, A, b in _benchmarks():
        for rho in (0.0, 1.0, 4.0):
            F = assemble_fiber(A, b, rho, np.full(A.d, 0.5 - 1e-6))
            worst = min(worst, garding_check(F, 1000, seed=2024, tol=np.inf).min_slack)
    criterion("12", worst >= -1e-9, f"min slack over 6000 trials {worst:.3f} (>= -1e-9)")
