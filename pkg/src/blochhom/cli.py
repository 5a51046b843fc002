"""Command-line experiment runner: ``blochhom <scenario> --config path [--output dir] [--seed k]``.

Exit status 0 on success, 1 on a compute error or a failed verification, 2 on
an invalid configuration.  Artifacts are written to a scratch directory and
moved into place only when the scenario finishes.
"""
from __future__ import annotations

import argparse
import datetime
import itertools
import json
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .cell import solve_cell, write_corrector_csv
from .config import SCENARIOS, load_config
from .derivatives import derivative_recursion, uniform_estimate_sweep, write_table_json
from .errors import ConfigInvalid
from .fiber import PlaneWaveBasis
from .kernels import BACKEND
from .spectra import band_sweep, write_band_csv
from .supercell import (SupercellProblem, collocation_coefficient, homogenization_experiment,
                        identity_report, transform_to_fourier_limit, write_convergence_csv)
from .tensor import HomogenizedTensor, _finish, stability_sweep, tensor_from_cell, tensor_from_hessian, write_tensor_csv
from .torus import load_coefficient
from .verify import run_checks

REGIMES = ("zero", "theta", "infinity")


def _default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _dump(obj, path: Path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_default)
        fh.write("\n")


def _coefficient(cfg: dict):
    desc = dict(cfg["coefficient"])
    N = cfg["numerics"]["N"]
    desc["n_per_axis"] = cfg["numerics"].get("n_per_axis", desc.get("n_per_axis", 2 * N + 1))
    return load_coefficient(desc)


def _eta_grid(d: int, params: dict) -> np.ndarray:
    if "etas" in params:
        etas = np.asarray(params["etas"], dtype=float)
        if etas.ndim != 2 or etas.shape[1] != d:
            raise ConfigInvalid(f"etas must be a list of {d}-vectors")
        return etas
    n = params.get("n_eta", 21 if d == 1 else 9)
    t = np.linspace(-0.5, 0.5, n)
    return np.array(list(itertools.product(t, repeat=d)))


def _bands(A, basis, cfg, out: Path) -> None:
    p = cfg["scenario_params"]
    band = band_sweep(A, basis, p.get("rho", 0.0), _eta_grid(A.d, p), p.get("modes", 4))
    write_band_csv(band, out / "bands.csv")
    _dump({"rho": band.rho, "lipschitz": band.lipschitz, "lipschitz_constant": band.lipschitz_constant,
           "gauge_radius": band.gauge_radius}, out / "bands_summary.json")


def _cell(A, basis, cfg, out: Path) -> None:
    cs = solve_cell(A, basis, cfg["scenario_params"].get("rho", 1.0))
    write_corrector_csv(cs, out / "correctors.csv", out / "correctors_energies.json")


def _route(A, basis, rho: float, route: str, fd: float) -> HomogenizedTensor:
    if route == "cell":
        return tensor_from_cell(A, basis, rho)
    if route == "hessian":
        return tensor_from_hessian(None, A, basis, rho, h=fd)
    table = derivative_recursion(A, basis, rho, max_order=2)
    return _finish(0.5 * table.hessian(), "derivative-recursion", float(rho))


def _tensor(A, basis, cfg, out: Path) -> None:
    p = cfg["scenario_params"]
    routes = p.get("routes", ["cell", "hessian", "derivs"])
    fd = cfg["numerics"].get("fd_step", 1e-3)
    tensors, summary = [], []
    for rho in p.get("rhos", [0.0, 1.0, 4.0]):
        ts = [_route(A, basis, float(rho), r, fd) for r in routes]
        tensors += ts
        scale = max(np.abs(t.matrix).max() for t in ts)
        gaps = {f"{a}/{b}": float(np.abs(ta.matrix - tb.matrix).max() / scale)
                for (a, ta), (b, tb) in itertools.combinations(zip(routes, ts), 2)}
        summary.append({"rho": float(rho), "pairwise_relative": gaps,
                        "diagnostics": {r: t.diagnostics for r, t in zip(routes, ts)}})
    write_tensor_csv(tensors, out / "tensors.csv")
    _dump({"rows": summary, "mean": A.mean, "harmonic_mean": A.harmonic_mean()}, out / "tensor_summary.json")


def _derivs(A, basis, cfg, out: Path) -> None:
    p = cfg["scenario_params"]
    table = derivative_recursion(A, basis, p.get("rho", 1.0), max_order=p.get("max_order", 4))
    write_table_json(table, out / "derivatives.json")


def _sweep(A, basis, cfg, out: Path) -> None:
    p = cfg["scenario_params"]
    rhos = p.get("rhos", [1, 2, 4, 8, 16, 32, 64])
    sweep = stability_sweep(A, basis, rhos)
    tensors = [HomogenizedTensor(np.asarray(T), "cell-average", r) for r, T in zip(sweep["rho"], sweep["tensors"])]
    write_tensor_csv(tensors, out / "tensors.csv")
    if p.get("derivatives", False):
        sweep["uniform_estimates"] = uniform_estimate_sweep(A, basis, rhos)
    _dump(sweep, out / "sweep.json")


def _regimes(p: dict):
    theta = p.get("theta", 1.0)
    return [(r, theta if r == "theta" else None) for r in p.get("regimes", list(REGIMES))]


def _supercell(A, basis, cfg, out: Path) -> None:
    p = cfg["scenario_params"]
    Asc = collocation_coefficient(A, basis.N)
    eps = p.get("epsilon", 1 / 8)
    P = SupercellProblem(Asc, basis, eps, p.get("M", 8), p.get("rho", 1.0) * eps)
    ident = identity_report(P, seed=cfg["seed"])
    forcing = p.get("forcing", [{"c": 1.0, "f": ["sin:1"] + ["1"] * (A.d - 1)}])
    eps_list = p.get("eps_list", [1 / 4, 1 / 8, 1 / 16, 1 / 32])
    results = [homogenization_experiment(Asc, basis, forcing, r, eps_list, theta=t) for r, t in _regimes(p)]
    write_convergence_csv(results, out / "convergence.csv")
    _dump({"identities": ident,
           "slopes": {r["regime"]: {"l2": r["l2_slope"], "higher_mode": r["higher_mode_slope"]} for r in results},
           "tensors": {r["regime"]: r["tensor"] for r in results}}, out / "identities.json")


def _transform(A, basis, cfg, out: Path) -> None:
    p = cfg["scenario_params"]
    Asc = collocation_coefficient(A, basis.N)
    eps_list = p.get("eps_list", [1 / 4, 1 / 8, 1 / 16, 1 / 32])
    kw = {k: p[k] for k in ("radius", "width", "window") if k in p}
    results = [transform_to_fourier_limit(Asc, basis, r, eps_list, theta=t, **kw) for r, t in _regimes(p)]
    with open(out / "transform_limit.csv", "w") as fh:
        fh.write("regime,epsilon,kappa,rho,max_error,boundary_tail\n")
        for res in results:
            for r in res["rows"]:
                fh.write(",".join([res["regime"]] + [repr(float(r[k])) for k in
                                                     ("epsilon", "kappa", "rho", "max_error", "boundary_tail")]) + "\n")
    _dump({res["regime"]: {"slope": res["slope"]} for res in results}, out / "transform_limit.json")


def _verify(A, basis, cfg, out: Path) -> bool:
    params = dict(cfg["scenario_params"])
    params.setdefault("fd_step", cfg["numerics"].get("fd_step", 1e-3))
    res = run_checks(A, basis.N, params, seed=cfg["seed"], tolerances=cfg["numerics"].get("tolerances"))
    _dump({"passed": res["passed"], "records": res["records"]}, out / "verify.json")
    if not res["passed"]:
        _dump(res["failure"], out / "failure.json")
    return res["passed"]


RUNNERS = {"bands": _bands, "cell": _cell, "tensor": _tensor, "derivs": _derivs, "sweep-rho": _sweep,
           "supercell": _supercell, "transform-limit": _transform, "verify-all": _verify}


def _publish(scratch: Path, dest: Path) -> list[str]:
    dest.mkdir(parents=True, exist_ok=True)
    names = sorted(p.name for p in scratch.iterdir())
    for name in names:
        shutil.move(str(scratch / name), str(dest / name))
    return names


def run(scenario: str, config_path, output=None, seed=None) -> int:
    try:
        cfg = load_config(config_path, scenario)
        if seed is not None:
            if seed < 0:
                raise ConfigInvalid("seed must be nonnegative")
            cfg["seed"] = seed
        A = _coefficient(cfg)
        basis = PlaneWaveBasis.create(A.d, cfg["numerics"]["N"])
    except (ConfigInvalid, ValueError, KeyError, OSError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 2
    dest = Path(output or cfg.get("output_dir") or "blochhom-out")
    with tempfile.TemporaryDirectory(prefix=".blochhom-") as tmp:
        scratch = Path(tmp)
        try:
            ok = RUNNERS[cfg["scenario"]](A, basis, cfg, scratch)
        except Exception as exc:  # any compute failure leaves no artifacts behind
            print(f"{cfg['scenario']} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
            return 1
        _dump({"scenario": cfg["scenario"], "config": cfg, "version": __version__, "backend": BACKEND,
               "seed": cfg["seed"], "files": sorted(p.name for p in scratch.iterdir()) + ["manifest.json"]},
              scratch / "manifest.json")
        _dump({"timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat()}, scratch / "run_info.json")
        _publish(scratch, dest)
    if ok is False:
        print("verification failed; see failure.json", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="blochhom", description="Bloch-wave homogenization experiments")
    ap.add_argument("scenario", choices=SCENARIOS)
    ap.add_argument("--config", required=True, help="experiment configuration (JSON)")
    ap.add_argument("--output", help="output directory (overrides output_dir in the config)")
    ap.add_argument("--seed", type=int, help="seed for randomized trials (overrides the config)")
    args = ap.parse_args(argv)
    return run(args.scenario, args.config, args.output, args.seed)


if __name__ == "__main__":
    sys.exit(main())
