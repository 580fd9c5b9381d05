"""Command-line interface: simulate, estimate, scan, fidelity, validate, plotdata.

Every command records its full run configuration (including the seed) in
the JSON artifacts it writes, with the timestamp kept in a separate field
so that reruns with the same config produce byte-identical payloads.

Exit codes: 0 success, 1 I/O or parse error, 2 numerical non-convergence,
3 validation failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import bounds as bounds_mod
from . import estimator as est_mod
from . import fock
from .data import default_phase_grid, histogram, load_dataset, sample_dataset, save_dataset
from .models import (
    SpacsModelParams,
    TomogramModel,
    dark_count_model,
    spacs_model,
    spacs_tomogram,
)
from .overlaps import EmpiricalCF, IntegrationConfig, overlap_tomographic

OUTDIR_ENV = "SPACSFIT_OUTDIR"

EXIT_OK = 0
EXIT_IO = 1
EXIT_UNCONVERGED = 2
EXIT_VALIDATION = 3


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat()


def _fingerprint(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _outdir(args) -> Path:
    out = args.out or os.environ.get(OUTDIR_ENV) or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path: Path, run: dict, payload: dict) -> None:
    doc = {"run": run, "result": payload, "timestamp": _timestamp()}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_config_defaults(args, keys) -> None:
    """Fill argument values that were left unset from the JSON config file."""
    if not getattr(args, "config", None):
        return
    with open(args.config) as fh:
        cfg = json.load(fh)
    for key in keys:
        if getattr(args, key, None) is None and key in cfg:
            setattr(args, key, cfg[key])


def _integration_config(args) -> IntegrationConfig:
    kw = {}
    if getattr(args, "r_max", None) is not None:
        kw["r_max"] = float(args.r_max)
    if getattr(args, "r_step", None) is not None:
        kw["r_step"] = float(args.r_step)
    return IntegrationConfig(**kw)


def _model_from_args(args) -> TomogramModel:
    if args.alpha is None or args.eta is None:
        raise ValueError("model parameters required: --alpha and --eta (and optionally --phi, --p)")
    phi = 0.0 if args.phi is None else float(args.phi)
    if getattr(args, "p", None) is not None:
        return dark_count_model(float(args.alpha), phi, float(args.eta), float(args.p))
    return spacs_model(float(args.alpha), phi, float(args.eta))


def _model_from_result(path) -> tuple:
    with open(path) as fh:
        doc = json.load(fh)
    res = doc["result"]
    params = dict(res["params"])
    params["model"] = res["family"]
    return TomogramModel.from_json(params), res.get("dataset_fingerprint")


def cmd_simulate(args) -> int:
    _load_config_defaults(args, ["alpha", "phi", "eta", "p", "phases", "n", "seed", "out", "name"])
    model = _model_from_args(args)
    n_phases = int(args.phases if args.phases is not None else 21)
    n = int(args.n if args.n is not None else 5321)
    seed = int(args.seed if args.seed is not None else 0)
    phases = default_phase_grid(n_phases)
    dataset = sample_dataset(model, phases, n, seed)
    out = _outdir(args)
    name = args.name or "dataset"
    csv_path = out / f"{name}.csv"
    save_dataset(dataset, csv_path)
    print(f"wrote {csv_path} ({n_phases} phases x {n} samples)")
    print(f"phases: {', '.join(f'{t:.4f}' for t in phases)}")
    print(f"true params: {model.to_json()}")
    print(f"seed: {seed}")
    return EXIT_OK


def _parse_fixes(fix_args) -> dict:
    fixed = {}
    for item in fix_args or []:
        key, _, val = item.partition("=")
        if not val:
            raise ValueError(f"--fix expects name=value, got {item!r}")
        fixed[key] = float(val)
    return fixed


def cmd_estimate(args) -> int:
    _load_config_defaults(args, ["data", "family", "out", "r_max", "r_step"])
    if args.data is None:
        raise ValueError("--data is required")
    dataset = load_dataset(args.data)
    cfg = _integration_config(args)
    fixed = _parse_fixes(args.fix)
    fingerprint = _fingerprint(args.data)
    emp = EmpiricalCF(dataset, cfg)
    result = est_mod.estimate(
        emp, family=args.family, cfg=cfg, fixed=fixed, fingerprint=fingerprint
    )
    run = {
        "command": "estimate",
        "dataset": str(args.data),
        "family": args.family,
        "fixed": fixed,
        "integration": cfg.to_json(),
        "optimizer": est_mod.OptimizerOptions().to_json(),
        "seed": dataset.meta.get("seed") if dataset.meta else None,
    }
    out = _outdir(args)
    _write_json(out / "estimate.json", run, result.to_json())

    print(f"{'parameter':<12}{'value':>10}{'error':>12}")
    errs = result.param_errors or {}
    for name, value in result.params_dict().items():
        err = errs.get(name)
        err_str = f"{err.error:>12.4f}" if err is not None else f"{'-':>12}"
        print(f"{name:<12}{value:>10.4f}{err_str}")
    d2e = f"{result.d2_error:.6f}" if result.d2_error is not None else "-"
    snr = f"{result.snr:.2f}" if result.snr is not None else "-"
    print(f"D^2_min = {result.d2_min:.6f}   Delta(D^2) = {d2e}   SNR = {snr}")
    for flag in result.flags:
        print(f"warning: {flag}")
    print(f"wrote {out / 'estimate.json'}")
    return EXIT_OK if result.converged else EXIT_UNCONVERGED


def _params_for_scan(args):
    if args.result:
        model, fp = _model_from_result(args.result)
        return model.params
    return _model_from_args(args).params


def cmd_scan(args) -> int:
    _load_config_defaults(args, ["data", "axis", "out", "points"])
    if args.data is None:
        raise ValueError("--data is required")
    if args.axis is None:
        raise ValueError("--axis is required (abs_alpha, phi, eta or p)")
    dataset = load_dataset(args.data)
    cfg = _integration_config(args)
    params = _params_for_scan(args)
    emp = EmpiricalCF(dataset, cfg)
    n_points = int(args.points if args.points is not None else est_mod.DEFAULT_SCAN_POINTS)
    curve = est_mod.scan_cut(emp, params, args.axis, n_points=n_points, cfg=cfg)
    out = _outdir(args)
    csv_path = out / f"scan_{args.axis}.csv"
    with open(csv_path, "w") as fh:
        fh.write(f"{args.axis},d2,d2_error\n")
        for i, q in enumerate(curve.grid):
            err = "" if curve.d2_error is None else repr(float(curve.d2_error[i]))
            fh.write(f"{float(q)!r},{float(curve.d2[i])!r},{err}\n")
    run = {
        "command": "scan",
        "dataset": str(args.data),
        "axis": args.axis,
        "params": {k: v for k, v in TomogramModel(
            "dark_count" if hasattr(params, "p") else "spacs", params).to_json().items()
            if k != "model"},
        "integration": cfg.to_json(),
        "seed": dataset.meta.get("seed") if dataset.meta else None,
    }
    _write_json(out / f"scan_{args.axis}.json", run, curve.to_json())
    print(f"wrote {csv_path} ({n_points} points)")
    return EXIT_OK


def cmd_fidelity(args) -> int:
    _load_config_defaults(args, ["data", "result", "out", "seed"])
    if args.data is None:
        raise ValueError("--data is required")
    dataset = load_dataset(args.data)
    cfg = _integration_config(args)
    fingerprint = _fingerprint(args.data)
    if args.result:
        model, recorded_fp = _model_from_result(args.result)
        if recorded_fp is not None and recorded_fp != fingerprint:
            raise ValueError(
                f"dataset fingerprint mismatch: estimate was run on a different file "
                f"({recorded_fp[:12]}... vs {fingerprint[:12]}...)"
            )
    else:
        model = _model_from_args(args)
    seed = int(args.seed if args.seed is not None else 0)
    emp = EmpiricalCF(dataset, cfg)
    report = bounds_mod.fidelity_report(emp, model.params, cfg=cfg, seed=seed)
    run = {
        "command": "fidelity",
        "dataset": str(args.data),
        "dataset_fingerprint": fingerprint,
        "params": report.meta["params"],
        "integration": cfg.to_json(),
        "seed": seed,
    }
    out = _outdir(args)
    _write_json(out / "fidelity.json", run, report.to_json())
    ed, g = report.e_double_prime, report.g
    print(f"E''  = {ed.value:.4f} +/- {ed.uncertainty:.4f}   (lower bound)")
    ep = report.e_prime
    if ep.computable:
        print(f"E'   = {ep.value:.4f} +/- {ep.uncertainty:.4f}   (lower bound)")
    else:
        lo, hi = ep.radicand_interval
        print(f"E'   = not computable (radicand interval [{lo:.4f}, {hi:.4f}])")
    print(f"G    = {g.value:.4f} +/- {g.uncertainty:.4f}   (upper bound)")
    print(f"sandwich: {ed.value:.4f} <= F^2 <= {g.value:.4f}")
    print(f"wrote {out / 'fidelity.json'}")
    return EXIT_OK


def _check(name: str, ok: bool, detail: str) -> bool:
    print(f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})")
    return ok


def cmd_validate(args) -> int:
    """Cross-checks of every dual route: closed forms vs the Fock oracle."""
    all_ok = True
    x = np.arange(-6.0, 6.0 + 0.025, 0.05)

    worst = 0.0
    for a in (0.0, 0.81):
        for eta in (0.58, 1.0):
            rho = fock.apply_loss(fock.spacs_state(a * np.exp(1j * 3.14)), eta)
            for theta in (0.0, 1.0, 2.49):
                w_model = spacs_tomogram(SpacsModelParams(a, 3.14, eta), x, theta)
                w_oracle = fock.tomogram_of(rho, x, theta)
                worst = max(worst, float(np.max(np.abs(w_model - w_oracle))))
    all_ok &= _check("closed-form tomogram vs Kraus oracle", worst < 1e-8, f"max diff {worst:.2e}")

    from scipy.integrate import quad

    worst = 0.0
    for a, eta in ((0.0, 0.58), (0.81, 0.58), (2.0, 0.3)):
        total, _ = quad(lambda xx: float(spacs_tomogram(SpacsModelParams(a, 0.0, eta), xx, 0.7)),
                        -10.0, 10.0, epsabs=1e-12, limit=200)
        worst = max(worst, abs(total - 1.0))
    all_ok &= _check("tomogram normalization", worst < 1e-8, f"max |int w - 1| {worst:.2e}")

    worst = 0.0
    for a in (0.0, 0.81, 1.5):
        for eta in (0.3, 0.58, 0.9):
            rho = fock.apply_loss(fock.spacs_state(complex(a)), eta)
            tf = fock.trace_functionals(rho, rho)
            tr = bounds_mod.theoretical_traces(a, eta)
            worst = max(worst, abs(tf.purity1 - tr["purity_th"]), abs(tf.four_product - tr["four_th"]))
    all_ok &= _check("closed-form traces vs oracle", worst < 1e-8, f"max diff {worst:.2e}")

    m1 = spacs_model(0.81, 3.14, 0.58)
    m2 = spacs_model(0.5, 0.0, 0.9)
    r1 = fock.apply_loss(fock.spacs_state(0.81 * np.exp(1j * 3.14)), 0.58)
    r2 = fock.apply_loss(fock.spacs_state(0.5), 0.9)
    worst = abs(overlap_tomographic(m1, m1).value - fock.trace_functionals(r1, r1).overlap)
    worst = max(worst, abs(overlap_tomographic(m1, m2).value - fock.trace_functionals(r1, r2).overlap))
    all_ok &= _check("tomographic overlap vs oracle", worst < 1e-3, f"max diff {worst:.2e}")

    rho = fock.spacs_state(1.0 + 0.5j)
    two_step = fock.apply_loss(fock.apply_loss(rho, 0.9), 0.7)
    one_step = fock.apply_loss(rho, 0.63)
    diff = float(np.max(np.abs(two_step.entries - one_step.entries)))
    all_ok &= _check("loss channel composition", diff < 1e-9, f"max diff {diff:.2e}")

    return EXIT_OK if all_ok else EXIT_VALIDATION


def cmd_plotdata(args) -> int:
    _load_config_defaults(args, ["data", "result", "out", "phase_index"])
    if args.data is None:
        raise ValueError("--data is required")
    dataset = load_dataset(args.data)
    idx = int(args.phase_index if args.phase_index is not None else 0)
    if not 0 <= idx < dataset.n_phases:
        raise ValueError(f"phase index {idx} out of range 0..{dataset.n_phases - 1}")
    if args.result:
        model, _ = _model_from_result(args.result)
    elif args.alpha is not None:
        model = _model_from_args(args)
    elif dataset.meta and "true_params" in dataset.meta:
        model = TomogramModel.from_json(dataset.meta["true_params"])
    else:
        raise ValueError("no model parameters: pass --result, --alpha/--eta, or use a dataset with metadata")
    out = _outdir(args)
    hist = histogram(dataset, idx)
    theta = dataset.phases[idx]

    hist_path = out / f"plot_phase{idx}_hist.csv"
    with open(hist_path, "w") as fh:
        fh.write("x,density\n")
        for c, d in zip(hist.centers(), hist.densities):
            fh.write(f"{float(c)!r},{float(d)!r}\n")

    xs = np.arange(-6.0, 6.0 + 0.005, 0.01)
    dens = model.density(xs, theta)
    model_path = out / f"plot_phase{idx}_model.csv"
    with open(model_path, "w") as fh:
        fh.write("x,density\n")
        for c, d in zip(xs, dens):
            fh.write(f"{float(c)!r},{float(d)!r}\n")
    print(f"wrote {hist_path} and {model_path} (theta = {theta:.4f})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spacsfit",
        description="SPACS homodyne parameter estimation and fidelity bounds",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file; explicit flags override it")
        p.add_argument("--out", help=f"output directory (default ${OUTDIR_ENV} or .)")
        p.add_argument("--r-max", type=float, dest="r_max", help="radial integration cutoff")
        p.add_argument("--r-step", type=float, dest="r_step", help="radial integration step")

    def add_model_params(p):
        p.add_argument("--alpha", type=float, help="|alpha|")
        p.add_argument("--phi", type=float, help="state phase (radians)")
        p.add_argument("--eta", type=float, help="overall efficiency")
        p.add_argument("--p", type=float, help="dark-count fraction (selects the mixture family)")

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    add_common(p)
    add_model_params(p)
    p.add_argument("--phases", type=int, help="number of local-oscillator phases (default 21)")
    p.add_argument("--n", type=int, help="samples per phase (default 5321)")
    p.add_argument("--seed", type=int, help="RNG seed (default 0)")
    p.add_argument("--name", help="basename for the CSV (default 'dataset')")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="fit model parameters by minimal distance")
    add_common(p)
    p.add_argument("--data", help="dataset CSV")
    p.add_argument("--family", default="spacs", choices=["spacs", "dark_count"])
    p.add_argument("--fix", action="append", help="pin a parameter, e.g. --fix eta=0.58")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("scan", help="1-D cut of D^2 through given parameters")
    add_common(p)
    add_model_params(p)
    p.add_argument("--data", help="dataset CSV")
    p.add_argument("--axis", choices=["abs_alpha", "phi", "eta", "p"])
    p.add_argument("--points", type=int, help="number of scan points (default 31)")
    p.add_argument("--result", help="estimate.json to take parameters from")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("fidelity", help="fidelity bound sandwich for a dataset")
    add_common(p)
    add_model_params(p)
    p.add_argument("--data", help="dataset CSV")
    p.add_argument("--result", help="estimate.json to take parameters from")
    p.add_argument("--seed", type=int, help="bootstrap seed (default 0)")
    p.set_defaults(func=cmd_fidelity)

    p = sub.add_parser("validate", help="run oracle cross-checks")
    add_common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("plotdata", help="emit histogram + model curve CSVs for one phase")
    add_common(p)
    add_model_params(p)
    p.add_argument("--data", help="dataset CSV")
    p.add_argument("--result", help="estimate.json to take parameters from")
    p.add_argument("--phase-index", type=int, dest="phase_index", help="which phase (default 0)")
    p.set_defaults(func=cmd_plotdata)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
