"""Command-line front door: fit, avp, grid, simulate, sweep.

Every command is a thin adapter over the library: given the same seeds
and inputs, the files written here are byte-identical to serializing the
corresponding library calls.  Exit codes: 0 ok, 2 usage error, 3 data
error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import plots
from .basis import build_basis_1d, build_basis_2d
from .covariance import VarianceParams, a_sequence
from .data import design_matrix, export_csv, ingest_csv
from .diagnostics import avp_observation, avp_spectral, rank_candidates, vj_squared_series
from .errors import GpdiagError, NumericalError, OptimizationError
from .gridding import GridSpec, idw_sweep, regrid
from .reml import OptimizerConfig, fit
from .simulation import (
    TRUTH_GRID,
    SimConfig,
    run_experiment,
    standard_contamination,
)

USAGE_ERROR, DATA_ERROR, NUMERICAL_ERROR = 2, 3, 4

SIM_PRESETS = ("outlier", "mean-shift", "range-change")


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _load_dataset(args):
    schema = {"loc": args.loc, "outcome": args.outcome}
    if getattr(args, "covariates", None):
        schema["covariates"] = args.covariates
    return ingest_csv(args.csv, schema)


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _optimizer(args) -> OptimizerConfig:
    return OptimizerConfig(seed=args.seed)


def _basis_for(dataset):
    dims = dataset.grid.dims
    return build_basis_1d(dims[0]) if len(dims) == 1 else build_basis_2d(*dims)


def cmd_fit(args) -> int:
    try:
        ds = _load_dataset(args)
    except GpdiagError as exc:
        return _fail(DATA_ERROR, str(exc))
    if args.method == "approximate" and not ds.is_grid:
        return _fail(DATA_ERROR, "approximate method requires grid data (run `grid` first)")
    design = design_matrix(ds, args.covariates or [])
    try:
        res = fit(ds, design, method=args.method, nu=args.nu, optimizer=_optimizer(args))
    except (NumericalError, OptimizationError) as exc:
        return _fail(NUMERICAL_ERROR, str(exc))
    except GpdiagError as exc:
        return _fail(DATA_ERROR, str(exc))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "fit.json", res.to_json())
    if args.plot and res.v_sq is not None:
        basis = _basis_for(ds.to_lattice_order())
        series = vj_squared_series(res, basis=basis)
        (out / "vj_squared.svg").write_text(plots.render("vj_squared", series.to_json()))
        a = a_sequence(basis, res.params.rho, res.params.nu)
        (out / "a_curve.svg").write_text(
            plots.render("a_curve", a, label="fitted spectral density by index")
        )
    print(str(out / "fit.json"))
    return 0


def cmd_avp(args) -> int:
    try:
        ds = _load_dataset(args)
    except GpdiagError as exc:
        return _fail(DATA_ERROR, str(exc))
    fit_path = Path(args.fit_json)
    if not fit_path.exists():
        return _fail(USAGE_ERROR, f"fit file not found: {fit_path}")
    fitted = json.loads(fit_path.read_text())
    from .reml import FitResult

    params = VarianceParams(nu=fitted["nu"] if fitted["nu"] is not None else math.inf,
                            **fitted["params"])
    res = FitResult(
        params=params,
        objective=fitted["objective"],
        method=fitted["method"],
        nu=params.nu,
        gls=None,
        v_sq=None if fitted.get("v_sq") is None else np.asarray(fitted["v_sq"]),
        basis_dims=None,
        converged=fitted["converged"],
        n_starts=fitted["n_starts"],
    )
    model_covs = args.model or []
    design = design_matrix(ds, model_covs)
    domains = {"observation", "spectral"} if args.domain == "both" else {args.domain}
    if "spectral" in domains and not ds.is_grid:
        return _fail(DATA_ERROR, "spectral domain requires grid data (run `grid` first)")
    basis = _basis_for(ds.to_lattice_order()) if ds.is_grid else None
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    summary = []
    rankable = []
    for name in args.candidates:
        if name in model_covs:
            summary.append({"covariate_name": name, "slope": "--", "p_value": "--"})
            continue
        for domain in sorted(domains):
            try:
                if domain == "observation":
                    avp = avp_observation(ds, design, name, res)
                else:
                    a = a_sequence(basis, params.rho, params.nu)
                    avp = avp_spectral(ds.to_lattice_order(), basis, design, name, res, a)
            except NumericalError as exc:
                return _fail(NUMERICAL_ERROR, str(exc))
            except GpdiagError as exc:
                return _fail(DATA_ERROR, str(exc))
            payload = avp.to_json()
            _write_json(out / f"avp_{domain}_{name}.json", payload)
            (out / f"avp_{domain}_{name}.svg").write_text(plots.render("avp", payload))
            rankable.append(avp)
    ranked = rank_candidates(rankable, focus_j=args.focus_j)
    summary = ranked + summary
    _write_json(out / "summary.json", summary)
    print(str(out / "summary.json"))
    return 0


def cmd_grid(args) -> int:
    try:
        ds = _load_dataset(args)
    except GpdiagError as exc:
        return _fail(DATA_ERROR, str(exc))
    try:
        spec = GridSpec(args.m1, args.m2, getattr(args, "lambda"))
        gridded = regrid(ds, spec, lam_covariates=args.lambda_covariates)
    except GpdiagError as exc:
        return _fail(DATA_ERROR, str(exc))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "gridded.csv"
    export_csv(gridded, path)
    if args.plot:
        (out / "field.svg").write_text(
            plots.render(
                "field_heatmap",
                {"values": gridded.y, "dims": spec.dims},
                label=ds.outcome_name,
            )
        )
    print(str(path))
    return 0


def cmd_simulate(args) -> int:
    if args.preset not in SIM_PRESETS:
        return _fail(USAGE_ERROR, f"unknown preset {args.preset!r}; choose {SIM_PRESETS}")
    kind = args.preset.replace("-", "_")
    m = args.m
    configs = [
        SimConfig(dims=(m,), truth=t, seed=args.seed, replicates=args.replicates)
        for t in TRUTH_GRID
    ]
    if args.truth:
        s, e, r = (float(v) for v in args.truth.split(","))
        configs = [
            SimConfig(dims=(m,), truth=VarianceParams(s, e, r), seed=args.seed,
                      replicates=args.replicates)
        ]
    try:
        rows = run_experiment(
            configs,
            [standard_contamination(kind, m)],
            methods=tuple(args.methods),
            optimizer=_optimizer(args),
        )
    except NumericalError as exc:
        return _fail(NUMERICAL_ERROR, str(exc))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "experiment.json", rows)
    _write_csv_rows(out / "experiment.csv", rows)
    if args.plot:
        (out / "experiment.svg").write_text(
            plots.render("experiment_table", rows, label=f"contamination: {args.preset}")
        )
    print(str(out / "experiment.csv"))
    return 0


def cmd_sweep(args) -> int:
    rng = np.random.default_rng(args.seed)
    loc = rng.uniform(0.0, 1.0, size=(args.points, 2))
    from .data import Dataset

    ds = Dataset(loc, np.zeros(args.points) + rng.standard_normal(args.points))
    extent = ds.extent
    truth = VarianceParams(12.0, 5.0, 0.1 * extent)
    try:
        rows = idw_sweep(
            ds,
            sizes=[int(s) for s in args.sizes.split(",")],
            lambdas=[float(v) for v in args.lambdas.split(",")],
            truth=truth,
            replicates=args.replicates,
            seed=args.seed,
            optimizer=_optimizer(args),
        )
    except NumericalError as exc:
        return _fail(NUMERICAL_ERROR, str(exc))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "sweep.json", rows)
    _write_csv_rows(out / "sweep.csv", rows)
    print(str(out / "sweep.csv"))
    return 0


def _write_csv_rows(path: Path, rows: list[dict]) -> None:
    if not rows:
        path.write_text("")
        return
    cols: list[str] = []
    for row in rows:
        for key in row:
            if key not in cols:
                cols.append(key)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=cols)
        writer.writeheader()
        writer.writerows(rows)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gpdiag",
        description="diagnostics for linear mixed models with GP random effects",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_data_flags(p):
        p.add_argument("--csv", required=True, help="input CSV path")
        p.add_argument("--loc", nargs="+", required=True, help="1 or 2 location columns")
        p.add_argument("--outcome", required=True, help="outcome column")
        p.add_argument("--covariates", nargs="*", default=[], help="covariate columns")

    def add_common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out-dir", default=".", help="output directory")
        p.add_argument("--plot", action="store_true", help="also write SVG plots")

    p_fit = sub.add_parser("fit", help="maximize a restricted likelihood")
    add_data_flags(p_fit)
    add_common(p_fit)
    p_fit.add_argument("--method", choices=["exact", "approximate"], default="exact")
    p_fit.add_argument("--nu", type=float, default=0.5)
    p_fit.set_defaults(func=cmd_fit)

    p_avp = sub.add_parser("avp", help="added variable plots for candidates")
    add_data_flags(p_avp)
    add_common(p_avp)
    p_avp.add_argument("--fit-json", required=True, help="fit.json from `fit`")
    p_avp.add_argument("--candidates", nargs="+", required=True)
    p_avp.add_argument("--model", nargs="*", default=[], help="covariates already in the model")
    p_avp.add_argument("--domain", choices=["observation", "spectral", "both"], default="both")
    p_avp.add_argument("--focus-j", type=int, default=None)
    p_avp.set_defaults(func=cmd_avp)

    p_grid = sub.add_parser("grid", help="smooth irregular data onto a regular grid")
    add_data_flags(p_grid)
    add_common(p_grid)
    p_grid.add_argument("--m1", type=int, required=True)
    p_grid.add_argument("--m2", type=int, required=True)
    p_grid.add_argument("--lambda", type=float, default=7.0, dest="lambda")
    p_grid.add_argument("--lambda-covariates", type=float, default=None)
    p_grid.set_defaults(func=cmd_grid)

    p_sim = sub.add_parser("simulate", help="run a contamination experiment")
    add_common(p_sim)
    p_sim.add_argument("--preset", required=True, choices=SIM_PRESETS)
    p_sim.add_argument("--replicates", type=int, default=20)
    p_sim.add_argument("--m", type=int, default=200, help="series length")
    p_sim.add_argument("--truth", default=None, help="sigma_s2,sigma_e2,rho (else all 8 presets)")
    p_sim.add_argument("--methods", nargs="+", default=["exact", "approximate"],
                       choices=["exact", "approximate"])
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="grid-size / IDW-power sweep")
    add_common(p_sweep)
    p_sweep.add_argument("--sizes", default="12,16,20", help="comma-separated grid sizes")
    p_sweep.add_argument("--lambdas", default="5,10,100", help="comma-separated powers")
    p_sweep.add_argument("--replicates", type=int, default=5)
    p_sweep.add_argument("--points", type=int, default=200, help="observations per replicate")
    p_sweep.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE_ERROR if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except GpdiagError as exc:
        return _fail(DATA_ERROR, str(exc))


if __name__ == "__main__":
    sys.exit(main())
