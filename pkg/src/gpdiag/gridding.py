"""Mapping irregular observations onto regular grids by inverse distance
weighting, grid-shape suggestion, and the grid-size/power sweep.

The pseudo-datum at grid point g is sum_k t_k y_k / sum_k t_k with
t_k = d(g, s_k)^(-lambda), distances taken in rescaled lattice units.
Small powers average widely and oversmooth; with a very large power each
grid point effectively takes the nearest observation's value.  A grid
point colocated with an observation takes that observation's value
exactly (the weights' limit).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .covariance import VarianceParams
from .data import Dataset
from .errors import ParameterError, PreconditionError, ValidationError

COLOCATION_TOL = 1e-9  # in rescaled lattice units


@dataclass(frozen=True)
class GridSpec:
    m1: int
    m2: int
    lam: float = 7.0

    def __post_init__(self):
        if self.m1 < 4 or self.m1 % 2 or self.m2 < 4 or self.m2 % 2:
            raise ParameterError("grid sizes must be even and >= 4")
        if self.lam <= 0:
            raise ParameterError("IDW power must be positive")

    @property
    def dims(self) -> tuple[int, int]:
        return (self.m1, self.m2)

    def lattice_points(self) -> np.ndarray:
        s1 = np.repeat(np.arange(1, self.m1 + 1, dtype=float), self.m2)
        s2 = np.tile(np.arange(1, self.m2 + 1, dtype=float), self.m1)
        return np.column_stack([s1, s2])


def _rescaled_observations(dataset: Dataset, spec: GridSpec) -> np.ndarray:
    """Map the observation bounding box onto [1, M1] x [1, M2]."""
    if dataset.dim != 2:
        raise PreconditionError("gridding applies to 2-D locations")
    loc = dataset.locations
    lo = loc.min(axis=0)
    hi = loc.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    scale = (np.array([spec.m1, spec.m2], dtype=float) - 1.0) / span
    return 1.0 + (loc - lo) * scale


def _idw_values(grid_pts: np.ndarray, obs_pts: np.ndarray, values: np.ndarray, lam: float) -> np.ndarray:
    d = cdist(grid_pts, obs_pts)
    out = np.empty(len(grid_pts))
    for i, row in enumerate(d):
        j_min = int(np.argmin(row))
        d_min = row[j_min]
        if d_min < COLOCATION_TOL:
            out[i] = values[j_min]
            continue
        # weights normalized by the nearest distance so huge powers do not
        # overflow: t_k / t_min = (d_min / d_k)^lambda
        w = (d_min / row) ** lam
        out[i] = float(w @ values) / float(w.sum())
    return out


def idw_smooth(dataset: Dataset, spec: GridSpec, column: str | np.ndarray = "y") -> np.ndarray:
    """Smooth one column onto the grid; returns the M1*M2 pseudo-data in
    lattice row order (second coordinate fastest)."""
    if dataset.n < 1:
        raise PreconditionError("need at least one observation")
    if isinstance(column, str):
        vals = dataset.y if column == "y" or column == dataset.outcome_name else dataset.covariates.get(column)
        if vals is None:
            raise ValidationError(f"unknown column {column!r}")
    else:
        vals = np.asarray(column, dtype=float).ravel()
        if len(vals) != dataset.n:
            raise ValidationError("column length != dataset size")
    obs = _rescaled_observations(dataset, spec)
    return _idw_values(spec.lattice_points(), obs, vals, spec.lam)


def regrid(dataset: Dataset, spec: GridSpec, lam_covariates: float | None = None) -> Dataset:
    """Smooth the outcome and every covariate onto the grid, producing a
    grid-tagged Dataset on the integer lattice.  Covariates may use their
    own power (the outcome's calibrated power is the default)."""
    lam_c = spec.lam if lam_covariates is None else lam_covariates
    y = idw_smooth(dataset, spec, "y")
    cov_spec = GridSpec(spec.m1, spec.m2, lam_c)
    covs = {name: idw_smooth(dataset, cov_spec, name) for name in dataset.covariates}
    return Dataset(
        locations=spec.lattice_points(),
        y=y,
        covariates=covs,
        loc_names=dataset.loc_names if dataset.dim == 2 else ("s1", "s2"),
        outcome_name=dataset.outcome_name,
    )


def _even(x: float) -> int:
    return max(4, int(round(x / 2.0)) * 2)


def suggest_grid(dataset: Dataset, lam_candidates=(5.0, 7.0, 9.0)) -> list[GridSpec]:
    """Propose even grid shapes whose aspect ratio tracks the bounding box
    and whose total size is about 0.5/0.75/1.0 times the observation
    count, crossed with a few IDW powers."""
    if dataset.n < 2:
        raise PreconditionError("need at least two observations")
    loc = dataset.locations
    if dataset.dim != 2:
        raise PreconditionError("grid suggestion applies to 2-D locations")
    span = loc.max(axis=0) - loc.min(axis=0)
    aspect = float(span[0] / span[1]) if span[1] > 0 else 1.0

    shapes: list[tuple[int, int]] = []
    for frac in (0.5, 0.75, 1.0):
        target = max(16.0, frac * dataset.n)
        best, best_score = None, math.inf
        for m2 in range(4, 65, 2):
            for m1 in range(4, 65, 2):
                size_pen = abs(math.log(m1 * m2 / target))
                ratio_pen = abs(math.log((m1 / m2) / aspect))
                # matching the box's aspect matters more than hitting the
                # size target exactly
                score = size_pen + 12.0 * ratio_pen
                if score < best_score:
                    best, best_score = (m1, m2), score
        if best is not None and best not in shapes:
            shapes.append(best)
    return [GridSpec(m1, m2, lam) for (m1, m2) in shapes for lam in lam_candidates]


def calibrate_lambda(
    dataset: Dataset,
    shape: tuple[int, int],
    lam_candidates=(5.0, 7.0, 9.0),
    nu: float = 0.5,
    optimizer=None,
) -> tuple[float, dict]:
    """Pick the IDW power whose gridded pseudo-data give exact-likelihood
    estimates closest to the raw data's, by the summed squared relative
    difference over the three variance parameters."""
    from .reml import fit as reml_fit

    raw = reml_fit(dataset, method="exact", nu=nu, optimizer=optimizer)
    raw_est = np.array([raw.params.sigma_s2, raw.params.sigma_e2, raw.params.rho])
    report = {}
    best_lam, best_loss = None, math.inf
    for lam in lam_candidates:
        gridded = regrid(dataset, GridSpec(shape[0], shape[1], lam))
        est = reml_fit(gridded, method="exact", nu=nu, optimizer=optimizer)
        vec = np.array([est.params.sigma_s2, est.params.sigma_e2, est.params.rho])
        loss = float(np.sum(((vec - raw_est) / raw_est) ** 2))
        report[lam] = {"estimates": vec.tolist(), "loss": loss}
        if loss < best_loss:
            best_lam, best_loss = lam, loss
    report["raw_estimates"] = raw_est.tolist()
    return best_lam, report


def _blank_space_mask(locations: np.ndarray, fraction: float) -> np.ndarray:
    """Keep-mask omitting an upward-opening wedge with apex at the center
    of the bounding box; fraction in {0, 1/8, 1/4} of the area."""
    if fraction == 0:
        return np.ones(len(locations), dtype=bool)
    lo = locations.min(axis=0)
    hi = locations.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    u = (locations - lo) / span  # normalized to the unit square
    if abs(fraction - 0.125) < 1e-12:
        omit = (u[:, 1] > -2 * u[:, 0] + 1.5) & (u[:, 1] > 2 * u[:, 0] - 0.5)
    elif abs(fraction - 0.25) < 1e-12:
        omit = (u[:, 1] > -u[:, 0] + 1.0) & (u[:, 1] > u[:, 0])
    else:
        raise ParameterError("blank fraction must be 0, 1/8, or 1/4")
    return ~omit


def _collect_cell(rows_params) -> dict:
    ok = [p for p in rows_params if isinstance(p, VarianceParams)]
    n_failed = len(rows_params) - len(ok)
    if not ok:
        return {"n_ok": 0, "n_failed": n_failed}
    logs = np.log10(np.array([[p.sigma_s2, p.sigma_e2, p.rho] for p in ok]))
    mean = logs.mean(axis=0)
    se = logs.std(axis=0, ddof=1) / math.sqrt(len(ok)) if len(ok) > 1 else np.zeros(3)
    return {
        "n_ok": len(ok),
        "n_failed": n_failed,
        "mean_log10_sigma_s2": float(mean[0]),
        "se_log10_sigma_s2": float(se[0]),
        "mean_log10_sigma_e2": float(mean[1]),
        "se_log10_sigma_e2": float(se[1]),
        "mean_log10_rho": float(mean[2]),
        "se_log10_rho": float(se[2]),
    }


def idw_sweep(
    dataset: Dataset,
    sizes,
    lambdas,
    truth: VarianceParams | None = None,
    replicates: int = 1,
    blank_fractions=(0.0,),
    seed: int = 0,
    nu: float = 0.5,
    optimizer=None,
) -> list[dict]:
    """Grid-size / power sweep quantifying what smoothing-to-grid does to
    the variance estimates.

    For each replicate (a fresh simulated outcome at the dataset's
    locations when truth is given, else the dataset's own outcome), each
    blank-space level, and each (M, lambda) cell, fits the exact
    likelihood on the raw data, the exact likelihood on the gridded
    pseudo-data, and the approximate likelihood on the gridded
    pseudo-data.  Returns one row per (blank_fraction, M, lambda, method)
    with means and standard errors of the log10 estimates; per-replicate
    fit failures are recorded and excluded.
    """
    from .reml import fit as reml_fit
    from .simulation import gp_draws

    if replicates < 1:
        raise ParameterError("replicates must be >= 1")
    if truth is not None:
        ys = gp_draws(dataset.locations, truth, replicates, seed=seed)
    else:
        ys = [dataset.y]

    rows = []
    for blank in blank_fractions:
        keep = _blank_space_mask(dataset.locations, blank)
        analysis = []
        for y in ys:
            ds = Dataset(
                dataset.locations[keep],
                np.asarray(y)[keep],
                loc_names=dataset.loc_names,
                outcome_name=dataset.outcome_name,
            )
            try:
                res = reml_fit(ds, method="exact", nu=nu, optimizer=optimizer)
                analysis.append((ds, res.params))
            except Exception as exc:  # recorded, sweep continues
                analysis.append((ds, exc))
        rows.append(
            {
                "m": None,
                "lam": None,
                "blank_fraction": float(blank),
                "method": "raw_exact",
                **_collect_cell([p for (_, p) in analysis]),
            }
        )
        for m in sizes:
            for lam in lambdas:
                cell = {"grid_exact": [], "grid_approx": []}
                for ds, _ in analysis:
                    try:
                        gridded = regrid(ds, GridSpec(m, m, lam))
                    except Exception as exc:
                        cell["grid_exact"].append(exc)
                        cell["grid_approx"].append(exc)
                        continue
                    for method, key in (
                        ("exact", "grid_exact"),
                        ("approximate", "grid_approx"),
                    ):
                        try:
                            res = reml_fit(gridded, method=method, nu=nu, optimizer=optimizer)
                            cell[key].append(res.params)
                        except Exception as exc:
                            cell[key].append(exc)
                for key in ("grid_exact", "grid_approx"):
                    rows.append(
                        {
                            "m": int(m),
                            "lam": float(lam),
                            "blank_fraction": float(blank),
                            "method": key,
                            **_collect_cell(cell[key]),
                        }
                    )
    return rows
