"""Model-fit diagnostics: v_j^2 series, added variable plots in the
observation and spectral domains, Cook's distances, candidate ranking.

Both added variable plots estimate the same coefficient for a candidate
covariate at a fixed fitted covariance.  The observation-domain plot
whitens by the inverse square root of the fitted covariance and projects
out the current design, so its through-origin slope equals the GLS
coefficient the candidate would get if added to the model; its signal is
carried mostly by high-frequency data features.  The spectral-domain
plot works on the per-frequency projections of the residualized outcome
and candidate, whitened by the fitted per-frequency standard deviations;
it emphasizes low-frequency features and, with Cook's distances per
frequency index, ties a prominent v_j^2 to the candidate that would
absorb it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import t as t_dist

from .basis import SpectralBasis, project
from .covariance import VarianceParams, a_sequence, build_V
from .data import Dataset, DesignMatrix, standardize
from .errors import (
    DegenerateColumnError,
    InfluenceDegenerateWarning,
    PreconditionError,
    RankError,
    ValidationError,
)
from .projection import residualize
from .reml import FitResult

BAND_WIDTH = 100  # frequency-index bands attached to spectral-domain output


@dataclass(frozen=True)
class VjSquaredSeries:
    j: np.ndarray
    v_sq: np.ndarray
    fitted: np.ndarray
    params_ref: dict

    def to_json(self) -> dict:
        return {
            "params_ref": self.params_ref,
            "entries": [
                {"j": int(jj), "v_sq": float(v), "fitted": float(f)}
                for jj, v, f in zip(self.j, self.v_sq, self.fitted)
            ],
        }


@dataclass(frozen=True)
class AvpResult:
    domain: str               # "observation" | "spectral"
    covariate_name: str
    ids: np.ndarray           # observation index or frequency index j
    x: np.ndarray             # transformed candidate residuals
    y: np.ndarray             # transformed outcome residuals
    cook: np.ndarray
    slope: float
    se: float
    p_value: float

    def to_json(self) -> dict:
        out = {
            "domain": self.domain,
            "covariate_name": self.covariate_name,
            "slope": self.slope,
            "se": self.se,
            "p_value": self.p_value,
            "points": [
                {"id": int(i), "x": float(x), "y": float(y), "cook": float(c)}
                for i, x, y, c in zip(self.ids, self.x, self.y, self.cook)
            ],
        }
        if self.domain == "spectral":
            n = len(self.ids)
            out["bands"] = [
                {"lo": lo, "hi": min(lo + BAND_WIDTH - 1, n)}
                for lo in range(1, n + 1, BAND_WIDTH)
            ]
        return out

    def top_cook_ids(self, k: int = 5) -> list[int]:
        order = np.argsort(-self.cook, kind="stable")
        return [int(self.ids[i]) for i in order[:k]]


def vj_squared_series(
    fit: FitResult, basis: SpectralBasis | None = None, a_seq: np.ndarray | None = None
) -> VjSquaredSeries:
    """Pair each squared projection with its fitted mean
    sigma_s2 a_j(rho) + sigma_e2 under the fit's parameters."""
    if fit.v_sq is None:
        raise PreconditionError("fit carries no spectral projections (irregular data)")
    if a_seq is None:
        if basis is None:
            raise PreconditionError("need a basis or a precomputed a-sequence")
        a_seq = a_sequence(basis, fit.params.rho, fit.params.nu)
    fitted = fit.params.sigma_s2 * np.asarray(a_seq) + fit.params.sigma_e2
    n = len(fit.v_sq)
    return VjSquaredSeries(
        j=np.arange(1, n + 1),
        v_sq=np.asarray(fit.v_sq),
        fitted=fitted,
        params_ref={"method": fit.method, **fit.params.as_dict()},
    )


def _through_origin(ids, x, y, domain, name) -> AvpResult:
    sxx = float(x @ x)
    if sxx <= 0:
        raise RankError(f"candidate {name!r} has no variation left after projection")
    n = len(x)
    slope = float(x @ y) / sxx
    resid = y - slope * x
    dof = n - 1
    s2 = float(resid @ resid) / dof
    se = np.sqrt(s2 / sxx)
    if se == 0:
        p = 0.0
    else:
        p = 2.0 * float(t_dist.sf(abs(slope) / se, dof))
    return AvpResult(
        domain=domain,
        covariate_name=name,
        ids=np.asarray(ids),
        x=x,
        y=y,
        cook=cooks_distances(x, y),
        slope=slope,
        se=float(se),
        p_value=p,
    )


def _prepared_candidate(dataset, design, candidate):
    """Standardize the candidate column and refuse collinear ones."""
    if isinstance(candidate, str):
        name = candidate
        col = dataset.covariates.get(candidate)
        if col is None:
            raise ValidationError(f"unknown covariate {candidate!r}")
    else:
        name = "candidate"
        col = np.asarray(candidate, dtype=float).ravel()
    if name in design.names:
        raise ValidationError(f"candidate {name!r} is already in the model")
    try:
        std, _, _ = standardize(col)
    except DegenerateColumnError:
        raise RankError(f"candidate {name!r} is constant (collinear with intercept)") from None
    aug = np.column_stack([design.matrix, std])
    sv = np.linalg.svd(aug, compute_uv=False)
    if sv[-1] <= 1e-8 * sv[0]:
        raise RankError(f"candidate {name!r} is collinear with the design")
    return name, std


def avp_observation(
    dataset: Dataset, design: DesignMatrix, candidate, fit: FitResult
) -> AvpResult:
    """Added variable plot on whitened observations.

    Whitens with the symmetric inverse square root of the fitted
    covariance (symmetric so the subsequent projector is one), projects
    out the design, and regresses outcome points on candidate points
    through the origin.
    """
    name, cand = _prepared_candidate(dataset, design, candidate)
    v_hat = build_V(dataset, fit.params).V
    evals, evecs = np.linalg.eigh(v_hat)
    if np.min(evals) <= 0:
        raise PreconditionError("fitted covariance is not positive definite")
    w = evecs @ np.diag(evals**-0.5) @ evecs.T
    xw = w @ design.matrix
    q, _ = np.linalg.qr(xw)
    yw = w @ dataset.y
    cw = w @ cand
    y_pts = yw - q @ (q.T @ yw)
    x_pts = cw - q @ (q.T @ cw)
    ids = np.arange(1, dataset.n + 1)
    return _through_origin(ids, x_pts, y_pts, "observation", name)


def avp_spectral(
    dataset: Dataset,
    basis: SpectralBasis,
    design: DesignMatrix,
    candidate,
    fit: FitResult,
    a_seq: np.ndarray | None = None,
) -> AvpResult:
    """Added variable plot on per-frequency projections.

    Projects the residualized outcome and the residualized, standardized
    candidate onto the basis, whitens each frequency by
    1/sqrt(sigma_s2 a_j(rho) + sigma_e2), and regresses through the origin.
    """
    if not dataset.is_grid:
        raise PreconditionError("spectral added variable plots need grid data")
    dataset = dataset.to_lattice_order()
    name, cand = _prepared_candidate(dataset, design, candidate)
    if a_seq is None:
        a_seq = a_sequence(basis, fit.params.rho, fit.params.nu)
    d_scale = 1.0 / np.sqrt(fit.params.sigma_s2 * np.asarray(a_seq) + fit.params.sigma_e2)
    v_y = project(basis, residualize(dataset.y, design).y_star).v
    v_c = project(basis, residualize(cand, design).y_star).v
    ids = np.arange(1, basis.n_columns + 1)
    return _through_origin(ids, d_scale * v_c, d_scale * v_y, "spectral", name)


def cooks_distances(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Influence of each point on a through-origin regression slope.

    D_i = r_i^2 h_i / (s^2 (1 - h_i)^2) with leverage h_i = x_i^2 / sum x^2
    and s^2 = RSS / (n - 1); equals the squared leave-one-out slope change
    scaled by sum x^2 / s^2.  A point with all the leverage gets +inf and
    a warning.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if len(x) != len(y):
        raise ValidationError("x and y lengths differ")
    if len(x) < 3:
        raise PreconditionError("need at least 3 points")
    sxx = float(x @ x)
    if sxx <= 0:
        raise PreconditionError("sum of squared x must be positive")
    h = x**2 / sxx
    slope = float(x @ y) / sxx
    resid = y - slope * x
    s2 = float(resid @ resid) / (len(x) - 1)
    out = np.empty_like(x)
    full = h >= 1.0 - 1e-15
    if np.any(full):
        warnings.warn(
            "a single point carries all leverage; its influence is infinite",
            InfluenceDegenerateWarning,
        )
    out[full] = np.inf
    ok = ~full
    if s2 == 0:
        out[ok] = 0.0
        return out
    out[ok] = resid[ok] ** 2 * h[ok] / (s2 * (1.0 - h[ok]) ** 2)
    return out


def rank_candidates(avps: list[AvpResult], focus_j: int | None = None) -> list[dict]:
    """Order candidates by slope p-value; when a prominent frequency index
    is given, report whether it sits among each candidate's five most
    influential points."""
    rows = []
    for avp in avps:
        row = {
            "covariate_name": avp.covariate_name,
            "domain": avp.domain,
            "slope": avp.slope,
            "se": avp.se,
            "p_value": avp.p_value,
            "top_cook_ids": avp.top_cook_ids(5),
        }
        if focus_j is not None:
            row["focus_j"] = int(focus_j)
            row["covers_focus"] = int(focus_j) in row["top_cook_ids"]
        rows.append(row)
    rows.sort(key=lambda r: (r["p_value"], r["covariate_name"]))
    return rows
