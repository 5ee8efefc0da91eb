"""Fixed-effect residualization and its effect on spectral projections.

Removing the design's column space from the data before projecting onto
the spectral basis is what lets one basis serve every candidate model:
all variation explainable by the design is attributed to it, and the
per-frequency projections are reduced by exactly the component of the
data that the design removes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import SpectralBasis, project
from .data import DesignMatrix
from .errors import DimensionError, RankError


@dataclass(frozen=True)
class ResidualProjection:
    y_star: np.ndarray
    projector_rank: int
    design_ref: tuple[str, ...]


def residualize(y: np.ndarray, design: DesignMatrix) -> ResidualProjection:
    """Residuals from regressing y on the design, via a QR factorization
    (normal equations lose precision when covariates are nearly collinear
    with smooth basis columns)."""
    y = np.asarray(y, dtype=float).ravel()
    x = design.matrix
    if len(y) != x.shape[0]:
        raise DimensionError(f"y length {len(y)} != design rows {x.shape[0]}")
    q, r = np.linalg.qr(x)
    if np.min(np.abs(np.diag(r))) <= 1e-10 * np.max(np.abs(np.diag(r))):
        raise RankError("design matrix is rank deficient")
    y_star = y - q @ (q.T @ y)
    return ResidualProjection(
        y_star=y_star, projector_rank=x.shape[1], design_ref=design.names
    )


def v_reduction(basis: SpectralBasis, design: DesignMatrix, y: np.ndarray):
    """Per-frequency split of the projections into kept and removed parts.

    Returns (v, v_star, delta): projections of the raw data, of the
    residualized data, and their difference (what the design removes at
    each frequency).
    """
    y = np.asarray(y, dtype=float).ravel()
    v = project(basis, y).v
    v_star = project(basis, residualize(y, design).y_star).v
    return v, v_star, v - v_star
