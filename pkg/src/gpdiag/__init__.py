"""Diagnostics for linear mixed models with Gaussian-process random effects.

Fits such models by exact and spectrally approximated restricted
likelihood, exposes the transformed data v_j^2 that drive the variance
estimates, draws added variable plots in the observation and spectral
domains, smooths irregular data to regular grids, and reproduces the
contamination and gridding experiments the tools were validated on.
"""

from .basis import (
    SpectralBasis,
    SpectralProjection,
    build_basis_1d,
    build_basis_2d,
    order_columns,
    project,
)
from .covariance import (
    CovarianceMatrices,
    VarianceParams,
    a_sequence,
    approx_covariance,
    build_V,
    correlation,
    kl_projection_distance,
    spectral_density_1d,
    spectral_density_2d,
)
from .data import (
    Dataset,
    DesignMatrix,
    design_matrix,
    destandardize,
    export_csv,
    ingest_csv,
    standardize,
)
from .diagnostics import (
    AvpResult,
    VjSquaredSeries,
    avp_observation,
    avp_spectral,
    cooks_distances,
    rank_candidates,
    vj_squared_series,
)
from .gridding import GridSpec, calibrate_lambda, idw_smooth, idw_sweep, regrid, suggest_grid
from .projection import ResidualProjection, residualize, v_reduction
from .reml import FitResult, OptimizerConfig, approx_rl, exact_rl, fit, gls_beta
from .simulation import (
    Contamination,
    SimConfig,
    contaminate,
    run_experiment,
    simulate_gp,
    trend_outlier_demo,
)

__version__ = "0.1.0"
