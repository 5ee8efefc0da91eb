"""Correlation functions, their spectral densities, and covariance builders.

Supported smoothness values are the closed-form half-integer cases
nu in {0.5, 1.5, 2.5} plus the squared-exponential limit nu = inf, so no
Bessel evaluations are needed anywhere.

Two conventions coexist deliberately.  Exact-domain correlations use
K(d) = exp(-sqrt(2) d / rho) at nu = 0.5 and the sqrt(2 nu) d / rho
argument for the other half-integer cases.  Spectral densities use the
Cauchy-type closed forms (dimension D in {1, 2}); their range convention
differs from the correlation's by roughly a factor of two, which is why
range estimates from the spectrally approximated likelihood run about
twice the exact-likelihood estimates on the same data.  A constant
rescaling of the density is absorbed by the process-variance estimate
and never changes the range or error-variance estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor

from .errors import NumericalError, ParameterError, ValidationError

SUPPORTED_NU = (0.5, 1.5, 2.5, math.inf)

# jitter ladder applied to the process covariance before factorization,
# as multiples of the mean diagonal
JITTER_LADDER = (0.0, 1e-10, 1e-8, 1e-6)


@dataclass(frozen=True)
class VarianceParams:
    sigma_s2: float          # process variance, outcome units^2
    sigma_e2: float          # error variance, outcome units^2
    rho: float               # range, distance units
    nu: float = 0.5          # smoothness, fixed per fit

    def __post_init__(self):
        if self.sigma_s2 < 0 or self.sigma_e2 < 0:
            raise ParameterError("variances must be nonnegative")
        if self.sigma_s2 + self.sigma_e2 <= 0:
            raise ParameterError("sigma_s2 + sigma_e2 must be positive")
        if self.rho <= 0:
            raise ParameterError("range must be positive")
        _check_nu(self.nu)

    def as_dict(self) -> dict:
        return {"sigma_s2": self.sigma_s2, "sigma_e2": self.sigma_e2, "rho": self.rho}


@dataclass(frozen=True)
class CovarianceMatrices:
    Sigma: np.ndarray
    R: np.ndarray
    V: np.ndarray


def _check_nu(nu: float) -> None:
    if nu not in SUPPORTED_NU:
        raise ParameterError(
            f"unsupported smoothness nu={nu}; choose one of {SUPPORTED_NU}"
        )


def correlation(d, rho: float, nu: float = 0.5):
    """Correlation at distance d; vectorized over d.

    nu = 0.5 is exp(-sqrt(2) d / rho); 1.5 and 2.5 are the closed-form
    half-integer cases with argument sqrt(2 nu) d / rho; nu = inf is the
    squared-exponential limit exp(-d^2 / (2 rho^2)).
    """
    if rho <= 0:
        raise ParameterError("range must be positive")
    _check_nu(nu)
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ParameterError("distances must be nonnegative")
    if nu == 0.5:
        return np.exp(-math.sqrt(2.0) * d / rho)
    if nu == 1.5:
        x = math.sqrt(3.0) * d / rho
        return (1.0 + x) * np.exp(-x)
    if nu == 2.5:
        x = math.sqrt(5.0) * d / rho
        return (1.0 + x + x**2 / 3.0) * np.exp(-x)
    return np.exp(-(d**2) / (2.0 * rho**2))


def _matern_density(wtw, rho: float, nu: float, dim: int):
    """General closed-form Matern spectral density at squared frequency
    norm wtw, dimension dim; nu = inf is the pointwise limit."""
    if nu is math.inf or nu == math.inf:
        return (math.sqrt(math.pi) * rho / 2.0) ** dim * np.exp(
            -((math.pi * rho) ** 2) * wtw / 4.0
        )
    c = (
        math.gamma(nu + dim / 2.0)
        * (4.0 * nu) ** nu
        / (math.pi ** (dim / 2.0) * math.gamma(nu) * (math.pi * rho) ** (2.0 * nu))
    )
    return c * (4.0 * nu / (math.pi * rho) ** 2 + wtw) ** (-(nu + dim / 2.0))


def spectral_density_1d(omega, rho: float, nu: float = 0.5):
    """Spectral density on [-1/2, 1/2]; the nu = 0.5 case is the Cauchy
    form (rho/sqrt(2)) (1 + (pi rho)^2 omega^2 / 2)^{-1}."""
    if rho <= 0:
        raise ParameterError("range must be positive")
    _check_nu(nu)
    omega = np.asarray(omega, dtype=float)
    if nu == 0.5:
        return (rho / math.sqrt(2.0)) / (1.0 + (math.pi * rho) ** 2 * omega**2 / 2.0)
    return _matern_density(omega**2, rho, nu, dim=1)


def spectral_density_2d(omega, rho: float, nu: float = 0.5):
    """Isotropic spectral density at a frequency 2-vector (or (n, 2)
    array); the nu = 0.5 case is
    (pi rho^2 / 4) (1 + (pi rho)^2 w'w / 2)^{-3/2}."""
    if rho <= 0:
        raise ParameterError("range must be positive")
    _check_nu(nu)
    omega = np.atleast_2d(np.asarray(omega, dtype=float))
    wtw = np.sum(omega**2, axis=1)
    if nu == 0.5:
        out = (math.pi * rho**2 / 4.0) * (
            1.0 + (math.pi * rho) ** 2 * wtw / 2.0
        ) ** (-1.5)
    else:
        out = _matern_density(wtw, rho, nu, dim=2)
    return out[0] if out.size == 1 else out


def density_for_dim(dim: int):
    """Density callable (freq row vector, rho) -> value, for order checks."""
    if dim == 1:
        return lambda w, rho: float(spectral_density_1d(w[0], rho))
    return lambda w, rho: float(spectral_density_2d(w, rho))


def a_sequence(basis, rho: float, nu: float = 0.5) -> np.ndarray:
    """Spectral-density value at each basis column's frequency.

    These are the per-frequency prior variances (up to sigma_s2) in the
    approximate likelihood; non-increasing in j by the canonical order.
    """
    if basis.freq.shape[1] == 1:
        return np.asarray(spectral_density_1d(basis.freq[:, 0], rho, nu))
    return np.asarray(spectral_density_2d(basis.freq, rho, nu))


def build_V(dataset, params: VarianceParams) -> CovarianceMatrices:
    """Sigma_ij = sigma_s2 K(||s_i - s_j||), R = sigma_e2 I, V = Sigma + R."""
    d = dataset.pairwise_distances
    sigma = params.sigma_s2 * correlation(d, params.rho, params.nu)
    r = params.sigma_e2 * np.eye(dataset.n)
    return CovarianceMatrices(Sigma=sigma, R=r, V=sigma + r)


def chol_with_jitter(v: np.ndarray, params=None):
    """Cholesky factor of a symmetric PSD matrix, escalating a small
    diagonal jitter when the bare factorization fails.

    Returns (cho_factor result, log-determinant).  The jitter rungs are
    JITTER_LADDER times the mean diagonal; exhausting them raises
    NumericalError carrying the parameter point.
    """
    mean_diag = float(np.mean(np.diag(v)))
    if not np.isfinite(mean_diag) or mean_diag <= 0:
        raise NumericalError("covariance diagonal is not positive", params=params)
    for rung in JITTER_LADDER:
        try:
            c, low = cho_factor(v + rung * mean_diag * np.eye(v.shape[0]), lower=True)
        except np.linalg.LinAlgError:
            continue
        logdet = 2.0 * float(np.sum(np.log(np.diag(c))))
        return (c, low), logdet
    raise NumericalError(
        "covariance not positive definite after jitter escalation", params=params
    )


def approx_covariance(basis, params: VarianceParams) -> np.ndarray:
    """Model covariance implied by the basis: Z G Z' + sigma_e2 I with
    G = sigma_s2 Diag(a_j / c_j), so the projected covariance is exactly
    sigma_s2 Diag(a_j) + sigma_e2 I."""
    a = a_sequence(basis, params.rho, params.nu)
    g = params.sigma_s2 * a / basis.ztz_diag
    n = basis.n_points
    return (basis.Z * g) @ basis.Z.T + params.sigma_e2 * np.eye(n)


def kl_projection_distance(sigma: np.ndarray, r: np.ndarray, p: np.ndarray) -> float:
    """Divergence between N(0, Sigma + R) and N(0, P Sigma P + R) used to
    judge how much a residual projection distorts the covariance:
    0.5 log det(P Sigma P + R)/det(Sigma + R) - M + tr[(P Sigma P + R)^{-1}(Sigma + R)].
    """
    if not np.allclose(p, p.T, atol=1e-10):
        raise ValidationError("projector must be symmetric")
    if not np.allclose(p @ p, p, atol=1e-8):
        raise ValidationError("projector must be idempotent")
    m = sigma.shape[0]
    v_full = sigma + r
    v_proj = p @ sigma @ p + r
    sign_f, logdet_f = np.linalg.slogdet(v_full)
    sign_p, logdet_p = np.linalg.slogdet(v_proj)
    if sign_f <= 0 or sign_p <= 0:
        raise NumericalError("projected covariance is singular")
    trace_term = float(np.trace(np.linalg.solve(v_proj, v_full)))
    return 0.5 * (logdet_p - logdet_f) - m + trace_term
