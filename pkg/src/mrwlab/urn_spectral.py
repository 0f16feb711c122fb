"""Mean replacement matrix of the two-color urn and the Gaussian covariance
kernels used as functional-limit targets.

Component order is (red, blue) throughout. Each draw adds one ball, so the
mean replacement matrix

    A = [[1-q, 1-p],
         [q,   p  ]]

has columns summing to 1 and eigenvalues 1 and alpha = p - q. The limit
kernels are implemented directly from their closed forms; the matrix
exponential route they compress is kept as a numerical cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core_process import ModelParams, Regime, RegimeError, classify_regime
from .martingale_sequences import sigma_squared

__all__ = [
    "SpectralData",
    "build_spectral",
    "theoretical_covariance_diffusive",
    "theoretical_covariance_critical",
    "matrix_exponential_kernel",
    "fluctuation_coefficient",
]


@dataclass
class SpectralData:
    """Spectral decomposition of the mean replacement matrix.

    v1, v2 are right eigenvectors and u1, u2 left eigenvectors, normalized
    biorthogonally (u_i . v_j = delta_ij). u2 is None at p = 1, where its
    closed form degenerates. sigma_i is the integrated noise covariance of
    the fluctuation field and is None at alpha = 1/2, where its closed form
    has a pole. p_proj is the projection I - v1 u1^T onto the fluctuation
    direction.
    """

    a_matrix: np.ndarray
    lambda1: float
    lambda2: float
    v1: np.ndarray
    v2: np.ndarray
    u1: np.ndarray
    u2: np.ndarray | None
    sigma_i: np.ndarray | None
    p_proj: np.ndarray

    def validate(self, tol: float = 1e-12) -> None:
        col_sums = self.a_matrix.sum(axis=0)
        if np.max(np.abs(col_sums - 1.0)) > tol:
            raise AssertionError("replacement matrix columns must sum to 1")
        for lam, vec in ((self.lambda1, self.v1), (self.lambda2, self.v2)):
            if np.max(np.abs(self.a_matrix @ vec - lam * vec)) > tol:
                raise AssertionError(f"right eigenvector check failed for lambda={lam}")
        pairs = [(self.lambda1, self.u1)]
        if self.u2 is not None:
            pairs.append((self.lambda2, self.u2))
        for lam, vec in pairs:
            if np.max(np.abs(vec @ self.a_matrix - lam * vec)) > tol:
                raise AssertionError(f"left eigenvector check failed for lambda={lam}")
        if abs(self.u1 @ self.v1 - 1.0) > tol or abs(self.u1 @ self.v2) > tol:
            raise AssertionError("u1 biorthogonality failed")
        if self.u2 is not None:
            if abs(self.u2 @ self.v2 - 1.0) > tol or abs(self.u2 @ self.v1) > tol:
                raise AssertionError("u2 biorthogonality failed")


def build_spectral(params: ModelParams) -> SpectralData:
    q, p = params.q, params.p
    alpha = params.alpha
    one_minus = 1.0 - alpha  # equals 1 - p + q, positive since q > 0
    a_matrix = np.array([[1.0 - q, 1.0 - p], [q, p]], dtype=np.float64)
    v1 = np.array([(1.0 - p) / one_minus, q / one_minus])
    v2 = np.array([-0.5, 0.5])
    u1 = np.array([1.0, 1.0])
    u2 = None
    if p != 1.0:
        u2 = np.array([-2.0 * q / one_minus, 2.0 * (1.0 - p) / one_minus])
    sigma_i = None
    if alpha != 0.5:
        scale = q * (1.0 - p) / ((1.0 - 2.0 * alpha) * one_minus**2)
        sigma_i = scale * np.array([[1.0, -1.0], [-1.0, 1.0]])
    p_proj = np.eye(2) - np.outer(v1, u1)
    return SpectralData(
        a_matrix=a_matrix,
        lambda1=1.0,
        lambda2=alpha,
        v1=v1,
        v2=v2,
        u1=u1,
        u2=u2,
        sigma_i=sigma_i,
        p_proj=p_proj,
    )


def _check_times(s: float, t: float) -> None:
    if not (0.0 < s <= t):
        raise ValueError("times must satisfy 0 < s <= t")


def theoretical_covariance_diffusive(params: ModelParams, s: float, t: float) -> float:
    """Limit covariance sigma^2 / ((1-2 alpha) t) * (t/s)^alpha, alpha < 1/2.

    At p = 1 the noise variance vanishes and the kernel is identically 0.
    """
    _check_times(s, t)
    if classify_regime(params) is not Regime.DIFFUSIVE:
        raise RegimeError("diffusive kernel requires alpha < 1/2")
    alpha = params.alpha
    return sigma_squared(params) / ((1.0 - 2.0 * alpha) * t) * (t / s) ** alpha


def theoretical_covariance_critical(params: ModelParams, s: float, t: float) -> float:
    """Limit covariance 4 q (1-p) s of the critical time-changed process."""
    _check_times(s, t)
    if classify_regime(params) is not Regime.CRITICAL:
        raise RegimeError("critical kernel requires alpha = 1/2")
    return 4.0 * params.q * (1.0 - params.p) * s


def matrix_exponential_kernel(params: ModelParams, s: float, t: float) -> float:
    """Diffusive kernel recomputed through the matrix exponential route.

    The urn fluctuation covariance at times (s, t) is s * Sigma_I *
    exp(log(t/s) A^T); its (blue, blue) entry, rescaled by 1/(s t) to match
    the position-ratio normalization, must equal the closed-form diffusive
    kernel. Uses an eigendecomposition of the 2x2 matrix (scipy's expm gives
    the same numbers; this avoids importing it for a 2x2 case). Kept as a
    guard against transcription errors in the closed form.
    """
    _check_times(s, t)
    if classify_regime(params) is not Regime.DIFFUSIVE:
        raise RegimeError("diffusive kernel requires alpha < 1/2")
    spectral = build_spectral(params)
    if spectral.sigma_i is None:
        raise ValueError("integrated covariance undefined at alpha = 1/2")
    log_ratio = math.log(t / s)
    eigvals, eigvecs = np.linalg.eig(spectral.a_matrix.T)
    exp_at = eigvecs @ np.diag(np.exp(log_ratio * eigvals)) @ np.linalg.inv(eigvecs)
    cov = s * spectral.sigma_i @ exp_at
    return float(cov[1, 1]) / (s * t)


def fluctuation_coefficient(red, blue, spectral: SpectralData):
    """Coefficient c in W_n - n v1 = c * (-1, 1) for an urn composition.

    red + blue = n forces the deviation from the drift line n*v1 to lie on
    the direction (-1, 1) exactly; the coefficient is blue - n * v1_blue.
    """
    red = np.asarray(red, dtype=np.float64)
    blue = np.asarray(blue, dtype=np.float64)
    n = red + blue
    return blue - n * spectral.v1[1]
