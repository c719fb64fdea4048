"""Dataset-level Frechet video distance over externally extracted features."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimMismatch, NonFiniteInput, SqrtFailure, TooFewSamples

_SHRINKAGE = 1e-6  # lambda = 1e-6 * trace / d keeps small-n covariances PSD
_NEG_CLAMP = 1e-6


@dataclass(frozen=True)
class GaussianStats:
    mu: np.ndarray  # (d,)
    sigma: np.ndarray  # (d, d), symmetric PSD after shrinkage
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise TooFewSamples(f"n = {self.n} < 2")
        if not np.allclose(self.sigma, self.sigma.T, atol=1e-9):
            raise NonFiniteInput("sigma not symmetric within 1e-9")

    @property
    def d(self):
        return self.mu.shape[0]


def gaussian_stats(features: np.ndarray) -> GaussianStats:
    """Column mean and shrunk unbiased covariance of an (n, d) matrix."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise NonFiniteInput("features must be a 2-D matrix")
    n, d = features.shape
    if n < 2:
        raise TooFewSamples(f"need n >= 2 rows, got {n}")
    if not np.all(np.isfinite(features)):
        raise NonFiniteInput("features contain NaN or Inf")
    mu = features.mean(axis=0)
    centered = features - mu
    cov = centered.T @ centered / (n - 1)
    cov = (cov + cov.T) / 2.0
    lam = _SHRINKAGE * np.trace(cov) / d
    sigma = cov + lam * np.eye(d)
    return GaussianStats(mu=mu, sigma=sigma, n=n)


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    """Principal square root of a symmetric PSD matrix via eigendecomposition."""
    sym = (mat + mat.T) / 2.0
    vals, vecs = np.linalg.eigh(sym)
    if vals.min() < -1e-6 * max(1.0, abs(vals.max())):
        raise SqrtFailure(
            f"matrix indefinite beyond tolerance (min eig {vals.min():g})"
        )
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def fvd(real: GaussianStats, gen: GaussianStats) -> float:
    """||mu_r - mu_g||^2 + Tr(S_r + S_g - 2 (S_r S_g)^{1/2}).

    The cross term uses the symmetric PSD form
    Tr((S_r^{1/2} S_g S_r^{1/2})^{1/2}); tiny negative totals are clamped to 0.
    """
    if real.d != gen.d:
        raise DimMismatch(f"d mismatch: {real.d} vs {gen.d}")
    diff = real.mu - gen.mu
    sqrt_r = _psd_sqrt(real.sigma)
    cross = _psd_sqrt(sqrt_r @ gen.sigma @ sqrt_r)
    val = (diff @ diff
           + np.trace(real.sigma) + np.trace(gen.sigma)
           - 2.0 * np.trace(cross))
    if val < 0.0:
        if val < -_NEG_CLAMP:
            raise SqrtFailure(f"negative distance {val:g} beyond tolerance")
        val = 0.0
    return float(val)
