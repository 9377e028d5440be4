"""
Principal component analysis baseline for spatial-domain comparison.

Components come from power iteration with deflation on the population
covariance (divisor n). Each component is sign-fixed so its
largest-magnitude entry is positive.
"""

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from cfshift.core.interfaces.feature_interface import FeatureInput, as_array
from cfshift.exceptions.shift_exceptions import (
    ConvergenceWarning,
    DimensionMismatchError,
    InvalidArgumentError,
)
from cfshift.config.settings import settings
from cfshift.config.logging_config import logger

# Below this norm A @ v is treated as zero (eigenvalue 0)
NULL_NORM = 1e-300
INIT_SEED = 0


@dataclass(frozen=True)
class PcaModel:
    """Mean, top-k unit components (k x d) and their variances (nonincreasing)."""
    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    def __post_init__(self):
        if self.components.ndim != 2 or self.components.shape[1] != self.mean.size:
            raise InvalidArgumentError("components must be k x d with d = len(mean)")
        if self.explained_variance.size != self.components.shape[0]:
            raise InvalidArgumentError("need one variance per component")

    @property
    def dim(self) -> int:
        return self.mean.size


def _orthogonalize(v: np.ndarray, basis: list) -> np.ndarray:
    for u in basis:
        v = v - (u @ v) * u
    return v


def _fix_sign(v: np.ndarray) -> np.ndarray:
    return -v if v[np.argmax(np.abs(v))] < 0 else v


def _power_iteration(
    matrix: np.ndarray,
    basis: list,
    rng: np.random.Generator,
    tolerance: float,
    max_iterations: int,
) -> np.ndarray:
    """Dominant unit eigenvector of `matrix` orthogonal to `basis`."""
    v = _orthogonalize(rng.normal(size=matrix.shape[0]), basis)
    v /= np.linalg.norm(v)

    for _ in range(max_iterations):
        w = _orthogonalize(matrix @ v, basis)
        norm = np.linalg.norm(w)
        if norm < NULL_NORM:
            return v
        w /= norm
        # Compare up to sign; negative eigenvalues flip the iterate
        if min(np.linalg.norm(w - v), np.linalg.norm(w + v)) < tolerance:
            return w
        v = w

    logger.warning("Power iteration hit the iteration cap", extra={"max_iterations": max_iterations})
    warnings.warn(f"Power iteration did not converge in {max_iterations} iterations", ConvergenceWarning, stacklevel=3)
    return v


def pca_fit(
    features: FeatureInput,
    k: int = 2,
    tolerance: Optional[float] = None,
    max_iterations: Optional[int] = None,
) -> PcaModel:
    """
    Fit the top-k principal components.

    Args:
        features: n x d samples, n >= 2
        k: Number of components, k <= min(n, d)
        tolerance: Stop when the eigenvector changes by less than this
        max_iterations: Iteration cap per component

    Returns:
        PcaModel

    Raises:
        InvalidArgumentError: If n < 2 or k is out of range
    """
    values = as_array(features)
    n, d = values.shape
    if n < 2:
        raise InvalidArgumentError(f"PCA needs at least 2 samples, got {n}")
    if not 1 <= k <= min(n, d):
        raise InvalidArgumentError(f"k must lie in [1, {min(n, d)}], got {k}")
    tolerance = settings.pca_tolerance if tolerance is None else tolerance
    max_iterations = settings.pca_max_iterations if max_iterations is None else max_iterations

    mean = values.mean(axis=0)
    centered = values - mean
    covariance = centered.T @ centered / n

    rng = np.random.default_rng(INIT_SEED)
    deflated = covariance.copy()
    basis: list = []
    variances = []
    for _ in range(k):
        v = _power_iteration(deflated, basis, rng, tolerance, max_iterations)
        v = _fix_sign(v)
        variance = float(v @ covariance @ v)
        basis.append(v)
        variances.append(max(variance, 0.0))
        deflated = deflated - variance * np.outer(v, v)

    order = np.argsort(-np.asarray(variances), kind="stable")
    components = np.array(basis)[order]
    explained = np.asarray(variances)[order]

    return PcaModel(mean=mean, components=components, explained_variance=explained)


def pca_project(model: PcaModel, features: FeatureInput) -> np.ndarray:
    """
    Project samples onto the fitted components: (x - mean) @ components.T.

    Raises:
        DimensionMismatchError: If the feature dimension differs from the model
    """
    values = as_array(features)
    if values.shape[1] != model.dim:
        raise DimensionMismatchError(
            f"Features have dimension {values.shape[1]}, PCA model expects {model.dim}",
            expected=model.dim,
            actual=values.shape[1],
        )
    return (values - model.mean) @ model.components.T
