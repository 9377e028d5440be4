"""
Empirical Characteristic Function (ECF) evaluation.

phi_hat(w) = (1/n) * sum_i exp(j * w . x_i), kept as explicit (re, im)
pairs. Sums run over rows in matrix order so results are bit-reproducible.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Tuple, Type

import numpy as np

from cfshift.core.interfaces.feature_interface import (
    EcfVector,
    FeatureInput,
    FeatureMatrix,
    FrequencyBank,
    FrequencySampler,
    FrequencyScheme,
    as_array,
)
from cfshift.exceptions.shift_exceptions import DimensionMismatchError, InvalidArgumentError
from cfshift.config.logging_config import logger

# Columns whose spread is below this (relative to their magnitude) are treated as constant
ZERO_VARIANCE_TOLERANCE = 1e-12


class GaussianSampler(FrequencySampler):
    """
    I.i.d. N(0, scale^2) entries from numpy's PCG64 generator
    (`numpy.random.default_rng(seed)`).
    """

    scheme = FrequencyScheme.GAUSSIAN

    def sample(self, d: int, k: int, scale: float, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        return rng.normal(0.0, scale, size=(k, d))


class RadialSweepSampler(FrequencySampler):
    """
    Points t * u along `directions` random unit vectors u, with t equally
    spaced over [0, scale] (both ends included). Rows are grouped by
    direction, so row m * steps + i is t_i * u_m.
    """

    scheme = FrequencyScheme.RADIAL_SWEEP

    def __init__(self, directions: int = 1):
        if directions < 1:
            raise InvalidArgumentError(f"directions must be >= 1, got {directions}")
        self.directions = directions

    def sample(self, d: int, k: int, scale: float, seed: int) -> np.ndarray:
        if k % self.directions != 0:
            raise InvalidArgumentError(
                f"K={k} is not a multiple of directions={self.directions}"
            )
        steps = k // self.directions
        rng = np.random.default_rng(seed)
        units = rng.normal(size=(self.directions, d))
        units /= np.linalg.norm(units, axis=1, keepdims=True)
        radii = np.linspace(0.0, scale, steps)
        return (units[:, None, :] * radii[None, :, None]).reshape(k, d)


SAMPLERS: Dict[FrequencyScheme, Type[FrequencySampler]] = {
    FrequencyScheme.GAUSSIAN: GaussianSampler,
    FrequencyScheme.RADIAL_SWEEP: RadialSweepSampler,
}


def sample_frequency_bank(
    d: int,
    k: int,
    scale: float = 1.0,
    seed: int = 0,
    scheme: FrequencyScheme = FrequencyScheme.GAUSSIAN,
    directions: int = 1,
) -> FrequencyBank:
    """
    Sample a frequency bank.

    Args:
        d: Feature dimension
        k: Number of frequency vectors K
        scale: Standard deviation (gaussian) or sweep radius (radial-sweep)
        seed: Generator seed
        scheme: Sampling scheme
        directions: Number of sweep directions M (radial-sweep only)

    Returns:
        FrequencyBank with a K x d matrix

    Raises:
        InvalidArgumentError: If d, K or scale is not positive
    """
    if d < 1 or k < 1:
        raise InvalidArgumentError(f"d and K must be >= 1, got d={d}, K={k}")
    if not scale > 0:
        raise InvalidArgumentError(f"scale must be > 0, got {scale}")

    scheme = FrequencyScheme(scheme)
    if scheme is FrequencyScheme.RADIAL_SWEEP:
        sampler: FrequencySampler = RadialSweepSampler(directions)
    else:
        sampler = SAMPLERS[scheme]()

    freqs = sampler.sample(d, k, float(scale), int(seed))

    logger.debug(
        "Frequency bank sampled",
        extra={"scheme": scheme.value, "d": d, "K": k, "scale": scale, "seed": seed},
    )

    return FrequencyBank(
        freqs=freqs,
        seed=int(seed),
        scale=float(scale),
        scheme=scheme,
        directions=directions if scheme is FrequencyScheme.RADIAL_SWEEP else 1,
    )


def ecf_components(values: np.ndarray, freqs: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Evaluate the ECF and keep the per-sample terms for differentiation.

    Args:
        values: n x d samples
        freqs: K x d frequencies

    Returns:
        (re, im, cos_terms, sin_terms) with re/im of length K and the
        n x K matrices cos(x_i . w_k), sin(x_i . w_k)
    """
    projections = values @ freqs.T
    cos_terms = np.cos(projections)
    sin_terms = np.sin(projections)
    n = values.shape[0]
    re = cos_terms.sum(axis=0) / n
    im = sin_terms.sum(axis=0) / n
    return re, im, cos_terms, sin_terms


def _check_compatible(values: np.ndarray, bank: FrequencyBank) -> None:
    if values.shape[0] == 0:
        raise InvalidArgumentError("Cannot evaluate the ECF of an empty feature matrix")
    if values.shape[1] != bank.cols:
        raise DimensionMismatchError(
            f"Features have dimension {values.shape[1]}, bank expects {bank.cols}",
            expected=bank.cols,
            actual=values.shape[1],
        )


def ecf_eval(features: FeatureInput, bank: FrequencyBank) -> EcfVector:
    """
    Evaluate the empirical characteristic function at every bank frequency.

    Args:
        features: n x d samples (FeatureMatrix or array)
        bank: Frequency bank with d columns

    Returns:
        EcfVector of length K

    Raises:
        InvalidArgumentError: If the matrix is empty
        DimensionMismatchError: If dimensions disagree
    """
    values = as_array(features)
    _check_compatible(values, bank)
    re, im, _, _ = ecf_components(values, bank.freqs)
    return EcfVector(re=re, im=im, n_samples=values.shape[0])


@dataclass(frozen=True)
class StandardizationStats:
    """Per-dimension mean and divisor used for z-scoring."""
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=np.float64).reshape(-1)
        std = np.array(self.std, dtype=np.float64).reshape(-1)
        if mean.shape != std.shape:
            raise InvalidArgumentError("mean and std must have the same length")
        if np.any(std <= 0) or not np.all(np.isfinite(std)):
            raise InvalidArgumentError("std divisors must be finite and positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    @property
    def dim(self) -> int:
        return self.mean.size

    @classmethod
    def fit(cls, values: np.ndarray) -> "StandardizationStats":
        """
        Population mean/std of each column; constant columns get divisor 1.
        """
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] == 0:
            raise InvalidArgumentError("Cannot compute statistics of an empty matrix")
        mean = values.mean(axis=0)
        std = values.std(axis=0)
        constant = std <= ZERO_VARIANCE_TOLERANCE * np.maximum(1.0, np.abs(mean))
        return cls(mean=mean, std=np.where(constant, 1.0, std))

    def apply(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2 or values.shape[1] != self.dim:
            raise DimensionMismatchError(
                f"Statistics have dimension {self.dim}, features have {values.shape[-1]}",
                expected=self.dim,
                actual=values.shape[-1],
            )
        return (values - self.mean) / self.std


def standardize(
    features: FeatureInput,
    stats: Optional[StandardizationStats] = None,
) -> Tuple[FeatureMatrix, StandardizationStats]:
    """
    Z-score each column, with this matrix's statistics or supplied ones.

    Passing source-domain statistics standardizes target features into the
    source frame.

    Args:
        features: n x d samples
        stats: Statistics to apply; computed from `features` when None

    Returns:
        (standardized FeatureMatrix, statistics used)

    Raises:
        DimensionMismatchError: If `stats` has a different dimension
    """
    domain_id = features.domain_id if isinstance(features, FeatureMatrix) else ""
    values = as_array(features)
    if stats is None:
        stats = StandardizationStats.fit(values)
    return FeatureMatrix(stats.apply(values), domain_id=domain_id), stats
