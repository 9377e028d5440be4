"""
Feature-space types shared by the ECF, loss and plotting layers.

Frequency banks are produced by FrequencySampler strategies so new
sampling schemes can be added without touching the ECF code.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Union

import numpy as np

from cfshift.exceptions.shift_exceptions import InvalidArgumentError

# Slack allowed on |phi|^2 <= 1 for rounding
MODULUS_EPSILON = 1e-9


class FrequencyScheme(str, Enum):
    """How the frequency vectors of a bank are laid out."""
    GAUSSIAN = "gaussian"
    RADIAL_SWEEP = "radial-sweep"


@dataclass(frozen=True)
class FeatureMatrix:
    """
    n x d matrix of feature vectors from one domain.

    Rows are samples; the matrix is copied to float64 and made read-only.
    """
    values: np.ndarray
    domain_id: str = ""

    def __post_init__(self):
        """Validate shape and finiteness."""
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise InvalidArgumentError(f"Feature matrix must be 2-D, got {values.ndim}-D")
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise InvalidArgumentError(f"Feature matrix must be at least 1x1, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError(f"Feature matrix for domain '{self.domain_id}' has non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


FeatureInput = Union[FeatureMatrix, np.ndarray]


def as_array(features: FeatureInput) -> np.ndarray:
    """Return the raw float64 matrix behind a FeatureMatrix or array."""
    if isinstance(features, FeatureMatrix):
        return features.values
    values = np.asarray(features, dtype=np.float64)
    if values.ndim != 2:
        raise InvalidArgumentError(f"Feature matrix must be 2-D, got {values.ndim}-D")
    return values


@dataclass(frozen=True)
class FrequencyBank:
    """
    K x d frequency vectors plus the parameters that generated them.

    Regenerating from (seed, scale, scheme, K, d, directions) reproduces
    `freqs` bit-for-bit.
    """
    freqs: np.ndarray
    seed: int
    scale: float
    scheme: FrequencyScheme
    directions: int = 1

    def __post_init__(self):
        """Validate bank shape."""
        freqs = np.array(self.freqs, dtype=np.float64)
        if freqs.ndim != 2 or freqs.shape[0] < 1 or freqs.shape[1] < 1:
            raise InvalidArgumentError(f"Frequency bank must be a non-empty K x d matrix, got {freqs.shape}")
        freqs.setflags(write=False)
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "scheme", FrequencyScheme(self.scheme))

    @property
    def size(self) -> int:
        """Number of frequencies K."""
        return self.freqs.shape[0]

    @property
    def cols(self) -> int:
        return self.freqs.shape[1]

    def meta(self) -> Dict[str, Any]:
        """Sampling metadata as recorded in shift reports."""
        return {
            "seed": int(self.seed),
            "scale": float(self.scale),
            "scheme": self.scheme.value,
            "K": self.size,
        }


@dataclass(frozen=True)
class EcfVector:
    """Empirical characteristic function values at each bank frequency."""
    re: np.ndarray
    im: np.ndarray
    n_samples: int

    def __post_init__(self):
        """Validate lengths and the unit-disk bound."""
        re = np.array(self.re, dtype=np.float64).reshape(-1)
        im = np.array(self.im, dtype=np.float64).reshape(-1)
        if re.shape != im.shape:
            raise InvalidArgumentError(f"re/im length mismatch: {re.size} vs {im.size}")
        if np.any(re * re + im * im > 1.0 + MODULUS_EPSILON):
            raise InvalidArgumentError("ECF values must lie in the unit disk")
        re.setflags(write=False)
        im.setflags(write=False)
        object.__setattr__(self, "re", re)
        object.__setattr__(self, "im", im)

    def __len__(self) -> int:
        return self.re.size

    def as_complex(self) -> np.ndarray:
        return self.re + 1j * self.im


@dataclass(frozen=True)
class ShiftReport:
    """
    Symmetric matrix of pairwise CFL distances between domains.

    Serializes to {"domains": [...], "matrix": [[...]], "bank": {...}}.
    """
    domain_ids: List[str]
    matrix: np.ndarray
    bank_meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        """Validate symmetry, zero diagonal and non-negativity."""
        matrix = np.array(self.matrix, dtype=np.float64)
        n = len(self.domain_ids)
        if matrix.shape != (n, n):
            raise InvalidArgumentError(f"Report matrix must be {n}x{n}, got {matrix.shape}")
        if not np.all(np.isfinite(matrix)) or np.any(matrix < 0.0):
            raise InvalidArgumentError("Report entries must be finite and non-negative")
        if not np.array_equal(matrix, matrix.T):
            raise InvalidArgumentError("Report matrix must be symmetric")
        if np.any(np.diag(matrix) != 0.0):
            raise InvalidArgumentError("Report diagonal must be zero")
        matrix.setflags(write=False)
        object.__setattr__(self, "domain_ids", list(self.domain_ids))
        object.__setattr__(self, "matrix", matrix)

    def distance(self, domain_a: str, domain_b: str) -> float:
        i = self.domain_ids.index(domain_a)
        j = self.domain_ids.index(domain_b)
        return float(self.matrix[i, j])

    def pairs(self) -> List[tuple]:
        """(domain_a, domain_b, distance) for every unordered pair, row-major."""
        out = []
        for i in range(len(self.domain_ids)):
            for j in range(i + 1, len(self.domain_ids)):
                out.append((self.domain_ids[i], self.domain_ids[j], float(self.matrix[i, j])))
        return out

    def to_dict(self) -> Dict[str, Any]:
        return {
            "domains": list(self.domain_ids),
            "matrix": self.matrix.tolist(),
            "bank": dict(self.bank_meta),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ShiftReport":
        try:
            return cls(
                domain_ids=list(data["domains"]),
                matrix=np.array(data["matrix"], dtype=np.float64).reshape(len(data["domains"]), -1),
                bank_meta=dict(data.get("bank", {})),
            )
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, InvalidArgumentError):
                raise
            raise InvalidArgumentError(f"Malformed shift report: {e}")


class FrequencySampler(ABC):
    """
    Strategy that lays out the frequency vectors of a bank.

    Implementations must be deterministic in (d, K, scale, seed).
    """

    scheme: FrequencyScheme

    @abstractmethod
    def sample(self, d: int, k: int, scale: float, seed: int) -> np.ndarray:
        """
        Produce a K x d frequency matrix.

        Args:
            d: Feature dimension
            k: Number of frequency vectors
            scale: Positive spread parameter
            seed: Generator seed

        Returns:
            K x d float64 matrix
        """
        pass
