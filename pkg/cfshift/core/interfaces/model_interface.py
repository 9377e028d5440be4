"""
Training-side types: datasets, the adapter network and run configuration.
"""

from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from cfshift.core.interfaces.feature_interface import FeatureMatrix, FrequencyScheme, ShiftReport
from cfshift.exceptions.shift_exceptions import (
    DimensionMismatchError,
    InvalidArgumentError,
    UnknownDomainError,
)

Layer = Tuple[np.ndarray, np.ndarray]


# ============================================================================
# Datasets
# ============================================================================

@dataclass(frozen=True)
class DomainSamples:
    """Feature vectors and class labels of one domain, in insertion order."""
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        features = np.array(self.features, dtype=np.float64)
        labels = np.array(self.labels, dtype=np.int64).reshape(-1)
        if features.ndim != 2:
            raise InvalidArgumentError(f"Domain features must be 2-D, got {features.ndim}-D")
        if features.shape[0] != labels.size:
            raise InvalidArgumentError(
                f"{features.shape[0]} feature rows but {labels.size} labels"
            )
        if not np.all(np.isfinite(features)):
            raise InvalidArgumentError("Domain features contain non-finite values")
        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.labels.size


@dataclass(frozen=True)
class LabeledDataset:
    """
    Multi-domain collection of (feature vector, label) pairs.

    Domains not listed as source or target are held out: they are never
    trained on but still appear in shift reports and evaluation.
    """
    domains: Dict[str, DomainSamples]
    dim: int
    num_classes: int
    source_domains: Tuple[str, ...] = ()
    target_domains: Tuple[str, ...] = ()

    def __post_init__(self):
        """Validate label range, dimensions and the domain split."""
        if self.dim < 1:
            raise InvalidArgumentError(f"Feature dimension must be >= 1, got {self.dim}")
        if self.num_classes < 1:
            raise InvalidArgumentError(f"Class count must be >= 1, got {self.num_classes}")
        for name, samples in self.domains.items():
            if samples.features.shape[1] != self.dim and len(samples) > 0:
                raise DimensionMismatchError(
                    f"Domain '{name}' has dimension {samples.features.shape[1]}, expected {self.dim}",
                    expected=self.dim,
                    actual=samples.features.shape[1],
                )
            if len(samples) and (samples.labels.min() < 0 or samples.labels.max() >= self.num_classes):
                raise InvalidArgumentError(
                    f"Domain '{name}' has labels outside [0, {self.num_classes})"
                )
        object.__setattr__(self, "domains", dict(self.domains))
        object.__setattr__(self, "source_domains", tuple(self.source_domains))
        object.__setattr__(self, "target_domains", tuple(self.target_domains))
        for name in self.source_domains + self.target_domains:
            self._require(name)
        overlap = set(self.source_domains) & set(self.target_domains)
        if overlap:
            raise InvalidArgumentError(f"Domains cannot be both source and target: {sorted(overlap)}")

    def _require(self, name: str) -> None:
        if name not in self.domains:
            raise UnknownDomainError(name, list(self.domains))

    @property
    def domain_ids(self) -> List[str]:
        return list(self.domains)

    @property
    def heldout_domains(self) -> List[str]:
        visible = set(self.source_domains) | set(self.target_domains)
        return [name for name in self.domains if name not in visible]

    @property
    def training_domains(self) -> List[str]:
        """Sources followed by unlabeled targets."""
        return list(self.source_domains) + list(self.target_domains)

    def with_split(self, sources: Iterable[str], targets: Iterable[str] = ()) -> "LabeledDataset":
        """
        Return a copy with the given source/target partition.

        Raises:
            InvalidArgumentError: If no source domain is given
            UnknownDomainError: If a name is not a domain of this dataset
        """
        sources = tuple(sources)
        if not sources:
            raise InvalidArgumentError("At least one source domain is required")
        return replace(self, source_domains=sources, target_domains=tuple(targets))

    def feature_matrix(self, name: str) -> FeatureMatrix:
        self._require(name)
        return FeatureMatrix(self.domains[name].features, domain_id=name)

    def map_features(self, fn) -> "LabeledDataset":
        """Apply `fn` to every domain's feature matrix (e.g. standardization)."""
        mapped = {
            name: DomainSamples(fn(samples.features), samples.labels)
            for name, samples in self.domains.items()
        }
        dims = {v.features.shape[1] for v in mapped.values()}
        return replace(self, domains=mapped, dim=dims.pop() if len(dims) == 1 else self.dim)

    def num_samples(self) -> int:
        return sum(len(v) for v in self.domains.values())


# ============================================================================
# Adapter Network
# ============================================================================

@dataclass(frozen=True)
class AdapterModel:
    """
    Feed-forward tanh adapter followed by a linear classification head.

    Each adapter layer computes tanh(x @ W + b) with W of shape (in, out).
    The output of the last adapter layer is the embedding; with no adapter
    layers the embedding is the input itself.
    """
    layers: Tuple[Layer, ...]
    head: Layer

    def __post_init__(self):
        """Validate that layer shapes chain and parameters are finite."""
        layers = tuple(
            (np.array(w, dtype=np.float64), np.array(b, dtype=np.float64)) for w, b in self.layers
        )
        head = (np.array(self.head[0], dtype=np.float64), np.array(self.head[1], dtype=np.float64))
        width = None
        for index, (w, b) in enumerate(layers + (head,)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise InvalidArgumentError(f"Layer {index} has inconsistent shapes {w.shape}, {b.shape}")
            if width is not None and w.shape[0] != width:
                raise DimensionMismatchError(
                    f"Layer {index} expects {w.shape[0]} inputs, previous layer gives {width}",
                    expected=width,
                    actual=w.shape[0],
                )
            width = w.shape[1]
        for array in (a for pair in layers + (head,) for a in pair):
            if not np.all(np.isfinite(array)):
                raise InvalidArgumentError("Model parameters must be finite")
            array.setflags(write=False)
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "head", head)

    @classmethod
    def initialize(
        cls,
        input_dim: int,
        hidden_dims: Sequence[int],
        embedding_dim: Optional[int],
        num_classes: int,
        rng: Optional[np.random.Generator] = None,
        zero: bool = False,
    ) -> "AdapterModel":
        """
        Build a model with N(0, 1/fan_in) weights and zero biases.

        Args:
            input_dim: Feature dimension d
            hidden_dims: Widths of the hidden adapter layers
            embedding_dim: Width of the embedding layer; None for no adapter
            num_classes: Class count C
            rng: Generator for the weights (seed 0 if None)
            zero: Initialize every parameter to zero

        Returns:
            AdapterModel
        """
        if input_dim < 1 or num_classes < 1 or any(h < 1 for h in hidden_dims):
            raise InvalidArgumentError("Model dimensions must be positive")
        if embedding_dim is None:
            if hidden_dims:
                raise InvalidArgumentError("hidden_dims require an embedding_dim")
            widths = [input_dim]
        else:
            if embedding_dim < 1:
                raise InvalidArgumentError(f"embedding_dim must be >= 1, got {embedding_dim}")
            widths = [input_dim, *hidden_dims, embedding_dim]
        rng = rng if rng is not None else np.random.default_rng(0)

        def make(fan_in: int, fan_out: int) -> Layer:
            if zero:
                return np.zeros((fan_in, fan_out)), np.zeros(fan_out)
            return rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_in, fan_out)), np.zeros(fan_out)

        layers = tuple(make(a, b) for a, b in zip(widths[:-1], widths[1:]))
        return cls(layers=layers, head=make(widths[-1], num_classes))

    @property
    def input_dim(self) -> int:
        return (self.layers[0][0] if self.layers else self.head[0]).shape[0]

    @property
    def hidden_dims(self) -> List[int]:
        return [w.shape[1] for w, _ in self.layers[:-1]]

    @property
    def embedding_dim(self) -> int:
        return self.head[0].shape[0]

    @property
    def num_classes(self) -> int:
        return self.head[0].shape[1]

    def parameters(self) -> List[np.ndarray]:
        """Parameters in the order W0, b0, ..., Wh, bh."""
        return [a for pair in self.layers + (self.head,) for a in pair]

    def with_parameters(self, params: Sequence[np.ndarray]) -> "AdapterModel":
        """Rebuild a model of the same shape from a parameter list."""
        params = list(params)
        if len(params) != 2 * (len(self.layers) + 1):
            raise InvalidArgumentError(f"Expected {2 * (len(self.layers) + 1)} parameter arrays, got {len(params)}")
        pairs = [(params[i], params[i + 1]) for i in range(0, len(params), 2)]
        return AdapterModel(layers=tuple(pairs[:-1]), head=pairs[-1])


# ============================================================================
# Training Configuration and History
# ============================================================================

@dataclass(frozen=True)
class BankParams:
    """Parameters a frequency bank is regenerated from."""
    k: int = 64
    scale: float = 1.0
    seed: int = 0
    scheme: FrequencyScheme = FrequencyScheme.GAUSSIAN


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of one training run; defaults follow the reference setup."""
    lr: float = 0.001
    cfl_lambda: float = 0.1
    epochs: int = 20
    batch_per_domain: int = 32
    bank: BankParams = field(default_factory=BankParams)
    seed: int = 0
    resample_bank_each_step: bool = False
    hidden_dims: Tuple[int, ...] = (64,)
    embedding_dim: Optional[int] = 32

    def __post_init__(self):
        """Validate ranges."""
        if not self.lr > 0:
            raise InvalidArgumentError(f"lr must be > 0, got {self.lr}")
        if not self.cfl_lambda >= 0:
            raise InvalidArgumentError(f"lambda must be >= 0, got {self.cfl_lambda}")
        if self.epochs < 1:
            raise InvalidArgumentError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_per_domain < 2:
            raise InvalidArgumentError(f"batch_per_domain must be >= 2, got {self.batch_per_domain}")
        object.__setattr__(self, "hidden_dims", tuple(self.hidden_dims))


@dataclass(frozen=True)
class EpochRecord:
    """Losses and embedding shift report at one epoch boundary (epoch 0 is before training)."""
    epoch: int
    erm: float
    cfl: float
    total: float
    steps: int
    report: ShiftReport

    def to_dict(self) -> Dict[str, object]:
        return {
            "epoch": self.epoch,
            "erm": self.erm,
            "cfl": self.cfl,
            "total": self.total,
            "steps": self.steps,
            "matrix": self.report.to_dict(),
        }
