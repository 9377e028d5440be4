"""
Synthetic multi-domain datasets and embedding CSV ingestion.

CSV contract (header mandatory):

    domain,label,f0,f1,...,f{d-1}

One row per sample; `domain` is a free-form tag, `label` an integer class
index, and f* decimal reals written at full double precision.
"""

import io
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from cfshift.core.interfaces.model_interface import DomainSamples, LabeledDataset
from cfshift.core.ecf import StandardizationStats
from cfshift.exceptions.shift_exceptions import DatasetParseError, InvalidArgumentError, UnknownDomainError
from cfshift.utils.serialization import format_float
from cfshift.config.logging_config import logger

PathLike = Union[str, Path]

FEATURE_COLUMN = re.compile(r"^f(\d+)$")
INTEGER_LABEL = re.compile(r"^[+-]?\d+$")


# ============================================================================
# Synthetic Generation
# ============================================================================

@dataclass(frozen=True)
class SyntheticSpec:
    """
    Gaussian class clusters seen through per-domain rotations and shifts.

    Class c is centred at class_radius * e_c (a regular simplex, minus its
    centroid). Domain t rotates every sample by rotations_deg[t] in the
    plane of the first two coordinates, then adds translations[t].
    """
    n_domains: int
    classes: int
    d: int
    samples_per_class_per_domain: int
    rotations_deg: Sequence[float]
    translations: Sequence[Sequence[float]]
    noise_std: float = 1.0
    seed: int = 0
    class_radius: float = 3.0
    domain_names: Optional[Sequence[str]] = None

    def __post_init__(self):
        """Validate counts and per-domain transform shapes."""
        if self.n_domains < 1 or self.classes < 1 or self.samples_per_class_per_domain < 1:
            raise InvalidArgumentError("Domain, class and sample counts must be >= 1")
        if self.d < 2:
            raise InvalidArgumentError(f"d must be >= 2 to rotate the first two coordinates, got {self.d}")
        if self.classes > self.d:
            raise InvalidArgumentError(f"Simplex centres need classes <= d, got {self.classes} > {self.d}")
        if not self.noise_std > 0:
            raise InvalidArgumentError(f"noise_std must be > 0, got {self.noise_std}")
        if len(self.rotations_deg) != self.n_domains or len(self.translations) != self.n_domains:
            raise InvalidArgumentError("Need one rotation and one translation per domain")
        for shift in self.translations:
            if len(shift) != self.d:
                raise InvalidArgumentError(f"Translations must have length d={self.d}")
        if self.domain_names is not None and len(self.domain_names) != self.n_domains:
            raise InvalidArgumentError("Need one name per domain")

    @property
    def names(self) -> List[str]:
        return list(self.domain_names) if self.domain_names else [f"d{t}" for t in range(self.n_domains)]


def graded_spec(
    n_domains: int = 4,
    classes: int = 3,
    d: int = 16,
    samples_per_class_per_domain: int = 200,
    seed: int = 0,
    rotation_step_deg: float = 30.0,
    shift_step: float = 0.5,
    noise_std: float = 1.0,
    class_radius: float = 3.0,
) -> SyntheticSpec:
    """
    Domains that drift steadily apart.

    Domain t is rotated by t * rotation_step_deg and shifted by
    t * shift_step along the last coordinate.
    """
    translations = []
    for t in range(n_domains):
        shift = [0.0] * d
        shift[d - 1] = t * shift_step
        translations.append(shift)
    return SyntheticSpec(
        n_domains=n_domains,
        classes=classes,
        d=d,
        samples_per_class_per_domain=samples_per_class_per_domain,
        rotations_deg=[t * rotation_step_deg for t in range(n_domains)],
        translations=translations,
        noise_std=noise_std,
        seed=seed,
        class_radius=class_radius,
    )


def alignment_benchmark_spec(seed: int = 0) -> SyntheticSpec:
    """
    Three domains in 16 dimensions, three classes, 200 samples per class.

    Domains differ only by a class-irrelevant shift of 3 per step along the
    last coordinate, so d1 sits halfway between d0 and d2. Train on d0 with
    d2 as the target and d1 stays unseen.
    """
    return graded_spec(
        n_domains=3,
        classes=3,
        d=16,
        samples_per_class_per_domain=200,
        seed=seed,
        rotation_step_deg=0.0,
        shift_step=3.0,
        class_radius=2.5,
    )


def _rotation(d: int, degrees: float) -> np.ndarray:
    angle = np.deg2rad(degrees)
    rotation = np.eye(d)
    rotation[:2, :2] = [[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]]
    return rotation


def generate(spec: SyntheticSpec) -> LabeledDataset:
    """
    Draw a labeled multi-domain dataset.

    Rows are ordered domain by domain, class by class. Every domain starts
    as a source domain; use LabeledDataset.with_split to choose the split.

    Args:
        spec: Generation parameters

    Returns:
        LabeledDataset with exactly samples_per_class_per_domain rows per (class, domain)
    """
    rng = np.random.default_rng(spec.seed)
    centres = spec.class_radius * np.eye(spec.classes, spec.d)
    centres -= centres.mean(axis=0)
    n = spec.samples_per_class_per_domain

    domains: Dict[str, DomainSamples] = {}
    for name, degrees, shift in zip(spec.names, spec.rotations_deg, spec.translations):
        rotation = _rotation(spec.d, degrees)
        features = []
        for label in range(spec.classes):
            cluster = centres[label] + rng.normal(0.0, spec.noise_std, size=(n, spec.d))
            features.append(cluster @ rotation.T + np.asarray(shift, dtype=np.float64))
        labels = np.repeat(np.arange(spec.classes), n)
        domains[name] = DomainSamples(np.vstack(features), labels)

    logger.info(
        "Synthetic dataset generated",
        extra={"domains": spec.names, "classes": spec.classes, "d": spec.d, "per_class": n, "seed": spec.seed},
    )

    return LabeledDataset(
        domains=domains,
        dim=spec.d,
        num_classes=spec.classes,
        source_domains=tuple(spec.names),
    )


# ============================================================================
# CSV Ingestion
# ============================================================================

def _check_header(columns: Sequence[str]) -> int:
    """Validate the header row and return the feature dimension."""
    if len(columns) < 2 or columns[0] != "domain" or columns[1] != "label":
        raise DatasetParseError("header must start with 'domain,label'", line_number=1)
    features = columns[2:]
    if not features:
        raise DatasetParseError("header declares no feature columns (d == 0)", line_number=1)
    for index, name in enumerate(features):
        match = FEATURE_COLUMN.match(name)
        if not match or int(match.group(1)) != index:
            raise DatasetParseError(f"expected feature column 'f{index}', found '{name}'", line_number=1)
    return len(features)


def load_embeddings(path: PathLike, format: str = "csv") -> LabeledDataset:
    """
    Load a labeled multi-domain dataset from an embedding CSV.

    Rows are grouped by domain tag in order of first appearance; the class
    count is the largest label + 1.

    Args:
        path: CSV file
        format: Only "csv" is supported

    Returns:
        LabeledDataset (every domain marked as source)

    Raises:
        DatasetParseError: On a malformed header or row (the line is cited)
        OSError: If the file cannot be read
    """
    if format != "csv":
        raise InvalidArgumentError(f"Unsupported embedding format '{format}'")

    raw = Path(path).read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise DatasetParseError("invalid UTF-8", line_number=raw.count(b"\n", 0, e.start) + 1)

    # header=None: every line, the header included, is checked against the
    # first line's field count, and no column is taken as the index
    try:
        table = pd.read_csv(io.StringIO(text), header=None, dtype=str, keep_default_na=False, skip_blank_lines=False)
    except pd.errors.EmptyDataError:
        raise DatasetParseError("file is empty (missing header)", line_number=1)
    except pd.errors.ParserError as e:
        found = re.search(r"line (\d+)", str(e))
        raise DatasetParseError(
            f"inconsistent column count: {e}",
            line_number=int(found.group(1)) if found else None,
        )

    d = _check_header([str(c) for c in table.iloc[0]])
    frame = table.iloc[1:].reset_index(drop=True)
    frame.columns = ["domain", "label"] + [f"f{i}" for i in range(d)]

    # Short rows are padded with NaN by the parser
    short = frame.isna().any(axis=1).to_numpy()
    if short.any():
        index = int(np.argmax(short))
        raise DatasetParseError(f"expected {d + 2} fields", line_number=index + 2)

    labels_text = frame["label"].str.strip()
    bad_label = ~labels_text.str.match(INTEGER_LABEL).to_numpy()
    if bad_label.any():
        index = int(np.argmax(bad_label))
        raise DatasetParseError(f"label '{frame['label'].iloc[index]}' is not an integer", line_number=index + 2)
    labels = np.empty(len(labels_text), dtype=np.int64)
    for index, value in enumerate(labels_text):
        try:
            labels[index] = int(value)
        except OverflowError:
            raise DatasetParseError(f"label '{value}' is out of range", line_number=index + 2)
    if labels.size and labels.min() < 0:
        index = int(np.argmax(labels < 0))
        raise DatasetParseError("labels must be non-negative", line_number=index + 2)

    feature_cols = [f"f{i}" for i in range(d)]
    try:
        # Correctly rounded string -> double, so written files round-trip exactly
        values = frame[feature_cols].to_numpy(dtype=str).astype(np.float64)
    except ValueError:
        values = frame[feature_cols].apply(pd.to_numeric, errors="coerce").to_numpy(dtype=np.float64)
    bad_value = ~np.isfinite(values).all(axis=1)
    if bad_value.any():
        index = int(np.argmax(bad_value))
        raise DatasetParseError("feature values must be finite decimal numbers", line_number=index + 2)

    tags = frame["domain"].to_numpy()
    domains: Dict[str, DomainSamples] = {}
    for name in pd.unique(tags):
        rows = tags == name
        domains[str(name)] = DomainSamples(values[rows], labels[rows])

    num_classes = int(labels.max()) + 1 if labels.size else 1
    logger.info(
        "Embeddings loaded",
        extra={"path": str(path), "rows": int(labels.size), "domains": list(domains), "d": d},
    )

    return LabeledDataset(
        domains=domains,
        dim=d,
        num_classes=num_classes,
        source_domains=tuple(domains),
    )


def save_embeddings(dataset: LabeledDataset, path: PathLike) -> None:
    """
    Write a dataset in the embedding CSV format.

    Rows follow domain order, then insertion order; floats are written in
    shortest round-trip form.

    Raises:
        OSError: If the file cannot be written
    """
    columns = ["domain", "label"] + [f"f{i}" for i in range(dataset.dim)]
    parts = []
    for name, samples in dataset.domains.items():
        part = pd.DataFrame(samples.features, columns=columns[2:])
        part.insert(0, "label", samples.labels)
        part.insert(0, "domain", name)
        parts.append(part)
    frame = pd.concat(parts, ignore_index=True) if parts else pd.DataFrame(columns=columns)

    frame.to_csv(path, index=False, lineterminator="\n", float_format=format_float)
    logger.info("Embeddings saved", extra={"path": str(path), "rows": len(frame)})


def standardize_dataset(
    dataset: LabeledDataset,
    sources: Optional[Sequence[str]] = None,
) -> Tuple[LabeledDataset, StandardizationStats]:
    """
    Z-score every domain with statistics pooled over the source domains.

    Args:
        dataset: Dataset to transform
        sources: Domains whose rows define the statistics (all domains when None)

    Returns:
        (standardized dataset, pooled statistics)
    """
    names = list(dataset.domains) if not sources else list(sources)
    for name in names:
        if name not in dataset.domains:
            raise UnknownDomainError(name, dataset.domain_ids)
    pooled = np.vstack([dataset.domains[name].features for name in names])
    stats = StandardizationStats.fit(pooled)
    return dataset.map_features(stats.apply), stats
