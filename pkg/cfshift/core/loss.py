"""
Characteristic Function Loss (CFL) and pairwise domain distances.

CFL between two feature sets is the mean squared modulus of their ECF
difference over a shared frequency bank:

    CFL = (1/K) * sum_k |phi_a(w_k) - phi_b(w_k)|^2

Each ECF value lies in the unit disk, so 0 <= CFL <= 4.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from cfshift.core.ecf import ecf_eval
from cfshift.core.interfaces.feature_interface import (
    EcfVector,
    FeatureInput,
    FeatureMatrix,
    FrequencyBank,
    ShiftReport,
)
from cfshift.core.interfaces.model_interface import LabeledDataset
from cfshift.exceptions.shift_exceptions import InvalidArgumentError
from cfshift.config.logging_config import logger


def cfl_distance(ecf_a: EcfVector, ecf_b: EcfVector) -> float:
    """
    Mean squared modulus of the difference of two ECF vectors.

    Args:
        ecf_a: ECF on some bank
        ecf_b: ECF on the same bank

    Returns:
        Non-negative distance, symmetric in its arguments

    Raises:
        InvalidArgumentError: If the vectors have different lengths
    """
    if len(ecf_a) != len(ecf_b):
        raise InvalidArgumentError(
            f"ECF length mismatch: {len(ecf_a)} vs {len(ecf_b)} (different banks?)"
        )
    d_re = ecf_a.re - ecf_b.re
    d_im = ecf_a.im - ecf_b.im
    return float(np.sum(d_re * d_re + d_im * d_im) / len(ecf_a))


def cfl_between(features_a: FeatureInput, features_b: FeatureInput, bank: FrequencyBank) -> float:
    """CFL between two feature sets evaluated on one bank."""
    return cfl_distance(ecf_eval(features_a, bank), ecf_eval(features_b, bank))


def distance_matrix(
    datasets: Sequence[FeatureInput],
    bank: FrequencyBank,
    domain_ids: Optional[Sequence[str]] = None,
    max_workers: int = 1,
) -> ShiftReport:
    """
    Pairwise CFL distances between several domains.

    The ECF of each dataset is computed once and reused for every pair.

    Args:
        datasets: Feature sets, one per domain
        bank: Frequency bank shared by all domains
        domain_ids: Names for the rows; taken from FeatureMatrix.domain_id
            (or "domain_<i>") when omitted
        max_workers: Threads used to evaluate the per-domain ECFs

    Returns:
        ShiftReport carrying the bank metadata

    Raises:
        InvalidArgumentError: If fewer than two datasets are given
    """
    if len(datasets) < 2:
        raise InvalidArgumentError(f"distance_matrix needs at least 2 datasets, got {len(datasets)}")

    if domain_ids is None:
        domain_ids = [
            ds.domain_id if isinstance(ds, FeatureMatrix) and ds.domain_id else f"domain_{i}"
            for i, ds in enumerate(datasets)
        ]
    elif len(domain_ids) != len(datasets):
        raise InvalidArgumentError(f"{len(domain_ids)} domain ids for {len(datasets)} datasets")

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            ecfs = list(pool.map(lambda ds: ecf_eval(ds, bank), datasets))
    else:
        ecfs = [ecf_eval(ds, bank) for ds in datasets]

    n = len(ecfs)
    matrix = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            matrix[i, j] = matrix[j, i] = cfl_distance(ecfs[i], ecfs[j])

    logger.info(
        "Distance matrix computed",
        extra={"domains": list(domain_ids), "bank": bank.meta(), "max_distance": float(matrix.max())},
    )

    return ShiftReport(domain_ids=list(domain_ids), matrix=matrix, bank_meta=bank.meta())


def class_conditional_reports(
    dataset: LabeledDataset,
    bank: FrequencyBank,
    classes: Optional[Sequence[int]] = None,
) -> Dict[int, ShiftReport]:
    """
    One distance matrix per class, over the domains that contain the class.

    Classes present in fewer than two domains are skipped.

    Args:
        dataset: Labeled multi-domain dataset
        bank: Frequency bank with dataset.dim columns
        classes: Classes to report (all classes when None)

    Returns:
        Mapping class index -> ShiftReport
    """
    classes = range(dataset.num_classes) if classes is None else classes
    reports: Dict[int, ShiftReport] = {}

    for label in classes:
        if not 0 <= label < dataset.num_classes:
            raise InvalidArgumentError(f"Class {label} outside [0, {dataset.num_classes})")
        members = []
        for name, samples in dataset.domains.items():
            rows = samples.features[samples.labels == label]
            if rows.shape[0]:
                members.append(FeatureMatrix(rows, domain_id=name))
        if len(members) < 2:
            logger.warning(
                "Class skipped in per-class report",
                extra={"class": int(label), "domains_with_class": len(members)},
            )
            continue
        reports[int(label)] = distance_matrix(members, bank)

    return reports


@dataclass(frozen=True)
class ShiftComparison:
    """
    Cell-by-cell change between two shift reports over the same domains.

    relative_change[i][j] = (after - before) / before; negative means the
    distance decreased. Cells with before == 0 are NaN.
    """
    before: ShiftReport
    after: ShiftReport
    relative_change: np.ndarray

    @property
    def all_decreased(self) -> bool:
        """True when every off-diagonal distance went strictly down."""
        off_diagonal = ~np.eye(len(self.before.domain_ids), dtype=bool)
        return bool(np.all(self.after.matrix[off_diagonal] < self.before.matrix[off_diagonal]))

    def to_dict(self) -> Dict[str, Any]:
        change = np.where(np.isnan(self.relative_change), None, self.relative_change)
        return {
            "domains": list(self.before.domain_ids),
            "before": self.before.matrix.tolist(),
            "after": self.after.matrix.tolist(),
            "relative_change": change.tolist(),
            "all_decreased": self.all_decreased,
        }


def compare_reports(before: ShiftReport, after: ShiftReport) -> ShiftComparison:
    """
    Compare two reports, e.g. before and after alignment training.

    Raises:
        InvalidArgumentError: If the reports cover different domains
    """
    if before.domain_ids != after.domain_ids:
        raise InvalidArgumentError(
            f"Reports cover different domains: {before.domain_ids} vs {after.domain_ids}"
        )
    with np.errstate(divide="ignore", invalid="ignore"):
        change = np.where(before.matrix > 0, (after.matrix - before.matrix) / before.matrix, np.nan)
    return ShiftComparison(before=before, after=after, relative_change=change)
