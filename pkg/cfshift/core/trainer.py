"""
Adapter training with a combined ERM + characteristic-function loss.

    total = ERM(sources) + lambda * CFL(sources + unlabeled targets)

Gradients are computed analytically by a hand-written reverse pass
through the ECF cos/sin terms, the tanh adapter and the linear head.
Training is plain SGD and fully determined by TrainConfig.seed.
"""

import math
import warnings
from itertools import combinations
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from cfshift.core.ecf import ecf_components, sample_frequency_bank
from cfshift.core.interfaces.feature_interface import (
    EcfVector,
    FeatureInput,
    FeatureMatrix,
    FrequencyBank,
    ShiftReport,
    as_array,
)
from cfshift.core.interfaces.model_interface import (
    AdapterModel,
    EpochRecord,
    LabeledDataset,
    TrainConfig,
)
from cfshift.core.loss import cfl_distance, distance_matrix
from cfshift.exceptions.shift_exceptions import (
    DimensionMismatchError,
    InvalidArgumentError,
    SingleDomainWarning,
    UnknownDomainError,
)
from cfshift.config.logging_config import logger

Batch = Tuple[np.ndarray, np.ndarray]  # (features, labels)


# ============================================================================
# Forward / ERM
# ============================================================================

def _forward_cached(model: AdapterModel, batch: np.ndarray) -> Tuple[List[np.ndarray], np.ndarray]:
    """Run the network, keeping every layer's activation for the reverse pass."""
    if batch.ndim != 2 or batch.shape[1] != model.input_dim:
        raise DimensionMismatchError(
            f"Batch has dimension {batch.shape[-1]}, model expects {model.input_dim}",
            expected=model.input_dim,
            actual=batch.shape[-1],
        )
    activations = [batch]
    for w, b in model.layers:
        activations.append(np.tanh(activations[-1] @ w + b))
    logits = activations[-1] @ model.head[0] + model.head[1]
    return activations, logits


def forward(model: AdapterModel, batch: FeatureInput) -> Tuple[np.ndarray, np.ndarray]:
    """
    Compute embeddings and class logits.

    Args:
        model: Adapter model
        batch: n x d inputs

    Returns:
        (n x e embeddings, n x C logits)

    Raises:
        DimensionMismatchError: If the batch dimension differs from the model input
    """
    activations, logits = _forward_cached(model, as_array(batch))
    return activations[-1], logits


def _erm_with_grad(logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean softmax cross-entropy and its gradient w.r.t. the logits."""
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    n, num_classes = logits.shape
    if labels.size != n:
        raise InvalidArgumentError(f"{n} logit rows but {labels.size} labels")
    if n == 0:
        raise InvalidArgumentError("Cannot compute the ERM loss of an empty batch")
    if labels.min() < 0 or labels.max() >= num_classes:
        raise InvalidArgumentError(f"Labels must lie in [0, {num_classes})")

    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    sum_exp = exp.sum(axis=1)
    rows = np.arange(n)
    loss = float(np.sum(np.log(sum_exp) - shifted[rows, labels]) / n)

    grad = exp / sum_exp[:, None]
    grad[rows, labels] -= 1.0
    return loss, grad / n


def erm_loss(logits: np.ndarray, labels: Sequence[int]) -> float:
    """
    Mean cross-entropy over a batch (log-sum-exp stabilized).

    Raises:
        InvalidArgumentError: On a label outside [0, C) or a row/label count mismatch
    """
    loss, _ = _erm_with_grad(np.asarray(logits, dtype=np.float64), np.asarray(labels))
    return loss


# ============================================================================
# CFL term
# ============================================================================

def _cfl_with_grads(
    embeddings: Sequence[np.ndarray],
    freqs: np.ndarray,
) -> Tuple[float, List[np.ndarray]]:
    """
    Mean pairwise CFL over domain batches and its gradient w.r.t. each batch.

    With P pairs and K frequencies, d loss / d re_a = (2 / (K P)) * sum over
    partners b of (re_a - re_b), likewise for im; the per-sample terms then
    chain through re_a = mean_i cos(w . z_i), im_a = mean_i sin(w . z_i).
    """
    if len(embeddings) < 2:
        return 0.0, [np.zeros_like(z) for z in embeddings]

    parts = [ecf_components(z, freqs) for z in embeddings]
    ecfs = [EcfVector(re=re, im=im, n_samples=z.shape[0]) for (re, im, _, _), z in zip(parts, embeddings)]
    pairs = list(combinations(range(len(embeddings)), 2))
    k = freqs.shape[0]

    loss = sum(cfl_distance(ecfs[a], ecfs[b]) for a, b in pairs) / len(pairs)

    g_re = [np.zeros(k) for _ in embeddings]
    g_im = [np.zeros(k) for _ in embeddings]
    coeff = 2.0 / (k * len(pairs))
    for a, b in pairs:
        d_re = coeff * (ecfs[a].re - ecfs[b].re)
        d_im = coeff * (ecfs[a].im - ecfs[b].im)
        g_re[a] += d_re
        g_re[b] -= d_re
        g_im[a] += d_im
        g_im[b] -= d_im

    grads = []
    for (_, _, cos_terms, sin_terms), z, gr, gi in zip(parts, embeddings, g_re, g_im):
        grads.append(((cos_terms * gi - sin_terms * gr) @ freqs) / z.shape[0])
    return loss, grads


def cfl_step_loss(embeddings: Sequence[FeatureInput], bank: FrequencyBank) -> float:
    """
    Mean CFL over all unordered pairs of domain batches.

    With a single batch the CFL is undefined; 0.0 is returned and a
    SingleDomainWarning is emitted.

    Args:
        embeddings: One embedding batch per domain
        bank: Frequency bank over the embedding dimension

    Returns:
        Non-negative loss value
    """
    arrays = [as_array(z) for z in embeddings]
    for z in arrays:
        if z.shape[0] == 0:
            raise InvalidArgumentError("Embedding batches must be non-empty")
        if z.shape[1] != bank.cols:
            raise DimensionMismatchError(
                f"Embeddings have dimension {z.shape[1]}, bank expects {bank.cols}",
                expected=bank.cols,
                actual=z.shape[1],
            )
    if len(arrays) < 2:
        logger.warning("CFL requested for a single domain; using 0", extra={"domains": len(arrays)})
        warnings.warn("CFL is undefined for a single domain; returning 0", SingleDomainWarning, stacklevel=2)
        return 0.0
    loss, _ = _cfl_with_grads(arrays, bank.freqs)
    return loss


# ============================================================================
# Total loss and reverse pass
# ============================================================================

def _backward(
    model: AdapterModel,
    activations: List[np.ndarray],
    d_embeddings: np.ndarray,
    d_logits: Optional[np.ndarray],
) -> List[np.ndarray]:
    """Reverse pass; returns gradients in model.parameters() order."""
    embeddings = activations[-1]
    w_head = model.head[0]
    if d_logits is None:
        grad_head = [np.zeros_like(w_head), np.zeros_like(model.head[1])]
        upstream = d_embeddings
    else:
        grad_head = [embeddings.T @ d_logits, d_logits.sum(axis=0)]
        upstream = d_logits @ w_head.T + d_embeddings

    grads: List[np.ndarray] = []
    for index in range(len(model.layers) - 1, -1, -1):
        w, _ = model.layers[index]
        out = activations[index + 1]
        d_pre = upstream * (1.0 - out * out)
        grads = [activations[index].T @ d_pre, d_pre.sum(axis=0)] + grads
        upstream = d_pre @ w.T
    return grads + grad_head


def _objective(
    model: AdapterModel,
    labeled_batches: Sequence[Batch],
    unlabeled_batches: Sequence[FeatureInput],
    bank: FrequencyBank,
    cfl_lambda: float,
) -> Tuple[float, float, List[np.ndarray]]:
    """ERM value, CFL value and the gradient of ERM + lambda * CFL."""
    if cfl_lambda < 0:
        raise InvalidArgumentError(f"lambda must be >= 0, got {cfl_lambda}")
    if not labeled_batches:
        raise InvalidArgumentError("At least one labeled source batch is required")
    if bank.cols != model.embedding_dim:
        raise DimensionMismatchError(
            f"Bank dimension {bank.cols} differs from embedding dimension {model.embedding_dim}",
            expected=model.embedding_dim,
            actual=bank.cols,
        )

    source_x = np.vstack([as_array(x) for x, _ in labeled_batches])
    source_y = np.concatenate([np.asarray(y, dtype=np.int64).reshape(-1) for _, y in labeled_batches])
    source_sizes = [as_array(x).shape[0] for x, _ in labeled_batches]

    src_acts, logits = _forward_cached(model, source_x)
    erm, d_logits = _erm_with_grad(logits, source_y)

    domain_embeddings = np.split(src_acts[-1], np.cumsum(source_sizes)[:-1])
    tgt_acts = None
    if unlabeled_batches:
        target_sizes = [as_array(x).shape[0] for x in unlabeled_batches]
        tgt_acts, _ = _forward_cached(model, np.vstack([as_array(x) for x in unlabeled_batches]))
        domain_embeddings += np.split(tgt_acts[-1], np.cumsum(target_sizes)[:-1])

    cfl, cfl_grads = _cfl_with_grads(domain_embeddings, bank.freqs)

    d_src = cfl_lambda * np.vstack(cfl_grads[: len(source_sizes)])
    grads = _backward(model, src_acts, d_src, d_logits)
    if tgt_acts is not None:
        d_tgt = cfl_lambda * np.vstack(cfl_grads[len(source_sizes):])
        grads = [g + h for g, h in zip(grads, _backward(model, tgt_acts, d_tgt, None))]

    return erm, cfl, grads


def total_loss(
    model: AdapterModel,
    labeled_batches: Sequence[Batch],
    unlabeled_batches: Sequence[FeatureInput],
    bank: FrequencyBank,
    cfl_lambda: float,
) -> Tuple[float, List[np.ndarray]]:
    """
    ERM over labeled source batches plus lambda times the step CFL.

    Source batches are stacked and run through the network together, as
    are the unlabeled target batches; the CFL pairs every domain batch.
    Target labels never enter the loss.

    Args:
        model: Adapter model
        labeled_batches: (features, labels) per source domain
        unlabeled_batches: Feature batches per target domain
        bank: Frequency bank over the embedding dimension
        cfl_lambda: Regularizer weight, >= 0

    Returns:
        (total loss, gradients in model.parameters() order)
    """
    erm, cfl, grads = _objective(model, labeled_batches, unlabeled_batches, bank, cfl_lambda)
    return erm + cfl_lambda * cfl, grads


# ============================================================================
# Training loop
# ============================================================================

def embedding_report(model: AdapterModel, dataset: LabeledDataset, bank: FrequencyBank) -> ShiftReport:
    """Shift report over every non-empty domain's embeddings."""
    names = [name for name, samples in dataset.domains.items() if len(samples)]
    if len(names) < 2:
        return ShiftReport(domain_ids=names, matrix=np.zeros((len(names), len(names))), bank_meta=bank.meta())
    matrices = [FeatureMatrix(forward(model, dataset.domains[name].features)[0], domain_id=name) for name in names]
    return distance_matrix(matrices, bank)


def _epoch_record(
    epoch: int,
    erm: float,
    cfl: float,
    cfl_lambda: float,
    steps: int,
    model: AdapterModel,
    dataset: LabeledDataset,
    report_bank: FrequencyBank,
) -> EpochRecord:
    report = embedding_report(model, dataset, report_bank)
    record = EpochRecord(epoch=epoch, erm=erm, cfl=cfl, total=erm + cfl_lambda * cfl, steps=steps, report=report)
    logger.info(
        "Epoch complete",
        extra={"epoch": epoch, "erm": erm, "cfl": cfl, "total": record.total, "steps": steps},
    )
    return record


def train(
    dataset: LabeledDataset,
    config: TrainConfig,
    on_epoch: Optional[Callable[[EpochRecord], None]] = None,
) -> Tuple[AdapterModel, List[EpochRecord]]:
    """
    Train an adapter + head with SGD on ERM + lambda * CFL.

    Each epoch draws a fresh permutation of every training domain and runs
    ceil(min domain size / batch_per_domain) steps, each taking the next
    batch_per_domain samples of every domain. The model after the last
    epoch is returned; there is no validation-based selection.

    Args:
        dataset: Dataset with at least one source domain
        config: Run configuration
        on_epoch: Called with each EpochRecord (epoch 0 is before training)

    Returns:
        (final model, epoch records 0..epochs)

    Raises:
        InvalidArgumentError: If the dataset has no source domain or an empty training domain
    """
    if not dataset.source_domains:
        raise InvalidArgumentError("Dataset has no source domain")
    train_names = dataset.training_domains
    for name in train_names:
        if len(dataset.domains[name]) == 0:
            raise InvalidArgumentError(f"Training domain '{name}' is empty")
    if len(train_names) < 2:
        logger.warning(
            "Only one training domain; the CFL term is 0 for the whole run",
            extra={"domain": train_names[0]},
        )

    rng = np.random.default_rng(config.seed)
    model = AdapterModel.initialize(
        input_dim=dataset.dim,
        hidden_dims=config.hidden_dims,
        embedding_dim=config.embedding_dim,
        num_classes=dataset.num_classes,
        rng=rng,
    )
    report_bank = sample_frequency_bank(
        model.embedding_dim, config.bank.k, config.bank.scale, config.bank.seed, config.bank.scheme
    )
    bank = report_bank

    sources = [dataset.domains[name] for name in dataset.source_domains]
    targets = [dataset.domains[name] for name in dataset.target_domains]
    n_sources = len(sources)

    logger.info(
        "Training started",
        extra={
            "sources": list(dataset.source_domains),
            "targets": list(dataset.target_domains),
            "heldout": dataset.heldout_domains,
            "lr": config.lr,
            "lambda": config.cfl_lambda,
            "epochs": config.epochs,
        },
    )

    erm0, cfl0, _ = _objective(
        model,
        [(s.features, s.labels) for s in sources],
        [t.features for t in targets],
        report_bank,
        config.cfl_lambda,
    )
    history = [_epoch_record(0, erm0, cfl0, config.cfl_lambda, 0, model, dataset, report_bank)]
    if on_epoch:
        on_epoch(history[0])

    domains = sources + targets
    steps_per_epoch = math.ceil(min(len(d) for d in domains) / config.batch_per_domain)
    params = [p.copy() for p in model.parameters()]

    for epoch in range(1, config.epochs + 1):
        orders = [rng.permutation(len(d)) for d in domains]
        erm_sum = cfl_sum = 0.0

        for step in range(steps_per_epoch):
            window = slice(step * config.batch_per_domain, (step + 1) * config.batch_per_domain)
            picks = [order[window] for order in orders]
            labeled = [(d.features[p], d.labels[p]) for d, p in zip(domains[:n_sources], picks[:n_sources])]
            unlabeled = [d.features[p] for d, p in zip(domains[n_sources:], picks[n_sources:])]

            if config.resample_bank_each_step:
                bank = sample_frequency_bank(
                    model.embedding_dim,
                    config.bank.k,
                    config.bank.scale,
                    int(rng.integers(0, 2**63 - 1)),
                    config.bank.scheme,
                )

            erm, cfl, grads = _objective(model, labeled, unlabeled, bank, config.cfl_lambda)
            erm_sum += erm
            cfl_sum += cfl

            params = [p - config.lr * g for p, g in zip(params, grads)]
            model = model.with_parameters(params)

        record = _epoch_record(
            epoch,
            erm_sum / steps_per_epoch,
            cfl_sum / steps_per_epoch,
            config.cfl_lambda,
            steps_per_epoch,
            model,
            dataset,
            report_bank,
        )
        history.append(record)
        if on_epoch:
            on_epoch(record)

    return model, history


# ============================================================================
# Evaluation
# ============================================================================

def evaluate(
    model: AdapterModel,
    dataset: LabeledDataset,
    domains: Optional[Sequence[str]] = None,
) -> Dict[str, float]:
    """
    Per-domain accuracy of argmax predictions (ties go to the lowest class).

    Args:
        model: Trained model
        dataset: Labeled dataset with model.input_dim features
        domains: Domains to evaluate (all when None)

    Returns:
        Mapping domain -> accuracy in [0, 1]

    Raises:
        UnknownDomainError: If a requested domain is missing
        InvalidArgumentError: If a requested domain is empty
    """
    if dataset.dim != model.input_dim:
        raise DimensionMismatchError(
            f"Dataset dimension {dataset.dim} differs from model input {model.input_dim}",
            expected=model.input_dim,
            actual=dataset.dim,
        )
    names = list(dataset.domains) if domains is None else list(domains)
    accuracy: Dict[str, float] = {}

    for name in names:
        if name not in dataset.domains:
            raise UnknownDomainError(name, dataset.domain_ids)
        samples = dataset.domains[name]
        if len(samples) == 0:
            raise InvalidArgumentError(f"Domain '{name}' is empty")
        _, logits = forward(model, samples.features)
        predictions = np.argmax(logits, axis=1)
        accuracy[name] = float(np.mean(predictions == samples.labels))

    return accuracy
