"""
Model checkpoint and training-history persistence.

Checkpoint layout (little-endian):

    8 bytes   magic b"CFSHIFT1"
    uint32    format version
    uint32    number of widths L, then L x uint32 widths (input, hidden..., embedding)
    uint32    class count C
    uint32    1 if standardization statistics follow, else 0
    float64   W0, b0, ..., Wh, bh in row-major order
    float64   mean[d], std[d]   (only when flagged)

History is JSON lines, one record per epoch boundary.
"""

import json
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from cfshift.core.ecf import StandardizationStats
from cfshift.core.interfaces.model_interface import AdapterModel, EpochRecord
from cfshift.exceptions.shift_exceptions import CheckpointFormatError
from cfshift.utils.serialization import to_jsonable
from cfshift.config.logging_config import logger

MAGIC = b"CFSHIFT1"
FORMAT_VERSION = 1

PathLike = Union[str, Path]


def save_checkpoint(
    model: AdapterModel,
    path: PathLike,
    stats: Optional[StandardizationStats] = None,
) -> None:
    """
    Write a model (and optionally its input statistics) to a binary file.

    Args:
        model: Model to persist
        path: Destination file
        stats: Standardization statistics the model's inputs were built with
    """
    if model.layers:
        widths = [model.input_dim, *[w.shape[1] for w, _ in model.layers]]
    else:
        widths = [model.input_dim]

    header = np.array([FORMAT_VERSION, len(widths), *widths, model.num_classes, int(stats is not None)], dtype="<u4")
    blocks = [MAGIC, header.tobytes()]
    for param in model.parameters():
        blocks.append(np.ascontiguousarray(param, dtype="<f8").tobytes())
    if stats is not None:
        blocks.append(stats.mean.astype("<f8").tobytes())
        blocks.append(stats.std.astype("<f8").tobytes())

    Path(path).write_bytes(b"".join(blocks))
    logger.info("Checkpoint saved", extra={"path": str(path), "widths": widths, "classes": model.num_classes})


class _Reader:
    """Sequential reader over checkpoint bytes."""

    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, dtype: str, count: int) -> np.ndarray:
        size = np.dtype(dtype).itemsize * count
        if self.offset + size > len(self.data):
            raise CheckpointFormatError("Checkpoint is truncated")
        values = np.frombuffer(self.data, dtype=dtype, count=count, offset=self.offset)
        self.offset += size
        return values.copy()


def load_checkpoint(path: PathLike) -> Tuple[AdapterModel, Optional[StandardizationStats]]:
    """
    Read a checkpoint written by save_checkpoint.

    Returns:
        (model, statistics or None)

    Raises:
        CheckpointFormatError: On a wrong magic header, unknown version or truncation
    """
    data = Path(path).read_bytes()
    if data[: len(MAGIC)] != MAGIC:
        raise CheckpointFormatError(f"{path} is not a cfshift checkpoint (bad magic header)")

    reader = _Reader(data)
    reader.offset = len(MAGIC)
    version, n_widths = (int(v) for v in reader.take("<u4", 2))
    if version != FORMAT_VERSION:
        raise CheckpointFormatError(f"Unsupported checkpoint version {version}")
    widths = [int(v) for v in reader.take("<u4", n_widths)]
    num_classes, has_stats = (int(v) for v in reader.take("<u4", 2))

    layers = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        w = reader.take("<f8", fan_in * fan_out).reshape(fan_in, fan_out)
        layers.append((w, reader.take("<f8", fan_out)))
    head_w = reader.take("<f8", widths[-1] * num_classes).reshape(widths[-1], num_classes)
    head = (head_w, reader.take("<f8", num_classes))

    stats = None
    if has_stats:
        stats = StandardizationStats(mean=reader.take("<f8", widths[0]), std=reader.take("<f8", widths[0]))
    if reader.offset != len(data):
        raise CheckpointFormatError(f"{len(data) - reader.offset} trailing bytes in checkpoint")

    return AdapterModel(layers=tuple(layers), head=head), stats


def write_history(records: Sequence[EpochRecord], path: PathLike) -> None:
    """Write epoch records as JSON lines (epoch, erm, cfl, total, steps, matrix)."""
    lines = [json.dumps(to_jsonable(record.to_dict())) for record in records]
    Path(path).write_text("\n".join(lines) + "\n" if lines else "")


def read_history(path: PathLike) -> List[dict]:
    """Read a JSON-lines history file."""
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]
