"""
Complex-plane and PCA plots with companion CSV files.

The cf-plane view traces each domain's ECF along radial frequency sweeps
t * u; every trace starts at (1, 0) for t = 0 and fans out by domain.
"""

from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from pathlib import Path
from typing import List, Sequence, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
from matplotlib.patches import Circle  # noqa: E402

from cfshift.core.baseline import pca_fit, pca_project  # noqa: E402
from cfshift.core.ecf import ecf_eval, sample_frequency_bank  # noqa: E402
from cfshift.core.interfaces.feature_interface import FeatureMatrix, FrequencyScheme  # noqa: E402
from cfshift.exceptions.shift_exceptions import InvalidArgumentError  # noqa: E402
from cfshift.utils.serialization import format_float  # noqa: E402
from cfshift.config.logging_config import logger  # noqa: E402

PathLike = Union[str, Path]

AXIS_LIMIT = 1.1
PALETTE = "tab10"
# Fixed salt keeps SVG element ids identical across runs
SVG_HASH_SALT = "cfshift"


class PlotKind(str, Enum):
    CF_PLANE = "cf-plane"
    PCA_SCATTER = "pca-scatter"


@dataclass(frozen=True)
class PlotSpec:
    """What to draw; colors follow domain order through a fixed palette."""
    kind: PlotKind = PlotKind.CF_PLANE
    directions: int = 3
    steps: int = 40
    sweep_scale: float = 3.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", PlotKind(self.kind))
        if self.directions < 1:
            raise InvalidArgumentError(f"directions must be >= 1, got {self.directions}")
        if self.steps < 2:
            raise InvalidArgumentError(f"steps must be >= 2, got {self.steps}")
        if not self.sweep_scale > 0:
            raise InvalidArgumentError(f"sweep scale must be > 0, got {self.sweep_scale}")


def cf_plane_traces(domains: Sequence[FeatureMatrix], spec: PlotSpec) -> pd.DataFrame:
    """
    ECF values along radial sweeps, one trace per (domain, direction).

    All domains share one sweep bank so traces are comparable point by point.

    Returns:
        DataFrame with columns domain, direction, step, t, re, im
    """
    if not domains:
        raise InvalidArgumentError("Nothing to plot: no domains")
    d = domains[0].cols
    bank = sample_frequency_bank(
        d,
        spec.directions * spec.steps,
        spec.sweep_scale,
        spec.seed,
        FrequencyScheme.RADIAL_SWEEP,
        directions=spec.directions,
    )
    direction = np.repeat(np.arange(spec.directions), spec.steps)
    step = np.tile(np.arange(spec.steps), spec.directions)
    t = np.tile(np.linspace(0.0, spec.sweep_scale, spec.steps), spec.directions)

    frames = []
    for features in domains:
        ecf = ecf_eval(features, bank)
        frames.append(pd.DataFrame({
            "domain": features.domain_id,
            "direction": direction,
            "step": step,
            "t": t,
            "re": ecf.re,
            "im": ecf.im,
        }))
    return pd.concat(frames, ignore_index=True)


def pca_points(domains: Sequence[FeatureMatrix]) -> pd.DataFrame:
    """
    Top-2 PCA projection fitted on all domains pooled.

    Returns:
        DataFrame with columns domain, index, pc1, pc2
    """
    if not domains:
        raise InvalidArgumentError("Nothing to plot: no domains")
    model = pca_fit(np.vstack([f.values for f in domains]), k=2)
    frames = []
    for features in domains:
        projected = pca_project(model, features)
        frames.append(pd.DataFrame({
            "domain": features.domain_id,
            "index": np.arange(features.rows),
            "pc1": projected[:, 0],
            "pc2": projected[:, 1],
        }))
    return pd.concat(frames, ignore_index=True)


def trace_spread(traces: pd.DataFrame) -> float:
    """
    Mean pairwise distance between domain traces in the complex plane.

    Points are matched by (direction, step); smaller means a tighter
    bundle. Returns 0.0 for fewer than two domains.
    """
    names = list(pd.unique(traces["domain"]))
    if len(names) < 2:
        return 0.0
    by_domain = {
        name: traces[traces["domain"] == name].sort_values(["direction", "step"])[["re", "im"]].to_numpy()
        for name in names
    }
    gaps = [np.mean(np.linalg.norm(by_domain[a] - by_domain[b], axis=1)) for a, b in combinations(names, 2)]
    return float(np.mean(gaps))


def _domain_colors(names: List[str]) -> dict:
    cmap = plt.get_cmap(PALETTE)
    return {name: cmap(index % cmap.N) for index, name in enumerate(names)}


def render_svg(points: pd.DataFrame, kind: PlotKind, path: PathLike, title: str = "") -> None:
    """Draw cf-plane traces or PCA points to an SVG file."""
    kind = PlotKind(kind)
    names = list(pd.unique(points["domain"]))
    colors = _domain_colors(names)

    with plt.rc_context({"svg.hashsalt": SVG_HASH_SALT, "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 6))
        if kind is PlotKind.CF_PLANE:
            ax.add_patch(Circle((0.0, 0.0), 1.0, fill=False, linestyle="--", color="0.6", linewidth=0.8))
            for name in names:
                rows = points[points["domain"] == name]
                for direction, trace in rows.groupby("direction", sort=True):
                    ax.plot(
                        trace["re"], trace["im"],
                        color=colors[name],
                        linewidth=1.2,
                        label=name if direction == rows["direction"].min() else None,
                    )
            ax.set_xlim(-AXIS_LIMIT, AXIS_LIMIT)
            ax.set_ylim(-AXIS_LIMIT, AXIS_LIMIT)
            ax.set_xlabel("Re")
            ax.set_ylabel("Im")
        else:
            for name in names:
                rows = points[points["domain"] == name]
                ax.scatter(rows["pc1"], rows["pc2"], s=6, color=colors[name], label=name)
            ax.set_xlabel("PC1")
            ax.set_ylabel("PC2")
        ax.set_aspect("equal", adjustable="box")
        ax.legend(loc="upper right", fontsize=8)
        if title:
            ax.set_title(title)
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)

    logger.info("Plot written", extra={"path": str(path), "kind": kind.value, "domains": names})


def write_points_csv(points: pd.DataFrame, path: PathLike) -> None:
    """Companion CSV holding exactly the plotted coordinates."""
    points.to_csv(path, index=False, lineterminator="\n", float_format=format_float)
