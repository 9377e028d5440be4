"""
Subcommands of the cfshift command line.

Each handler takes parsed argparse flags, writes its artifacts and returns
an exit code. Exceptions propagate to cfshift.main, which maps them to
exit codes.
"""

import argparse
import json
from pathlib import Path
from typing import Any, List, Optional

import numpy as np
from rich.console import Console
from rich.table import Table

from cfshift.cli.plotting import (
    PlotKind,
    PlotSpec,
    cf_plane_traces,
    pca_points,
    render_svg,
    trace_spread,
    write_points_csv,
)
from cfshift.config.settings import Settings, settings
from cfshift.core.checkpoint import load_checkpoint, save_checkpoint, write_history
from cfshift.core.data import generate, graded_spec, load_embeddings, save_embeddings, standardize_dataset
from cfshift.core.ecf import sample_frequency_bank
from cfshift.core.interfaces.feature_interface import FeatureMatrix, FrequencyScheme, ShiftReport
from cfshift.core.interfaces.model_interface import BankParams, EpochRecord, TrainConfig
from cfshift.core.loss import class_conditional_reports, compare_reports, distance_matrix, ShiftComparison
from cfshift.core.trainer import evaluate, forward, train
from cfshift.exceptions.shift_exceptions import UnknownDomainError, UsageError
from cfshift.utils.serialization import to_jsonable
from cfshift.config.logging_config import log_with_context

console = Console()


# ============================================================================
# Helpers
# ============================================================================

def _resolve_seed(seed: Optional[int], plot: bool = False) -> int:
    """
    Explicit --seed wins; otherwise CFSHIFT_PLOT_SEED for plots when set,
    then CFSHIFT_SEED. Settings are read at call time.
    """
    if seed is not None:
        return seed
    current = Settings()
    if plot and current.plot_seed is not None:
        return current.plot_seed
    return current.seed


def _write_json(payload: Any, path: str) -> None:
    Path(path).write_text(json.dumps(to_jsonable(payload), indent=2) + "\n")


def _check_domains(names: List[str], available: List[str]) -> None:
    for name in names:
        if name not in available:
            raise UnknownDomainError(name, available)


def _domain_matrices(dataset, names=None) -> List[FeatureMatrix]:
    names = names or [n for n, s in dataset.domains.items() if len(s)]
    return [dataset.feature_matrix(name) for name in names]


def _bank_from_flags(args: argparse.Namespace, d: int):
    return sample_frequency_bank(
        d,
        args.bank_k,
        args.bank_scale,
        args.bank_seed,
        FrequencyScheme(args.scheme),
        directions=args.directions,
    )


def _report_table(report: ShiftReport, title: str) -> Table:
    """Distances rounded to 3 decimals, as a human-readable table."""
    table = Table(title=title)
    table.add_column("domain")
    for name in report.domain_ids:
        table.add_column(name, justify="right")
    for i, name in enumerate(report.domain_ids):
        cells = ["--" if i == j else f"{report.matrix[i, j]:.3f}" for j in range(len(report.domain_ids))]
        table.add_row(name, *cells)
    return table


def _comparison_table(comparison: ShiftComparison, title: str) -> Table:
    table = Table(title=title)
    names = comparison.before.domain_ids
    table.add_column("domain")
    for name in names:
        table.add_column(name, justify="right")
    for i, name in enumerate(names):
        cells = []
        for j in range(len(names)):
            if i == j:
                cells.append("--")
                continue
            after = comparison.after.matrix[i, j]
            change = comparison.relative_change[i, j]
            if np.isnan(change):
                cells.append(f"{after:.3f}")
            else:
                arrow = "↓" if change < 0 else "↑"
                cells.append(f"{after:.3f} ({arrow}{abs(change) * 100:.1f}%)")
        table.add_row(name, *cells)
    return table


# ============================================================================
# Subcommands
# ============================================================================

def cmd_gen_data(args: argparse.Namespace) -> int:
    """Generate a rotation-graded synthetic dataset and write it as CSV."""
    spec = graded_spec(
        n_domains=args.domains,
        classes=args.classes,
        d=args.dim,
        samples_per_class_per_domain=args.n,
        seed=_resolve_seed(args.seed),
        rotation_step_deg=args.rotation_step,
        shift_step=args.shift_step,
        noise_std=args.noise,
        class_radius=args.class_radius,
    )
    dataset = generate(spec)
    save_embeddings(dataset, args.out)
    console.print(f"Wrote {dataset.num_samples()} rows ({len(dataset.domains)} domains, d={dataset.dim}) to {args.out}")
    return 0


def cmd_distance(args: argparse.Namespace) -> int:
    """Pairwise CFL distances between the domains of a CSV."""
    dataset = load_embeddings(args.data)
    sources = args.source or []
    _check_domains(sources, dataset.domain_ids)
    standardized, _ = standardize_dataset(dataset, sources)
    bank = _bank_from_flags(args, dataset.dim)

    report = distance_matrix(_domain_matrices(standardized), bank)
    console.print(_report_table(report, "CFL distances"))

    if args.per_class:
        per_class = class_conditional_reports(standardized, bank)
        payload = {"overall": report.to_dict(), "per_class": {str(c): r.to_dict() for c, r in per_class.items()}}
        for label, class_report in per_class.items():
            console.print(_report_table(class_report, f"CFL distances, class {label}"))
    else:
        payload = report.to_dict()

    _write_json(payload, args.out)
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    """Train an adapter with ERM + lambda * CFL; write checkpoint and history."""
    dataset = load_embeddings(args.data)
    _check_domains(args.source + args.target, dataset.domain_ids)
    dataset = dataset.with_split(args.source, args.target)
    standardized, stats = standardize_dataset(dataset, args.source)

    config = TrainConfig(
        lr=args.lr,
        cfl_lambda=args.cfl_lambda,
        epochs=args.epochs,
        batch_per_domain=args.batch,
        bank=BankParams(k=args.bank_k, scale=args.bank_scale, seed=args.bank_seed, scheme=FrequencyScheme(args.scheme)),
        seed=_resolve_seed(args.seed),
        resample_bank_each_step=args.resample_bank,
        hidden_dims=tuple(args.hidden),
        embedding_dim=args.embedding_dim,
    )

    def show(record: EpochRecord) -> None:
        console.print(
            f"epoch {record.epoch:4d}  erm {record.erm:.6f}  cfl {record.cfl:.6f}  total {record.total:.6f}"
        )

    model, history = train(standardized, config, on_epoch=show)

    save_checkpoint(model, args.out, stats)
    history_path = args.history or f"{args.out}.jsonl"
    write_history(history, history_path)

    comparison = compare_reports(history[0].report, history[-1].report)
    log_with_context(
        "info",
        "Training run written",
        checkpoint=args.out,
        history=history_path,
        all_decreased=comparison.all_decreased,
    )
    console.print(_comparison_table(comparison, "Embedding CFL distances after training (vs. epoch 0)"))
    console.print(f"Checkpoint: {args.out}  History: {history_path}")
    return 0


def _plot_domains(args: argparse.Namespace) -> List[FeatureMatrix]:
    """Features to plot: standardized inputs, or embeddings when a checkpoint is given."""
    dataset = load_embeddings(args.data)
    sources = args.source or []
    _check_domains(sources, dataset.domain_ids)

    if args.checkpoint:
        model, stats = load_checkpoint(args.checkpoint)
        if stats is not None:
            dataset = dataset.map_features(stats.apply)
        else:
            dataset, _ = standardize_dataset(dataset, sources)
        dataset = dataset.map_features(lambda x: forward(model, x)[0])
    else:
        dataset, _ = standardize_dataset(dataset, sources)

    matrices = []
    for name, samples in dataset.domains.items():
        rows = samples.features
        if args.label is not None:
            rows = rows[samples.labels == args.label]
        if rows.shape[0]:
            matrices.append(FeatureMatrix(rows, domain_id=name))
    if not matrices:
        raise UsageError("No samples left to plot")
    return matrices


def cmd_plot(args: argparse.Namespace) -> int:
    """Complex-plane sweep or PCA scatter, as SVG plus companion CSV."""
    spec = PlotSpec(
        kind=PlotKind(args.kind),
        directions=args.directions,
        steps=args.steps,
        sweep_scale=args.sweep_scale,
        seed=_resolve_seed(args.seed, plot=True),
    )
    matrices = _plot_domains(args)

    spread = None
    if spec.kind is PlotKind.CF_PLANE:
        points = cf_plane_traces(matrices, spec)
        spread = trace_spread(points)
    else:
        points = pca_points(matrices)

    csv_path = args.csv or str(Path(args.out).with_suffix(".csv"))
    render_svg(points, spec.kind, args.out)
    write_points_csv(points, csv_path)
    log_with_context("info", "Plot written", kind=spec.kind.value, svg=args.out, csv=csv_path, trace_spread=spread)
    console.print(f"Plot: {args.out}  Points: {csv_path}")
    if spread is not None:
        console.print(f"Trace spread: {spread:.6f}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    """Per-domain accuracy of a checkpoint."""
    dataset = load_embeddings(args.data)
    model, stats = load_checkpoint(args.checkpoint)
    if args.domains:
        _check_domains(args.domains, dataset.domain_ids)
    if stats is not None:
        dataset = dataset.map_features(stats.apply)

    accuracy = evaluate(model, dataset, args.domains or None)

    table = Table(title="Accuracy")
    table.add_column("domain")
    table.add_column("accuracy", justify="right")
    for name, value in accuracy.items():
        table.add_row(name, f"{value:.3f}")
    console.print(table)

    if args.out:
        _write_json({"accuracy": accuracy}, args.out)
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    """Cell-by-cell change between two shift report files."""
    before = ShiftReport.from_dict(json.loads(Path(args.before).read_text()))
    after = ShiftReport.from_dict(json.loads(Path(args.after).read_text()))
    comparison = compare_reports(before, after)
    console.print(_comparison_table(comparison, "CFL distances (after vs. before)"))
    if args.out:
        _write_json(comparison.to_dict(), args.out)
    return 0


# ============================================================================
# Parser
# ============================================================================

def _add_bank_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--bank-k", type=int, default=settings.bank_k, help="number of frequencies K")
    parser.add_argument("--bank-scale", type=float, default=settings.bank_scale, help="frequency scale sigma")
    parser.add_argument("--bank-seed", type=int, default=settings.bank_seed)
    parser.add_argument(
        "--scheme",
        choices=[s.value for s in FrequencyScheme],
        default=settings.bank_scheme,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfshift",
        description="Measure and reduce domain shift with empirical characteristic functions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic multi-domain CSV")
    p.add_argument("--domains", type=int, default=4)
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--n", type=int, default=200, help="samples per class per domain")
    p.add_argument("--rotation-step", type=float, default=30.0, help="degrees between consecutive domains")
    p.add_argument("--shift-step", type=float, default=0.5, help="translation step along the last coordinate")
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--class-radius", type=float, default=3.0, help="distance scale of the class centres")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_gen_data)

    p = sub.add_parser("distance", help="pairwise CFL distances between domains")
    p.add_argument("--data", required=True)
    p.add_argument("--source", nargs="+", default=None, help="domains whose statistics standardize all features")
    _add_bank_flags(p)
    p.add_argument("--directions", type=int, default=1, help="sweep directions (radial-sweep only)")
    p.add_argument("--per-class", action="store_true", help="also report one matrix per class")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_distance)

    p = sub.add_parser("train", help="train an adapter with ERM + lambda * CFL")
    p.add_argument("--data", required=True)
    p.add_argument("--source", nargs="+", required=True)
    p.add_argument("--target", nargs="*", default=[])
    p.add_argument("--lr", type=float, default=settings.lr)
    p.add_argument("--lambda", dest="cfl_lambda", type=float, default=settings.cfl_lambda)
    p.add_argument("--epochs", type=int, default=settings.epochs)
    p.add_argument("--batch", type=int, default=settings.batch_per_domain, help="samples per domain per step")
    p.add_argument("--hidden", type=int, nargs="*", default=list(settings.hidden_dims))
    p.add_argument("--embedding-dim", type=int, default=settings.embedding_dim)
    p.add_argument("--resample-bank", action="store_true", help="draw a fresh frequency bank every step")
    p.add_argument("--seed", type=int, default=None)
    _add_bank_flags(p)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--history", default=None, help="JSON-lines history path (default: <out>.jsonl)")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("plot", help="complex-plane or PCA plot (SVG + CSV)")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", default=None, help="plot embeddings of this model")
    p.add_argument("--kind", choices=[k.value for k in PlotKind], default=PlotKind.CF_PLANE.value)
    p.add_argument("--directions", type=int, default=settings.plot_directions)
    p.add_argument("--steps", type=int, default=settings.plot_steps)
    p.add_argument("--sweep-scale", type=float, default=settings.plot_sweep_scale)
    p.add_argument("--source", nargs="+", default=None)
    p.add_argument("--label", type=int, default=None, help="only plot samples of this class")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="SVG path")
    p.add_argument("--csv", default=None, help="companion CSV path (default: <out>.csv)")
    p.set_defaults(handler=cmd_plot)

    p = sub.add_parser("eval", help="per-domain accuracy of a checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--domains", nargs="*", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("compare", help="compare two shift reports")
    p.add_argument("--before", required=True)
    p.add_argument("--after", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_compare)

    return parser
