"""Reduction-rate sweeps: run pipelines per (variant, rate, trial) and write reports.

Each run becomes one JSON line (sorted keys) in `<output>/<task>.jsonl`; the means per
(variant, rate) go to `<output>/<task>_summary.csv`. Every row carries its
normalized time, the pipeline time divided by the time of the same pipeline
without reduction (variant `none`), which is run once as the baseline row.
"""

from __future__ import annotations

import json
import math
import time
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from tqdm import tqdm

from jl_robust.config import ExperimentConfig, validate_config
from jl_robust.data import (
    LabeledDataset,
    inject_ball_outliers,
    inject_halfspace_outliers,
    inject_label_flip,
    load_csv,
    load_sparse_labeled,
    select_pair,
    split_classes,
    synth_clusters,
    train_test_split,
)
from jl_robust.jl import (
    JL_VARIANTS,
    Variant,
    dimension_for_rate,
    distortion_report,
    make_projection,
)
from jl_robust.kcenter import discard_recall, solve_kcenter
from jl_robust.log import get_logger
from jl_robust.svm import accuracy, solve_one_class, solve_two_class

logger = get_logger(__name__)

DISTORTION_PAIRS = 1000


@dataclass(frozen=True)
class RunSpec:
    variant: Variant
    rate: float
    trial: int
    seed: int


@dataclass(frozen=True)
class ExperimentReport:
    rows: list[dict[str, Any]]
    rows_path: Path
    summary_path: Path
    summary: pd.DataFrame


def build_dataset(cfg: ExperimentConfig) -> LabeledDataset:
    """Load or generate the input, then inject the configured outliers."""
    src = cfg.input
    if src.source == 'csv':
        ds = load_csv(src.path, labeled=src.labeled)
    elif src.source == 'sparse':
        ds = load_sparse_labeled(src.path)
    else:
        ds = synth_clusters(
            src.k, src.per_cluster, src.d, src.spread, src.separation, cfg.seed, src.offset
        )
    if src.positive is not None and src.negative is not None:
        ds = select_pair(ds, src.positive, src.negative)

    out = cfg.outliers
    if out.kind == 'label_flip':
        ds = inject_label_flip(ds, out.fraction, cfg.seed)
    elif out.kind == 'ball':
        ds = inject_ball_outliers(ds, out.fraction, out.scale, cfg.seed)
    elif out.kind == 'halfspace':
        ds = inject_halfspace_outliers(ds, out.fraction, out.scale, cfg.seed)
    logger.info('Dataset: n=%d, d=%d, %d injected outliers', ds.n, ds.d, ds.injected.size)
    return ds


def _timing_fields(timing: dict[str, float]) -> dict[str, float]:
    return {
        't_jl': timing['t_jl'],
        't_blackbox': timing['t_blackbox'],
        't_recover': timing['t_recover'],
        't_total': timing['total'],
    }


def _recall(injected: np.ndarray, kept: np.ndarray) -> float:
    if injected.size == 0:
        return math.nan
    return float(np.mean(~np.isin(injected, kept)))


def _run_reduce(cfg: ExperimentConfig, ds: LabeledDataset, spec: RunSpec) -> dict[str, Any]:
    d_tilde = ds.d if spec.variant is Variant.none else dimension_for_rate(ds.d, spec.rate)
    start = time.perf_counter()
    projection = make_projection(spec.variant, ds.d, d_tilde, spec.seed)
    projection.apply_array(ds.points.coords)
    elapsed = time.perf_counter() - start
    report = distortion_report(
        ds.points, projection, DISTORTION_PAIRS, seed=spec.seed, epsilon=cfg.eps
    )
    return {
        'd_tilde': d_tilde,
        **report.as_dict(),
        't_jl': elapsed,
        't_blackbox': 0.0,
        't_recover': 0.0,
        't_total': elapsed,
    }


def _run_svm1(cfg: ExperimentConfig, ds: LabeledDataset, spec: RunSpec) -> dict[str, Any]:
    result = solve_one_class(
        ds.points,
        cfg.gamma,
        cfg.eps0,
        variant=spec.variant,
        seed=spec.seed,
        target_dim=dimension_for_rate(ds.d, spec.rate),
        c=cfg.c,
    )
    return {
        'd_tilde': result.target_dim,
        'width': result.width,
        'separated': result.separated,
        'converged': result.converged,
        'blackbox_width': result.blackbox_width,
        'outlier_recall': _recall(ds.injected, result.inlier_indices[0]),
        **_timing_fields(result.timing.as_dict()),
    }


def _run_svm2(cfg: ExperimentConfig, ds: LabeledDataset, spec: RunSpec) -> dict[str, Any]:
    train, test = train_test_split(ds, cfg.test_fraction, cfg.seed)
    P1, P2, rows1, rows2 = split_classes(train)
    result = solve_two_class(
        P1,
        P2,
        cfg.gamma,
        cfg.effective_gamma2,
        cfg.eps0,
        variant=spec.variant,
        seed=spec.seed,
        target_dim=dimension_for_rate(ds.d, spec.rate),
        c=cfg.c,
    )
    kept = np.concatenate((rows1[result.inlier_indices[0]], rows2[result.inlier_indices[1]]))
    clean = test.labels.copy()
    if cfg.outliers.kind == 'label_flip':
        clean[test.injected] *= -1
    return {
        'd_tilde': result.target_dim,
        'width': result.width,
        'separated': result.separated,
        'converged': result.converged,
        'blackbox_width': result.blackbox_width,
        'outlier_recall': _recall(train.injected, kept),
        'test_accuracy': accuracy(result, test.points.coords, clean),
        **_timing_fields(result.timing.as_dict()),
    }


def _run_kcenter(cfg: ExperimentConfig, ds: LabeledDataset, spec: RunSpec) -> dict[str, Any]:
    result = solve_kcenter(
        ds.points,
        cfg.k,
        cfg.gamma,
        cfg.eps,
        variant=spec.variant,
        seed=spec.seed,
        target_dim=dimension_for_rate(ds.d, spec.rate),
        c=cfg.c,
    )
    return {
        'd_tilde': result.target_dim,
        'radius': result.radius,
        'reassigned_radius': result.reassigned_radius,
        'blackbox_radius': result.blackbox_radius,
        'outlier_recall': discard_recall(result, ds.injected),
        **_timing_fields(result.timing.as_dict()),
    }


RUNNERS: dict[str, Callable[[ExperimentConfig, LabeledDataset, RunSpec], dict[str, Any]]] = {
    'reduce': _run_reduce,
    'svm1': _run_svm1,
    'svm2': _run_svm2,
    'kcenter': _run_kcenter,
}


def plan_runs(cfg: ExperimentConfig) -> list[RunSpec]:
    """The swept runs in report order: variant, then rate, then trial."""
    if cfg.task == 'bench':
        variants = list(JL_VARIANTS)
    elif Variant(cfg.variant) is Variant.none:
        variants = []
    else:
        variants = [Variant(cfg.variant)]
    return [
        RunSpec(variant, float(rate), trial, cfg.seed + trial)
        for variant in variants
        for rate in cfg.reduction_rates
        for trial in range(cfg.trials)
    ]


def _plain(value: Any) -> Any:  # noqa: ANN401
    """NaN becomes null so that every line is strict JSON."""
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_plain(v) for v in value]
    if isinstance(value, float) and math.isnan(value):
        return None
    if isinstance(value, np.generic):
        return value.item()
    return value


def _write_rows(rows: list[dict[str, Any]], path: Path) -> None:
    with path.open('w', encoding='utf-8') as handle:
        for row in rows:
            handle.write(json.dumps(_plain(row), sort_keys=True) + '\n')


def summarize(rows: list[dict[str, Any]]) -> pd.DataFrame:
    """Mean of every numeric metric per (variant, rate)."""
    frame = pd.DataFrame([{k: v for k, v in row.items() if k != 'config'} for row in rows])
    numeric = frame.select_dtypes(include=['number', 'bool']).columns.drop(
        ['rate', 'trial', 'seed'], errors='ignore'
    )
    return (
        frame.groupby(['variant', 'rate'], sort=False)[list(numeric)]
        .mean(numeric_only=True)
        .reset_index()
    )


def run_experiment(
    cfg: ExperimentConfig,
    progress: bool = True,  # noqa: FBT001, FBT002
) -> ExperimentReport:
    """Run the configured sweep and write the JSON-lines report and CSV summary.

    Args:
        cfg (ExperimentConfig): A configuration; it is validated again here.
        progress (bool, optional): Show a tqdm bar. Defaults to True.

    Returns:
        ExperimentReport: Rows (baseline first) and the paths written.
    """
    validate_config(cfg)
    task = cfg.effective_task
    runner = RUNNERS[task]
    ds = build_dataset(cfg)
    echo = cfg.to_dict()

    baseline = RunSpec(Variant.none, 1.0, 0, cfg.seed)
    base_metrics = runner(cfg, ds, baseline)
    specs = plan_runs(cfg)
    logger.info('Running %d %s runs on %d job(s)', len(specs), task, cfg.jobs)

    def run(spec: RunSpec) -> dict[str, Any]:
        return runner(cfg, ds, spec)

    with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
        results = list(
            tqdm(
                pool.map(run, specs),
                total=len(specs),
                desc=task,
                disable=not progress,
            )
        )

    rows = []
    for spec, metrics in [(baseline, base_metrics), *zip(specs, results, strict=True)]:
        row = {
            'task': task,
            'variant': spec.variant.value,
            'rate': spec.rate,
            'trial': spec.trial,
            'seed': spec.seed,
            'n': ds.n,
            'd': ds.d,
            **metrics,
            'config': {**echo, 'd_tilde': metrics['d_tilde']},
        }
        base_time = base_metrics['t_total']
        row['normalized_time'] = metrics['t_total'] / base_time if base_time > 0 else math.nan
        if spec is baseline:
            row['normalized_time'] = 1.0
        if task == 'kcenter':
            base_radius = base_metrics['radius']
            row['normalized_radius'] = (
                metrics['radius'] / base_radius if base_radius > 0 else math.nan
            )
        rows.append(row)

    out_dir = Path(cfg.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows_path = out_dir / f'{task}.jsonl'
    summary_path = out_dir / f'{task}_summary.csv'
    _write_rows(rows, rows_path)
    summary = summarize(rows)
    summary.to_csv(summary_path, index=False)
    logger.info('Wrote %d rows to %s', len(rows), rows_path)
    return ExperimentReport(rows, rows_path, summary_path, summary)
