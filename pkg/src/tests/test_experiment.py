import json
import math

import pandas as pd
import pytest

from jl_robust.config import load_config
from jl_robust.experiment import build_dataset, plan_runs, run_experiment, summarize
from jl_robust.jl import Variant


def make_config(tmp_path, *overrides):
    return load_config(
        overrides=[
            'input.d=16',
            'input.per_cluster=10',
            'reduction_rates=[0.5]',
            f"output='{tmp_path}'",
            *overrides,
        ]
    )


def read_rows(path):
    return [json.loads(line) for line in path.read_text(encoding='utf-8').splitlines()]


def test_reduce_rows_and_baseline(tmp_path):
    cfg = make_config(tmp_path, 'task=reduce', 'reduction_rates=[0.25,0.5]', 'trials=2')
    report = run_experiment(cfg, progress=False)

    assert len(report.rows) == 1 + 2 * 2
    baseline = report.rows[0]
    assert baseline['variant'] == 'none'
    assert baseline['normalized_time'] == 1.0
    assert baseline['d_tilde'] == 16
    assert [row['d_tilde'] for row in report.rows[1:]] == [4, 4, 8, 8]
    assert [row['seed'] for row in report.rows[1:]] == [0, 1, 0, 1]
    for row in report.rows:
        assert row['config']['d_tilde'] == row['d_tilde']
        assert row['config']['task'] == 'reduce'

    rows = read_rows(report.rows_path)
    assert len(rows) == len(report.rows)
    assert list(rows[0]) == sorted(rows[0])

    summary = pd.read_csv(report.summary_path)
    assert summary['variant'].tolist() == ['none', 'gaussian', 'gaussian']
    assert summary['rate'].tolist() == [1.0, 0.25, 0.5]


def test_reduce_is_deterministic_apart_from_timing(tmp_path):
    # the echoed config differs in its output path
    ignored = {'t_jl', 't_blackbox', 't_recover', 't_total', 'normalized_time', 'config'}

    def strip(rows):
        return [{k: v for k, v in row.items() if k not in ignored} for row in rows]

    first = run_experiment(make_config(tmp_path / 'a', 'task=reduce'), progress=False)
    second = run_experiment(make_config(tmp_path / 'b', 'task=reduce'), progress=False)
    assert strip(read_rows(first.rows_path)) == strip(read_rows(second.rows_path))


def test_svm1_with_halfspace_outliers(tmp_path):
    cfg = make_config(
        tmp_path,
        'task=svm1',
        'input.k=1',
        'input.per_cluster=20',
        'outliers.kind=halfspace',
        'outliers.fraction=0.1',
    )
    report = run_experiment(cfg, progress=False)

    assert len(report.rows) == 2
    for row in report.rows:
        assert row['n'] == 22
        assert {'width', 'separated', 'converged', 'blackbox_width', 't_total'} <= set(row)
        assert row['converged']
        assert 0.0 <= row['outlier_recall'] <= 1.0
    assert report.rows[0]['separated']
    assert report.rows[0]['width'] > 0.0


def test_nan_recall_is_written_as_null(tmp_path):
    cfg = make_config(tmp_path, 'task=svm1', 'input.k=1')
    report = run_experiment(cfg, progress=False)

    assert math.isnan(report.rows[0]['outlier_recall'])
    text = report.rows_path.read_text(encoding='utf-8')
    assert 'NaN' not in text
    assert all(row['outlier_recall'] is None for row in read_rows(report.rows_path))


def test_svm2_with_label_flips(tmp_path):
    cfg = make_config(
        tmp_path,
        'task=svm2',
        'input.per_cluster=20',
        'outliers.kind=label_flip',
        'outliers.fraction=0.04',
        'gamma=0.2',
    )
    report = run_experiment(cfg, progress=False)

    baseline = report.rows[0]
    assert baseline['n'] == 40
    assert baseline['separated']
    assert baseline['test_accuracy'] >= 0.9
    assert report.rows[1]['d_tilde'] == 8


def test_kcenter_with_ball_outliers(tmp_path):
    cfg = make_config(
        tmp_path,
        'task=kcenter',
        'input.per_cluster=15',
        'outliers.kind=ball',
        'outliers.fraction=0.1',
        'gamma=0.1',
    )
    report = run_experiment(cfg, progress=False)

    baseline = report.rows[0]
    assert baseline['n'] == 33
    assert baseline['normalized_radius'] == 1.0
    assert baseline['reassigned_radius'] <= baseline['radius'] + 1e-9
    assert report.rows[1]['normalized_radius'] > 0.0
    assert 'normalized_radius' in report.summary.columns


def test_bench_runs_every_jl_variant(tmp_path):
    cfg = make_config(tmp_path, 'task=bench', 'bench_task=reduce')
    report = run_experiment(cfg, progress=False)

    assert [row['variant'] for row in report.rows] == ['none', 'gaussian', 'binary', 'fast']
    assert all(row['task'] == 'reduce' for row in report.rows)
    assert report.rows_path.name == 'reduce.jsonl'


def test_parallel_jobs_keep_report_order(tmp_path):
    cfg = make_config(tmp_path, 'task=reduce', 'reduction_rates=[0.25,0.5,1.0]', 'jobs=2')
    report = run_experiment(cfg, progress=False)
    assert [row['rate'] for row in report.rows] == [1.0, 0.25, 0.5, 1.0]


def test_plan_runs(tmp_path):
    assert plan_runs(make_config(tmp_path, 'variant=none')) == []
    specs = plan_runs(make_config(tmp_path, 'variant=binary', 'trials=3', 'seed=5'))
    assert [spec.seed for spec in specs] == [5, 6, 7]
    assert {spec.variant for spec in specs} == {Variant.binary}


def test_variant_none_emits_only_the_baseline(tmp_path):
    report = run_experiment(make_config(tmp_path, 'task=reduce', 'variant=none'), progress=False)
    assert len(report.rows) == 1
    assert report.rows[0]['normalized_time'] == 1.0


def test_build_dataset_from_csv(tmp_path):
    data = tmp_path / 'points.csv'
    data.write_text('1,2\n3,4\n5,6\n', encoding='utf-8')
    cfg = make_config(tmp_path, 'input.source=csv', f"input.path='{data}'")
    ds = build_dataset(cfg)
    assert (ds.n, ds.d) == (3, 2)


def test_summarize_means_per_variant_and_rate():
    rows = [
        {'variant': 'none', 'rate': 1.0, 'trial': 0, 'seed': 0, 'width': 2.0, 'config': {}},
        {'variant': 'fast', 'rate': 0.5, 'trial': 0, 'seed': 0, 'width': 1.0, 'config': {}},
        {'variant': 'fast', 'rate': 0.5, 'trial': 1, 'seed': 1, 'width': 3.0, 'config': {}},
    ]
    summary = summarize(rows)
    assert summary['width'].tolist() == pytest.approx([2.0, 2.0])
    assert 'trial' not in summary.columns


@pytest.mark.slow
@pytest.mark.parametrize(
    'overrides',
    [
        ('task=svm1', 'input.k=1', 'input.per_cluster=2000'),
        ('task=kcenter', 'input.k=2', 'input.per_cluster=1000', 'k=2'),
    ],
)
def test_reduction_beats_the_full_dimension(tmp_path, overrides):
    cfg = load_config(
        overrides=[
            'input.d=2048',
            'reduction_rates=[0.1]',
            f"output='{tmp_path}'",
            *overrides,
        ]
    )
    report = run_experiment(cfg, progress=False)
    baseline, reduced = report.rows
    assert baseline['n'] == reduced['n'] == 2000
    assert reduced['d_tilde'] == 205
    assert reduced['normalized_time'] < 1.0
