"""CLI module."""

import sys
from collections.abc import Callable
from enum import Enum
from typing import Annotated, Optional

import click
import typer
from rich.console import Console
from rich.table import Table

from jl_robust.config import load_config
from jl_robust.errors import PIPELINE_ERRORS, ConfigValidationError, DatasetParseError
from jl_robust.experiment import ExperimentReport, run_experiment
from jl_robust.jl import Variant
from jl_robust.log import configure_logging

app = typer.Typer(pretty_exceptions_show_locals=False)

EXIT_INVALID = 1
EXIT_PIPELINE = 2

COMMANDS = {
    'reduce': 'Measure the pairwise distortion of the projection at each reduction rate.',
    'svm1': 'One-class margin with outliers through a random projection.',
    'svm2': 'Two-class margin with outliers through a random projection.',
    'kcenter': 'k-center clustering with outliers through a random projection.',
    'bench': 'Compare the gaussian, binary and fast projections on one task.',
}


class InputSource(str, Enum):
    synth = 'synth'
    csv = 'csv'
    sparse = 'sparse'


class OutlierKind(str, Enum):
    none = 'none'
    label_flip = 'label_flip'
    ball = 'ball'
    halfspace = 'halfspace'


class BenchTask(str, Enum):
    reduce = 'reduce'
    svm1 = 'svm1'
    svm2 = 'svm2'
    kcenter = 'kcenter'


def autocomplete_variant() -> list[str]:
    """Auto-completion function for projection variants.

    Returns:
        list[str]: The available projection variants.
    """
    return [v.value for v in Variant]


def autocomplete_source() -> list[str]:
    return [s.value for s in InputSource]


def autocomplete_outliers() -> list[str]:
    return [o.value for o in OutlierKind]


def autocomplete_task() -> list[str]:
    return [t.value for t in BenchTask]


def _quoted(value: str) -> str:
    return "'" + value.replace("'", "\\'") + "'"


def _rates_override(rates: str) -> str:
    try:
        values = [float(r) for r in rates.split(',') if r.strip()]
    except ValueError:
        msg = f'--rates must be a comma-separated list of numbers, got {rates!r}'
        raise ConfigValidationError(msg, ['reduction_rates']) from None
    return 'reduction_rates=[' + ','.join(repr(v) for v in values) + ']'


def build_overrides(task: str, flags: dict[str, object]) -> list[str]:
    """Translate command-line flags into Hydra override strings.

    Flags left at their "unset" value ('' or None) do not override anything.

    >>> build_overrides('svm1', {'gamma': 0.2, 'variant': '', 'rates': '0.02,0.1'})
    ['task=svm1', 'gamma=0.2', 'reduction_rates=[0.02,0.1]']
    """
    keys = {
        'input_path': 'input.path',
        'source': 'input.source',
        'labeled': 'input.labeled',
        'variant': 'variant',
        'bench_task': 'bench_task',
        'gamma': 'gamma',
        'gamma2': 'gamma2',
        'k': 'k',
        'eps': 'eps',
        'eps0': 'eps0',
        'seed': 'seed',
        'trials': 'trials',
        'jobs': 'jobs',
        'outliers': 'outliers.kind',
        'outlier_fraction': 'outliers.fraction',
        'output': 'output',
    }
    overrides = [f'task={task}']
    for flag, value in flags.items():
        if value is None or value == '':
            continue
        if isinstance(value, Enum):
            value = value.value  # noqa: PLW2901
        if flag == 'rates':
            overrides.append(_rates_override(str(value)))
        elif flag in {'input_path', 'output'}:
            overrides.append(f'{keys[flag]}={_quoted(str(value))}')
        elif isinstance(value, bool):
            overrides.append(f'{keys[flag]}={str(value).lower()}')
        else:
            overrides.append(f'{keys[flag]}={value}')
    return overrides


def show_summary(report: ExperimentReport) -> None:
    """Print the per-(variant, rate) means as a rich table."""
    table = Table(title=f'{report.rows[0]["task"]} summary')
    for column in report.summary.columns:
        table.add_column(str(column), justify='left' if column == 'variant' else 'right')
    for record in report.summary.itertuples(index=False):
        table.add_row(
            *(f'{value:.4g}' if isinstance(value, float) else str(value) for value in record)
        )
    Console().print(table)


def _run(task: str, config: str, overrides: list[str], verbose: bool) -> None:  # noqa: FBT001
    configure_logging('DEBUG' if verbose else None)
    try:
        cfg = load_config(config or None, overrides)
        typer.echo(f'Running {task} on {cfg.input.source} input (seed {cfg.seed})...')
        report = run_experiment(cfg)
    except (ConfigValidationError, DatasetParseError, OSError) as exc:
        typer.echo(typer.style(f'Error: {exc}', fg=typer.colors.RED), err=True)
        raise typer.Exit(EXIT_INVALID) from exc
    except PIPELINE_ERRORS as exc:
        typer.echo(typer.style(f'Pipeline failure: {exc}', fg=typer.colors.RED), err=True)
        raise typer.Exit(EXIT_PIPELINE) from exc

    show_summary(report)
    typer.echo(f'Rows written to {report.rows_path}')
    typer.echo(f'Summary written to {report.summary_path}')


def _make_command(task: str) -> Callable[..., None]:
    def command(
        config: Annotated[
            str, typer.Option('--config', help='YAML file replacing the packaged defaults.')
        ] = '',
        overrides: Annotated[
            Optional[list[str]],
            typer.Option('--set', '-s', help='Hydra override, e.g. input.d=256. Repeatable.'),
        ] = None,
        input_path: Annotated[
            str, typer.Option('--input', help='Path of a CSV or sparse text dataset.')
        ] = '',
        source: Annotated[
            Optional[InputSource],
            typer.Option(
                help='Input kind: "synth", "csv" or "sparse".',
                autocompletion=autocomplete_source,
            ),
        ] = None,
        labeled: Annotated[
            Optional[bool],
            typer.Option('--labeled/--unlabeled', help='Whether CSV rows end with a label.'),
        ] = None,
        variant: Annotated[
            Optional[Variant],
            typer.Option(
                help='Projection: "gaussian", "binary", "fast", "orthonormal" or "none".',
                autocompletion=autocomplete_variant,
            ),
        ] = None,
        bench_task: Annotated[
            Optional[BenchTask],
            typer.Option(
                help='Task compared by the bench command.',
                autocompletion=autocomplete_task,
            ),
        ] = None,
        rates: Annotated[
            str, typer.Option(help='Comma-separated reduction rates, e.g. 0.02,0.1.')
        ] = '',
        gamma: Annotated[
            Optional[float], typer.Option(help='Outlier fraction (class 1).')
        ] = None,
        gamma2: Annotated[
            Optional[float], typer.Option(help='Outlier fraction of class 2.')
        ] = None,
        k: Annotated[Optional[int], typer.Option(help='Number of centers.')] = None,
        eps: Annotated[
            Optional[float], typer.Option(help='k-center accuracy and JL distortion.')
        ] = None,
        eps0: Annotated[
            Optional[float], typer.Option(help='Margin solver accuracy.')
        ] = None,
        seed: Annotated[
            Optional[int],
            typer.Option(
                help=(
                    'Base random seed; trial t uses seed + t. Defaults to the config '
                    'value (0). Pass it explicitly for reproducible fixture runs.'
                )
            ),
        ] = None,
        trials: Annotated[
            Optional[int], typer.Option(help='Trials per rate.')
        ] = None,
        outliers: Annotated[
            Optional[OutlierKind],
            typer.Option(
                help='Injected outliers: "none", "label_flip", "ball" or "halfspace".',
                autocompletion=autocomplete_outliers,
            ),
        ] = None,
        outlier_fraction: Annotated[
            Optional[float], typer.Option(help='Fraction of injected outliers.')
        ] = None,
        output: Annotated[str, typer.Option(help='Report directory.')] = '',
        jobs: Annotated[
            Optional[int], typer.Option(help='Parallel trials.')
        ] = None,
        verbose: Annotated[  # noqa: FBT002
            bool, typer.Option('--verbose', '-v', help='Debug logging.')
        ] = False,
    ) -> None:
        flags: dict[str, object] = {
            'input_path': input_path,
            'source': source,
            'labeled': labeled,
            'variant': variant,
            'bench_task': bench_task,
            'rates': rates,
            'gamma': gamma,
            'gamma2': gamma2,
            'k': k,
            'eps': eps,
            'eps0': eps0,
            'seed': seed,
            'trials': trials,
            'outliers': outliers,
            'outlier_fraction': outlier_fraction,
            'output': output,
            'jobs': jobs,
        }
        try:
            resolved = build_overrides(task, flags) + list(overrides or [])
        except ConfigValidationError as exc:
            typer.echo(typer.style(f'Error: {exc}', fg=typer.colors.RED), err=True)
            raise typer.Exit(EXIT_INVALID) from exc
        _run(task, config, resolved, verbose)

    command.__doc__ = COMMANDS[task]
    command.__name__ = task
    return command


for _task in COMMANDS:
    app.command(name=_task)(_make_command(_task))


def main() -> None:
    """Entry point of the `jlrobust` script.

    Usage errors, such as an unknown `--variant`, exit with code 1 like any other
    invalid configuration.
    """
    try:
        code = typer.main.get_command(app).main(standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        sys.exit(EXIT_INVALID)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except click.Abort:
        typer.echo('Aborted!', err=True)
        sys.exit(EXIT_INVALID)
    sys.exit(code or 0)


if __name__ == '__main__':
    main()
