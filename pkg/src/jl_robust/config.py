"""Experiment configuration: structured schema, Hydra composition and validation.

Defaults live in the packaged `configs/experiment.yaml`. A user YAML file replaces
it, and Hydra override strings (`seed=3`, `input.d=256`) adjust single fields.
"""

from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from hydra import compose, initialize_config_dir
from hydra.errors import HydraException
from omegaconf import OmegaConf
from omegaconf.errors import OmegaConfBaseException

from jl_robust.errors import ConfigValidationError
from jl_robust.jl import Variant
from jl_robust.log import get_logger

logger = get_logger(__name__)

CONFIG_DIR = Path(__file__).resolve().parent / 'configs'
CONFIG_NAME = 'experiment'

TASKS = ('reduce', 'svm1', 'svm2', 'kcenter', 'bench')
BENCH_TASKS = ('reduce', 'svm1', 'svm2', 'kcenter')
SOURCES = ('synth', 'csv', 'sparse')
OUTLIER_KINDS = ('none', 'label_flip', 'ball', 'halfspace')


# OmegaConf structured configs need typing.Optional, not X | None.
@dataclass
class InputConfig:
    source: str = 'synth'
    path: Optional[str] = None
    labeled: bool = False
    positive: Optional[int] = None
    negative: Optional[int] = None
    k: int = 2
    per_cluster: int = 100
    d: int = 512
    spread: float = 1.0
    separation: float = 20.0
    offset: float = 10.0


@dataclass
class OutlierConfig:
    kind: str = 'none'
    fraction: float = 0.1
    scale: float = 3.0


@dataclass
class ExperimentConfig:
    """A fully resolved experiment.

    `reduction_rates` lists fractions of d kept by the projection; `gamma2`
    defaults to `gamma`; `eps` drives k-center (JL distortion and MEB accuracy) and
    `eps0` the margin solvers.
    """

    task: str = 'svm1'
    bench_task: str = 'svm1'
    variant: str = 'gaussian'
    reduction_rates: list[float] = field(
        default_factory=lambda: [0.02, 0.04, 0.06, 0.08, 0.1]
    )
    gamma: float = 0.1
    gamma2: Optional[float] = None
    k: int = 2
    eps: float = 0.2
    eps0: float = 0.1
    c: float = 8.0
    seed: int = 0
    trials: int = 1
    jobs: int = 1
    test_fraction: float = 0.5
    output: str = 'results'
    input: InputConfig = field(default_factory=InputConfig)
    outliers: OutlierConfig = field(default_factory=OutlierConfig)

    @property
    def effective_gamma2(self) -> float:
        return self.gamma if self.gamma2 is None else self.gamma2

    @property
    def effective_task(self) -> str:
        return self.bench_task if self.task == 'bench' else self.task

    def to_dict(self) -> dict[str, Any]:
        return OmegaConf.to_container(OmegaConf.structured(self), resolve=True)  # type: ignore[return-value]


def _open_unit(value: float) -> bool:
    return 0.0 < value < 1.0


def _collect_problems(cfg: ExperimentConfig) -> dict[str, str]:
    problems: dict[str, str] = {}
    if cfg.task not in TASKS:
        problems['task'] = f'must be one of {TASKS}, got {cfg.task!r}'
    if cfg.bench_task not in BENCH_TASKS:
        problems['bench_task'] = f'must be one of {BENCH_TASKS}, got {cfg.bench_task!r}'
    if cfg.variant not in {v.value for v in Variant}:
        problems['variant'] = f'unknown projection variant {cfg.variant!r}'
    if not cfg.reduction_rates or any(not 0.0 < r <= 1.0 for r in cfg.reduction_rates):
        problems['reduction_rates'] = 'needs at least one rate, each in (0, 1]'
    if not 0.0 <= cfg.gamma < 1.0:
        problems['gamma'] = f'must lie in [0, 1), got {cfg.gamma}'
    if cfg.gamma2 is not None and not 0.0 <= cfg.gamma2 < 1.0:
        problems['gamma2'] = f'must lie in [0, 1), got {cfg.gamma2}'
    if not _open_unit(cfg.eps):
        problems['eps'] = f'must lie in (0, 1), got {cfg.eps}'
    if not _open_unit(cfg.eps0):
        problems['eps0'] = f'must lie in (0, 1), got {cfg.eps0}'
    if not _open_unit(cfg.test_fraction):
        problems['test_fraction'] = f'must lie in (0, 1), got {cfg.test_fraction}'
    if cfg.k < 1:
        problems['k'] = f'must be at least 1, got {cfg.k}'
    if cfg.c <= 0.0:
        problems['c'] = f'must be positive, got {cfg.c}'
    if cfg.seed < 0:
        problems['seed'] = f'must be non-negative, got {cfg.seed}'
    if cfg.trials < 1:
        problems['trials'] = f'must be at least 1, got {cfg.trials}'
    if cfg.jobs < 1:
        problems['jobs'] = f'must be at least 1, got {cfg.jobs}'

    src = cfg.input
    if src.source not in SOURCES:
        problems['input.source'] = f'must be one of {SOURCES}, got {src.source!r}'
    elif src.source != 'synth' and not src.path:
        problems['input.path'] = f'a {src.source} input needs a path'
    if src.source == 'synth' and min(src.k, src.per_cluster, src.d) < 1:
        problems['input'] = 'synthetic k, per_cluster and d must be at least 1'
    if (src.positive is None) != (src.negative is None):
        problems['input.positive'] = 'positive and negative classes go together'
    labeled = src.source in {'synth', 'sparse'} or src.labeled
    if cfg.effective_task == 'svm2' and not labeled:
        problems['input.labeled'] = 'two-class experiments need a labeled input'

    out = cfg.outliers
    if out.kind not in OUTLIER_KINDS:
        problems['outliers.kind'] = f'must be one of {OUTLIER_KINDS}, got {out.kind!r}'
    if not 0.0 <= out.fraction < 1.0:
        problems['outliers.fraction'] = f'must lie in [0, 1), got {out.fraction}'
    if out.kind == 'ball' and out.scale <= 1.0:
        problems['outliers.scale'] = f'ball outliers need scale > 1, got {out.scale}'
    if out.kind == 'label_flip' and not labeled:
        problems['outliers.kind'] = 'label flipping needs a labeled input'
    return problems


def validate_config(cfg: ExperimentConfig) -> ExperimentConfig:
    """Check cross-field rules.

    Raises:
        ConfigValidationError: Lists every offending field in `fields`.
    """
    problems = _collect_problems(cfg)
    if problems:
        details = '; '.join(f'{name}: {why}' for name, why in problems.items())
        msg = f'Invalid configuration ({details})'
        raise ConfigValidationError(msg, list(problems))
    return cfg


def load_config(
    config_file: str | Path | None = None, overrides: Sequence[str] = ()
) -> ExperimentConfig:
    """Compose the packaged (or given) YAML with overrides and validate the result.

    Args:
        config_file (str | Path | None, optional): A YAML file replacing the
            packaged defaults. Fields it omits keep their schema defaults.
        overrides (Sequence[str], optional): Hydra override strings such as
            `seed=3` or `input.d=256`.

    Raises:
        ConfigValidationError: Unknown keys, wrongly typed values or failed checks.

    Returns:
        ExperimentConfig: The validated configuration.
    """
    if config_file is None:
        config_dir, name = CONFIG_DIR, CONFIG_NAME
    else:
        path = Path(config_file).resolve()
        if not path.is_file():
            msg = f'Configuration file not found: {path}'
            raise ConfigValidationError(msg, ['config'])
        config_dir, name = path.parent, path.stem

    schema = OmegaConf.structured(ExperimentConfig)
    try:
        with initialize_config_dir(config_dir=str(config_dir), version_base=None):
            composed = compose(config_name=name, overrides=[_forced(o) for o in overrides])
        OmegaConf.set_struct(composed, False)
        cfg = OmegaConf.to_object(OmegaConf.merge(schema, composed))
    except HydraException as exc:
        msg = f'Invalid override: {exc}'
        raise ConfigValidationError(msg, [_override_key(o) for o in overrides]) from exc
    except OmegaConfBaseException as exc:
        key = getattr(exc, 'full_key', None) or 'config'
        msg = f'Invalid configuration value for {key}: {exc}'
        raise ConfigValidationError(msg, [str(key)]) from exc
    if not isinstance(cfg, ExperimentConfig):
        msg = 'Configuration did not resolve to an experiment'
        raise ConfigValidationError(msg, ['config'])
    logger.debug('Resolved configuration: %s', cfg)
    return validate_config(cfg)


def _override_key(override: str) -> str:
    return override.split('=', 1)[0].lstrip('+~')


def _forced(override: str) -> str:
    """`key=value` becomes `++key=value` so that keys a YAML file omits can be set."""
    return override if override.startswith(('+', '~')) else f'++{override}'
