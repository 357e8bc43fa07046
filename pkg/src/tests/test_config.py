import pytest

from jl_robust.config import ExperimentConfig, load_config, validate_config
from jl_robust.errors import ConfigValidationError


def test_packaged_defaults():
    cfg = load_config()
    assert isinstance(cfg, ExperimentConfig)
    assert cfg.task == 'svm1'
    assert cfg.reduction_rates == [0.02, 0.04, 0.06, 0.08, 0.1]
    assert cfg.input.d == 512
    assert cfg.outliers.kind == 'none'
    assert cfg.effective_gamma2 == cfg.gamma == 0.1


def test_overrides():
    cfg = load_config(
        overrides=['seed=3', 'input.d=64', 'reduction_rates=[0.5]', 'gamma2=0.2', 'task=bench']
    )
    assert (cfg.seed, cfg.input.d, cfg.reduction_rates) == (3, 64, [0.5])
    assert cfg.effective_gamma2 == 0.2
    assert cfg.effective_task == 'svm1'


def test_user_file_keeps_schema_defaults(tmp_path):
    path = tmp_path / 'mine.yaml'
    path.write_text('task: kcenter\nk: 3\ninput:\n  d: 32\n', encoding='utf-8')
    cfg = load_config(path, ['eps=0.3'])
    assert (cfg.task, cfg.k, cfg.input.d, cfg.eps) == ('kcenter', 3, 32, 0.3)
    assert cfg.input.per_cluster == 100


def test_missing_file(tmp_path):
    with pytest.raises(ConfigValidationError) as excinfo:
        load_config(tmp_path / 'absent.yaml')
    assert excinfo.value.fields == ['config']


def test_unknown_key():
    with pytest.raises(ConfigValidationError) as excinfo:
        load_config(overrides=['nonsense=1'])
    assert excinfo.value.fields == ['nonsense']


def test_wrong_type():
    with pytest.raises(ConfigValidationError) as excinfo:
        load_config(overrides=['gamma=abc'])
    assert 'gamma' in excinfo.value.fields


def test_every_offending_field_is_listed():
    with pytest.raises(ConfigValidationError) as excinfo:
        load_config(overrides=['gamma=1.5', 'eps=0', 'k=0', 'variant=sketchy'])
    assert set(excinfo.value.fields) == {'gamma', 'eps', 'k', 'variant'}
    assert 'gamma' in str(excinfo.value)


@pytest.mark.parametrize(
    ('overrides', 'field'),
    [
        (['task=svm2', 'input.source=csv', "input.path='x.csv'"], 'input.labeled'),
        (['input.source=csv', "input.path='x.csv'", 'outliers.kind=label_flip'], 'outliers.kind'),
        (['input.source=sparse'], 'input.path'),
        (['input.positive=1'], 'input.positive'),
        (['outliers.kind=ball', 'outliers.scale=0.5'], 'outliers.scale'),
        (['reduction_rates=[]'], 'reduction_rates'),
        (['trials=0'], 'trials'),
    ],
)
def test_cross_field_rules(overrides, field):
    with pytest.raises(ConfigValidationError) as excinfo:
        load_config(overrides=overrides)
    assert field in excinfo.value.fields


def test_validate_config_accepts_defaults():
    cfg = ExperimentConfig()
    assert validate_config(cfg) is cfg
    assert cfg.to_dict()['input']['source'] == 'synth'
