from __future__ import annotations

import json
from pathlib import Path
from typing import Dict, List, Optional

import pytest

from superabsorber.lib.config import (
    ChainConfig,
    DefaultsConfig,
    DictConfig,
    EnvConfig,
    ExperimentConfig,
    JsonConfig,
    TypedChainConfig,
    check_unknown_keys,
)
from superabsorber.lib.errors import ConfigError
from superabsorber.lib.experiment import Experiment
from superabsorber.lib.runner import Runner


class Echo(Experiment):
    """a throwaway experiment with one key of each kind"""

    command = 'echo'

    class Config:
        n: int = 3
        rate: float = 0.5
        alpha: complex = 0.0
        flag: bool = False
        ratios: List[float] = (1.0,)
        grid: Dict[str, float] = {'extent': 6.0}
        t_max: Optional[float] = None
        seed: int = 0
        tol: float = 1e-8

    def execute(self, writer) -> None:
        writer.write_table('echo.csv', ['n'], [(self.settings['n'],)])


def write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj))
    return path


def echo(tmp_path: Path, config: Optional[dict] = None, **overrides) -> Echo:
    path = write_json(tmp_path / 'run.json', config) if config is not None else None
    runner = Runner(config_path=path, overrides=overrides)
    runner.register(Echo)
    return runner.experiment('echo')


def test_defaults_are_cast_to_their_annotation(tmp_path):
    settings = echo(tmp_path).settings
    assert settings['n'] == 3
    assert settings['ratios'] == [1.0]
    assert settings['alpha'] == 0j
    assert settings['grid'] == {'extent': 6.0}
    assert settings['t_max'] is None


def test_json_values_are_typed(tmp_path):
    settings = echo(
        tmp_path,
        {'n': 7, 'rate': 2, 'alpha': [0.2, 0.1], 'flag': 'yes', 'ratios': [7, 1, 0.5], 't_max': 12},
    ).settings
    assert settings['n'] == 7
    assert settings['rate'] == 2.0 and isinstance(settings['rate'], float)
    assert settings['alpha'] == 0.2 + 0.1j
    assert settings['flag'] is True
    assert settings['ratios'] == [7.0, 1.0, 0.5]
    assert settings['t_max'] == 12.0


@pytest.mark.parametrize('value', ['0.2+0.1j', '0.2 + 0.1j', [0.2, 0.1]])
def test_complex_spellings(tmp_path, value):
    assert echo(tmp_path, {'alpha': value}).settings['alpha'] == 0.2 + 0.1j


@pytest.mark.parametrize('key, value', [('n', 1.5), ('n', True), ('flag', 'maybe'), ('ratios', 3)])
def test_bad_values_name_the_key(tmp_path, key, value):
    with pytest.raises(ConfigError, match=rf'\[{key}\]'):
        echo(tmp_path, {key: value}).settings


def test_environment_sits_between_json_and_defaults(tmp_path, monkeypatch):
    monkeypatch.setenv('SUPERABSORBER__ECHO__N', '11')
    monkeypatch.setenv('SUPERABSORBER__ECHO__RATE', '4.5')
    monkeypatch.setenv('SUPERABSORBER__ECHO__RATIOS', '1, 2,3')
    settings = echo(tmp_path, {'rate': 0.25}).settings
    assert settings['n'] == 11
    assert settings['rate'] == 0.25
    assert settings['ratios'] == [1.0, 2.0, 3.0]


def test_flags_override_everything(tmp_path, monkeypatch):
    monkeypatch.setenv('SUPERABSORBER__ECHO__SEED', '5')
    experiment = echo(tmp_path, {'seed': 3, 'tol': 1e-6}, seed=9, tol=None, undeclared=1)
    assert experiment.settings['seed'] == 9
    assert experiment.settings['tol'] == 1e-6
    assert experiment.seed == 9


def test_prefix_can_be_renamed(tmp_path, monkeypatch):
    monkeypatch.setenv('SUPERABSORBER_CONFIG_PREFIX', 'LAB')
    monkeypatch.setenv('LAB__ECHO__N', '4')
    assert echo(tmp_path).settings['n'] == 4


def test_unknown_keys_are_errors(tmp_path):
    with pytest.raises(ConfigError, match='unknown config keys: colour, n_atom'):
        echo(tmp_path, {'n_atom': 3, 'colour': 'red'}).settings


@pytest.mark.parametrize('seed', [-1, 2**64])
def test_seed_must_fit_64_bits(tmp_path, seed):
    with pytest.raises(ConfigError, match='seed'):
        echo(tmp_path, {'seed': seed}).settings


def test_missing_json_file(tmp_path):
    with pytest.raises(ConfigError, match='does not exist'):
        JsonConfig(tmp_path / 'nope.json').json


def test_malformed_json_reports_the_position(tmp_path):
    path = tmp_path / 'bad.json'
    path.write_text('{\n  "n": 3,\n}')
    with pytest.raises(ConfigError, match='line 3'):
        JsonConfig(path).json


def test_json_must_be_an_object(tmp_path):
    with pytest.raises(ConfigError, match='object'):
        JsonConfig(write_json(tmp_path / 'list.json', [1, 2])).json


def test_no_path_is_an_empty_config():
    config = JsonConfig(None)
    assert config.json == {}
    assert config.get('n', 3) == 3


def test_env_config_overrides_and_keys(monkeypatch):
    monkeypatch.setenv('SUPERABSORBER__THREADS', '4')
    config = EnvConfig()
    assert config['threads'] == '4'
    config['threads'] = '2'
    assert config['threads'] == '2'
    assert 'SUPERABSORBER__THREADS' in config.keys()
    with pytest.raises(KeyError):
        config['missing']


def test_chain_config_first_hit_wins():
    chain = ChainConfig((DictConfig({'a': 1}), DictConfig({'a': 2, 'b': 3})))
    assert chain['a'] == 1
    assert chain['b'] == 3
    assert chain.get('c', 'default') == 'default'
    with pytest.raises(KeyError):
        chain['c']


def test_typed_chain_rejects_undeclared_keys():
    class Types:
        n: int

    typed = TypedChainConfig(configs=(DictConfig({'n': '5', 'm': 1}),), types=Types)
    assert typed['n'] == 5
    with pytest.raises(ConfigError, match='must be declared'):
        typed['m']


def test_experiment_config_reads_scoped_environment(monkeypatch):
    monkeypatch.setenv('SUPERABSORBER__ECHO__RATE', '1.5')
    assert ExperimentConfig(Echo)['rate'] == '1.5'
    assert DefaultsConfig(Echo)['rate'] == 0.5
    with pytest.raises(KeyError):
        DefaultsConfig(Echo)['missing']


def test_check_unknown_keys():
    check_unknown_keys({'a': 1}, ['a', 'b'], 'here')
    with pytest.raises(ConfigError, match=r'\[here\].*c'):
        check_unknown_keys({'a': 1, 'c': 2}, ['a', 'b'], 'here')


@pytest.mark.parametrize('value', ['0', '-2', 'many'])
def test_thread_count_validation(monkeypatch, value):
    monkeypatch.setenv('SUPERABSORBER__THREADS', value)
    with pytest.raises(ConfigError, match='THREADS'):
        Runner().threads


def test_thread_count_defaults_to_one():
    assert Runner().threads == 1
