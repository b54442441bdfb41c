from __future__ import annotations

import importlib
import importlib.util
import pkgutil
from dataclasses import dataclass, field
from functools import cached_property
from logging import Logger, getLogger
from pathlib import Path
from types import ModuleType
from typing import Any, Dict, List, Optional, Type, Union

from .config import EnvConfig, _as_int
from .errors import ConfigError, ValidationError
from .experiment import Experiment

logger = getLogger(__name__)


@dataclass
class Runner:
    """discovers experiments in the installed apps and dispatches one by command"""

    config_path: Optional[Path] = None
    overrides: Dict[str, Any] = field(default_factory=dict)
    config_prefix: Optional[str] = None
    experiments: Dict[str, Type[Experiment]] = field(default_factory=dict)

    @cached_property
    def config(self) -> EnvConfig:
        """runner wide settings, SUPERABSORBER__<KEY>"""
        return EnvConfig(self.config_prefix)

    @property
    def threads(self) -> int:
        """worker count for ensembles and sweeps, never changes results"""
        value = self.config.get('THREADS', 1)
        try:
            threads = _as_int(value)
        except ValueError as e:
            raise ConfigError('THREADS', f'{value!r} is not an integer') from e
        if threads < 1:
            raise ConfigError('THREADS', f'must be >= 1, got {threads}')
        return threads

    def discover_experiments(self, *paths_or_mods: Union[Path, str]) -> None:
        """register every experiment class under the given modules, packages or paths"""
        mods: List[ModuleType] = []

        for path_or_mod in paths_or_mods:
            try:
                mod = importlib.import_module(str(path_or_mod))
            except ImportError:
                path = Path(path_or_mod)
                logger.info(f'loading experiments from path: {path}')

                if not path.exists():
                    raise ValidationError(f"app path '{path}' does not exist")

                files = [path] if path.is_file() else sorted(path.glob('*.py'))
                for file in files:
                    spec = importlib.util.spec_from_file_location(file.stem, file)
                    if spec and spec.loader:
                        mod = importlib.util.module_from_spec(spec)
                        spec.loader.exec_module(mod)
                        mods.append(mod)
            else:
                mods.append(mod)
                if hasattr(mod, '__path__'):
                    for info in pkgutil.iter_modules(mod.__path__):
                        mods.append(importlib.import_module(f'{mod.__name__}.{info.name}'))

        for mod in mods:
            logger.debug(f'loading experiments from {mod.__name__} at {mod.__file__}')
            for name in dir(mod):
                self.discover_experiment(name, mod)

    def discover_experiment(self, name: str, mod: ModuleType) -> None:
        """register `name` from `mod` when it is an experiment defined there"""
        loadable = getattr(mod, name, None)
        if (
            name.startswith('_')
            or isinstance(loadable, (ModuleType, Logger))
            # ignore classes imported from elsewhere
            or (hasattr(loadable, '__module__') and loadable.__module__ != mod.__name__)
        ):
            pass
        elif isinstance(loadable, type) and issubclass(loadable, Experiment) and loadable.command:
            self.register(loadable)

    def register(self, experiment: Type[Experiment]) -> None:
        if (existing := self.experiments.get(experiment.command)) not in (None, experiment):
            raise ValidationError(
                f"command '{experiment.command}' is claimed by both "
                f'{existing.__qualname__} and {experiment.__qualname__}'
            )
        logger.debug(f'- discovered experiment {experiment.__name__} as `{experiment.command}`')
        self.experiments[experiment.command] = experiment

    def experiment(self, command: str) -> Experiment:
        if (cls := self.experiments.get(command)) is None:
            known = ', '.join(sorted(self.experiments))
            raise ValidationError(f"unknown command '{command}', expected one of {known}")
        return cls(self)

    def run(self, command: str, out_dir: Path) -> List[Path]:
        """validate first, then create the output directory and run"""
        experiment = self.experiment(command)
        experiment.validate()

        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        return experiment.run(out_dir)
