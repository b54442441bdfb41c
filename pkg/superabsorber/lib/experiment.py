from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import TYPE_CHECKING, Any, ClassVar, Dict, List, Optional, Union

from .config import (
    ChainConfig,
    DefaultsConfig,
    DictConfig,
    ExperimentConfig,
    JsonConfig,
    TypedChainConfig,
    check_unknown_keys,
)
from .errors import ConfigError
from .output import OutputWriter

if TYPE_CHECKING:
    from .runner import Runner

logger = logging.getLogger(__name__)

SEED_MAX = 2**64


class BaseExperiment:
    @cached_property
    def name(self) -> str:
        return self.__class__.__name__

    @classmethod
    def _logger(cls) -> logging.Logger:
        cls.logger = getattr(cls, 'logger', None) or logging.getLogger(cls.__module__)
        return cls.logger

    @classmethod
    def debug(cls, msg: str, *args: Any, **kwargs: Any) -> None:
        cls._logger().debug(msg, *args, **kwargs)

    @classmethod
    def info(cls, msg: str, *args: Any, **kwargs: Any) -> None:
        cls._logger().info(msg, *args, **kwargs)

    @classmethod
    def warning(cls, msg: str, *args: Any, **kwargs: Any) -> None:
        cls._logger().warning(msg, *args, **kwargs)

    @classmethod
    def error(cls, msg: str, *args: Any, **kwargs: Any) -> None:
        cls._logger().error(msg, *args, **kwargs)

    @classmethod
    def exception(cls, msg: Union[str, BaseException], *args: Any, **kwargs: Any) -> None:
        cls._logger().exception(msg, *args, **kwargs)


class ConfigCheck(int, Enum):
    NO = False
    YES = True
    RAISE = 2

    def __bool__(self) -> bool:
        return self.value in (self.YES, self.RAISE)


@dataclass(unsafe_hash=True)
class Experiment(BaseExperiment, ABC):
    """one subcommand: an inner `Config` of annotated keys, `validate` then `run`

    Settings resolve from the command line, the json run config, the
    environment (SUPERABSORBER__<COMMAND>__<KEY>) and the `Config` defaults,
    first hit wins.
    """

    runner: Runner
    command: ClassVar[str] = ''
    check_config: ClassVar[ConfigCheck] = ConfigCheck.RAISE

    class Config:
        pass

    @cached_property
    def json_config(self) -> JsonConfig:
        return JsonConfig(self.runner.config_path)

    @cached_property
    def config(self) -> ChainConfig:
        return ChainConfig(
            (
                DictConfig(self._overrides),
                self.json_config,
                ExperimentConfig(self.__class__, self.runner.config_prefix),
                DefaultsConfig(self.__class__),
            )
        )

    @cached_property
    def config_safe(self) -> TypedChainConfig:
        return TypedChainConfig(configs=self.config.configs, types=self.Config)

    @property
    def _overrides(self) -> Dict[str, Any]:
        declared = self.Config.__annotations__
        return {k: v for k, v in self.runner.overrides.items() if k in declared and v is not None}

    @cached_property
    def settings(self) -> Dict[str, Any]:
        """every declared key with its value, checked against the json run config"""
        check_unknown_keys(self.json_config.json, self.Config.__annotations__, self.command)

        tombstone = object()
        missing = []
        for key in self.Config.__annotations__:
            if self.config_safe.get(key, tombstone) is not tombstone:
                self.debug(f'[  OK  ] {key} is present')
            elif self.check_config is ConfigCheck.YES:
                self.warning(f'[ WARN ] {key} is missing')
            elif self.check_config is ConfigCheck.RAISE:
                self.error(f'[ FAIL ] {key} is missing')
                missing.append(key)
        if missing:
            raise ConfigError(','.join(missing), 'is required but missing')

        settings = self.config_safe.resolved()
        if (seed := settings.get('seed')) is not None and not 0 <= seed < SEED_MAX:
            raise ConfigError('seed', f'must be an unsigned 64-bit integer, got {seed}')
        return settings

    @property
    def seed(self) -> Optional[int]:
        return self.settings.get('seed')

    def validate(self) -> None:
        """resolve settings and build every domain object, before any output exists"""
        self.settings
        self.check()

    def check(self) -> None:
        """raise a ValidationError for settings the physics rejects"""

    def run(self, out_dir: Path) -> List[Path]:
        writer = OutputWriter(out_dir, self.command, self.settings, self.seed)
        self.info(f'running {self.command}')
        self.execute(writer)
        return writer.written

    @abstractmethod
    def execute(self, writer: OutputWriter) -> None:
        """compute, then write through `writer`"""
