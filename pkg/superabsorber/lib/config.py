from __future__ import annotations

import json
import logging
import re
import typing
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import cached_property
from logging.config import dictConfig
from os import environ
from pathlib import Path
from typing import (
    Any,
    Callable,
    ChainMap,
    ClassVar,
    Dict,
    Iterable,
    Mapping,
    Optional,
    Sequence,
    Set,
    Type,
    Union,
)

from superabsorber import constants

from .errors import ConfigError

logger = logging.getLogger(__name__)


@dataclass
class Config(ABC):
    logging: ClassVar[bool] = True

    def __post_init__(self) -> None:
        pass

    def _seen_key(self, key: str, seen: Set[str] = set()) -> bool:
        if not (seen_key := key in seen):
            seen.add(key)
        return seen_key

    def _log_miss_msg(self, key: str) -> None:
        if self.logging and not self._seen_key(key):
            logger.debug(f'config miss: {key}')

    def _log_hit_msg(self, key: str) -> None:
        if self.logging and not self._seen_key(key):
            logger.debug(f'config hit: {key}')

    def _log_default_msg(self, key: str) -> None:
        if self.logging and not self._seen_key(key):
            logger.debug(f'config default: {key}')

    def __getitem__(self, key: str) -> Any:
        key = self._key(key)
        try:
            value = self._getitem(key)
        except KeyError:
            self._log_miss_msg(key)
            raise
        else:
            self._log_hit_msg(key)
            return value

    def get(self, key: str, default: Any = None) -> Any:
        try:
            key = self._key(key)
            return self[key]
        except KeyError:
            self._log_default_msg(key)
            return default

    def keys(self) -> Iterable[str]:
        return self._keys()

    def _key(self, key: str) -> str:
        return key

    @abstractmethod
    def _getitem(self, key: str) -> Any:
        """called by __getitem__"""

    def _keys(self) -> Iterable[str]:
        """called by keys"""
        raise RuntimeError(f'keys not supported for {self.__class__.__name__}')


class KeyT(str):
    pass


class PrefixConfig(Config, ABC):
    default_prefix: ClassVar[str] = constants.SUPERABSORBER_CONFIG_PREFIX_DEFAULT.value
    default_envvar: ClassVar[str] = constants.SUPERABSORBER_CONFIG_PREFIX_ENVVAR.value

    def __init__(self, prefix: Optional[str] = None) -> None:
        self.set_prefix(prefix)
        self.__post_init__()

    @staticmethod
    def _join_prefix(*s: str) -> KeyT:
        return KeyT(('__'.join(s)).upper())

    def set_prefix(self, prefix: Optional[str]) -> None:
        self.prefix = prefix or environ.get(self.default_envvar, self.default_prefix)

    def _key(self, key: str) -> KeyT:
        if isinstance(key, KeyT):
            return key
        return self._join_prefix(self.prefix, key)


class EnvConfig(PrefixConfig):
    def __post_init__(self) -> None:
        self.overrides: Dict[str, str] = {}
        super().__post_init__()

    def _getitem(self, key: str) -> str:
        return self.overrides.get(key) or environ[key]

    def __setitem__(self, key: str, value: str) -> None:
        self.overrides[self._key(key)] = value

    def _keys(self) -> Iterable[str]:
        return tuple(k for k in environ.keys() if k.startswith(f'{self.prefix}__'))


@dataclass
class ChainConfig(Config):
    configs: Sequence[Config]
    logging: ClassVar[bool] = False

    def _getitem(self, key: str) -> Any:
        for c in self.configs:
            try:
                return c[key]
            except KeyError:
                if c is self.configs[-1]:
                    raise
        raise KeyError(key)

    def _keys(self) -> Iterable[str]:
        return tuple(k for c in self.configs for k in c._keys())


@dataclass
class DictConfig(Config):
    """values given on the command line"""

    values: Mapping[str, Any]
    logging: ClassVar[bool] = False

    def _getitem(self, key: str) -> Any:
        return self.values[key]

    def _keys(self) -> Iterable[str]:
        return tuple(self.values.keys())


@dataclass
class JsonConfig(Config):
    """a read only json run config"""

    path: Optional[Path]
    logging: ClassVar[bool] = False

    def __post_init__(self) -> None:
        super().__post_init__()
        if self.path is not None and not isinstance(self.path, Path):
            self.path = Path(self.path)

    @cached_property
    def json(self) -> Dict[str, Any]:
        if self.path is None:
            return {}

        if not self.path.exists():
            raise ConfigError(str(self.path), 'config file does not exist')

        with self.path.open() as f:
            try:
                j = json.load(f)
            except json.decoder.JSONDecodeError as e:
                raise ConfigError(str(self.path), f'line {e.lineno} col {e.colno}: {e.msg}')

        if not isinstance(j, dict):
            raise ConfigError(str(self.path), 'json config must be an object')

        return j

    def _getitem(self, key: str) -> Any:
        return self.json[key]

    def _keys(self) -> Iterable[str]:
        return tuple(self.json.keys())


def _as_bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, str) and value.strip().lower() in ('1', 'true', 'yes', 'on'):
        return True
    if isinstance(value, str) and value.strip().lower() in ('0', 'false', 'no', 'off'):
        return False
    if isinstance(value, (int, float)) and value in (0, 1):
        return bool(value)
    raise ValueError(f'{value!r} is not a boolean')


def _as_complex(value: Any) -> complex:
    """accepts a number, a [re, im] pair or a python complex literal"""
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, str):
        return complex(value.replace(' ', ''))
    if isinstance(value, bool):
        raise ValueError(f'{value!r} is not a complex number')
    return complex(value)


def _as_int(value: Any) -> int:
    if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
        raise ValueError(f'{value!r} is not an integer')
    return int(value)


def _as_sequence(to: Type[Union[set, list, tuple]]) -> Callable[..., Sequence[Any]]:
    def _to_seq(seq: Union[str, Sequence[Any]], cls: Callable[[Any], Any] = str) -> Sequence[Any]:
        if isinstance(seq, str):
            seq = [_.strip() for _ in seq.split(',') if _.strip()]
        if not isinstance(seq, (list, tuple, set)):
            raise ValueError(f'{seq!r} is not a sequence')
        return to(cls(_) for _ in seq)

    return _to_seq


def _as_dict(value: Any, cls: Callable[[Any], Any] = lambda _: _) -> Dict[str, Any]:
    if isinstance(value, str):
        value = json.loads(value)
    if not isinstance(value, dict):
        raise ValueError(f'{value!r} is not an object')
    return {str(k): cls(v) for k, v in value.items()}


@dataclass
class TypedConfig(Config):
    types: Type

    def _annotation(self, key: str) -> Any:
        if (annotation := self.types.__annotations__.get(key)) is None:
            raise ConfigError(key, f'must be declared in {self.types.__qualname__}')
        return annotation

    def _log_hit_msg(self, key: str) -> None:
        if self.logging and not self._seen_key(key):
            a = self.types.__annotations__.get(key)
            a = a.__name__ if isinstance(a, type) else a
            logger.debug(f'config hit: {key} (as type {a})')

    def _log_default_msg(self, key: str) -> None:
        if self.logging and not self._seen_key(key):
            a = self.types.__annotations__.get(key)
            a = a.__name__ if isinstance(a, type) else a
            logger.debug(f'config default: {key} (as type {a})')

    _simple_type_map: ClassVar[Dict[str, Callable[..., Any]]] = {
        'str': str,
        'int': _as_int,
        'float': float,
        'bool': _as_bool,
        'complex': _as_complex,
        'set': _as_sequence(set),
        'list': _as_sequence(list),
        'tuple': _as_sequence(tuple),
        'dict': _as_dict,
    }

    def _cast_for_annotation(self, value: Any, annotation: Any) -> Any:
        if isinstance(annotation, str) and annotation.startswith('Optional['):
            if value is None:
                return None
            annotation = annotation[len('Optional[') : -1]

        if isinstance(annotation, str) and '[' in annotation:
            match = re.match(
                r'^(?P<origin_name>[\w]+)\[(?:\w+,\s*)?(?P<to_cls_name>\w+)\]$', annotation
            )
            if not match:
                raise ConfigError(annotation, 'unsupported config annotation')
            origin_name = match.group('origin_name').lower()
            to_cls_type = self._simple_type_map.get(match.group('to_cls_name'), lambda _: _)
            return self._simple_type_map[origin_name](value, to_cls_type)
        elif isinstance(annotation, typing._GenericAlias):
            origin_name = annotation.__origin__.__name__
            to_cls_name = annotation.__args__[-1].__name__
            to_cls_type = self._simple_type_map.get(to_cls_name, lambda _: _)
            return self._simple_type_map[origin_name](value, to_cls_type)
        elif isinstance(annotation, type):
            annotation = annotation.__name__

        return self._simple_type_map[annotation](value)

    def _getitem(self, key: str) -> Any:
        annotation = self._annotation(key)
        value = super()._getitem(key)
        try:
            return self._cast_for_annotation(value, annotation)
        except (TypeError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(key, f'cannot read {value!r} as {annotation}: {e}') from e

    def resolved(self) -> Dict[str, Any]:
        """every declared key with its final value, missing required keys raise"""
        tombstone = object()
        values: Dict[str, Any] = {}
        for key in self.types.__annotations__.keys():
            if (value := self.get(key, tombstone)) is tombstone:
                raise ConfigError(key, 'is required but missing')
            values[key] = value
        return values


@dataclass
class TypedChainConfig(TypedConfig, ChainConfig):
    pass


@dataclass
class DefaultsConfig(Config):
    """the defaults declared on an experiment's inner Config class"""

    ext: Type
    logging: ClassVar[bool] = False

    def _getitem(self, key: str) -> Any:
        try:
            return getattr(self.ext.Config, key)
        except AttributeError:
            raise KeyError(key)

    def _keys(self) -> Iterable[str]:
        return self.ext.Config.__annotations__.keys()


class ExperimentConfig(EnvConfig):
    """environment config scoped to one experiment, SUPERABSORBER__<COMMAND>__<KEY>"""

    def __init__(self, ext: Type, prefix: Optional[str] = None) -> None:
        self.ext = ext
        super().__init__(prefix)
        self.prefix = self._join_prefix(self.prefix, ext.command)


def check_unknown_keys(config: Mapping[str, Any], declared: Iterable[str], where: str) -> None:
    """unknown keys are errors, not warnings"""
    if unknown := sorted(set(config) - set(declared)):
        raise ConfigError(where, f'unknown config keys: {", ".join(unknown)}')


_base_config = {'handlers': ['console'], 'level': logging.ERROR, 'propagate': False}
_info_config = ChainMap({'level': logging.INFO}, _base_config)
_debug_config = ChainMap({'level': logging.DEBUG}, _base_config)


def configure_logging(level: int = logging.DEBUG) -> None:
    logging_config = {
        'version': 1,
        'formatters': {'f': {'format': '%(asctime)s %(levelname)-8s %(name)-20s -- %(message)s'}},
        'handlers': {
            'console': {
                'class': 'logging.StreamHandler',
                'formatter': 'f',
                'level': level,
            }
        },
        'loggers': {
            '': {'handlers': ['console'], 'level': logging.WARNING, 'propagate': True},
            'scipy': _info_config,
            '__main__': dict(_info_config),
            'superabsorber': dict(_debug_config),
        },
        'disable_existing_loggers': False,
    }

    dictConfig(logging_config)
