from enum import Enum


class constants(str, Enum):
    SUPERABSORBER_CONFIG_PREFIX_DEFAULT = 'SUPERABSORBER'
    SUPERABSORBER_CONFIG_PREFIX_ENVVAR = 'SUPERABSORBER_CONFIG_PREFIX'
    SUPERABSORBER_APPS_DEFAULT = 'superabsorber.apps'
    SUPERABSORBER_APPS_ENVVAR = 'SUPERABSORBER_APPS'
    SUPERABSORBER_VERSION = '0.3.0'


__version__ = constants.SUPERABSORBER_VERSION.value
