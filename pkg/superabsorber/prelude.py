from .lib.errors import ConfigError, ValidationError
from .lib.experiment import ConfigCheck, Experiment
from .lib.output import OutputWriter

__all__ = ['ConfigCheck', 'ConfigError', 'Experiment', 'OutputWriter', 'ValidationError']
