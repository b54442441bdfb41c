from __future__ import annotations

from typing import Optional


class SuperabsorberError(Exception):
    pass


class ValidationError(SuperabsorberError, ValueError):
    """bad input, reported before any computation starts"""


class DimensionError(ValidationError):
    def __init__(self, operator: str, expected: int, got: int) -> None:
        self.operator = operator
        self.expected = expected
        self.got = got
        super().__init__(f"'{operator}' has dim {got}, expected {expected}")


class ConfigError(ValidationError):
    def __init__(self, key: str, msg: str) -> None:
        self.key = key
        super().__init__(f'[{key}] {msg}')


class TruncationError(ValidationError):
    def __init__(self, n_max: int, leak: float, guard: float) -> None:
        self.n_max = n_max
        self.leak = leak
        super().__init__(
            f'population {leak:.3e} in |{n_max}> exceeds the leak guard {guard:.0e}, '
            f'try a larger n_max'
        )


class MissingParameterError(ValidationError):
    def __init__(self, name: str, quantity: str) -> None:
        self.name = name
        self.quantity = quantity
        super().__init__(f"'{name}' is required to compute {quantity}")


class EmptyBranchError(ValidationError):
    pass


class SeriesTooShortError(ValidationError):
    pass


class NumericalError(SuperabsorberError, ArithmeticError):
    """the numerics failed on valid input"""


class IntegrationError(NumericalError):
    def __init__(self, msg: str, t: Optional[float] = None) -> None:
        self.t = t
        super().__init__(msg if t is None else f'{msg} (at t={t:.6g})')


class DegenerateSteadyStateError(NumericalError):
    def __init__(self, multiplicity: int, exact: bool = True) -> None:
        self.multiplicity = multiplicity
        self.exact = exact
        count = f'{multiplicity}' if exact else f'>= {multiplicity}'
        super().__init__(f'liouvillian null space is degenerate (multiplicity {count})')


class NoiseCalibrationError(NumericalError):
    pass


class FitError(NumericalError):
    pass
