from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
from cachetools import LRUCache, cached

from ..errors import TruncationError, ValidationError
from .core import DensityMatrix, OperatorMatrix

LEAK_GUARD = 1e-6
DEFAULT_N_MAX = 20


@cached(LRUCache(maxsize=32), lock=threading.Lock())
def annihilation(n_max: int) -> OperatorMatrix:
    """a on |0>..|n_max>, <n-1|a|n> = sqrt(n)"""
    a = np.diag(np.sqrt(np.arange(1, n_max + 1)), k=1).astype(complex)
    return OperatorMatrix(a, label='a')


def number(n_max: int) -> OperatorMatrix:
    return OperatorMatrix(np.diag(np.arange(n_max + 1)).astype(complex), hermitian=True, label='n')


def parity(n_max: int) -> OperatorMatrix:
    signs = (-1.0) ** np.arange(n_max + 1)
    return OperatorMatrix(np.diag(signs).astype(complex), hermitian=True, label='Pi')


@dataclass(frozen=True, eq=False)
class FockField:
    """a single photon mode truncated to |0>..|n_max>"""

    rho: DensityMatrix

    def __post_init__(self) -> None:
        if self.rho.dim < 2:
            raise ValidationError('a fock field needs n_max >= 1')

    @property
    def n_max(self) -> int:
        return self.rho.dim - 1

    @property
    def leak(self) -> float:
        return float(self.rho.populations[-1])

    @property
    def populations(self) -> np.ndarray:
        return self.rho.populations

    @property
    def mean_photon_number(self) -> float:
        return float(np.dot(np.arange(self.n_max + 1), self.populations))

    @property
    def parity(self) -> float:
        return float(np.dot((-1.0) ** np.arange(self.n_max + 1), self.populations))

    def check(self, leak_guard: Optional[float] = LEAK_GUARD) -> FockField:
        self.rho.check(what='fock field')
        if leak_guard is not None and self.leak >= leak_guard:
            raise TruncationError(self.n_max, self.leak, leak_guard)
        return self

    def padded(self, n_max: int) -> FockField:
        if n_max < self.n_max:
            raise ValidationError(f'cannot pad n_max={self.n_max} down to {n_max}')
        rho = np.zeros((n_max + 1, n_max + 1), dtype=complex)
        rho[: self.n_max + 1, : self.n_max + 1] = self.rho.elements
        return FockField(DensityMatrix(rho))

    @classmethod
    def from_ket(cls, amplitudes: Iterable[complex], n_max: Optional[int] = None) -> FockField:
        amplitudes = np.asarray(list(amplitudes), dtype=complex)
        n_max = len(amplitudes) - 1 if n_max is None else n_max
        if len(amplitudes) > n_max + 1:
            raise ValidationError(f'{len(amplitudes)} amplitudes do not fit n_max={n_max}')
        ket = np.zeros(n_max + 1, dtype=complex)
        ket[: len(amplitudes)] = amplitudes
        return cls(DensityMatrix.from_ket(ket))

    @classmethod
    def fock(cls, n: int, n_max: int = DEFAULT_N_MAX) -> FockField:
        if not 0 <= n <= n_max:
            raise ValidationError(f'fock state |{n}> needs 0 <= n <= n_max={n_max}')
        return cls(DensityMatrix.basis(n_max + 1, n))

    @classmethod
    def vacuum(cls, n_max: int = DEFAULT_N_MAX) -> FockField:
        return cls.fock(0, n_max)

    @classmethod
    def diagonal(cls, populations: Iterable[float], n_max: Optional[int] = None) -> FockField:
        populations = np.asarray(list(populations), dtype=float)
        n_max = len(populations) - 1 if n_max is None else n_max
        diag = np.zeros(n_max + 1)
        diag[: len(populations)] = populations
        return cls(DensityMatrix(np.diag(diag).astype(complex)))
