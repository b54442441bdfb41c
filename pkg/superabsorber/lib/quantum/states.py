"""input photon states: fock, coherent, squeezed coherent and cat states"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as la
from scipy.optimize import minimize_scalar

from ..errors import NumericalError, TruncationError, ValidationError
from .core import DensityMatrix
from .fock import DEFAULT_N_MAX, LEAK_GUARD, FockField, annihilation

logger = logging.getLogger(__name__)

PURITY_TOL = 1e-10
DISPLACE_PADDING = 20
CAT_AMPLITUDE_BOUNDS = (0.05, 3.0)


class StateKind(str, Enum):
    VACUUM = 'vacuum'
    FOCK = 'fock'
    COHERENT = 'coherent'
    SQUEEZED_COHERENT = 'squeezed_coherent'


@dataclass(frozen=True)
class StatePrepSpec:
    kind: StateKind
    n_max: int = DEFAULT_N_MAX
    n: int = 0
    alpha: complex = 0j
    w: float = 1.0

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, 'kind', StateKind(self.kind))
        except ValueError:
            kinds = ', '.join(k.value for k in StateKind)
            raise ValidationError(f"unknown state kind '{self.kind}', expected one of {kinds}")
        object.__setattr__(self, 'alpha', complex(self.alpha))
        if self.n_max < 1:
            raise ValidationError(f'n_max must be >= 1, got {self.n_max}')
        if self.kind is StateKind.FOCK and not 0 <= self.n <= self.n_max:
            raise ValidationError(f'fock n={self.n} must lie in [0, n_max={self.n_max}]')
        if self.kind is StateKind.SQUEEZED_COHERENT and not self.w > 0:
            raise ValidationError(f'squeezing w must be positive, got {self.w}')

    @classmethod
    def vacuum(cls, n_max: int = DEFAULT_N_MAX) -> StatePrepSpec:
        return cls(StateKind.VACUUM, n_max)

    @classmethod
    def fock(cls, n: int, n_max: int = DEFAULT_N_MAX) -> StatePrepSpec:
        return cls(StateKind.FOCK, n_max, n=n)

    @classmethod
    def coherent(cls, alpha: complex, n_max: int = DEFAULT_N_MAX) -> StatePrepSpec:
        return cls(StateKind.COHERENT, n_max, alpha=alpha)

    @classmethod
    def squeezed_coherent(
        cls, alpha: complex, w: float, n_max: int = DEFAULT_N_MAX
    ) -> StatePrepSpec:
        return cls(StateKind.SQUEEZED_COHERENT, n_max, alpha=alpha, w=w)


def squeeze_parameter(w: float) -> float:
    """r with the amplitude quadrature width scaled by w = e^-r"""
    return float(-np.log(w))


def gaussian_ket(alpha: complex, w: float, n_max: int) -> np.ndarray:
    """fock amplitudes of S(r) D(alpha)|0>, squeezing applied after displacement

    The state is annihilated by (a - beta) cosh r + (a^dag - beta*) sinh r with
    beta = alpha cosh r - alpha* sinh r, giving a two term recurrence.
    """
    r = squeeze_parameter(w)
    t = np.tanh(r)
    beta = alpha * np.cosh(r) - np.conj(alpha) * np.sinh(r)
    gamma = beta + np.conj(beta) * t

    c = np.zeros(n_max + 1, dtype=complex)
    c[0] = np.exp(-abs(beta) ** 2 / 2 - np.real(np.conj(beta) ** 2) * t / 2) / np.sqrt(np.cosh(r))
    if n_max >= 1:
        c[1] = gamma * c[0]
    for n in range(1, n_max):
        c[n + 1] = (gamma * c[n] - t * np.sqrt(n) * c[n - 1]) / np.sqrt(n + 1)

    if not np.all(np.isfinite(c)):
        raise NumericalError('gaussian state recurrence overflowed')
    return c


def _from_ket(ket: np.ndarray, leak_guard: Optional[float]) -> FockField:
    captured = float(np.sum(np.abs(ket) ** 2))
    if leak_guard is not None and 1 - captured > leak_guard:
        raise TruncationError(len(ket) - 1, 1 - captured, leak_guard)
    field = FockField(DensityMatrix(np.outer(ket, ket.conj()) / captured))
    if abs(field.rho.purity - 1) > PURITY_TOL:
        raise NumericalError(f'prepared state is not pure (purity {field.rho.purity:.12g})')
    return field.check(leak_guard)


def prepare(spec: StatePrepSpec, leak_guard: Optional[float] = LEAK_GUARD) -> FockField:
    if spec.kind is StateKind.VACUUM:
        return FockField.vacuum(spec.n_max).check(leak_guard)
    if spec.kind is StateKind.FOCK:
        return FockField.fock(spec.n, spec.n_max).check(leak_guard)
    w = spec.w if spec.kind is StateKind.SQUEEZED_COHERENT else 1.0
    return _from_ket(gaussian_ket(spec.alpha, w, spec.n_max), leak_guard)


def displace(field: FockField, beta: complex, padding: int = DISPLACE_PADDING) -> FockField:
    """D(beta) rho D(beta)^dag, exponentiated on a padded space and cut back"""
    big = field.padded(field.n_max + padding)
    a = annihilation(big.n_max).elements
    d = la.expm(beta * a.conj().T - np.conj(beta) * a)
    rho = d @ big.rho.elements @ d.conj().T
    return FockField(DensityMatrix(rho[: field.n_max + 1, : field.n_max + 1]))


def hermite_functions(x: np.ndarray, n_max: int) -> np.ndarray:
    """<x|n> for n = 0..n_max, vacuum variance 1/2"""
    x = np.asarray(x, dtype=float)
    psi = np.zeros((n_max + 1,) + x.shape)
    psi[0] = np.pi**-0.25 * np.exp(-(x**2) / 2)
    if n_max >= 1:
        psi[1] = np.sqrt(2) * x * psi[0]
    for n in range(1, n_max):
        psi[n + 1] = np.sqrt(2 / (n + 1)) * x * psi[n] - np.sqrt(n / (n + 1)) * psi[n - 1]
    return psi


def quadrature_density(field: FockField, q: Sequence[float], axis: str = 'x') -> np.ndarray:
    """probability density of the x or p quadrature straight from the fock basis"""
    if axis not in ('x', 'p'):
        raise ValidationError(f"axis must be 'x' or 'p', got '{axis}'")
    psi = hermite_functions(np.asarray(q), field.n_max).astype(complex)
    if axis == 'p':
        psi *= ((-1j) ** np.arange(field.n_max + 1))[:, None]
    density = np.einsum('nq,nm,mq->q', psi, field.rho.elements, psi.conj())
    return np.real(density)


@dataclass(frozen=True)
class CatFit:
    fidelity: float
    amplitude: complex
    parity: int


def cat_state(amplitude: complex, parity: int, n_max: int = DEFAULT_N_MAX) -> FockField:
    """|amplitude> + parity |-amplitude>, normalised"""
    if parity not in (1, -1):
        raise ValidationError(f'cat parity must be +1 or -1, got {parity}')
    coherent = gaussian_ket(complex(amplitude), 1.0, n_max)
    ket = coherent * (1 + parity * (-1.0) ** np.arange(n_max + 1))
    if (norm := np.linalg.norm(ket)) == 0:
        raise ValidationError('an odd cat needs a non-zero amplitude')
    return FockField.from_ket(ket / norm)


def best_cat_fidelity(field: FockField, parity: Optional[int] = None) -> CatFit:
    """the closest cat along the real or imaginary axis, parity from the field by default"""
    parity = parity or (1 if field.parity >= 0 else -1)
    rho = field.rho.elements

    def infidelity(amplitude: complex) -> float:
        ket = cat_state(amplitude, parity, field.n_max).rho.elements
        return 1 - float(np.real(np.trace(ket @ rho)))

    best: Optional[CatFit] = None
    for phase in (1.0, 1j):
        result = minimize_scalar(
            lambda s: infidelity(phase * s), bounds=CAT_AMPLITUDE_BOUNDS, method='bounded'
        )
        fit = CatFit(1 - float(result.fun), phase * float(result.x), parity)
        if best is None or fit.fidelity > best.fidelity:
            best = fit

    logger.debug(f'closest cat: fidelity {best.fidelity:.4f} at amplitude {best.amplitude:.3f}')
    return best


def quadrature_moments(field: FockField, axis: str = 'x') -> Tuple[float, float]:
    """mean and variance of x = (a + a^dag) / sqrt(2) or p = (a - a^dag) / (i sqrt(2))"""
    a = annihilation(field.n_max).elements
    if axis == 'x':
        q = (a + a.conj().T) / np.sqrt(2)
    elif axis == 'p':
        q = (a - a.conj().T) / (1j * np.sqrt(2))
    else:
        raise ValidationError(f"axis must be 'x' or 'p', got '{axis}'")
    rho = field.rho.elements
    mean = float(np.real(np.trace(rho @ q)))
    return mean, float(np.real(np.trace(rho @ q @ q))) - mean**2
