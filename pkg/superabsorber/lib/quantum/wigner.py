"""wigner functions of fock space states on rectangular phase space grids"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..errors import NumericalError, ValidationError
from .fock import FockField
from .states import quadrature_moments

logger = logging.getLogger(__name__)

DEFAULT_EXTENT = 6.0
DEFAULT_POINTS = 201
NORMALIZATION_TOL = 0.01
IMAGINARY_TOL = 1e-10
COVERAGE_SIGMAS = 5.0


def default_axis(extent: float = DEFAULT_EXTENT, points: int = DEFAULT_POINTS) -> np.ndarray:
    return np.linspace(-extent, extent, points)


def _check_axis(axis: Sequence[float], name: str) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    if axis.ndim != 1 or len(axis) < 2:
        raise ValidationError(f'{name} axis needs at least 2 points')
    steps = np.diff(axis)
    if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * steps.mean():
        raise ValidationError(f'{name} axis must be increasing and evenly spaced')
    return axis


@dataclass(frozen=True, eq=False)
class WignerGrid:
    """W(x, p) with values[i, j] at (x_axis[i], p_axis[j])"""

    x_axis: np.ndarray
    p_axis: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.values.shape != (len(self.x_axis), len(self.p_axis)):
            raise ValidationError(
                f'wigner values {self.values.shape} do not match axes '
                f'({len(self.x_axis)}, {len(self.p_axis)})'
            )

    @property
    def dx(self) -> float:
        return float(self.x_axis[1] - self.x_axis[0])

    @property
    def dp(self) -> float:
        return float(self.p_axis[1] - self.p_axis[0])

    @property
    def integral(self) -> float:
        return float(self.values.sum() * self.dx * self.dp)

    @property
    def normalization_error(self) -> float:
        return abs(self.integral - 1)

    def at(self, x: float, p: float) -> float:
        """the sample nearest to (x, p)"""
        i = int(np.argmin(np.abs(self.x_axis - x)))
        j = int(np.argmin(np.abs(self.p_axis - p)))
        return float(self.values[i, j])


def _check_coverage(field: FockField, x_axis: np.ndarray, p_axis: np.ndarray) -> None:
    for name, axis in (('x', x_axis), ('p', p_axis)):
        mean, variance = quadrature_moments(field, name)
        spread = COVERAGE_SIGMAS * np.sqrt(max(variance, 0.0))
        if mean - spread < axis[0] or mean + spread > axis[-1]:
            logger.debug(
                f'{name} axis [{axis[0]:g}, {axis[-1]:g}] covers less than '
                f'{COVERAGE_SIGMAS:g} sigma around {mean:.3g}'
            )


def wigner(
    field: FockField,
    x_axis: Optional[Sequence[float]] = None,
    p_axis: Optional[Sequence[float]] = None,
    check_normalization: bool = True,
) -> WignerGrid:
    """W(x, p) = (1/pi) Tr[rho D(a) Pi D(a)^dag] with a = (x + ip)/sqrt(2)

    Matrix elements W_mn come from the laguerre recurrence on the |0><n| row,
    rows m and m - 1 kept in memory.
    """
    x = _check_axis(default_axis() if x_axis is None else x_axis, 'x')
    p = _check_axis(default_axis() if p_axis is None else p_axis, 'p')
    _check_coverage(field, x, p)

    rho = field.rho.elements
    cutoff = rho.shape[0]
    a = (x[:, None] + 1j * p[None, :]) / np.sqrt(2)

    rows = np.zeros((2, cutoff) + a.shape, dtype=complex)
    rows[0, 0] = np.exp(-2 * np.abs(a) ** 2) / np.pi
    w = rho[0, 0] * rows[0, 0]

    for n in range(1, cutoff):
        rows[0, n] = 2 * a * rows[0, n - 1] / np.sqrt(n)
        w += rho[0, n] * rows[0, n] + rho[n, 0] * np.conj(rows[0, n])

    for m in range(1, cutoff):
        rows[1, m] = (2 * np.conj(a) * rows[0, m] - np.sqrt(m) * rows[0, m - 1]) / np.sqrt(m)
        w += rho[m, m] * rows[1, m]
        for n in range(m + 1, cutoff):
            rows[1, n] = (2 * a * rows[1, n - 1] - np.sqrt(m) * rows[0, n - 1]) / np.sqrt(n)
            w += rho[m, n] * rows[1, n] + rho[n, m] * np.conj(rows[1, n])
        rows[0] = rows[1]

    if (residue := float(np.max(np.abs(w.imag)))) > IMAGINARY_TOL:
        raise NumericalError(f'wigner function has an imaginary residue of {residue:.2e}')

    grid = WignerGrid(x, p, np.real(w))
    if check_normalization and grid.normalization_error > NORMALIZATION_TOL:
        raise ValidationError(
            f'wigner grid integrates to {grid.integral:.4f}, the grid is too small for this state'
        )
    return grid


def negativity_volume(grid: WignerGrid) -> float:
    return float(np.abs(np.minimum(grid.values, 0)).sum() * grid.dx * grid.dp)


def marginal(grid: WignerGrid, axis: str = 'x') -> np.ndarray:
    """the quadrature density on `axis`, integrating W over the other one"""
    if axis == 'x':
        return grid.values.sum(axis=1) * grid.dp
    if axis == 'p':
        return grid.values.sum(axis=0) * grid.dx
    raise ValidationError(f"axis must be 'x' or 'p', got '{axis}'")
