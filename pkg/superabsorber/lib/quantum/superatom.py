"""the N+1 level superatom: bright-state coupling, site dephasing and absorption rates"""

from __future__ import annotations

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np
from cachetools import LRUCache, cached
from scipy.signal import find_peaks

from ..errors import FitError, MissingParameterError, SeriesTooShortError, ValidationError
from .core import (
    DEFAULT_TOL,
    DensityMatrix,
    OperatorMatrix,
    TimeSeries,
    evolve,
    expectation,
    steady_state,
)

logger = logging.getLogger(__name__)

ADIABATIC_RATIO = 10.0
CROSSING_NOISE_FLOOR = 1e-6
SETTLED_FRACTION = 0.01
MIN_EXTREMA = 3
DEFAULT_SAMPLES = 401
HORIZON_FACTOR = 20.0
SAMPLES_PER_PERIOD = 16
# an undershoot below 1/(N+1) of this fraction of the initial deviation is a visible oscillation
VISIBLE_UNDERSHOOT = 0.05


class UnitSystem(str, Enum):
    NATURAL = 'natural'
    CGS = 'cgs'

    @property
    def hbar(self) -> float:
        return {UnitSystem.NATURAL: 1.0, UnitSystem.CGS: 1.054571817e-27}[self]

    @property
    def c_light(self) -> float:
        return {UnitSystem.NATURAL: 1.0, UnitSystem.CGS: 2.99792458e10}[self]


class Regime(str, Enum):
    UNDERDAMPED = 'underdamped'
    CROSSOVER = 'crossover'
    OVERDAMPED = 'overdamped'


_adiabatic_warned: Set[Tuple[float, float]] = set()


@dataclass(frozen=True)
class SuperatomParams:
    """rates are angular frequencies, hbar = 1 unless `units` says otherwise"""

    n_atoms: int
    omega_p: float
    omega_c: float
    delta_c: float
    gamma: float
    c6: Optional[float] = None
    dipole: Optional[float] = None
    mode_area: Optional[float] = None
    omega_probe: Optional[float] = None
    units: UnitSystem = UnitSystem.NATURAL

    def __post_init__(self) -> None:
        if isinstance(self.n_atoms, bool) or int(self.n_atoms) != self.n_atoms or self.n_atoms < 1:
            raise ValidationError(f'n_atoms must be an integer >= 1, got {self.n_atoms}')
        object.__setattr__(self, 'n_atoms', int(self.n_atoms))
        if self.delta_c == 0:
            raise ValidationError('delta_c must be non-zero')
        if self.gamma < 0:
            raise ValidationError(f'gamma must be >= 0, got {self.gamma}')
        for name in ('c6', 'dipole', 'mode_area', 'omega_probe'):
            if (value := getattr(self, name)) is not None and value <= 0:
                raise ValidationError(f'{name} must be positive when given, got {value}')
        object.__setattr__(self, 'units', UnitSystem(self.units))

        key = (self.omega_c, self.delta_c)
        if not self.adiabatic and key not in _adiabatic_warned:
            _adiabatic_warned.add(key)
            logger.warning(
                f'adiabatic elimination needs |delta_c| >= {ADIABATIC_RATIO:g} |omega_c|, '
                f'got delta_c={self.delta_c:g}, omega_c={self.omega_c:g}'
            )

    @property
    def adiabatic(self) -> bool:
        return abs(self.delta_c) >= ADIABATIC_RATIO * abs(self.omega_c)

    @classmethod
    def from_collective(
        cls, n_atoms: int, omega_n: float, gamma: float, **physical: object
    ) -> SuperatomParams:
        """params realising omega_n, with omega_p = omega_c and delta_c = 10 omega_c"""
        if omega_n <= 0:
            raise ValidationError(f'omega_n must be positive, got {omega_n}')
        omega = omega_n / np.sqrt(n_atoms)
        omega_c = 4 * ADIABATIC_RATIO * omega
        return cls(
            n_atoms=n_atoms,
            omega_p=omega_c,
            omega_c=omega_c,
            delta_c=ADIABATIC_RATIO * omega_c,
            gamma=gamma,
            **physical,
        )


def two_photon_rabi(p: SuperatomParams) -> float:
    return p.omega_c * p.omega_p / (4 * p.delta_c)


def collective_rabi(p: SuperatomParams) -> float:
    return float(np.sqrt(p.n_atoms)) * two_photon_rabi(p)


def blockade_radius(p: SuperatomParams) -> float:
    """(C6 / hbar sqrt(N) Omega)^(1/6), in the length unit of c6"""
    if p.c6 is None:
        raise MissingParameterError('c6', 'the blockade radius')
    if (omega_n := collective_rabi(p)) <= 0:
        raise ValidationError(f'the collective rabi frequency must be positive, got {omega_n:g}')
    return float((p.c6 / (p.units.hbar * omega_n)) ** (1 / 6))


def optical_thickness(p: SuperatomParams) -> float:
    for name in ('dipole', 'mode_area', 'omega_probe'):
        if getattr(p, name) is None:
            raise MissingParameterError(name, 'the optical thickness')
    if p.gamma <= 0:
        raise ValidationError('the optical thickness needs gamma > 0')

    kappa = (
        2
        * np.pi
        * p.n_atoms
        * p.dipole**2
        / (p.units.hbar * p.units.c_light * p.mode_area)
        * (p.omega_probe / p.gamma)
        * (p.omega_c / p.delta_c) ** 2
    )
    if kappa <= 1:
        logger.warning(
            f'optical thickness kappa={kappa:.3g}, the medium must be optically thick (kappa > 1)'
        )
    return float(kappa)


@cached(LRUCache(maxsize=64), lock=threading.Lock())
def _site_projectors(n_atoms: int) -> Tuple[OperatorMatrix, ...]:
    return tuple(
        OperatorMatrix.projector(n_atoms + 1, i, label=f'c_{i}') for i in range(1, n_atoms + 1)
    )


@cached(LRUCache(maxsize=64), lock=threading.Lock())
def _hamiltonian(n_atoms: int, omega_n: float) -> OperatorMatrix:
    """(omega_n / 2)(|W><G| + h.c.) in the site basis"""
    h = np.zeros((n_atoms + 1, n_atoms + 1), dtype=complex)
    h[1:, 0] = h[0, 1:] = omega_n / (2 * np.sqrt(n_atoms))
    return OperatorMatrix(h, hermitian=True, label='H')


@dataclass(frozen=True, eq=False)
class SuperatomModel:
    params: SuperatomParams
    hamiltonian: OperatorMatrix
    jump_operators: Tuple[OperatorMatrix, ...]
    basis_labels: Tuple[str, ...]

    @property
    def dim(self) -> int:
        return self.params.n_atoms + 1

    @property
    def rate(self) -> float:
        return self.params.gamma

    @property
    def w_state(self) -> np.ndarray:
        w = np.zeros(self.dim, dtype=complex)
        w[1:] = 1 / np.sqrt(self.params.n_atoms)
        return w

    @property
    def ground_projector(self) -> OperatorMatrix:
        return OperatorMatrix.projector(self.dim, 0, label='|G><G|')

    @property
    def w_projector(self) -> OperatorMatrix:
        return OperatorMatrix.from_ket(self.w_state, label='|W><W|')

    @property
    def dark_projector(self) -> OperatorMatrix:
        sites = np.diag([0.0] + [1.0] * self.params.n_atoms).astype(complex)
        return OperatorMatrix(sites - self.w_projector.elements, hermitian=True, label='P_dark')

    def ground_state(self) -> DensityMatrix:
        return DensityMatrix.basis(self.dim, 0)

    def steady_state(self) -> DensityMatrix:
        return steady_state(self.hamiltonian, self.jump_operators, self.rate)


def build_model(p: SuperatomParams) -> SuperatomModel:
    n = p.n_atoms
    return SuperatomModel(
        params=p,
        hamiltonian=_hamiltonian(n, collective_rabi(p)),
        jump_operators=_site_projectors(n),
        basis_labels=('G',) + tuple(f'site_{i}' for i in range(1, n + 1)),
    )


def default_horizon(p: SuperatomParams) -> float:
    """20 / min(gamma, omega_n^2 / gamma, omega_n), long enough to settle in every regime"""
    omega_n = collective_rabi(p)
    rates = [omega_n] + ([p.gamma, omega_n**2 / p.gamma] if p.gamma > 0 else [])
    if (slowest := min(rates)) <= 0:
        raise ValidationError('t_max is required when the collective rabi frequency is zero')
    return HORIZON_FACTOR / slowest


def default_samples(p: SuperatomParams, t_max: float) -> int:
    """at least SAMPLES_PER_PERIOD samples per collective rabi period"""
    periods = t_max * collective_rabi(p) / (2 * np.pi)
    return max(DEFAULT_SAMPLES, int(np.ceil(periods * SAMPLES_PER_PERIOD)) + 1)


def absorption_run(
    p: SuperatomParams,
    t_max: Optional[float] = None,
    samples: Optional[int] = None,
    tol: float = DEFAULT_TOL,
) -> Tuple[SuperatomModel, np.ndarray, List[DensityMatrix]]:
    """the model, the time grid and the states of an absorption run from |G>"""
    t_max = default_horizon(p) if t_max is None else t_max
    if t_max <= 0:
        raise ValidationError(f't_max must be positive, got {t_max}')
    samples = default_samples(p, t_max) if samples is None else samples
    if samples < 2:
        raise ValidationError(f'samples must be >= 2, got {samples}')

    model = build_model(p)
    t = np.linspace(0.0, t_max, samples)
    states = evolve(
        model.ground_state(), model.hamiltonian, model.jump_operators, model.rate, t, tol=tol
    )
    return model, t, states


def simulate_absorption(
    p: SuperatomParams,
    t_max: Optional[float] = None,
    samples: Optional[int] = None,
    tol: float = DEFAULT_TOL,
) -> TimeSeries:
    _, t, states = absorption_run(p, t_max, samples, tol)
    return TimeSeries(t, np.array([s.populations[0] for s in states]), label='rho_gg')


def track_populations(
    model: SuperatomModel, times: Sequence[float], states: Sequence[DensityMatrix]
) -> Dict[str, TimeSeries]:
    """ground, bright, dark and per-site populations along a run"""
    observables = {
        'rho_gg': model.ground_projector,
        'w': model.w_projector,
        'dark': model.dark_projector,
    }
    series = {
        name: TimeSeries(times, np.array([expectation(s, obs).real for s in states]), label=name)
        for name, obs in observables.items()
    }
    sites = np.array([s.populations[1:] for s in states])
    for i in range(model.params.n_atoms):
        series[f'site_{i + 1}'] = TimeSeries(times, sites[:, i], label=f'site_{i + 1}')
    return series


def absorption_fidelity(rho: DensityMatrix) -> float:
    return 1.0 - float(rho.populations[0])


@dataclass(frozen=True)
class GammaEffFit:
    gamma_eff: float
    fit_residual: float
    regime: Regime
    crossings: int = 0
    n_points: int = 0
    undershoot: float = 0.0


def count_crossings(deviation: np.ndarray, floor: float) -> int:
    """sign changes between samples that clear the noise floor"""
    signs = np.sign(deviation[np.abs(deviation) > floor])
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


def _log_linear(t: np.ndarray, envelope: np.ndarray) -> Tuple[float, float]:
    slope, intercept = np.polyfit(t, np.log(envelope), 1)
    residual = np.log(envelope) - (slope * t + intercept)
    return -float(slope), float(np.sqrt(np.mean(residual**2)))


def fit_gamma_eff(series: TimeSeries, n_atoms: int, gamma: Optional[float] = None) -> GammaEffFit:
    """the rate of the exponential envelope of |rho_gg - 1/(N+1)|

    Oscillating traces are fit through their local extrema, falling back to the
    tail t > 1/gamma (the second half when gamma is unknown) with fewer than three.
    Monotone traces are fit directly past their first e-folding.
    """
    t = series.times
    if len(t) < 5:
        raise SeriesTooShortError(f'need at least 5 samples to fit, got {len(t)}')

    deviation = np.real(series.values) - 1 / (n_atoms + 1)
    if (d0 := abs(deviation[0])) == 0:
        raise SeriesTooShortError('rho_gg starts at equilibrium, nothing to fit')
    if abs(deviation[-1]) > SETTLED_FRACTION * d0:
        raise SeriesTooShortError(
            f'final deviation {abs(deviation[-1]):.3g} is above {SETTLED_FRACTION:.0%} of the '
            f'initial {d0:.3g}, extend t_max to cover 5 e-folding times'
        )

    floor = CROSSING_NOISE_FLOOR * d0
    crossings = count_crossings(deviation, floor)
    regime = (
        Regime.OVERDAMPED
        if crossings == 0
        else Regime.CROSSOVER
        if crossings == 1
        else Regime.UNDERDAMPED
    )
    envelope = np.abs(deviation)

    if regime is Regime.OVERDAMPED:
        keep = (envelope > floor) & (envelope <= d0 / np.e)
        if np.count_nonzero(keep) < 3:
            keep = envelope > floor
    else:
        peaks, _ = find_peaks(envelope)
        keep = np.zeros(len(t), dtype=bool)
        keep[np.concatenate([[0], peaks])] = True
        keep &= envelope > floor
        if np.count_nonzero(keep) < MIN_EXTREMA:
            logger.debug(f'{np.count_nonzero(keep)} extrema, fitting the tail instead')
            tail_start = 1 / gamma if gamma else t[-1] / 2
            keep = (t > tail_start) & (envelope > floor)

    if np.count_nonzero(keep) < 2:
        raise FitError(f'envelope extraction found {np.count_nonzero(keep)} usable points')

    gamma_eff, residual = _log_linear(t[keep], envelope[keep])
    if not gamma_eff > 0:
        raise FitError(f'fitted envelope does not decay (rate {gamma_eff:g})')

    undershoot = float(max(0.0, -np.min(np.sign(deviation[0]) * deviation)) / d0)
    return GammaEffFit(
        gamma_eff, residual, regime, crossings, int(np.count_nonzero(keep)), undershoot
    )


@dataclass(frozen=True)
class SweepRow:
    ratio: float
    gamma: float
    gamma_eff: float
    regime: Regime
    fit_residual: float
    omega_n: float
    undershoot: float = 0.0

    @property
    def gamma_eff_over_gamma(self) -> float:
        return self.gamma_eff / self.gamma

    @property
    def gamma_eff_over_omega_n(self) -> float:
        return self.gamma_eff / self.omega_n


@dataclass(frozen=True)
class GammaEffSweep:
    rows: Tuple[SweepRow, ...]

    @property
    def flip_ratio(self) -> Optional[float]:
        """geometric midpoint of the last overdamped and first oscillating ratio"""
        for lo, hi in zip(self.rows, self.rows[1:]):
            if lo.regime is Regime.OVERDAMPED and hi.regime is not Regime.OVERDAMPED:
                return float(np.sqrt(lo.ratio * hi.ratio))
        return None

    def visible_ratio(self, threshold: float = VISIBLE_UNDERSHOOT) -> Optional[float]:
        """geometric midpoint of the ratios where the undershoot first reaches `threshold`"""
        for lo, hi in zip(self.rows, self.rows[1:]):
            if lo.undershoot < threshold <= hi.undershoot:
                return float(np.sqrt(lo.ratio * hi.ratio))
        return None

    @property
    def fastest_ratio(self) -> float:
        """the omega_n / gamma with the shortest equilibration in units of 1/omega_n"""
        return max(self.rows, key=lambda r: r.gamma_eff_over_omega_n).ratio

    def overdamped_prefactor(self, max_ratio: float = 0.1) -> Optional[float]:
        """median gamma_eff gamma / omega_n^2 on the overdamped branch"""
        values = [
            r.gamma_eff * r.gamma / r.omega_n**2
            for r in self.rows
            if r.ratio <= max_ratio and r.regime is Regime.OVERDAMPED
        ]
        return float(np.median(values)) if values else None

    def plateau(self, min_ratio: float = 10.0) -> Optional[float]:
        """median gamma_eff / gamma in the weak dephasing limit"""
        values = [r.gamma_eff_over_gamma for r in self.rows if r.ratio >= min_ratio]
        return float(np.median(values)) if values else None


def sweep_gamma_eff(
    p: SuperatomParams,
    omega_n_over_gamma: Sequence[float],
    samples: Optional[int] = None,
    tol: float = DEFAULT_TOL,
    workers: Optional[int] = None,
) -> GammaEffSweep:
    """fit gamma_eff at each ratio, holding omega_n fixed and setting gamma = omega_n / ratio"""
    ratios = np.asarray(omega_n_over_gamma, dtype=float)
    if ratios.ndim != 1 or len(ratios) == 0:
        raise ValidationError('the sweep needs at least one ratio')
    if not np.all(np.isfinite(ratios)) or np.any(ratios <= 0):
        raise ValidationError('sweep ratios must be finite and positive')
    if (omega_n := collective_rabi(p)) <= 0:
        raise ValidationError('the sweep needs a positive collective rabi frequency')

    def point(ratio: float) -> SweepRow:
        q = replace(p, gamma=omega_n / ratio)
        series = simulate_absorption(q, samples=samples, tol=tol)
        fit = fit_gamma_eff(series, q.n_atoms, gamma=q.gamma)
        logger.debug(f'ratio={ratio:.4g}: gamma_eff={fit.gamma_eff:.6g} ({fit.regime.value})')
        return SweepRow(
            float(ratio),
            q.gamma,
            fit.gamma_eff,
            fit.regime,
            fit.fit_residual,
            omega_n,
            fit.undershoot,
        )

    ordered = np.sort(ratios)
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            rows = tuple(executor.map(point, ordered))
    else:
        rows = tuple(map(point, ordered))

    sweep = GammaEffSweep(rows)
    logger.info(f'swept {len(rows)} ratios, regime flip near omega_n/gamma={sweep.flip_ratio}')
    return sweep
