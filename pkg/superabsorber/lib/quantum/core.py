"""density matrices, lindblad evolution, steady states and the noise-hamiltonian unraveling"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import splu

from ..errors import (
    DegenerateSteadyStateError,
    DimensionError,
    IntegrationError,
    NoiseCalibrationError,
    NumericalError,
    ValidationError,
)

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
POSITIVITY_TOL = 1e-9
NULL_SPACE_TOL = 1e-10
FIXED_POINT_TOL = 1e-10
DEFAULT_TOL = 1e-8
MAX_TOL = 1e-3

# exact null-space multiplicity from the dense spectrum up to this dim
DENSE_SPECTRUM_MAX_DIM = 24
# beyond this dim the steady state comes from long-time integration
DENSE_STEADY_STATE_MAX_DIM = 60

NOISE_BATCH_SIZE = 256
# phases are drawn for at most this many steps of a batch at a time
NOISE_CHUNK_STEPS = 512
NOISE_DT_FRACTION = 0.05
CALIBRATION_ENSEMBLE = 4096
CALIBRATION_MAX_STEPS = 64
CALIBRATION_SIGMAS = 5.0


def _square(elements: object, what: str) -> np.ndarray:
    a = np.array(elements, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValidationError(f"'{what}' must be a non-empty square matrix, got shape {a.shape}")
    a.setflags(write=False)
    return a


def hermiticity_error(a: np.ndarray) -> float:
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    elements: np.ndarray
    hermitian: bool = False
    label: str = ''

    def __post_init__(self) -> None:
        elements = _square(self.elements, self.label or 'operator')
        object.__setattr__(self, 'elements', elements)

        scale = max(1.0, float(np.max(np.abs(elements))))
        if self.hermitian and (err := hermiticity_error(elements)) > HERMITIAN_TOL * scale:
            raise ValidationError(f"'{self.label or 'operator'}' is not hermitian ({err:.2e})")

    @property
    def dim(self) -> int:
        return self.elements.shape[0]

    @classmethod
    def projector(cls, dim: int, index: int, label: str = '') -> OperatorMatrix:
        p = np.zeros((dim, dim), dtype=complex)
        p[index, index] = 1.0
        return cls(p, hermitian=True, label=label or f'|{index}><{index}|')

    @classmethod
    def ket_bra(cls, dim: int, ket: int, bra: int, label: str = '') -> OperatorMatrix:
        a = np.zeros((dim, dim), dtype=complex)
        a[ket, bra] = 1.0
        return cls(a, hermitian=ket == bra, label=label or f'|{ket}><{bra}|')

    @classmethod
    def from_ket(cls, ket: np.ndarray, label: str = '') -> OperatorMatrix:
        ket = np.asarray(ket, dtype=complex)
        return cls(np.outer(ket, ket.conj()), hermitian=True, label=label)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """trace-one hermitian positive operator, checked by `check`"""

    elements: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, 'elements', _square(self.elements, 'density matrix'))

    @property
    def dim(self) -> int:
        return self.elements.shape[0]

    def __getitem__(self, index: Tuple[int, int]) -> complex:
        return complex(self.elements[index])

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.elements))

    @property
    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.elements)).copy()

    @property
    def purity(self) -> float:
        return float(np.real(np.trace(self.elements @ self.elements)))

    @property
    def eigenvalues(self) -> np.ndarray:
        hermitian_part = (self.elements + self.elements.conj().T) / 2
        return la.eigvalsh(hermitian_part)

    @property
    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues[0])

    def check(
        self,
        trace_tol: float = TRACE_TOL,
        hermitian_tol: float = HERMITIAN_TOL,
        positivity_tol: float = POSITIVITY_TOL,
        what: str = 'density matrix',
    ) -> DensityMatrix:
        if not np.all(np.isfinite(self.elements)):
            raise ValidationError(f'{what} has non-finite elements')
        if (err := hermiticity_error(self.elements)) > hermitian_tol:
            raise ValidationError(f'{what} is not hermitian ({err:.2e})')
        if (err := abs(self.trace - 1)) > trace_tol:
            raise ValidationError(f'{what} trace deviates from one by {err:.2e}')
        if (low := self.min_eigenvalue) < -positivity_tol:
            raise ValidationError(f'{what} has negative eigenvalue {low:.2e}')
        return self

    @classmethod
    def from_ket(cls, ket: Iterable[complex]) -> DensityMatrix:
        ket = np.asarray(list(ket), dtype=complex)
        ket = ket / np.linalg.norm(ket)
        return cls(np.outer(ket, ket.conj()))

    @classmethod
    def basis(cls, dim: int, index: int) -> DensityMatrix:
        rho = np.zeros((dim, dim), dtype=complex)
        rho[index, index] = 1.0
        return cls(rho)

    @classmethod
    def maximally_mixed(cls, dim: int) -> DensityMatrix:
        return cls(np.eye(dim, dtype=complex) / dim)

    @classmethod
    def mixture(cls, states: Sequence[DensityMatrix], weights: Sequence[float]) -> DensityMatrix:
        return cls(sum(w * s.elements for w, s in zip(weights, states)))


@dataclass(frozen=True, eq=False)
class TimeSeries:
    times: np.ndarray
    values: np.ndarray
    label: str = ''
    unit: str = '1/Omega_N'

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values)
        if times.ndim != 1 or values.shape[:1] != times.shape:
            raise ValidationError(
                f"time series '{self.label}' has {values.shape[:1]} values for {times.shape} times"
            )
        if np.any(np.diff(times) <= 0):
            raise ValidationError(f"time series '{self.label}' times must be strictly increasing")
        object.__setattr__(self, 'times', times)
        object.__setattr__(self, 'values', values)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def final(self) -> complex:
        return self.values[-1]


@dataclass(frozen=True)
class NoiseSpec:
    """white-noise detunings <D_i(t) D_j(t')> = gamma delta_ij delta(t - t')"""

    gamma: float
    n_sites: int
    seed: int
    dt: float
    ensemble_size: int = 1

    def __post_init__(self) -> None:
        if self.gamma < 0:
            raise ValidationError(f'noise gamma must be >= 0, got {self.gamma}')
        if self.dt <= 0:
            raise ValidationError(f'noise dt must be > 0, got {self.dt}')
        if self.ensemble_size < 1:
            raise ValidationError(f'ensemble_size must be >= 1, got {self.ensemble_size}')
        if self.n_sites < 1:
            raise ValidationError(f'n_sites must be >= 1, got {self.n_sites}')
        if not 0 <= self.seed < 2**64:
            raise ValidationError(f'seed must be an unsigned 64-bit integer, got {self.seed}')

    @property
    def phase_variance_per_time(self) -> float:
        """sigma^2 / dt of the per-step phases, matched to the lindblad rate"""
        return 2.0 * self.gamma

    def member_rng(self, member: int) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=self.seed ^ member))


def _check_dims(dim: int, h: OperatorMatrix, jumps: Sequence[OperatorMatrix]) -> None:
    if h.dim != dim:
        raise DimensionError(h.label or 'hamiltonian', dim, h.dim)
    for i, c in enumerate(jumps):
        if c.dim != dim:
            raise DimensionError(c.label or f'jumps[{i}]', dim, c.dim)


def _check_rate(rate: float) -> None:
    if rate < 0 or not np.isfinite(rate):
        raise ValidationError(f'dissipation rate must be finite and >= 0, got {rate}')


def lindblad_rhs(
    rho: DensityMatrix,
    h: OperatorMatrix,
    jumps: Sequence[OperatorMatrix],
    rate: float,
) -> np.ndarray:
    """-i[H, rho] + rate sum_i (2 c rho c^dag - c^dag c rho - rho c^dag c), hbar = 1"""
    _check_dims(rho.dim, h, jumps)
    _check_rate(rate)

    r = rho.elements
    H = h.elements
    drho = -1j * (H @ r - r @ H)

    if jumps and rate:
        c = np.stack([j.elements for j in jumps])
        c_dag = c.conj().transpose(0, 2, 1)
        c_dag_c = c_dag @ c
        drho = drho + rate * np.sum(2 * c @ r @ c_dag - c_dag_c @ r - r @ c_dag_c, axis=0)

    return drho


def liouvillian(
    h: OperatorMatrix,
    jumps: Sequence[OperatorMatrix],
    rate: float,
) -> sp.csr_matrix:
    """the superoperator of `lindblad_rhs` acting on row-major vec(rho)"""
    _check_dims(h.dim, h, jumps)
    _check_rate(rate)

    eye = sp.identity(h.dim, dtype=complex, format='csr')
    H = sp.csr_matrix(h.elements)
    L = -1j * (sp.kron(H, eye) - sp.kron(eye, H.T))

    for j in jumps:
        c = sp.csr_matrix(j.elements)
        c_dag_c = (c.conj().T @ c).tocsr()
        L = L + rate * (2 * sp.kron(c, c.conj()) - sp.kron(c_dag_c, eye) - sp.kron(eye, c_dag_c.T))

    return sp.csr_matrix(L)


def _check_grid(t_grid: Sequence[float]) -> np.ndarray:
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or len(t) < 1:
        raise ValidationError('time grid must be a non-empty 1-d array')
    if not np.all(np.isfinite(t)):
        raise ValidationError('time grid must be finite')
    if np.any(np.diff(t) <= 0):
        raise ValidationError('time grid must be strictly increasing')
    return t


def _audit(states: Sequence[DensityMatrix], times: np.ndarray) -> None:
    """report integrator drift past the density-matrix tolerances"""
    for t, rho in zip(times, states):
        if not np.all(np.isfinite(rho.elements)):
            raise IntegrationError('non-finite state', t=float(t))
        if abs(rho.trace - 1) > TRACE_TOL:
            logger.warning(f'trace drift {abs(rho.trace - 1):.2e} at t={t:.6g}')
        if (low := rho.min_eigenvalue) < -POSITIVITY_TOL:
            logger.warning(f'positivity drift {low:.2e} at t={t:.6g}')


def evolve(
    rho0: DensityMatrix,
    h: OperatorMatrix,
    jumps: Sequence[OperatorMatrix],
    rate: float,
    t_grid: Sequence[float],
    tol: float = DEFAULT_TOL,
    method: str = 'RK45',
) -> List[DensityMatrix]:
    """integrate the master equation, sampling rho at every point of t_grid

    rho0 is the state at t_grid[0]. Steps adapt with an embedded 4(5) pair.
    """
    rho0.check(what='initial state')
    _check_dims(rho0.dim, h, jumps)
    t = _check_grid(t_grid)
    if not 0 < tol <= MAX_TOL:
        raise ValidationError(f'tol must lie in (0, {MAX_TOL}], got {tol}')

    if len(t) == 1:
        return [rho0]

    L = liouvillian(h, jumps, rate)
    dim = rho0.dim

    def rhs(time: float, y: np.ndarray) -> np.ndarray:
        dy = L @ y
        if not np.all(np.isfinite(dy)):
            raise IntegrationError('non-finite derivative', t=time)
        return dy

    logger.debug(f'evolving dim={dim} over [{t[0]:.4g}, {t[-1]:.4g}] with {method}, tol={tol:g}')
    sol = solve_ivp(
        rhs,
        (t[0], t[-1]),
        rho0.elements.ravel(),
        method=method,
        t_eval=t,
        rtol=tol,
        atol=tol * 1e-2,
    )
    if sol.status != 0:
        failed_at = float(sol.t[-1]) if len(sol.t) else float(t[0])
        raise IntegrationError(f'integration failed: {sol.message}', t=failed_at)

    states = [DensityMatrix(sol.y[:, k].reshape(dim, dim)) for k in range(len(t))]
    _audit(states, t)
    return states


def expectation(rho: DensityMatrix, obs: OperatorMatrix) -> complex:
    if rho.dim != obs.dim:
        raise DimensionError(obs.label or 'observable', rho.dim, obs.dim)
    return complex(np.trace(rho.elements @ obs.elements))


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    if a.dim != b.dim:
        raise DimensionError('b', a.dim, b.dim)
    return float(0.5 * np.sum(la.svdvals(a.elements - b.elements)))


def _rate_scale(h: OperatorMatrix, rate: float) -> float:
    return max(1.0, float(np.max(np.abs(h.elements))), rate)


def _null_space_multiplicity(L: sp.csr_matrix, scale: float) -> int:
    eigenvalues = la.eigvals(L.toarray())
    return int(np.sum(np.abs(eigenvalues) < NULL_SPACE_TOL * scale))


def steady_state(
    h: OperatorMatrix,
    jumps: Sequence[OperatorMatrix],
    rate: float,
    tol: float = DEFAULT_TOL,
) -> DensityMatrix:
    """the unique fixed point of the master equation"""
    dim = h.dim
    _check_dims(dim, h, jumps)
    scale = _rate_scale(h, rate)

    if dim > DENSE_STEADY_STATE_MAX_DIM:
        logger.info(f'dim={dim} > {DENSE_STEADY_STATE_MAX_DIM}, steady state by integration')
        return _steady_state_by_integration(h, jumps, rate, tol)

    L = liouvillian(h, jumps, rate)
    if dim <= DENSE_SPECTRUM_MAX_DIM and (m := _null_space_multiplicity(L, scale)) > 1:
        raise DegenerateSteadyStateError(m)

    # border the singular liouvillian with the trace functional on row 0
    weight = float(np.mean(np.abs(L.data))) if L.nnz else 1.0
    trace_row = sp.csr_matrix(
        (np.full(dim, weight, dtype=complex), (np.zeros(dim), np.arange(dim) * (dim + 1))),
        shape=L.shape,
    )
    b = np.zeros(dim * dim, dtype=complex)
    b[0] = weight

    try:
        v = splu(sp.csc_matrix(L + trace_row)).solve(b)
    except RuntimeError as e:
        raise DegenerateSteadyStateError(2, exact=False) from e
    if not np.all(np.isfinite(v)):
        raise DegenerateSteadyStateError(2, exact=False)

    rho = v.reshape(dim, dim)
    rho = (rho + rho.conj().T) / 2
    rho = DensityMatrix(rho / np.trace(rho))

    residual = float(np.max(np.abs(lindblad_rhs(rho, h, jumps, rate))))
    if residual > FIXED_POINT_TOL * scale:
        raise NumericalError(f'steady state residual {residual:.2e} is not a fixed point')

    return rho.check(what='steady state')


def _steady_state_by_integration(
    h: OperatorMatrix,
    jumps: Sequence[OperatorMatrix],
    rate: float,
    tol: float,
    max_doublings: int = 40,
) -> DensityMatrix:
    scale = _rate_scale(h, rate)
    rho = DensityMatrix.maximally_mixed(h.dim)
    horizon = 10.0 / scale

    for _ in range(max_doublings):
        residual = float(np.max(np.abs(lindblad_rhs(rho, h, jumps, rate))))
        if residual < FIXED_POINT_TOL * scale:
            return rho
        rho = evolve(rho, h, jumps, rate, [0.0, horizon], tol=min(tol, 1e-10))[-1]
        rho = DensityMatrix(rho.elements / rho.trace)
        horizon *= 2

    raise NumericalError(f'no steady state reached after {max_doublings} horizon doublings')


@dataclass(frozen=True, eq=False)
class StochasticResult:
    """ensemble averages of the noise-hamiltonian unraveling"""

    states: List[DensityMatrix]
    series: Dict[str, TimeSeries]
    stderr: Dict[str, np.ndarray]
    noise: NoiseSpec
    calibrated_gamma: float


def _site_phases(site_projectors: Sequence[OperatorMatrix], dim: int) -> np.ndarray:
    """the (n_sites, dim) diagonals of mutually orthogonal diagonal projectors"""
    diagonals = []
    for i, p in enumerate(site_projectors):
        if p.dim != dim:
            raise DimensionError(p.label or f'site_projectors[{i}]', dim, p.dim)
        a = p.elements
        d = np.diag(a)
        if np.max(np.abs(a - np.diag(d))) > HERMITIAN_TOL or np.max(np.abs(d * (d - 1))) > 1e-12:
            name = p.label or f'site_projectors[{i}]'
            raise ValidationError(f"'{name}' is not a diagonal projector")
        diagonals.append(np.real(d))
    diagonals = np.array(diagonals)
    if np.any(diagonals.sum(axis=0) > 1 + 1e-12):
        raise ValidationError('site projectors must be mutually orthogonal')
    return diagonals


def _step_plan(t: np.ndarray, dt: float) -> Tuple[np.ndarray, np.ndarray]:
    """steps per grid interval and their widths, every width <= dt"""
    n_steps = np.maximum(1, np.ceil(np.diff(t) / dt - 1e-9)).astype(int)
    return n_steps, np.diff(t) / n_steps


def calibrate_noise(noise: NoiseSpec, h: Optional[OperatorMatrix] = None) -> float:
    """check dt resolves the fastest scale and that the phase sampling reproduces gamma

    A single site coherence must decay as exp(-gamma t) under the sampled phases,
    the rate the master equation assigns to a site-ground coherence.
    """
    scales = [noise.gamma]
    if h is not None:
        scales.append(2 * float(la.norm(h.elements, 2)))
    if (fastest := max(scales)) > 0 and noise.dt > NOISE_DT_FRACTION / fastest:
        raise NoiseCalibrationError(
            f'dt={noise.dt:g} does not resolve the fastest rate {fastest:g}, '
            f'need dt <= {NOISE_DT_FRACTION / fastest:g}'
        )

    if noise.gamma == 0:
        return 0.0

    n_steps = int(min(np.ceil(0.5 / (noise.gamma * noise.dt)), CALIBRATION_MAX_STEPS))
    t_cal = n_steps * noise.dt
    sigma = np.sqrt(noise.phase_variance_per_time * noise.dt)

    rng = np.random.Generator(np.random.Philox(key=noise.seed ^ 0xCA11B8A7E))
    phases = sigma * rng.standard_normal((CALIBRATION_ENSEMBLE, n_steps)).sum(axis=1)
    coherence = np.cos(phases)
    mean = float(coherence.mean())
    stderr = float(coherence.std(ddof=1) / np.sqrt(CALIBRATION_ENSEMBLE))

    if mean <= CALIBRATION_SIGMAS * stderr:
        raise NoiseCalibrationError(f'calibration coherence {mean:.3g} lost in noise')

    measured = -np.log(mean) / t_cal
    band = CALIBRATION_SIGMAS * stderr / (mean * t_cal)
    logger.debug(f'noise calibration: gamma={noise.gamma:g} measured={measured:g} +- {band:g}')
    if abs(measured - noise.gamma) > band:
        raise NoiseCalibrationError(
            f'sampled dephasing rate {measured:g} differs from gamma={noise.gamma:g} by more '
            f'than {CALIBRATION_SIGMAS:g} standard errors'
        )
    return measured


def stochastic_evolve(
    rho0: DensityMatrix,
    h: OperatorMatrix,
    site_projectors: Sequence[OperatorMatrix],
    noise: NoiseSpec,
    t_grid: Sequence[float],
    observables: Optional[Mapping[str, OperatorMatrix]] = None,
    workers: Optional[int] = None,
) -> StochasticResult:
    """average unitary evolutions under random site detunings over an ensemble

    Each step applies exp(-i phi_i |i><i|) with phi_i ~ N(0, 2 gamma dt) between
    coherent half steps. Member m draws from a counter-based stream keyed by
    seed ^ m and batches are summed in member order, so the result does not
    depend on `workers`.
    """
    rho0.check(what='initial state')
    dim = rho0.dim
    _check_dims(dim, h, [])
    if len(site_projectors) != noise.n_sites:
        raise ValidationError(
            f'noise has {noise.n_sites} sites but {len(site_projectors)} projectors were given'
        )
    diagonals = _site_phases(site_projectors, dim)
    t = _check_grid(t_grid)

    observables = dict(observables or {'rho_00': OperatorMatrix.projector(dim, 0)})
    for name, obs in observables.items():
        if obs.dim != dim:
            raise DimensionError(name, dim, obs.dim)
    obs_ops = np.stack([o.elements for o in observables.values()])

    calibrated = calibrate_noise(noise, h)

    n_steps, widths = _step_plan(t, noise.dt)
    half_steps = {w: la.expm(-0.5j * w * h.elements) for w in np.unique(widths)}

    weights, vectors = la.eigh((rho0.elements + rho0.elements.conj().T) / 2)
    keep = weights > 1e-14
    weights, vectors = weights[keep], vectors[:, keep].T  # (K, dim)

    def run_batch(members: Sequence[int]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        psi = np.broadcast_to(vectors, (len(members),) + vectors.shape).copy()
        rngs = [noise.member_rng(m) for m in members]

        rho_sum = np.zeros((len(t), dim, dim), dtype=complex)
        obs_sum = np.zeros((len(t), len(obs_ops)))
        obs_sq_sum = np.zeros((len(t), len(obs_ops)))

        def record(k: int) -> None:
            rho_m = np.einsum('k,bka,bkc->bac', weights, psi, psi.conj())
            rho_sum[k] = rho_m.sum(axis=0)
            values = np.real(np.einsum('bac,oca->bo', rho_m, obs_ops))
            obs_sum[k] = values.sum(axis=0)
            obs_sq_sum[k] = (values**2).sum(axis=0)

        record(0)
        for k, (n, w) in enumerate(zip(n_steps, widths)):
            u_half_t = half_steps[w].T
            sigma = np.sqrt(noise.phase_variance_per_time * w)
            for start in range(0, n, NOISE_CHUNK_STEPS):
                chunk = min(NOISE_CHUNK_STEPS, n - start)
                # each member's stream is consumed in step order whatever the chunking
                phases = np.stack([rng.standard_normal((chunk, noise.n_sites)) for rng in rngs])
                phase_factors = np.exp(-1j * sigma * (phases @ diagonals))  # (B, chunk, dim)
                for j in range(chunk):
                    psi = psi @ u_half_t
                    psi *= phase_factors[:, None, j, :]
                    psi = psi @ u_half_t
            record(k + 1)

        return rho_sum, obs_sum, obs_sq_sum

    members = np.arange(noise.ensemble_size)
    batches = [members[i : i + NOISE_BATCH_SIZE] for i in range(0, len(members), NOISE_BATCH_SIZE)]
    logger.debug(
        f'stochastic ensemble of {noise.ensemble_size} in {len(batches)} batches, '
        f'{int(n_steps.sum())} steps each, workers={workers or 1}'
    )

    mapper: Callable = map
    if workers and workers > 1:
        executor = ThreadPoolExecutor(max_workers=workers)
        mapper = executor.map
    try:
        results = list(mapper(run_batch, batches))
    finally:
        if workers and workers > 1:
            executor.shutdown()

    rho_sum = np.zeros((len(t), dim, dim), dtype=complex)
    obs_sum = np.zeros((len(t), len(obs_ops)))
    obs_sq_sum = np.zeros((len(t), len(obs_ops)))
    for batch_rho, batch_obs, batch_sq in results:
        rho_sum += batch_rho
        obs_sum += batch_obs
        obs_sq_sum += batch_sq

    M = noise.ensemble_size
    means = obs_sum / M
    variance = np.maximum(obs_sq_sum / M - means**2, 0.0) * (M / max(M - 1, 1))
    errors = np.sqrt(variance / M)

    names = list(observables)
    return StochasticResult(
        states=[DensityMatrix(rho_sum[k] / M) for k in range(len(t))],
        series={name: TimeSeries(t, means[:, i], label=name) for i, name in enumerate(names)},
        stderr={name: errors[:, i] for i, name in enumerate(names)},
        noise=noise,
        calibrated_gamma=calibrated,
    )


@dataclass(frozen=True, eq=False)
class DiscretizationBias:
    """worst trace distance to a reference per noise step, and its fitted slope"""

    dts: Tuple[float, ...]
    distances: Tuple[float, ...]
    coefficient: float
    ensemble_size: int
    runs: Tuple[StochasticResult, ...]

    @property
    def statistical_floor(self) -> float:
        return 3 / np.sqrt(self.ensemble_size)

    def bound(self, dt: float) -> float:
        """3 / sqrt(M) + C dt"""
        return self.statistical_floor + self.coefficient * dt


def fit_discretization_bias(
    rho0: DensityMatrix,
    h: OperatorMatrix,
    site_projectors: Sequence[OperatorMatrix],
    noise: NoiseSpec,
    t_grid: Sequence[float],
    reference: Sequence[DensityMatrix],
    dts: Sequence[float],
    observables: Optional[Mapping[str, OperatorMatrix]] = None,
    workers: Optional[int] = None,
) -> DiscretizationBias:
    """rerun the ensemble at each dt and fit max_t D(rho_avg, reference) = a + C dt

    C is clipped at zero, a negative slope means the bias is below the ensemble noise.
    """
    dts = tuple(float(dt) for dt in dts)
    if len(set(dts)) < 2:
        raise ValidationError(f'need at least two distinct noise steps to fit a bias, got {dts}')
    if len(reference) != len(t_grid):
        raise ValidationError(
            f'reference has {len(reference)} states for a grid of {len(t_grid)} times'
        )

    runs = tuple(
        stochastic_evolve(
            rho0,
            h,
            site_projectors,
            replace(noise, dt=dt),
            t_grid,
            observables=observables,
            workers=workers,
        )
        for dt in dts
    )
    distances = tuple(
        max(trace_distance(a, b) for a, b in zip(run.states, reference)) for run in runs
    )
    slope, _ = np.polyfit(dts, distances, 1)
    coefficient = max(float(slope), 0.0)
    logger.info(
        f'discretization bias over dt={dts}: distances {[round(d, 4) for d in distances]}, '
        f'C={coefficient:.3g}'
    )
    return DiscretizationBias(dts, distances, coefficient, noise.ensemble_size, runs)
