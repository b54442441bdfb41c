"""the saturable single photon subtraction channel and cascades of absorber cells"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import EmptyBranchError, NumericalError, ValidationError
from .core import DEFAULT_TOL, DensityMatrix, OperatorMatrix, evolve
from .fock import LEAK_GUARD, FockField, annihilation

logger = logging.getLogger(__name__)

GROUND, EXCITED = 0, 1
EMPTY_BRANCH_TOL = 1e-14
DISTRIBUTION_TOL = 1e-10

__all__ = [
    'CascadeResult',
    'ChannelGenerator',
    'FockField',
    'JointCellField',
    'MultiSubtraction',
    'SubtractionResult',
    'asymptotic_subtract',
    'build_channel_generator',
    'cascade',
    'closed_form_channel',
    'evolve_channel',
    'multi_subtract',
    'subtraction_weights',
]


@dataclass(frozen=True, eq=False)
class JointCellField:
    """cell {|G>, |E>} tensored with the field, index = cell * (n_max + 1) + n"""

    rho_joint: DensityMatrix

    def __post_init__(self) -> None:
        if self.rho_joint.dim % 2 or self.rho_joint.dim < 4:
            raise ValidationError(
                f'joint dim must be 2 (n_max + 1) with n_max >= 1, got {self.rho_joint.dim}'
            )

    @property
    def n_max(self) -> int:
        return self.rho_joint.dim // 2 - 1

    def block(self, row: int, col: int) -> np.ndarray:
        d = self.n_max + 1
        return self.rho_joint.elements[row * d : (row + 1) * d, col * d : (col + 1) * d]

    @property
    def cell_populations(self) -> Tuple[float, float]:
        return (
            float(np.real(np.trace(self.block(GROUND, GROUND)))),
            float(np.real(np.trace(self.block(EXCITED, EXCITED)))),
        )

    def conditional(self, cell: int) -> Tuple[float, Optional[FockField]]:
        """readout probability of a cell state and the field it leaves behind"""
        block = self.block(cell, cell)
        probability = float(np.real(np.trace(block)))
        if probability <= EMPTY_BRANCH_TOL:
            return max(probability, 0.0), None
        return probability, FockField(DensityMatrix(block / probability))

    @classmethod
    def ground(cls, field: FockField) -> JointCellField:
        d = field.n_max + 1
        rho = np.zeros((2 * d, 2 * d), dtype=complex)
        rho[:d, :d] = field.rho.elements
        return cls(DensityMatrix(rho))

    @classmethod
    def from_blocks(cls, ground: np.ndarray, excited: np.ndarray) -> JointCellField:
        d = ground.shape[0]
        rho = np.zeros((2 * d, 2 * d), dtype=complex)
        rho[:d, :d] = ground
        rho[d:, d:] = excited
        return cls(DensityMatrix(rho))


@dataclass(frozen=True, eq=False)
class ChannelGenerator:
    """c = |E><G| (x) a with the absorption rate, the hamiltonian is zero"""

    jump: OperatorMatrix
    gamma_eff: float
    n_max: int

    @property
    def hamiltonian(self) -> OperatorMatrix:
        return OperatorMatrix(np.zeros_like(self.jump.elements), hermitian=True, label='H')


def build_channel_generator(gamma_eff: float, n_max: int) -> ChannelGenerator:
    if n_max < 1:
        raise ValidationError(f'n_max must be >= 1, got {n_max}')
    if gamma_eff < 0 or not np.isfinite(gamma_eff):
        raise ValidationError(f'gamma_eff must be finite and >= 0, got {gamma_eff}')

    cell = np.zeros((2, 2), dtype=complex)
    cell[EXCITED, GROUND] = 1.0
    c = np.kron(cell, annihilation(n_max).elements)
    if np.any(c @ c):
        raise NumericalError('the channel jump operator must be nilpotent')
    return ChannelGenerator(OperatorMatrix(c, label='c'), gamma_eff, n_max)


def evolve_channel(
    joint0: JointCellField,
    gamma_eff: float,
    t_grid: Sequence[float],
    tol: float = DEFAULT_TOL,
) -> List[JointCellField]:
    generator = build_channel_generator(gamma_eff, joint0.n_max)
    states = evolve(
        joint0.rho_joint, generator.hamiltonian, [generator.jump], gamma_eff, t_grid, tol=tol
    )
    return [JointCellField(s) for s in states]


def subtraction_weights(n_max: int) -> np.ndarray:
    """2 sqrt(nm) / (n + m), zero where n or m is zero"""
    n = np.arange(n_max + 1, dtype=float)
    total = n[:, None] + n[None, :]
    with np.errstate(invalid='ignore', divide='ignore'):
        w = np.where(total > 0, 2 * np.sqrt(np.outer(n, n)) / total, 0.0)
    return w


def _absorbed(rho: np.ndarray) -> np.ndarray:
    """the unnormalised field left once a photon was absorbed, |n-1><m-1| weighted"""
    out = np.zeros_like(rho)
    out[:-1, :-1] = (subtraction_weights(rho.shape[0] - 1) * rho)[1:, 1:]
    return out


def closed_form_channel(field: FockField, gamma_eff: float, t: float) -> JointCellField:
    """the exact joint state at time t for a cell starting in |G>

    rho_G,nm(t) = rho_nm e^-(n+m) gamma_eff t and the excited block collects
    the balance with the same 2 sqrt(nm) / (n + m) weights.
    """
    rho = field.rho.elements
    n = np.arange(field.n_max + 1)
    decay = np.exp(-np.add.outer(n, n) * gamma_eff * t)
    excited = _absorbed(rho * (1 - decay))
    return JointCellField.from_blocks(rho * decay, excited)


@dataclass(frozen=True, eq=False)
class SubtractionResult:
    p_vac: float
    rho_out: Optional[FockField]
    rho_joint_final: JointCellField

    @property
    def p_fire(self) -> float:
        return 1.0 - self.p_vac


def asymptotic_subtract(
    field: FockField, leak_guard: Optional[float] = LEAK_GUARD
) -> SubtractionResult:
    """the long-time channel: p_vac |G><G| (x) |0><0| + (1 - p_vac) |E><E| (x) rho_out

    rho_out is None when the input is vacuum with certainty.
    """
    field.check(leak_guard)
    rho = field.rho.elements
    p_vac = float(np.real(rho[0, 0]))

    vacuum = np.zeros_like(rho)
    vacuum[0, 0] = p_vac
    absorbed = _absorbed(rho)
    joint = JointCellField.from_blocks(vacuum, absorbed)

    p_fire, rho_out = joint.conditional(EXCITED)
    if rho_out is not None:
        rho_out.check(leak_guard=None)
    return SubtractionResult(p_vac, rho_out, joint)


@dataclass(frozen=True, eq=False)
class CascadeResult:
    k: int
    fired_distribution: np.ndarray
    conditional_outputs: Dict[int, FockField]

    @property
    def most_likely(self) -> int:
        return int(np.argmax(self.fired_distribution))


def _cell_asymptotic(rho: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    dark = np.zeros_like(rho)
    dark[0, 0] = rho[0, 0]
    return dark, _absorbed(rho)


def cascade(
    field: FockField,
    k: int,
    gamma_eff: Optional[float] = None,
    t_cell: Optional[float] = None,
    leak_guard: Optional[float] = LEAK_GUARD,
    tol: float = DEFAULT_TOL,
) -> CascadeResult:
    """pass the field through k cells, each seeing what the previous one let through

    Cells equilibrate fully unless both gamma_eff and t_cell are given, then
    each cell evolves for t_cell. Branches are merged by fired count.
    """
    if k < 1:
        raise ValidationError(f'k must be >= 1, got {k}')
    if (gamma_eff is None) != (t_cell is None):
        raise ValidationError('finite time cascades need both gamma_eff and t_cell')
    if t_cell is not None and t_cell <= 0:
        raise ValidationError(f't_cell must be positive, got {t_cell}')
    field.check(leak_guard)

    branches: Dict[int, np.ndarray] = {0: field.rho.elements.copy()}
    for cell in range(1, k + 1):
        merged: Dict[int, np.ndarray] = {}
        for fired, rho in sorted(branches.items()):
            if (weight := float(np.real(np.trace(rho)))) <= EMPTY_BRANCH_TOL:
                continue
            if t_cell is None:
                dark, lit = _cell_asymptotic(rho)
            else:
                joint0 = JointCellField.ground(FockField(DensityMatrix(rho / weight)))
                final = evolve_channel(joint0, gamma_eff, [0.0, t_cell], tol=tol)[-1]
                dark = weight * final.block(GROUND, GROUND)
                lit = weight * final.block(EXCITED, EXCITED)
            merged[fired] = merged.get(fired, 0) + dark
            merged[fired + 1] = merged.get(fired + 1, 0) + lit
        branches = merged
        logger.debug(f'cell {cell}/{k}: {len(branches)} branches')

    distribution = np.zeros(k + 1)
    outputs: Dict[int, FockField] = {}
    for fired, rho in branches.items():
        distribution[fired] = max(float(np.real(np.trace(rho))), 0.0)
        if distribution[fired] > EMPTY_BRANCH_TOL:
            outputs[fired] = FockField(DensityMatrix(rho / distribution[fired]))

    if abs(distribution.sum() - 1) > DISTRIBUTION_TOL:
        raise NumericalError(f'fired distribution sums to {distribution.sum():.12g}')
    return CascadeResult(k, distribution, outputs)


@dataclass(frozen=True, eq=False)
class MultiSubtraction:
    field: FockField
    probability: float
    p_vac_trace: Tuple[float, ...]


def multi_subtract(
    field: FockField, k: int, leak_guard: Optional[float] = LEAK_GUARD
) -> MultiSubtraction:
    """the field conditioned on k cells all firing, and the probability of that"""
    if k < 1:
        raise ValidationError(f'k must be >= 1, got {k}')

    probability = 1.0
    p_vacs: List[float] = []
    current = field
    for j in range(1, k + 1):
        result = asymptotic_subtract(current, leak_guard=leak_guard if j == 1 else None)
        p_vacs.append(result.p_vac)
        if result.rho_out is None:
            raise EmptyBranchError(
                f'all {k} cells firing has probability 0, '
                f'the field is vacuum after {j - 1} subtractions'
            )
        probability *= result.p_fire
        current = result.rho_out

    return MultiSubtraction(current, probability, tuple(p_vacs))
