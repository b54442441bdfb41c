from .channel import (
    CascadeResult,
    JointCellField,
    SubtractionResult,
    asymptotic_subtract,
    build_channel_generator,
    cascade,
    evolve_channel,
    multi_subtract,
)
from .core import (
    DensityMatrix,
    DiscretizationBias,
    NoiseSpec,
    OperatorMatrix,
    TimeSeries,
    evolve,
    expectation,
    fit_discretization_bias,
    lindblad_rhs,
    steady_state,
    stochastic_evolve,
    trace_distance,
)
from .fock import FockField
from .states import StatePrepSpec, prepare
from .superatom import (
    GammaEffFit,
    SuperatomModel,
    SuperatomParams,
    absorption_fidelity,
    blockade_radius,
    build_model,
    collective_rabi,
    fit_gamma_eff,
    optical_thickness,
    simulate_absorption,
    sweep_gamma_eff,
    two_photon_rabi,
)
from .wigner import WignerGrid, marginal, negativity_volume, wigner
