"""Exact simulation of a qubit protected by row and column symmetries of a spin lattice."""

from .classifier import (
    Action,
    ClassifierVerdict,
    LogicalClass,
    ScalingPrediction,
    classify_string,
    logical_projection_oracle,
    minimum_effective_order,
    predict_dominant_scaling,
)
from .config import ConfigError, ExperimentConfig, config_from_dict, load_config
from .dynamics import (
    PulseSpec,
    Schedule,
    TimeDependentHamiltonian,
    evolve_state,
    order_study,
    schedule_eval,
)
from .lattice import (
    Axis,
    DenseOperator,
    LatticeSpec,
    PauliString,
    algebra_relation,
    build_collective_field,
    build_pauli_string,
    build_protection_hamiltonian,
    build_symmetry_operators,
)
from .protocols import (
    LogicalDecomposition,
    NoiseSpec,
    calibrate_g_max,
    rotation_axis_angle,
    run_initialization,
    run_manipulation,
    sweep_noise_deviation,
)
from .runner import run_config
from .spectrum import (
    LogicalBasis,
    extract_logical_basis,
    ground_splitting_scan,
    instantaneous_spectrum,
    logical_basis,
)

__version__ = "0.1.0"
