"""Dense state-vector simulation: gates, oracles, amplitude estimation, the HEA circuit."""

from .ampest import (
    AeOutcome,
    ae_distribution,
    ae_error_bound,
    amplitude_estimate,
    good_mask,
    grover_iterate,
    hadamard_test_state,
    inner_product_estimate,
    inverse_qft,
    median_power,
    median_reps,
    phase_bits_for,
    prepare_mean_state,
    qamc_mean,
)
from .fixed_point import FixedPointFormat
from .hea import HeaSpec, hea_expectations, hea_expectations_batch, hea_hamiltonian, param_shift_grad, shift_jacobian
from .oracles import (
    ContractViolation,
    FunctionOracle,
    LoadError,
    NumericError,
    cell_probabilities,
    grover_rudolph_angles,
    grover_rudolph_load,
    load_distribution,
    oracle_rotation,
)
from .pipeline import PipelineResult, qamc_loss, walk_cost
from .state import (
    CNOT,
    CapacityError,
    RejectedGate,
    StateVector,
    apply_gate,
    check_unitary,
    controlled,
    entanglement_entropy,
    evolve_hamiltonian,
)

__all__ = [
    "AeOutcome", "CNOT", "CapacityError", "ContractViolation", "FixedPointFormat", "FunctionOracle", "HeaSpec",
    "LoadError", "NumericError", "PipelineResult", "RejectedGate", "StateVector", "ae_distribution",
    "ae_error_bound", "amplitude_estimate", "apply_gate", "cell_probabilities", "check_unitary", "controlled",
    "entanglement_entropy", "evolve_hamiltonian", "good_mask", "grover_iterate", "grover_rudolph_angles",
    "grover_rudolph_load", "hadamard_test_state", "hea_expectations", "hea_expectations_batch",
    "hea_hamiltonian", "inner_product_estimate", "inverse_qft", "load_distribution", "median_power",
    "median_reps", "oracle_rotation", "param_shift_grad", "phase_bits_for", "prepare_mean_state", "qamc_loss",
    "qamc_mean", "shift_jacobian", "walk_cost",
]
