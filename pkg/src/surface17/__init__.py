"""Simulation laboratory for a minimal Surface-17 error correction experiment.

The package covers the full pipeline: code geometry and gate schedule
(layout), Pauli and Lindblad-derived noise channels (channels), a
Pauli-frame Monte Carlo sampler (pauli_mc), a statevector trajectory
simulator for general channels (trajectories), lookup-table and
rule-based decoders (decoders), and the threshold/sweep experiment
driver (experiment) with a command-line front end (cli).
"""

from .channels import (LindbladRates, NoiseParams, PauliProbs, QuantumChannel,
                       channel_tensor, depolarizing_probs, gate_noise_channel,
                       idle_channel, lindblad_rates, pauli_idle_probs,
                       pauli_twirl, solve_lindblad_channel,
                       validate_noise_ordering)
from .decoders import (LookupTable, build_lut, lut_fidelity,
                       marginalize_to_final_round, ts_decode, ts_fidelity)
from .experiment import (ExperimentResult, SearchConfig, ThresholdPoint,
                         evaluate_point, single_qubit_fidelity, success_predicate,
                         sweep_equal_noise, sweep_threshold, threshold_search)
from .layout import (CodeLayout, PauliOp, build_surface17, check_commutation,
                     pauli_action, validate_schedule)
from .pauli_mc import (JointCounts, RunRecord, apply_faults, sample_many,
                       sample_run, truncated_enumeration_oracle)
from .trajectories import (TrajectoryConfig, apply_kraus_stochastic,
                           dense_channel_oracle, estimate_joint, run_trajectory)
from .validation import ValidationReport

__version__ = "0.1.0"

__all__ = [
    "CodeLayout", "ExperimentResult", "JointCounts", "LindbladRates",
    "LookupTable", "NoiseParams", "PauliOp", "PauliProbs", "QuantumChannel",
    "RunRecord", "SearchConfig", "ThresholdPoint", "TrajectoryConfig",
    "ValidationReport", "apply_faults", "apply_kraus_stochastic", "build_lut",
    "build_surface17", "channel_tensor", "check_commutation",
    "dense_channel_oracle", "depolarizing_probs", "estimate_joint",
    "evaluate_point", "gate_noise_channel", "idle_channel", "lindblad_rates",
    "lut_fidelity", "marginalize_to_final_round", "pauli_action",
    "pauli_idle_probs", "pauli_twirl", "run_trajectory", "sample_many",
    "sample_run", "single_qubit_fidelity", "solve_lindblad_channel",
    "success_predicate", "sweep_equal_noise", "sweep_threshold",
    "threshold_search", "truncated_enumeration_oracle", "ts_decode",
    "ts_fidelity", "validate_noise_ordering", "validate_schedule",
]
