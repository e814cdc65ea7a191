"""CRIB photon-echo quantum memory for polarization qubits in V-type media.

Weak-field Maxwell-Bloch simulation of absorption, detuning reversal and
forward or backward retrieval, with the closed-form theory alongside it
as an oracle.
"""
from .analytic import (gamma_backward, gamma_forward, noisy_efficiency, phase_fidelity,
                       response_F_and_J, response_H)
from .bloch import FieldSample, LevelPhases, closed_form_constant_drive, rk4_step
from .config import RunSpec, dump_config, parse_config, parse_config_text
from .errors import ConfigError, NumericalError, ProtocolError
from .medium import (DetuningGrid, EnsembleState, InhomogeneousProfile, QubitState,
                     UnitConvention, build_detuning_grid, init_ground_state)
from .metrics import efficiency, qubit_fidelity, spectral_energy
from .noise import NoiseParams, apply_level_phases, apply_phase_noise, dephasing_factor
from .propagation import (PulseSpec, StageRecord, apply_phase_matching, free_evolution,
                          reverse_detunings, run_absorption, run_retrieval)
from .protocol import absorb, retrieve, run_protocol

__version__ = "0.1.0"
