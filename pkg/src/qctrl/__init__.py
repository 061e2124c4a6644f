"""Constructive control synthesis for bilinear systems on truncated spectra.

Workflow: describe a truncation (``SystemSpec``), certify the hypotheses
(``find_chain``, ``check_nonresonant``, ``check_degenerate_decoupling``),
synthesize a transfer (``synth_transfer``), and simulate it (``propagate``).
"""

from .errors import QctrlError
from .liealg import SkewPair, ad_power, extract_elementary, lie_rank
from .models import (MoleculeParams, SteeringResult, WellParams, example_4x4,
                     infinite_well, molecule_steer_to_ground, planar_molecule,
                     parity_couplings_zero)
from . import propagate
from .propagate import (DensityMatrix, Trajectory, Unitary, density_evolve,
                        fidelity, galerkin, interaction_propagate,
                        l1_lower_bound, step, tail_norm)
from .spectra import (Chain, SystemSpec, chain_from_edges,
                      check_degenerate_decoupling, check_nonresonant,
                      coupled_pairs, couples_prefix, find_chain, reorder_basis)
from .synthesis import (NU, PiecewiseConstantControl, SigmaSchedule,
                        SynthesisParams, TransferReport, averaging_times,
                        l1_upper_bound, nu_constant, period_tau,
                        permutation_to_schedule, phase_tune_drift, reparam,
                        sigma_swap, synth_permutation, synth_transfer,
                        track_schedule)

__all__ = [
    "QctrlError", "SkewPair", "ad_power", "extract_elementary", "lie_rank",
    "MoleculeParams", "SteeringResult", "WellParams", "example_4x4",
    "infinite_well", "molecule_steer_to_ground", "planar_molecule",
    "parity_couplings_zero", "DensityMatrix", "Trajectory", "Unitary",
    "density_evolve", "fidelity", "galerkin", "interaction_propagate",
    "l1_lower_bound", "propagate", "step", "tail_norm",
    "Chain", "SystemSpec",
    "chain_from_edges", "check_degenerate_decoupling", "check_nonresonant",
    "coupled_pairs", "couples_prefix", "find_chain", "reorder_basis", "NU",
    "PiecewiseConstantControl", "SigmaSchedule", "SynthesisParams",
    "TransferReport", "averaging_times", "l1_upper_bound", "nu_constant",
    "period_tau", "permutation_to_schedule", "phase_tune_drift", "reparam",
    "sigma_swap", "synth_permutation", "synth_transfer", "track_schedule",
]

__version__ = "0.1.0"
