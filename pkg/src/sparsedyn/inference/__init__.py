"""Posterior inference for the dynamic network model."""

from .hmc import DualAveraging, slice_gradient, slice_log_density, update_weights_hmc
from .hyper import update_alpha, update_phi, update_rho, update_tau, update_tau_rho
from .kernels import (update_birth_move, update_interaction_counts, update_joint_count_weight_death,
                      update_latent_count, update_root_count, update_root_weight)
from .mcmc import Sampler, Schedule, run_chains, run_mcmc, sample_record
from .state import HmcConfig, McmcState, init_state

__all__ = [
    "DualAveraging", "HmcConfig", "McmcState", "Sampler", "Schedule", "init_state", "run_chains",
    "run_mcmc", "sample_record", "slice_gradient", "slice_log_density", "update_alpha",
    "update_birth_move", "update_interaction_counts", "update_joint_count_weight_death",
    "update_latent_count", "update_phi", "update_rho", "update_root_count", "update_root_weight",
    "update_tau", "update_tau_rho", "update_weights_hmc",
]
