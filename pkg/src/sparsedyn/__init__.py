"""Sparse dynamic networks from dependent gamma-process sociabilities.

Forward simulation, MCMC posterior inference and correctness harnesses for
a Bayesian nonparametric model of time-evolving sparse graphs.
"""

from .bessel import bessel_i, log_bessel_i
from .densities import (edge_persistence_probs, edge_prob_from_history, log_posterior_weights,
                        root_weight_transition_density, weight_transition_density)
from .generative import (sample_count_weight_chain, sample_crp, sample_interactions_urn,
                         simulate_birth_death, simulate_network, step_forgetting)
from .samplers import sample_binomial, sample_gamma, sample_poisson, sample_ztpoisson
from .types import (CountChain, DynamicGraph, HyperParams, InteractionTensor, ObservedNetwork,
                    ObsKind, PriorConfig, WeightChain)

__version__ = "0.1.0"
