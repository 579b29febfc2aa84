"""Hyperparameter updates: alpha (slice + random walk), phi and tau (count-collapsed), rho."""

import math

import numpy as np
from scipy.special import gammaln

from ..densities import (log_root_weight_transition,
                         log_weight_transition_vec)
from ..types import PriorConfig
from .kernels import accept, resample_counts_exact
from .state import McmcState


def _gamma_prior(x, a, b):
    return a * math.log(b) - math.lgamma(a) + (a - 1.0) * math.log(x) - b * x


def _gamma_lp(x, shape, rate):
    return float(np.sum(shape * np.log(rate) - gammaln(shape) + (shape - 1.0) * np.log(x) - rate * x))


# ---- alpha --------------------------------------------------------------

def alpha_log_target(state: McmcState, alpha, prior: PriorConfig):
    """Log conditional of alpha: prior, one factor alpha per observed node, root-mass chain."""
    if not alpha > 0:
        return -math.inf
    hp = state.hp
    T = state.T
    out = _gamma_prior(alpha, prior.a_alpha, prior.b_alpha) + state.K * math.log(alpha)
    out += _gamma_lp(state.w_root[0], alpha, hp.tau)
    if T > 1:
        out += _gamma_lp(state.w_root[1:], alpha + state.c_root, hp.tau + hp.phi)
    return out


def slice_sample(log_f, x0, rng, width=1.0, max_steps=50, lower=0.0):
    """Univariate slice sampler with stepping out and shrinkage (support x > lower)."""
    log_y = log_f(x0) + math.log(rng.random())
    u = rng.random()
    lo = x0 - width * u
    hi = lo + width
    j = int(rng.random() * max_steps)
    k = max_steps - 1 - j
    while j > 0 and lo > lower and log_f(lo) > log_y:
        lo -= width
        j -= 1
    while k > 0 and log_f(hi) > log_y:
        hi += width
        k -= 1
    lo = max(lo, lower)
    while True:
        x = lo + rng.random() * (hi - lo)
        if x > lower and log_f(x) > log_y:
            return x
        if x < x0:
            lo = x
        else:
            hi = x
        if hi - lo < 1e-12:
            return x0


def update_alpha(state: McmcState, prior: PriorConfig, rng):
    """Slice-sampling step followed by a multiplicative random-walk MH step."""
    f = lambda a: alpha_log_target(state, a, prior)
    a = slice_sample(f, state.hp.alpha, rng, width=max(0.5, 0.5 * state.hp.alpha))
    a_new = a * math.exp(prior.rw_sigma * rng.normal())
    log_r = f(a_new) - f(a) + math.log(a_new / a)
    accepted = accept(log_r, rng)
    state.hp = state.hp.replace(alpha=a_new if accepted else a)
    return accepted


# ---- phi and tau --------------------------------------------------------

def transition_log_lik(state: McmcState, phi, tau, alpha=None):
    """Log density of all weights and root masses with every latent count summed out.

    Each observed node contributes its entry factor (the alpha w^-1 part
    is dropped as it does not involve phi or tau), its Bessel transitions
    and, if it vanishes before the last time, its death atom.
    """
    if alpha is None:
        alpha = state.hp.alpha
    w = state.w
    T = state.T
    alive = w > 0
    first = np.argmax(alive, axis=0)
    w_first = w[first, np.arange(state.K)]
    out = -tau * w_first.sum() - phi * w_first[first > 0].sum()
    if T > 1:
        src = alive[:-1]
        lt = log_weight_transition_vec(w[1:][src], w[:-1][src], phi, tau)
        out += float(np.sum(lt))
        out += _gamma_lp(state.w_root[0], alpha, tau)
        out += float(np.sum(log_root_weight_transition(state.w_root[1:], state.w_root[:-1], alpha, phi, tau)))
    else:
        out += _gamma_lp(state.w_root[0], alpha, tau)
    return out


def phi_log_target(state, phi, prior: PriorConfig, tau=None):
    if not phi > 0:
        return -math.inf
    tau = state.hp.tau if tau is None else tau
    return transition_log_lik(state, phi, tau) + _gamma_prior(phi, prior.a_phi, prior.b_phi)


def tau_log_target(state, tau, prior: PriorConfig, phi=None):
    if not tau > 0:
        return -math.inf
    phi = state.hp.phi if phi is None else phi
    return transition_log_lik(state, phi, tau) + _gamma_prior(tau, prior.a_tau, prior.b_tau)


def phi_log_ratio(state, phi_new, prior):
    phi = state.hp.phi
    return phi_log_target(state, phi_new, prior) - phi_log_target(state, phi, prior) + math.log(phi_new / phi)


def tau_log_ratio(state, tau_new, prior):
    tau = state.hp.tau
    return tau_log_target(state, tau_new, prior) - tau_log_target(state, tau, prior) + math.log(tau_new / tau)


def update_phi(state: McmcState, prior: PriorConfig, rng, resample=True):
    """Multiplicative random walk on phi with the counts collapsed, then fresh counts."""
    phi = state.hp.phi
    if phi == 0:
        return False
    phi_new = phi * math.exp(prior.rw_sigma * rng.normal())
    accepted = accept(phi_log_ratio(state, phi_new, prior), rng)
    if accepted:
        state.hp = state.hp.replace(phi=phi_new)
    if resample:
        resample_counts_exact(state, rng)
    return accepted


def update_tau(state: McmcState, prior: PriorConfig, rng, resample=True):
    tau = state.hp.tau
    tau_new = tau * math.exp(prior.rw_sigma * rng.normal())
    accepted = accept(tau_log_ratio(state, tau_new, prior), rng)
    if accepted:
        state.hp = state.hp.replace(tau=tau_new)
    if resample:
        resample_counts_exact(state, rng)
    return accepted


# ---- rho ----------------------------------------------------------------

def rho_log_lik(state: McmcState, rho):
    """Sum over t >= 2 and pairs of log Binomial(n_old[t]; n[t-1], exp(-rho delta))."""
    if state.T < 2:
        return 0.0
    gaps = state.gaps()
    n_prev = state.n_total_all()[:-1]
    k = state.n_old[1:]
    out = 0.0
    for t in range(state.T - 1):
        lp = -rho * gaps[t]
        nn, kk = n_prev[t], k[t]
        if np.any(kk > nn):
            return -math.inf
        log_q = math.log(-math.expm1(lp)) if rho > 0 else -math.inf
        fail = nn - kk
        if rho == 0 and np.any(fail > 0):
            return -math.inf
        comb = gammaln(nn + 1) - gammaln(kk + 1) - gammaln(fail + 1)
        out += float(np.sum(comb + kk * lp + np.where(fail > 0, fail * log_q, 0.0)))
    return out


def rho_log_target(state, rho, prior):
    if not rho > 0:
        return -math.inf
    return rho_log_lik(state, rho) + _gamma_prior(rho, prior.a_rho, prior.b_rho)


def rho_log_ratio(state, rho_new, prior):
    rho = state.hp.rho
    return rho_log_target(state, rho_new, prior) - rho_log_target(state, rho, prior) + math.log(rho_new / rho)


def update_rho(state: McmcState, prior: PriorConfig, rng):
    rho = state.hp.rho
    if state.no_death or state.no_memory or rho == 0:
        return False
    rho_new = rho * math.exp(prior.rw_sigma * rng.normal())
    if accept(rho_log_ratio(state, rho_new, prior), rng):
        state.hp = state.hp.replace(rho=rho_new)
        return True
    return False


def update_tau_rho(state: McmcState, prior: PriorConfig, rng):
    return update_tau(state, prior, rng), update_rho(state, prior, rng)
