"""Hamiltonian Monte Carlo on the log-weights of one time slice."""

import math

import numpy as np

from .state import HmcConfig, McmcState


def slice_terms(state: McmcState, t):
    """(active node mask, gamma shapes a, root mass, rate) for time ``t``."""
    active = state.w[t] > 0
    a = (state.m[t] + state.count_shape(t))[active].astype(float)
    return active, a, state.w_root[t], state.rate(t)


def slice_log_density(y, a, root, rate):
    """Log target in y = log w: sum a y - (sum e^y + root)^2 - rate sum e^y."""
    w = np.exp(y)
    s = w.sum()
    return float(a @ y - (s + root) ** 2 - rate * s)


def slice_gradient(y, a, root, rate):
    w = np.exp(y)
    return a - (2.0 * (w.sum() + root) + rate) * w


def update_weights_hmc(state: McmcState, t, cfg: HmcConfig, rng, stats=None):
    """One HMC transition for the alive weights at time ``t``; returns the accept flag."""
    active, a, root, rate = slice_terms(state, t)
    if not active.any() or cfg.n_leapfrog == 0:
        return True
    y0 = np.log(state.w[t, active])
    eps, M = cfg.step_size, cfg.mass
    p0 = rng.normal(0.0, math.sqrt(M), size=y0.shape)
    y, p = y0.copy(), p0.copy()
    lp0 = slice_log_density(y0, a, root, rate)
    g = slice_gradient(y, a, root, rate)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(cfg.n_leapfrog):
            p = p + 0.5 * eps * g
            y = y + eps * p / M
            g = slice_gradient(y, a, root, rate)
            p = p + 0.5 * eps * g
        lp1 = slice_log_density(y, a, root, rate) if np.all(np.isfinite(y)) else -math.inf
    log_r = lp1 - lp0 - (p @ p - p0 @ p0) / (2.0 * M)
    if stats is not None:
        stats["accept_prob"] = math.exp(min(0.0, log_r)) if math.isfinite(log_r) else 0.0
    if not math.isfinite(log_r) or not np.all(np.isfinite(g)):
        if stats is not None:
            stats["divergent"] = True
        return False
    if log_r >= 0 or rng.random() < math.exp(log_r):
        w_new = np.exp(y)
        if np.any(w_new <= 0):
            return False
        state.w[t, active] = w_new
        return True
    return False


class DualAveraging:
    """Nesterov dual averaging of log step size toward a target acceptance rate."""

    def __init__(self, step_size, target=0.65, gamma=0.05, t0=10.0, kappa=0.75, max_step=math.inf):
        self.max_log = math.log(max_step)
        self.mu = math.log(10.0 * step_size)
        self.target = target
        self.gamma, self.t0, self.kappa = gamma, t0, kappa
        self.h_bar = 0.0
        self.log_eps_bar = math.log(step_size)
        self.n = 0
        self.step_size = step_size

    def update(self, accept_prob):
        self.n += 1
        n = self.n
        eta = 1.0 / (n + self.t0)
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (self.target - accept_prob)
        log_eps = min(self.mu - math.sqrt(n) / self.gamma * self.h_bar, self.max_log)
        w = n ** -self.kappa
        self.log_eps_bar = w * log_eps + (1.0 - w) * self.log_eps_bar
        self.step_size = math.exp(log_eps)
        return self.step_size

    def final(self):
        return math.exp(self.log_eps_bar)
