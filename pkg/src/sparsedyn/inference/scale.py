"""Scale moves on whole time slices with the latent counts summed out.

The per-slice HMC works given the latent counts, which pins the overall
level of the weights: the counts on both sides of a slice carry roughly
phi times its mass.  Multiplying every weight at a time (and the root
mass) by a common factor under the count-collapsed target moves along that
direction directly.  Counts are redrawn exactly afterwards, so the
composite update leaves the joint posterior invariant.
"""

from __future__ import annotations

import math

import numpy as np

from ..densities import log_root_weight_transition, log_weight_transition_vec
from .hyper import _gamma_lp, transition_log_lik
from .kernels import accept, resample_counts_exact
from .state import McmcState


def collapsed_log_target(state: McmcState):
    """Log density of weights and root masses given interactions, counts summed out (up to a constant)."""
    hp = state.hp
    w = state.w
    alive = w > 0
    first = np.argmax(alive, axis=0)
    out = transition_log_lik(state, hp.phi, hp.tau)
    out -= float(np.log(w[first, np.arange(state.K)]).sum())
    S = w.sum(axis=1) + state.w_root
    out -= float(np.dot(S, S))
    with np.errstate(divide="ignore"):
        logw = np.where(alive, np.log(np.where(alive, w, 1.0)), 0.0)
    out += float((state.m * logw).sum())
    return out


def local_log_target(state: McmcState, t):
    """The terms of :func:`collapsed_log_target` that involve slice ``t``."""
    hp = state.hp
    phi, tau = hp.phi, hp.tau
    w, U = state.w, state.w_root
    T = state.T
    wt = w[t]
    alive = wt > 0
    out = 0.0
    if t > 0:
        src = w[t - 1] > 0
        out += float(np.sum(log_weight_transition_vec(wt[src], w[t - 1][src], phi, tau)))
        out += float(np.sum(log_root_weight_transition(U[t:t + 1], U[t - 1:t], hp.alpha, phi, tau)))
        born = alive & ~src
    else:
        out += _gamma_lp(U[0], hp.alpha, tau)
        born = alive
    if t < T - 1:
        out += float(np.sum(log_weight_transition_vec(w[t + 1][alive], wt[alive], phi, tau)))
        out += float(np.sum(log_root_weight_transition(U[t + 1:t + 2], U[t:t + 1], hp.alpha, phi, tau)))
    wb = wt[born]
    out -= float(np.sum(np.log(wb) + tau * wb + (phi * wb if t > 0 else 0.0)))
    S = wt.sum() + U[t]
    out -= S * S
    out += float(np.dot(state.m[t][alive], np.log(wt[alive])))
    return out


def _apply(state, ts, factor):
    state.w[ts] *= factor
    state.w_root[ts] *= factor


def scale_log_ratio(state: McmcState, ts, log_s, current=None):
    """log r for scaling the slices ``ts`` by exp(log_s); the state is left unchanged."""
    ts = np.atleast_1d(ts)
    n = int((state.w[ts] > 0).sum()) + len(ts)
    target = collapsed_log_target
    if len(ts) == 1:
        t = int(ts[0])
        target = lambda s: local_log_target(s, t)
    old = target(state) if current is None else current
    saved_w, saved_u = state.w[ts].copy(), state.w_root[ts].copy()
    _apply(state, ts, math.exp(log_s))
    try:
        new = target(state)
    finally:
        state.w[ts], state.w_root[ts] = saved_w, saved_u
    return new - old + n * log_s


def update_scale(state: McmcState, ts, step, rng, stats=None):
    """Random-walk move on log of a common factor for the slices ``ts``; counts are stale afterwards."""
    ts = np.atleast_1d(ts)
    log_s = float(rng.normal(0.0, step))
    log_r = scale_log_ratio(state, ts, log_s)
    if stats is not None:
        stats["accept_prob"] = min(1.0, math.exp(log_r)) if log_r < 0 else 1.0
    if accept(log_r, rng):
        _apply(state, ts, math.exp(log_s))
        return True
    return False


def scale_moves(state: McmcState, steps, rng, adapters=None, global_step=None):
    """One scale move per slice, one across all slices, then an exact count redraw.

    Returns (accepted, tried).
    """
    acc = tried = 0
    for t in range(state.T):
        stats = {}
        step = adapters[t].step_size if adapters else steps[t]
        acc += update_scale(state, t, step, rng, stats)
        tried += 1
        if adapters:
            adapters[t].update(stats["accept_prob"])
    if state.T > 1:
        g = global_step if global_step is not None else float(np.min(steps)) / math.sqrt(state.T)
        acc += update_scale(state, np.arange(state.T), g, rng)
        tried += 1
    resample_counts_exact(state, rng)
    return acc, tried
