"""Metropolis-Hastings and Gibbs kernels for counts, root totals and lifetimes.

Each kernel leaves the joint posterior of the :class:`McmcState` invariant
and returns an accept flag (or the number of accepted proposals for the
vectorised variants).  Times are 0-based; the count ``c[t]`` links
``w[t]`` and ``w[t+1]``.
"""

import math

import numpy as np
from scipy.special import gammaln

from ..samplers import sample_bessel_count, sample_ztpoisson
from ..types import ObsKind
from .state import McmcState


def accept(log_r, rng):
    if math.isnan(log_r):
        return False
    return log_r >= 0 or rng.random() < math.exp(log_r)


def _log_pois(n, lam):
    if lam == 0:
        return 0.0 if n == 0 else -math.inf
    return n * math.log(lam) - lam - math.lgamma(n + 1)


def _log_binom(k, n, p):
    if k < 0 or k > n:
        return -math.inf
    if p >= 1.0:
        return 0.0 if k == n else -math.inf
    if p <= 0.0:
        return 0.0 if k == 0 else -math.inf
    return (math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
            + k * math.log(p) + (n - k) * math.log1p(-p))


def two_point_count_probs(phi, tau, w):
    """(P(c=0), P(c=1)) from the printed two-point rule for a vanishing next weight.

    Kept as a documented reference only: under the model a positive count
    forces a positive next weight, so the sampler sets c = 0 whenever the
    next weight is zero.
    """
    p0 = 1.0 / (1.0 + phi * w * (tau + phi))
    return p0, 1.0 - p0


# ---- latent node counts -------------------------------------------------

def latent_count_log_ratio(c_new, c_old, w_next, phi, tau):
    """log r for a zero-truncated Poisson proposal: Gamma(w_next; c~, r) / Gamma(w_next; c, r)."""
    r = tau + phi
    return (c_new - c_old) * math.log(r * w_next) + math.lgamma(c_old) - math.lgamma(c_new)


def update_latent_count(state: McmcState, t, k, rng):
    """MH update of c[t, k] given w[t, k] > 0 and w[t+1, k]."""
    w_cur = state.w[t, k]
    if not w_cur > 0:
        raise ValueError(f"node {k} is not alive at t={t}")
    w_next = state.w[t + 1, k]
    if w_next == 0:
        state.c[t, k] = 0
        return True
    hp = state.hp
    c_new = int(sample_ztpoisson(hp.phi * w_cur, rng))
    if accept(latent_count_log_ratio(c_new, int(state.c[t, k]), w_next, hp.phi, hp.tau), rng):
        state.c[t, k] = c_new
        return True
    return False


def update_latent_counts(state: McmcState, rng):
    """All node counts at once; they are conditionally independent given the weights."""
    if state.T < 2:
        return 0, 0
    hp = state.hp
    both = (state.w[:-1] > 0) & (state.w[1:] > 0)
    n = int(both.sum())
    if n == 0:
        return 0, 0
    w_cur = state.w[:-1][both]
    w_next = state.w[1:][both]
    c_old = state.c[both]
    c_new = sample_ztpoisson(hp.phi * w_cur, rng)
    log_r = ((c_new - c_old) * np.log((hp.tau + hp.phi) * w_next)
             + gammaln(c_old) - gammaln(c_new))
    ok = np.log(rng.random(n)) < log_r
    c_old[ok] = c_new[ok]
    state.c[both] = c_old
    return int(ok.sum()), n


def resample_counts_exact(state: McmcState, rng):
    """Exact draw of every node and root count from its Bessel conditional."""
    if state.T < 2:
        return
    hp = state.hp
    r = hp.tau + hp.phi
    both = (state.w[:-1] > 0) & (state.w[1:] > 0)
    c = np.zeros_like(state.c)
    if both.any():
        x = hp.phi * state.w[:-1][both] * r * state.w[1:][both]
        c[both] = sample_bessel_count(1.0, x, rng, shift=1)
    state.c = c
    x = hp.phi * state.w_root[:-1] * r * state.w_root[1:]
    state.c_root = sample_bessel_count(hp.alpha - 1.0, x, rng)


# ---- lifetime moves -----------------------------------------------------

def _rest(state, t, k):
    return state.w[t].sum() - state.w[t, k] + state.w_root[t]


def death_log_ratio(state: McmcState, t, k, c_new, w_new):
    """log r for replacing (c[t,k], w[t+1,k]) by a draw from the forward prior."""
    w_old = state.w[t + 1, k]
    R = _rest(state, t + 1, k)
    log_r = -(R + w_new) ** 2 + (R + w_old) ** 2
    if t + 1 < state.T - 1:
        c2 = int(state.c[t + 1, k])
        phi = state.hp.phi
        log_r += _log_pois(c2, phi * w_new) - _log_pois(c2, phi * w_old)
    return log_r


def birth_log_ratio(state: McmcState, t, k, c_new, w_new):
    """log r for replacing (c[t,k], w[t,k]) by a draw from the time-reversed prior."""
    w_old = state.w[t, k]
    R = _rest(state, t, k)
    log_r = -(R + w_new) ** 2 + (R + w_old) ** 2
    if t > 0:
        c0 = int(state.c[t - 1, k])
        phi = state.hp.phi
        log_r += _log_pois(c0, phi * w_new) - _log_pois(c0, phi * w_old)
    return log_r


def _prior_pair(state, w_from, rng):
    hp = state.hp
    c_new = int(rng.poisson(hp.phi * w_from))
    w_new = float(rng.gamma(c_new, 1.0 / (hp.tau + hp.phi))) if c_new > 0 else 0.0
    return c_new, w_new


def update_joint_count_weight_death(state: McmcState, t, k, rng, proposal=None):
    """Joint independence move on (c[t,k], w[t+1,k]) that can kill node k after t.

    The proposal is the prior c ~ Poisson(phi w[t,k]), w ~ Gamma(c, tau+phi)
    (w = 0 when c = 0).  Requires m[t+1,k] = 0.
    """
    if state.m[t + 1, k] > 0:
        raise ValueError(f"node {k} interacts at t={t + 1}; the death move does not apply")
    if not state.w[t, k] > 0:
        return False
    c_new, w_new = proposal if proposal is not None else _prior_pair(state, state.w[t, k], rng)
    if accept(death_log_ratio(state, t, k, c_new, w_new), rng):
        state.c[t, k] = c_new
        state.w[t + 1, k] = w_new
        return True
    return False


def update_birth_move(state: McmcState, t, k, rng, proposal=None):
    """Mirror of the death move on (c[t,k], w[t,k]) given w[t+1,k] > 0; requires m[t,k] = 0."""
    if state.m[t, k] > 0:
        raise ValueError(f"node {k} interacts at t={t}; the birth move does not apply")
    if not state.w[t + 1, k] > 0:
        return False
    c_new, w_new = proposal if proposal is not None else _prior_pair(state, state.w[t + 1, k], rng)
    if accept(birth_log_ratio(state, t, k, c_new, w_new), rng):
        state.c[t, k] = c_new
        state.w[t, k] = w_new
        return True
    return False


def lifetime_moves(state: McmcState, rng):
    """Death then birth move for every eligible (t, k), nodes in random order."""
    if state.T < 2:
        return 0, 0
    acc = tried = 0
    for t in range(state.T - 1):
        for k in rng.permutation(state.K):
            if state.m[t + 1, k] == 0 and state.w[t, k] > 0:
                tried += 1
                acc += update_joint_count_weight_death(state, t, k, rng)
            if state.m[t, k] == 0 and state.w[t + 1, k] > 0:
                tried += 1
                acc += update_birth_move(state, t, k, rng)
    return acc, tried


# ---- interaction counts -------------------------------------------------

def _pair_rates(state, t):
    i, j = state.pairs[:, 0], state.pairs[:, 1]
    wt = state.w[t]
    return np.where(i == j, wt[i] * wt[i], 2.0 * wt[i] * wt[j])


def interaction_log_ratio(n_new_total, n_old_total, nxt_old, pi_out, old_prop, old_cur, lam):
    """log r for the joint (n_new, n_old) proposal at one pair.

    The binomial link to the next remembered count is the only target term
    not cancelled by the proposal; the zero-truncation of the new-count
    draw when nothing is remembered contributes 1 - exp(-lam).
    """
    log_r = 0.0
    if nxt_old is not None:
        log_r += _log_binom(nxt_old, n_new_total, pi_out) - _log_binom(nxt_old, n_old_total, pi_out)
    h = math.log(-math.expm1(-lam)) if lam > 0 else -math.inf
    if old_prop == 0:
        log_r += h
    if old_cur == 0:
        log_r -= h
    return log_r


def update_interaction_counts(state: McmcState, t, p, rng):
    """MH update of (n_new, n_old) at pair index ``p`` and time ``t`` (BINARY data)."""
    if state.kind is not ObsKind.BINARY:
        raise ValueError("interaction-count updates need binary observations")
    if not state.z[t, p]:
        state.n_new[t, p] = state.n_old[t, p] = 0
        return True
    pi_in = state.forget_probs()[t - 1] if t > 0 else 0.0
    n_prev = int(state.n_total(t - 1)[p]) if t > 0 else 0
    lam = float(_pair_rates(state, t)[p])
    o = int(rng.binomial(n_prev, pi_in)) if n_prev else 0
    if o == 0:
        if lam == 0:
            return False
        n = int(sample_ztpoisson(lam, rng))
    else:
        n = int(rng.poisson(lam))
    nxt, pi_out = None, None
    if t < state.T - 1:
        nxt, pi_out = int(state.n_old[t + 1, p]), state.forget_probs()[t]
    cur_total = int(state.n_new[t, p] + state.n_old[t, p])
    log_r = interaction_log_ratio(n + o, cur_total, nxt, pi_out, o, int(state.n_old[t, p]), lam)
    if accept(log_r, rng):
        i, j = state.pairs[p]
        dm = n - int(state.n_new[t, p])
        state.n_new[t, p] = n
        state.n_old[t, p] = o
        state.m[t, i] += dm
        state.m[t, j] += dm
        return True
    return False


def update_interaction_slice(state: McmcState, t, rng):
    """Vectorised version of :func:`update_interaction_counts` over all pairs at ``t``."""
    z = state.z[t]
    idx = np.flatnonzero(z)
    if len(idx) == 0:
        return 0, 0
    lam = _pair_rates(state, t)[idx]
    if t > 0:
        n_prev = state.n_total(t - 1)[idx]
        o = rng.binomial(n_prev, state.forget_probs()[t - 1])
    else:
        o = np.zeros(len(idx), dtype=np.int64)
    n = np.zeros(len(idx), dtype=np.int64)
    zt = o == 0
    feasible = ~(zt & (lam == 0))
    sel = zt & feasible
    if sel.any():
        n[sel] = sample_ztpoisson(lam[sel], rng)
    sel = ~zt
    if sel.any():
        n[sel] = rng.poisson(lam[sel])
    with np.errstate(divide="ignore"):
        h = np.log(-np.expm1(-lam))
    old_cur = state.n_old[t, idx]
    log_r = np.where(o == 0, h, 0.0) - np.where(old_cur == 0, h, 0.0)
    if t < state.T - 1:
        nxt = state.n_old[t + 1, idx]
        pi = state.forget_probs()[t]
        tot_new = n + o
        tot_cur = state.n_new[t, idx] + old_cur
        log_r = log_r + _log_binom_vec(nxt, tot_new, pi) - _log_binom_vec(nxt, tot_cur, pi)
    log_r = np.where(feasible, log_r, -np.inf)
    with np.errstate(invalid="ignore"):
        ok = np.log(rng.random(len(idx))) < log_r
    if ok.any():
        acc = idx[ok]
        state.n_new[t, acc] = n[ok]
        state.n_old[t, acc] = o[ok]
        state.m[t] = state.multiplicities(t)
    return int(ok.sum()), len(idx)


def _log_binom_vec(k, n, p):
    k = np.asarray(k)
    n = np.asarray(n)
    out = np.full(k.shape, -np.inf)
    ok = (k >= 0) & (k <= n)
    if p >= 1.0:
        out[ok & (k == n)] = 0.0
        return out
    kk, nn = k[ok], n[ok]
    out[ok] = (gammaln(nn + 1) - gammaln(kk + 1) - gammaln(nn - kk + 1)
               + kk * math.log(p) + (nn - kk) * math.log1p(-p))
    return out


def gibbs_interactions_no_death(state: McmcState, t, rng):
    """Exact draw of n_new at ``t`` when nothing is ever forgotten.

    The remembered count equals the previous total, so only the new count
    is free: zero-truncated Poisson if the pair is observed for the first
    time, Poisson if already connected, zero if unconnected.  Remembered
    counts downstream are refreshed.
    """
    z = state.z[t]
    old = state.n_old[t]
    lam = _pair_rates(state, t)
    n = np.zeros_like(state.n_new[t])
    first = z & (old == 0)
    again = z & (old > 0)
    if first.any():
        n[first] = sample_ztpoisson(lam[first], rng)
    if again.any():
        n[again] = rng.poisson(lam[again])
    state.n_new[t] = n
    state.m[t] = state.multiplicities(t)
    for s in range(t + 1, state.T):
        state.n_old[s] = state.n_total(s - 1)


def resample_remembered_counts(state: McmcState, rng):
    """COUNTS data: the remembered counts do not touch the likelihood, so draw them from the prior."""
    if state.no_memory:
        state.n_old[:] = 0
        return
    pi = state.forget_probs()
    for t in range(1, state.T):
        state.n_old[t] = rng.binomial(state.n_total(t - 1), pi[t - 1])


# ---- root totals --------------------------------------------------------

def root_count_log_ratio(c_new, c_old, w_root_next, alpha, phi, tau):
    return ((c_new - c_old) * math.log((phi + tau) * w_root_next)
            + math.lgamma(alpha + c_old) - math.lgamma(alpha + c_new))


def update_root_count(state: McmcState, t, rng):
    """MH update of c_root[t] with a Poisson(phi w_root[t]) proposal."""
    if not 0 <= t < state.T - 1:
        raise ValueError(f"root count index {t} out of range")
    hp = state.hp
    c_new = int(rng.poisson(hp.phi * state.w_root[t]))
    log_r = root_count_log_ratio(c_new, int(state.c_root[t]), state.w_root[t + 1],
                                 hp.alpha, hp.phi, hp.tau)
    if accept(log_r, rng):
        state.c_root[t] = c_new
        return True
    return False


def root_weight_proposal_rate(state: McmcState, t, w_root):
    return state.rate(t) + 2.0 * state.w[t].sum() + w_root


def root_weight_log_ratio(state: McmcState, t, w_new):
    """log r for the gamma proposal on the root mass; reduces to s log(b~/b) - (w~^2 - w^2)."""
    w_old = state.w_root[t]
    s = state.root_shape(t)
    b_new = root_weight_proposal_rate(state, t, w_new)
    b_old = root_weight_proposal_rate(state, t, w_old)
    return s * math.log(b_new / b_old) - (w_new * w_new - w_old * w_old)


def update_root_weight(state: McmcState, t, rng):
    s = state.root_shape(t)
    b = root_weight_proposal_rate(state, t, state.w_root[t])
    w_new = float(rng.gamma(s, 1.0 / b))
    if not w_new > 0:
        return False
    if accept(root_weight_log_ratio(state, t, w_new), rng):
        state.w_root[t] = w_new
        return True
    return False
