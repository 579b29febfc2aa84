"""Closed-form densities and edge probabilities of the dynamic network model."""

import math

import numpy as np
from scipy.special import gammaln

from .bessel import log_bessel_i, log_bessel_i_vec


def gamma_logpdf(x, shape, rate):
    x = np.asarray(x, dtype=float)
    return shape * np.log(rate) - gammaln(shape) + (shape - 1.0) * np.log(x) - rate * x


def weight_transition_density(w_next, w_cur, phi, tau):
    """Law of a node weight one step ahead, with the count marginalised.

    Returns ``(atom, density)``: ``atom`` is the probability that the node
    dies (weight exactly zero next step), ``density`` the continuous part
    evaluated at ``w_next`` (0.0 when ``w_next == 0``).
    """
    if w_next < 0:
        raise ValueError(f"w_next must be >= 0, got {w_next}")
    if not w_cur > 0:
        raise ValueError(f"w_cur must be > 0, got {w_cur}")
    atom = math.exp(-phi * w_cur)
    if w_next == 0 or phi == 0:
        return atom, 0.0
    return atom, math.exp(log_weight_transition(w_next, w_cur, phi, tau))


def log_weight_transition(w_next, w_cur, phi, tau):
    """Log of the continuous part of :func:`weight_transition_density` (w_next > 0)."""
    r = tau + phi
    arg = 2.0 * math.sqrt(w_next * phi * w_cur * r)
    return (log_bessel_i(-1, arg) + 0.5 * math.log(phi * r * w_cur / w_next)
            - phi * (w_next + w_cur) - tau * w_next)


def log_weight_transition_vec(w_next, w_cur, phi, tau):
    """Vectorised log transition density; zero ``w_next`` gives the log atom."""
    w_next = np.asarray(w_next, dtype=float)
    w_cur = np.asarray(w_cur, dtype=float)
    out = -phi * w_cur
    alive = w_next > 0
    if np.any(alive):
        r = tau + phi
        wn, wc = w_next[alive], w_cur[alive]
        arg = 2.0 * np.sqrt(wn * phi * wc * r)
        out = np.array(out, dtype=float)
        out[alive] = (log_bessel_i_vec(-1.0, arg) + 0.5 * np.log(phi * r * wc / wn)
                      - phi * (wn + wc) - tau * wn)
    return out


def root_weight_transition_density(w_next, w_cur, alpha, phi, tau):
    """Density of the root mass one step ahead, count marginalised."""
    if not (w_next > 0 and w_cur > 0):
        raise ValueError("root masses must be > 0")
    return math.exp(log_root_weight_transition(w_next, w_cur, alpha, phi, tau))


def log_root_weight_transition(w_next, w_cur, alpha, phi, tau):
    w_next = np.asarray(w_next, dtype=float)
    w_cur = np.asarray(w_cur, dtype=float)
    r = tau + phi
    if phi == 0:
        return gamma_logpdf(w_next, alpha, r)
    arg = 2.0 * np.sqrt(w_next * phi * w_cur * r)
    lb = log_bessel_i_vec(alpha - 1.0, arg)
    out = (lb + 0.5 * (alpha + 1.0) * np.log(r) + 0.5 * (alpha - 1.0) * np.log(w_next / (phi * w_cur))
           - phi * (w_next + w_cur) - tau * w_next)
    return out if out.ndim else float(out)


def _check_paths(wi_path, wj_path):
    wi = np.asarray(wi_path, dtype=float)
    wj = np.asarray(wj_path, dtype=float)
    if wi.ndim != 1 or wi.shape != wj.shape or wi.size == 0:
        raise ValueError("weight paths must be nonempty 1-d sequences of equal length")
    if np.any(wi < 0) or np.any(wj < 0):
        raise ValueError("weights must be non-negative")
    return wi, wj


def interaction_intensity(wi_path, wj_path, rho):
    """Exponentially discounted sum of past products, sum_k e^{-k rho} w_{t-k,i} w_{t-k,j}."""
    wi, wj = _check_paths(wi_path, wj_path)
    prod = wi * wj
    lags = np.arange(len(prod))[::-1]
    return float(np.sum(np.exp(-rho * lags) * prod))


def edge_prob_from_history(wi_path, wj_path, rho):
    """Probability that two distinct nodes are connected at the last time of the paths."""
    lam = interaction_intensity(wi_path, wj_path, rho)
    return -math.expm1(-2.0 * lam)


def edge_persistence_probs(wi_path, wj_path, rho):
    """(P(edge now | edge before), P(edge now | no edge before)) given the paths.

    The persistence denominator is the probability of an edge at the
    previous time, 1 - exp(-2 lambda_{t-1}).
    """
    wi, wj = _check_paths(wi_path, wj_path)
    if len(wi) < 2:
        raise ValueError("persistence needs at least two time steps")
    lam_prev = interaction_intensity(wi[:-1], wj[:-1], rho)
    fresh = 2.0 * wi[-1] * wj[-1]
    p_appear = -math.expm1(-fresh)
    p_prev = -math.expm1(-2.0 * lam_prev)
    if p_prev == 0:
        p_stay = p_appear
    else:
        # P(no remembered interaction and at least one previous) / P(at least one previous)
        lost = math.exp(-2.0 * math.exp(-rho) * lam_prev) - math.exp(-2.0 * lam_prev)
        p_stay = 1.0 - lost / p_prev * math.exp(-fresh)
    return p_stay, p_appear


def log_posterior_weights(w, w_star, m, c_t, c_prev, phi, tau, alpha,
                          c_star=0, c_star_prev=0, rate=None):
    """Unnormalised joint log density of the attached weights and the root mass at one time.

    ``rate`` defaults to the interior value tau + 2 phi.  The root factor is
    the gamma-tilted total-mass law, Gamma(alpha + c_star + c_star_prev, rate).
    """
    w = np.asarray(w, dtype=float)
    m = np.asarray(m, dtype=float)
    a = m + np.asarray(c_t, dtype=float) + np.asarray(c_prev, dtype=float)
    if rate is None:
        rate = tau + 2.0 * phi
    total = w.sum() + w_star
    out = np.sum((a - 1.0) * np.log(w)) - total ** 2 - rate * w.sum()
    out += gamma_logpdf(w_star, alpha + c_star + c_star_prev, rate)
    return float(out)
