"""Elementary random draws used throughout the package.

Every function takes an explicit ``numpy.random.Generator`` and accepts
scalars or arrays, so identical seeds give identical draws.
"""

import math

import numpy as np


def _as_rng(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _min(x):
    # scalar fast path; empty arrays pass
    if x.ndim == 0:
        return float(x)
    return x.min() if x.size else math.inf


def sample_gamma(shape, rate, rng, size=None):
    """Gamma draw parametrised by shape and rate (mean shape/rate)."""
    shape = np.asarray(shape, dtype=float)
    rate = np.asarray(rate, dtype=float)
    if not (_min(shape) > 0 and _min(rate) > 0):
        raise ValueError("gamma shape and rate must be > 0")
    return _as_rng(rng).gamma(shape, 1.0 / rate, size=size)


def sample_poisson(rate, rng, size=None):
    rate = np.asarray(rate, dtype=float)
    lo = _min(rate)
    if not (lo >= 0 and math.isfinite(rate.max() if rate.size else 0.0)):
        raise ValueError("poisson rate must be finite and >= 0")
    return _as_rng(rng).poisson(rate, size=size)


def sample_ztpoisson(rate, rng, size=None):
    """Zero-truncated Poisson draw, support {1, 2, ...}.

    Uses the first arrival of a rate-``rate`` Poisson process on [0, 1]
    conditioned to land inside the interval, then adds the arrivals in the
    remaining time.
    """
    rng = _as_rng(rng)
    rate = np.asarray(rate, dtype=float)
    if np.any(rate <= 0) or not np.all(np.isfinite(rate)):
        raise ValueError("zero-truncated poisson needs a finite rate > 0")
    u = rng.random(size=size if size is not None else rate.shape)
    first = -np.log1p(-u * -np.expm1(-rate)) / rate
    first = np.minimum(first, 1.0)
    return 1 + rng.poisson(rate * (1.0 - first))


def sample_binomial(n, p, rng, size=None):
    n = np.asarray(n)
    p = np.asarray(p, dtype=float)
    if np.any(n < 0):
        raise ValueError("binomial n must be >= 0")
    if np.any(p < 0) or np.any(p > 1):
        raise ValueError("binomial p must lie in [0, 1]")
    return _as_rng(rng).binomial(n, p, size=size)


def sample_bessel_count(order, x, rng, shift=0):
    """Draw from the Bessel distribution, pmf proportional to x^m / (m! Gamma(m+order+1)).

    ``shift`` is added to the draw; the latent-count conditionals are
    Bessel laws in ``c - 1`` (attached nodes) or ``c`` (root).  Arrays of
    ``x`` are handled element-wise by inverse-CDF on a window around the
    mode wide enough that the tails are negligible.
    """
    from scipy.special import gammaln

    rng = _as_rng(rng)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    order = np.broadcast_to(np.asarray(order, dtype=float), x.shape)
    if np.any(x < 0):
        raise ValueError("x must be >= 0")
    out = np.zeros(x.shape, dtype=np.int64)
    pos = x > 0
    if np.any(pos):
        xs = x[pos]
        a = order[pos]
        mode = np.maximum(0.0, np.floor(0.5 * (-(a + 2.0) + np.sqrt(a * a + 4.0 * xs))) + 1.0)
        spread = np.sqrt(0.5 * mode + 1.0)
        width = int(np.ceil(np.max(12.0 * spread))) + 40
        m = np.maximum(mode[:, None] - width, 0.0) + np.arange(2 * width + 1)[None, :]
        lp = m * np.log(xs)[:, None] - gammaln(m + 1.0) - gammaln(m + a[:, None] + 1.0)
        lp -= lp.max(axis=1, keepdims=True)
        cdf = np.cumsum(np.exp(lp), axis=1)
        u = rng.random(len(xs)) * cdf[:, -1]
        idx = (cdf < u[:, None]).sum(axis=1)
        out[pos] = m[np.arange(len(xs)), idx].astype(np.int64)
    return out + shift
