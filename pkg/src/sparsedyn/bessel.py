"""Modified Bessel function of the first kind, evaluated from its power series.

    I_a(x) = sum_{m>=0} (x/2)^(2m+a) / (m! Gamma(m+a+1))

Two evaluation paths are provided.  :func:`bessel_i` sums the series directly
in linear space and is the reference for small arguments.  :func:`log_bessel_i`
works in log space: it locates the largest term, then walks outwards in both
directions with the term-ratio recursion, so it stays finite for arguments in
the tens of thousands (where ``I_a`` itself overflows a double).  The series
needs O(sqrt(x)) terms, so for x above ``LARGE_ARG`` and above twice the
squared order both log versions use the large-argument expansion instead,
which is exact to rounding in that range:

    I_a(x) ~ e^x / sqrt(2 pi x) * sum_k (-1)^k prod_{j<=k} (4a^2 - (2j-1)^2) / (k! (8x)^k)
"""

import math

import numpy as np
from scipy.special import gammaln

REL_TOL = 1e-15
MAX_TERMS = 10_000
LOG_SPACE_THRESHOLD = 50.0
LARGE_ARG = 50.0
HANKEL_TERMS = 12


def _use_hankel(order, x):
    # with x > 2 a^2 successive terms shrink by at least 1/(4k)
    return (x > LARGE_ARG) & (x > 2.0 * order * order)


def _log_hankel(order, x):
    """Large-argument expansion of log I_order(x); vectorised."""
    mu = 4.0 * np.asarray(order, dtype=float) ** 2
    x = np.asarray(x, dtype=float)
    term = np.ones_like(x * mu)
    total = term.copy()
    for k in range(1, HANKEL_TERMS):
        term = -term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        total = total + term
    return x - 0.5 * np.log(2.0 * np.pi * x) + np.log(total)


def _check(order, x):
    if not (math.isfinite(order) and math.isfinite(x)):
        raise ValueError(f"non-finite input: order={order!r}, x={x!r}")
    if x < 0:
        raise ValueError(f"x must be non-negative, got {x!r}")


def _reflect_integer_order(order):
    # I_{-n} = I_n for integer n: the first n terms vanish because 1/Gamma has poles there.
    if order < 0 and float(order).is_integer():
        return -order
    return order


def bessel_i(order, x):
    """Linear-space series value of I_order(x).

    Raises ``OverflowError`` when the value does not fit in a double; callers
    should switch to :func:`log_bessel_i` in that regime.
    """
    order = float(order)
    x = float(x)
    _check(order, x)
    order = _reflect_integer_order(order)
    if x == 0.0:
        if order == 0.0:
            return 1.0
        if order > 0:
            return 0.0
        raise OverflowError(f"I_{order}(0) is infinite")
    if x > LOG_SPACE_THRESHOLD:
        logv, sign = _log_series(order, x)
        if logv > 709.0:
            raise OverflowError(f"I_{order}({x}) overflows; use log_bessel_i")
        return sign * math.exp(logv)

    half = 0.5 * x
    q = half * half
    # first term computed via lgamma to dodge overflow of Gamma for large order
    g = math.lgamma(order + 1.0)
    sgn = math.copysign(1.0, math.gamma(order + 1.0)) if order + 1.0 <= 0 else 1.0
    term = sgn * math.exp(order * math.log(half) - g)
    total = term
    for m in range(1, MAX_TERMS):
        term *= q / (m * (m + order))
        total += term
        if abs(term) < REL_TOL * abs(total) and m > -order:
            break
    if not math.isfinite(total):
        raise OverflowError(f"I_{order}({x}) overflows; use log_bessel_i")
    return total


def _log_series(order, x):
    """Log of |I_order(x)| and its sign, summing outward from the peak term."""
    half = 0.5 * x
    log_half = math.log(half)
    # term ratio t_{m+1}/t_m = half^2 / ((m+1)(m+1+order)); peak where that crosses 1
    peak = max(0, int(math.floor(0.5 * (-(order + 2.0) + math.sqrt(order * order + x * x)))) + 1)

    def log_term(m):
        a = m + order + 1.0
        if a <= 0 and float(a).is_integer():
            return -math.inf, 1.0
        return (2 * m + order) * log_half - math.lgamma(m + 1.0) - math.lgamma(a), (
            1.0 if a > 0 else math.copysign(1.0, math.gamma(a)))

    lt_peak, _ = log_term(peak)
    acc = 0.0
    # forward from the peak
    m = peak
    lt = lt_peak
    sgn = log_term(peak)[1]
    acc += sgn
    for _ in range(MAX_TERMS):
        lt += 2 * log_half - math.log(m + 1.0) - math.log(abs(m + 1.0 + order))
        m += 1
        s = log_term(m)[1]
        inc = math.exp(lt - lt_peak)
        acc += s * inc
        if inc < REL_TOL * abs(acc):
            break
    # backward from the peak
    m = peak
    lt = lt_peak
    while m > 0:
        denom = m + order
        if denom == 0:
            break
        lt -= 2 * log_half - math.log(m) - math.log(abs(denom))
        m -= 1
        s = log_term(m)[1]
        inc = math.exp(lt - lt_peak)
        acc += s * inc
        if inc < REL_TOL * abs(acc) and m + order > 0:
            break
    return lt_peak + math.log(abs(acc)), math.copysign(1.0, acc)


def log_bessel_i(order, x):
    """log I_order(x), finite wherever I_order(x) > 0.

    ``x == 0`` returns ``0.0`` for order 0 and ``-inf`` for positive orders.
    """
    order = float(order)
    x = float(x)
    _check(order, x)
    order = _reflect_integer_order(order)
    if x == 0.0:
        if order == 0.0:
            return 0.0
        if order > 0:
            return -math.inf
        return math.inf
    if _use_hankel(order, x):
        return float(_log_hankel(order, x))
    if x <= LOG_SPACE_THRESHOLD:
        try:
            v = bessel_i(order, x)
        except OverflowError:
            v = None
        if v is not None and v > 0 and math.isfinite(v) and v > 1e-290:
            return math.log(v)
    logv, sign = _log_series(order, x)
    if sign < 0:
        raise ValueError(f"I_{order}({x}) is negative; log undefined")
    return logv


def log_bessel_i_vec(order, x):
    """Vectorised log I_order(x) for order > -1 (or integer order) and x >= 0.

    Sums a fixed window of the series around each element's peak term; the
    window is wide enough that the discarded tails are below double precision.
    """
    x = np.asarray(x, dtype=float)
    order = np.broadcast_to(np.asarray(order, dtype=float), x.shape)
    if not np.all(np.isfinite(x)) or not np.all(np.isfinite(order)):
        raise ValueError("non-finite input")
    if np.any(x < 0):
        raise ValueError("x must be non-negative")
    neg_int = (order < 0) & (order == np.round(order))
    order = np.where(neg_int, -order, order)
    if np.any(order <= -1):
        raise ValueError("log_bessel_i_vec needs order > -1 (or integer order)")
    out = np.empty(x.shape)
    zero = x == 0
    out[zero] = np.where(order[zero] == 0, 0.0, -np.inf)
    pos = ~zero
    if not np.any(pos):
        return out
    big = np.zeros(x.shape, dtype=bool)
    big[pos] = _use_hankel(order[pos], x[pos])
    if big.any():
        out[big] = _log_hankel(order[big], x[big])
    pos &= ~big
    if not np.any(pos):
        return out
    xs = x[pos]
    a = order[pos][:, None]
    log_half = np.log(0.5 * xs)[:, None]
    peak = np.maximum(0.0, np.floor(0.5 * (-(a[:, 0] + 2.0) + np.sqrt(a[:, 0] ** 2 + xs * xs))) + 1.0)[:, None]
    width = int(np.ceil(np.max(9.0 * np.sqrt(0.5 * peak + 1.0)))) + 15
    # walk out from the peak with the term ratio; one gammaln pair per row
    lt_peak = (2 * peak + a) * log_half - gammaln(peak + 1.0) - gammaln(peak + a + 1.0)
    up = peak + np.arange(1, width + 1)
    fwd = lt_peak + np.cumsum(2 * log_half - np.log(up) - np.log(up + a), axis=1)
    down = peak - np.arange(0, width)
    ok = down > 0
    step = np.where(ok, 2 * log_half - np.log(np.where(ok, down, 1.0)) - np.log(np.where(ok, down + a, 1.0)), np.inf)
    bwd = lt_peak - np.cumsum(step, axis=1)
    lt = np.concatenate([bwd[:, ::-1], lt_peak, fwd], axis=1)
    top = np.max(lt, axis=1)
    out[pos] = top + np.log(np.sum(np.exp(lt - top[:, None]), axis=1))
    return out
