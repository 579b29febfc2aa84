"""Independent oracles and statistical harnesses for checking the sampler.

Nothing here reuses the density code of the sampler: the reference joint is
assembled from ``scipy.stats`` log-densities, the gradient check only calls
the slice log-density, and the Geweke harness compares against pure forward
simulation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .generative import (DynamicGraph, sample_latent_process, simulate_interactions,
                         simulate_network)
from .inference.hmc import slice_gradient, slice_log_density, slice_terms
from .inference.mcmc import Sampler, Schedule
from .inference.state import HmcConfig, McmcState, process_from_state, state_from_simulation
from .types import HyperParams, ObsKind, PriorConfig

MAX_CELLS = 10_000_000


# ---- reference joint ----------------------------------------------------

def reference_log_joint(state: McmcState):
    """Log joint density of an observed-node state, written out term by term.

    Covers node trajectories (entry intensity, Poisson counts, gamma moves,
    death), the root-mass chain, new interactions, the binomial memory and,
    for binary data, the edge indicators.  Returns -inf for impossible
    configurations.
    """
    hp = state.hp
    a, tau, phi = hp.alpha, hp.tau, hp.phi
    T, K = state.w.shape
    w, c = state.w, state.c
    r = tau + phi
    out = 0.0
    for k in range(K):
        alive = np.flatnonzero(w[:, k] > 0)
        if len(alive) == 0:
            return -math.inf
        b, e = alive[0], alive[-1]
        if len(alive) != e - b + 1:
            return -math.inf
        out += math.log(a) - math.log(w[b, k]) - tau * w[b, k] - (phi * w[b, k] if b > 0 else 0.0)
        for t in range(T - 1):
            if t < b or t > e:
                if c[t, k] != 0:
                    return -math.inf
                continue
            if t == e:
                if c[t, k] != 0:
                    return -math.inf
                out += stats.poisson.logpmf(0, phi * w[t, k])
                continue
            if c[t, k] < 1:
                return -math.inf
            out += stats.poisson.logpmf(c[t, k], phi * w[t, k])
            out += stats.gamma.logpdf(w[t + 1, k], c[t, k], scale=1.0 / r)
    U, cs = state.w_root, state.c_root
    out += stats.gamma.logpdf(U[0], a, scale=1.0 / tau)
    for t in range(T - 1):
        out += stats.poisson.logpmf(cs[t], phi * U[t])
        out += stats.gamma.logpdf(U[t + 1], a + cs[t], scale=1.0 / r)
    i, j = state.pairs[:, 0], state.pairs[:, 1]
    pi = np.ones(T - 1) if state.no_death else np.exp(-hp.rho * hp.gaps(T))
    for t in range(T):
        S = w[t].sum() + U[t]
        out -= S * S
        lam = np.where(i == j, w[t, i] ** 2, 2.0 * w[t, i] * w[t, j])
        nn = state.n_new[t]
        pos = nn > 0
        if np.any(lam[pos] == 0):
            return -math.inf
        out += float(np.sum(nn[pos] * np.log(lam[pos]) - np.array([math.lgamma(x + 1) for x in nn[pos]])))
        if t > 0 and not state.no_memory:
            prev = state.n_new[t - 1] + state.n_old[t - 1]
            out += float(np.sum(stats.binom.logpmf(state.n_old[t], prev, pi[t - 1])))
        elif np.any(state.n_old[t]):
            return -math.inf
        if state.kind is ObsKind.BINARY and state.z is not None:
            if not np.array_equal((nn + state.n_old[t]) > 0, state.z[t]):
                return -math.inf
    return float(out)


# ---- tiny-instance enumeration -----------------------------------------

@dataclass
class Grid:
    """Composite Gauss-Legendre rule in log w: ``panels`` equal panels on [lo, hi]."""

    lo: float
    hi: float
    panels: int = 12
    per_panel: int = 8
    allow_zero: bool = False
    nodes: np.ndarray = field(init=False)
    weights: np.ndarray = field(init=False)
    panel: np.ndarray = field(init=False)

    def __post_init__(self):
        x, wq = np.polynomial.legendre.leggauss(self.per_panel)
        edges = np.linspace(self.lo, self.hi, self.panels + 1)
        ys, ws, ps = [], [], []
        for p in range(self.panels):
            half = 0.5 * (edges[p + 1] - edges[p])
            mid = 0.5 * (edges[p + 1] + edges[p])
            ys.append(mid + half * x)
            ws.append(half * wq)
            ps.append(np.full(self.per_panel, p))
        y = np.concatenate(ys)
        # density in w becomes density in y times the Jacobian e^y
        self.nodes = np.exp(y)
        self.weights = np.concatenate(ws) * self.nodes
        self.panel = np.concatenate(ps)
        if self.allow_zero:
            self.nodes = np.append(0.0, self.nodes)
            self.weights = np.append(1.0, self.weights)
            self.panel = np.append(-1, self.panel)

    def categorize(self, w):
        """Panel index of a sampled weight (-1 for an exact zero, clamped to the grid)."""
        w = np.asarray(w, dtype=float)
        out = np.full(w.shape, -1, dtype=np.int64)
        pos = w > 0
        y = np.log(w[pos])
        p = np.floor((y - self.lo) / (self.hi - self.lo) * self.panels).astype(np.int64)
        out[pos] = np.clip(p, 0, self.panels - 1)
        return out


@dataclass
class TinyPosterior:
    variables: list
    cells: np.ndarray     # (n_cells, n_vars) category of each variable
    probs: np.ndarray

    def marginal(self, var):
        idx = self.variables.index(var) if not isinstance(var, int) else var
        vals = self.cells[:, idx]
        out = {}
        for v, p in zip(vals, self.probs):
            out[int(v)] = out.get(int(v), 0.0) + p
        return out

    def joint(self, vars_):
        idx = [self.variables.index(v) for v in vars_]
        out = {}
        for row, p in zip(self.cells[:, idx], self.probs):
            key = tuple(int(x) for x in row)
            out[key] = out.get(key, 0.0) + p
        return out


def _set(state, var, value):
    kind = var[0]
    if kind == "w":
        state.w[var[1], var[2]] = value
    elif kind == "c":
        state.c[var[1], var[2]] = value
    elif kind == "w_root":
        state.w_root[var[1]] = value
    elif kind == "c_root":
        state.c_root[var[1]] = value
    elif kind == "n_new":
        state.n_new[var[1], var[2]] = value
    elif kind == "n_old":
        state.n_old[var[1], var[2]] = value
    else:
        raise ValueError(f"unknown variable kind {kind!r}")


def enumerate_tiny_posterior(state: McmcState, free: dict):
    """Exact (truncated, quadrature-discretised) conditional law of the ``free`` variables.

    ``free`` maps variable keys such as ``("c", t, k)``, ``("w", t, k)``,
    ``("w_root", t)``, ``("c_root", t)``, ``("n_new", t, p)``,
    ``("n_old", t, p)`` to either a ``range`` of integers or a :class:`Grid`.
    All other entries of ``state`` are held fixed.  Continuous variables are
    reported by grid panel (-1 for an exact zero).
    """
    if state.K > 2 or state.T > 3:
        raise ValueError("enumeration is limited to K <= 2 and T <= 3")
    variables = list(free)
    axes = []
    for v in variables:
        domain = free[v]
        if isinstance(domain, Grid):
            axes.append([(x, qw, p) for x, qw, p in zip(domain.nodes, domain.weights, domain.panel)])
        else:
            axes.append([(x, 1.0, x) for x in domain])
    n_cells = math.prod(len(a) for a in axes)
    if n_cells > MAX_CELLS:
        raise ValueError(f"state space of {n_cells} cells exceeds {MAX_CELLS}")
    s = state.copy()
    cells, logp = [], []
    for combo in itertools.product(*axes):
        lq = 0.0
        for v, (x, qw, _) in zip(variables, combo):
            _set(s, v, x)
            lq += math.log(qw)
        s.refresh()
        lj = reference_log_joint(s)
        if lj == -math.inf:
            continue
        cells.append([cat for _, _, cat in combo])
        logp.append(lj + lq)
    logp = np.array(logp)
    p = np.exp(logp - logp.max())
    p /= p.sum()
    return TinyPosterior(variables, np.array(cells, dtype=np.int64), p)


def tv_distance(p: dict, q: dict):
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def empirical(values):
    vals, cnt = np.unique(np.asarray(values), return_counts=True, axis=0)
    n = cnt.sum()
    if np.ndim(vals) > 1:
        return {tuple(int(x) for x in v): c / n for v, c in zip(vals, cnt)}
    return {int(v): c / n for v, c in zip(vals, cnt)}


# ---- gradient check -----------------------------------------------------

def check_gradient(state: McmcState, t, h=1e-6, grad=None):
    """Max relative error between the slice gradient and central differences of the log density."""
    if not 0 < h <= 1e-3:
        raise ValueError("h must lie in (0, 1e-3]")
    grad = grad or slice_gradient
    active, a, root, rate = slice_terms(state, t)
    y = np.log(state.w[t, active])
    g = np.asarray(grad(y, a, root, rate), dtype=float)
    fd = np.empty_like(y)
    for i in range(len(y)):
        e = np.zeros_like(y)
        e[i] = h
        fd[i] = (slice_log_density(y + e, a, root, rate) - slice_log_density(y - e, a, root, rate)) / (2 * h)
    scale = np.maximum(np.abs(fd), 1.0)
    return float(np.max(np.abs(g - fd) / scale)) if len(y) else 0.0


# ---- Geweke -------------------------------------------------------------

def default_statistics():
    """name -> f(process, interactions, hp) used by :func:`geweke_test`."""

    def mass(t):
        return lambda proc, inter, hp: float(proc.total_mass()[t])

    def count_total(proc, inter, hp):
        return float(proc.counts.sum())

    def mean_mass(proc, inter, hp):
        return float(proc.total_mass().mean())

    def sq_mass(proc, inter, hp):
        return float(proc.total_mass()[0] ** 2)

    def edges(proc, inter, hp):
        return float(sum(len(inter.total(t)) for t in range(inter.T)))

    def new_inter(proc, inter, hp):
        return float(sum(sum(sl.values()) for sl in inter.new))

    def old_inter(proc, inter, hp):
        return float(sum(sum(sl.values()) for sl in inter.old))

    def max_weight(proc, inter, hp):
        return float(proc.weights.max()) if proc.weights.size else 0.0

    def hidden(proc, inter):
        seen = {i for t in range(inter.T) for p in inter.total(t) for i in p}
        mask = np.ones(proc.n_atoms, dtype=bool)
        mask[list(seen)] = False
        return mask

    def hidden_mass(proc, inter, hp):
        return float(proc.weights[:, hidden(proc, inter)].sum() + proc.root.sum())

    def hidden_count(proc, inter, hp):
        return float(proc.counts[:, hidden(proc, inter)].sum())

    out = {"mass_t1": mass(0), "mass_tlast": mass(-1), "mean_mass": mean_mass, "mass_t1_sq": sq_mass,
           "count_total": count_total, "edges": edges, "new_interactions": new_inter,
           "old_interactions": old_inter, "max_weight": max_weight,
           "hidden_mass": hidden_mass, "hidden_count": hidden_count}
    for name in ("alpha", "tau", "phi", "rho"):
        out[name] = (lambda n: lambda proc, inter, hp: float(getattr(hp, n)))(name)
    return out


@dataclass
class GewekeReport:
    z: dict
    marginal_mean: dict
    successive_mean: dict
    n_samples: int

    def max_abs_z(self):
        return max(abs(v) for v in self.z.values() if math.isfinite(v))

    def passed(self, threshold=4.0):
        return all(abs(v) < threshold for v in self.z.values() if math.isfinite(v))


def _draw_hyper(hp: HyperParams, prior: PriorConfig | None, rng, sample):
    if not sample or prior is None:
        return hp
    g = lambda a, b: float(rng.gamma(a, 1.0 / b))
    return hp.replace(alpha=g(prior.a_alpha, prior.b_alpha), tau=g(prior.a_tau, prior.b_tau),
                      phi=g(prior.a_phi, prior.b_phi), rho=g(prior.a_rho, prior.b_rho))


def geweke_test(hp: HyperParams, T, n_samples, rng, prior: PriorConfig | None = None,
                sample_hyper=False, kind=ObsKind.BINARY, sweeps=1, overrides=None,
                statistics=None, schedule: Schedule | None = None, n_chains=100):
    """Marginal-conditional vs successive-conditional comparison of joint statistics.

    The marginal sample draws (hyperparameters, latent process, interactions)
    forward.  The successive sample runs ``n_chains`` independent chains,
    each started from its own forward draw, alternating ``sweeps`` MCMC
    sweeps on the projected state with a fresh interaction draw given the
    lifted process.  Since every chain starts exactly at the joint law,
    each step is again a joint draw when the kernels are correct, and the
    chain means are i.i.d., which gives an honest standard error even when
    a single chain mixes slowly.  Interactions include self-loops so the
    forward model and the sampler's likelihood coincide.
    """
    if n_samples < 1000:
        raise ValueError("Geweke test needs at least 1000 samples")
    if not 2 <= n_chains <= n_samples // 2:
        raise ValueError("need between 2 and n_samples/2 successive chains")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    statistics = statistics or default_statistics()
    if not sample_hyper:
        statistics = {k: f for k, f in statistics.items() if k not in ("alpha", "tau", "phi", "rho")}
    names = list(statistics)
    if schedule is None:
        schedule = Schedule(burnin=0, samples=0, hmc=HmcConfig(0.1, 10), adapt=False,
                            update_alpha=sample_hyper, update_phi=sample_hyper,
                            update_tau=sample_hyper, update_rho=sample_hyper)

    def forward(h):
        proc = sample_latent_process(h, T, rng)
        inter = simulate_interactions(proc, h, rng, allow_self_loops=True)
        return proc, inter

    def evaluate(proc, inter, h):
        return [statistics[n](proc, inter, h) for n in names]

    marg = np.empty((n_samples, len(names)))
    for i in range(n_samples):
        h = _draw_hyper(hp, prior, rng, sample_hyper)
        proc, inter = forward(h)
        marg[i] = evaluate(proc, inter, h)

    length = n_samples // n_chains
    chain_means = np.empty((n_chains, len(names)))
    for ch in range(n_chains):
        h = _draw_hyper(hp, prior, rng, sample_hyper)
        proc, inter = forward(h)
        rows = np.empty((length, len(names)))
        for i in range(length):
            st = state_from_simulation(_Sim(h, proc, inter), kind=kind)
            sampler = Sampler(st, schedule, prior, overrides)
            for _ in range(sweeps):
                sampler.sweep(rng)
            h = st.hp
            proc = process_from_state(st, rng)
            inter = simulate_interactions(proc, h, rng, allow_self_loops=True)
            rows[i] = evaluate(proc, inter, h)
        chain_means[ch] = rows.mean(axis=0)

    z, mm, sm = {}, {}, {}
    for j, n in enumerate(names):
        a, b = marg[:, j], chain_means[:, j]
        se_a = a.std(ddof=1) / math.sqrt(len(a))
        se_b = b.std(ddof=1) / math.sqrt(len(b))
        denom = math.sqrt(se_a ** 2 + se_b ** 2)
        z[n] = (a.mean() - b.mean()) / denom if denom > 0 else 0.0
        mm[n], sm[n] = float(a.mean()), float(b.mean())
    return GewekeReport(z, mm, sm, n_samples)


@dataclass
class _Sim:
    hp: HyperParams
    process: object
    interactions: object


def _squared(kernel):
    """Run ``kernel`` with every Metropolis log-ratio doubled."""
    from .inference import kernels as kn

    def wrapped(*args, **kwargs):
        orig = kn.accept
        kn.accept = lambda log_r, rng: orig(2.0 * log_r, rng)
        try:
            return kernel(*args, **kwargs)
        finally:
            kn.accept = orig

    return wrapped


def squared_ratio_overrides(names=("lifetime",)):
    """Broken kernels whose acceptance ratio is squared, keyed for ``Sampler`` overrides.

    The lifetime (birth/death) move is the default: its corruption shifts
    edge counts far enough to be seen at modest sample sizes.
    """
    from .inference import kernels as kn

    table = {
        "lifetime": kn.lifetime_moves,
        "root_count": kn.update_root_count,
        "root_weight": kn.update_root_weight,
    }
    unknown = set(names) - set(table)
    if unknown:
        raise ValueError(f"no squared-ratio variant for {sorted(unknown)}")
    return {n: _squared(table[n]) for n in names}


# ---- sparsity -----------------------------------------------------------

def _edge_node_ratio(graph: DynamicGraph, t):
    n = graph.node_count(t)
    if n == 0:
        return math.nan
    return graph.edge_count(t) / n ** 2


def sparsity_experiment(alphas, hp: HyperParams, T, replicates, rng, t=None):
    """Median N_e / N^2 at time ``t`` (default the last) for each alpha; NaN when all graphs are empty."""
    alphas = list(alphas)
    if any(b <= a for a, b in zip(alphas, alphas[1:])):
        raise ValueError("alphas must be increasing")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    t = T - 1 if t is None else t
    rows = []
    for a in alphas:
        ratios = []
        for _ in range(replicates):
            sim = simulate_network(hp.replace(alpha=a), T, rng)
            ratios.append(_edge_node_ratio(sim.graph, t))
        ratios = np.array(ratios)
        ok = ratios[np.isfinite(ratios)]
        rows.append({"alpha": a, "median_ratio": float(np.median(ok)) if len(ok) else math.nan,
                     "nonempty": int(len(ok)), "replicates": replicates})
    return rows


def dense_control(alphas, hp: HyperParams, T, replicates, rng, t=None):
    """Same table for a dense model: ``round(alpha)`` nodes of constant weight 1/tau.

    Total mass matches the gamma-process mean alpha/tau, but with every
    node carrying the same weight each pair interacts at a fixed rate, so
    the edge count grows quadratically in the node count.
    """
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    t = T - 1 if t is None else t
    lam = 2.0 / hp.tau ** 2
    rows = []
    for a in alphas:
        n_nodes = max(2, int(round(a)))
        iu = np.triu_indices(n_nodes, 1)
        ratios = []
        for _ in range(replicates):
            n = np.zeros(len(iu[0]), dtype=np.int64)
            for s in range(t + 1):
                if s > 0:
                    n = rng.binomial(n, math.exp(-hp.rho))
                n = n + rng.poisson(lam, size=n.shape)
            present = n > 0
            nodes = len(set(iu[0][present]) | set(iu[1][present]))
            ratios.append(present.sum() / nodes ** 2 if nodes else math.nan)
        ratios = np.array(ratios)
        ok = ratios[np.isfinite(ratios)]
        rows.append({"alpha": a, "median_ratio": float(np.median(ok)) if len(ok) else math.nan,
                     "nonempty": int(len(ok)), "replicates": replicates})
    return rows
