"""Exact forward simulation of the dynamic network model.

The latent sociability process is simulated through its auxiliary counts:
the count chain C_1 -> C_2 -> ... is drawn exactly (gamma-Poisson steps plus
CRP-partitioned immigrants), then each W_t is drawn given its neighbouring
counts.  Atoms touched by no count live for a single time step; they are
kept as an unmaterialised "free root" mass and only become explicit nodes
when an interaction lands on them.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .samplers import sample_binomial, sample_gamma, sample_poisson
from .types import (CountChain, DynamicGraph, HyperParams, InteractionTensor,
                    WeightChain)

log = logging.getLogger(__name__)


def _rng(rng):
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def crp_assignments(n, concentration, rng):
    """Table index of each of ``n`` sequentially seated customers."""
    rng = _rng(rng)
    if n < 0:
        raise ValueError("n must be >= 0")
    if not concentration > 0:
        raise ValueError("concentration must be > 0")
    tables = np.empty(n, dtype=np.int64)
    if n == 0:
        return tables
    u = rng.random(n)
    pick = rng.random(n)
    n_tables = 0
    for i in range(n):
        # new table w.p. a/(a+i), otherwise copy the table of a uniformly chosen earlier customer
        if u[i] * (concentration + i) < concentration:
            tables[i] = n_tables
            n_tables += 1
        else:
            tables[i] = tables[int(pick[i] * i)]
    return tables


def sample_crp(n, concentration, rng):
    """Block sizes of a CRP(concentration) partition of ``n`` items, in order of creation."""
    tab = crp_assignments(n, concentration, rng)
    if n == 0:
        return []
    return np.bincount(tab).tolist()


@dataclass
class LatentProcess:
    """Explicit atoms of the sociability process.

    ``weights[t, k]`` is zero outside atom k's lifetime; ``counts[t, k]`` is
    the latent count linking times t and t+1; ``root[t]`` is the mass of the
    unmaterialised single-time atoms.
    """

    weights: np.ndarray  # (T, N)
    counts: np.ndarray   # (T-1, N)
    root: np.ndarray     # (T,)

    @property
    def T(self):
        return self.weights.shape[0]

    @property
    def n_atoms(self):
        return self.weights.shape[1]

    def total_mass(self):
        return self.weights.sum(axis=1) + self.root

    def append_atoms(self, w_cols, c_cols=None):
        w_cols = np.asarray(w_cols, dtype=float).reshape(self.T, -1)
        if c_cols is None:
            c_cols = np.zeros((self.T - 1, w_cols.shape[1]), dtype=np.int64)
        self.weights = np.concatenate([self.weights, w_cols], axis=1)
        self.counts = np.concatenate([self.counts, c_cols], axis=1)

    def weight_chain(self):
        ws = [{int(k): float(v) for k, v in zip(np.flatnonzero(row), row[row > 0])} for row in self.weights]
        return WeightChain(ws, self.root.copy())

    def count_chain(self):
        cs = [{int(k): int(v) for k, v in zip(np.flatnonzero(row), row[row > 0])} for row in self.counts]
        return CountChain(cs, np.zeros(len(cs), dtype=np.int64))


def sample_count_chain(hp: HyperParams, T, rng):
    """Exact draw of the latent counts C_1, ..., C_{T-1}.

    Returns an integer array of shape (T-1, N) over all atoms ever counted.
    """
    rng = _rng(rng)
    if T < 1:
        raise ValueError("T must be >= 1")
    if T == 1:
        return np.zeros((0, 0), dtype=np.int64)
    r = hp.tau + hp.phi
    # t = 1: counts of a stationary gamma process, partitioned by a CRP
    total = sample_gamma(hp.alpha, hp.tau, rng)
    cstar = int(sample_poisson(hp.phi * total, rng))
    rows = [list(sample_crp(cstar, hp.alpha, rng))]
    for _ in range(1, T - 1):
        prev = np.asarray(rows[-1], dtype=np.int64)
        nxt = np.zeros(len(prev), dtype=np.int64)
        alive = prev > 0
        if np.any(alive):
            w = sample_gamma(prev[alive], r, rng)
            nxt[alive] = sample_poisson(hp.phi * w, rng)
        wroot = sample_gamma(hp.alpha, r, rng)
        croot = int(sample_poisson(hp.phi * wroot, rng))
        rows.append(nxt.tolist() + sample_crp(croot, hp.alpha, rng))
    N = len(rows[-1])
    out = np.zeros((T - 1, N), dtype=np.int64)
    for t, row in enumerate(rows):
        out[t, :len(row)] = row
    return out


def sample_weights_given_counts(counts, hp: HyperParams, rng):
    """Draw W_t | C_{t-1}, C_t for every t; returns (weights (T, N), free root (T,))."""
    rng = _rng(rng)
    T = counts.shape[0] + 1
    N = counts.shape[1]
    weights = np.zeros((T, N))
    root = np.empty(T)
    for t in range(1, T + 1):
        shape = np.zeros(N, dtype=np.int64)
        if t > 1:
            shape += counts[t - 2]
        if t < T:
            shape += counts[t - 1]
        rate = hp.rate(t, T)
        act = shape > 0
        if np.any(act):
            weights[t - 1, act] = sample_gamma(shape[act], rate, rng)
        root[t - 1] = sample_gamma(hp.alpha, rate, rng)
    return weights, root


def sample_latent_process(hp: HyperParams, T, rng):
    rng = _rng(rng)
    counts = sample_count_chain(hp, T, rng)
    if T == 1:
        counts = np.zeros((0, 0), dtype=np.int64)
    weights, root = sample_weights_given_counts(counts, hp, rng)
    return LatentProcess(weights, counts, root)


def sample_count_weight_chain(hp: HyperParams, T, rng):
    """Exact joint draw of the weight chain and the latent count chain."""
    proc = sample_latent_process(hp, T, rng)
    return proc.weight_chain(), proc.count_chain()


def urn_predictive(prior_counts, seen, alpha):
    """Predictive weights of the next endpoint in the interaction urn.

    Returns ``(p_fresh, p_prior, p_seen)``: the probability of a brand-new
    node, of each prior atom (array aligned with ``prior_counts``) via its
    latent counts, and of each earlier draw (array aligned with ``seen``).
    """
    prior_counts = np.asarray(prior_counts, dtype=float)
    n = len(seen)
    norm = alpha + prior_counts.sum() + n
    return alpha / norm, prior_counts / norm, np.full(n, 1.0 / norm)


def sample_interactions_urn(c_t, c_prev, hp: HyperParams, rng, rate=None,
                            allow_self_loops=True, next_id=None):
    """New interactions at one time with the sociabilities integrated out.

    ``c_t`` and ``c_prev`` map node id -> latent count.  The total mass is
    Gamma(alpha + c*, rate), the number of interactions Poisson(mass^2), and
    the 2 d* endpoints follow the Polya urn mixing fresh nodes (weight
    alpha), prior atoms (weight c_ti + c_{t-1,i}) and earlier draws
    (weight 1 each).  Returns ``(pairs, multiplicities)`` where ``pairs`` is
    a list of (i, j) tuples.
    """
    rng = _rng(rng)
    if rate is None:
        rate = hp.tau + 2.0 * hp.phi
    nodes = sorted(set(c_t) | set(c_prev))
    prior = np.array([c_t.get(k, 0) + c_prev.get(k, 0) for k in nodes], dtype=float)
    if np.any(prior < 0):
        raise ValueError("counts must be >= 0")
    cstar = prior.sum()
    mass = sample_gamma(hp.alpha + cstar, rate, rng)
    d = int(sample_poisson(mass * mass, rng))
    if next_id is None:
        next_id = (max(nodes) + 1) if nodes else 0
    draws = []
    cum_prior = np.cumsum(prior)
    for n in range(2 * d):
        u = rng.random() * (hp.alpha + cstar + n)
        if u < hp.alpha:
            draws.append(next_id)
            next_id += 1
        elif u < hp.alpha + cstar:
            draws.append(nodes[int(np.searchsorted(cum_prior, u - hp.alpha, side="right"))])
        else:
            draws.append(draws[int(u - hp.alpha - cstar)])
    pairs = []
    for k in range(d):
        i, j = draws[2 * k], draws[2 * k + 1]
        if i == j and not allow_self_loops:
            continue
        pairs.append((min(i, j), max(i, j)))
    mult = {}
    for i, j in pairs:
        mult[i] = mult.get(i, 0) + 1
        mult[j] = mult.get(j, 0) + 1
    return pairs, mult


def _pairs_to_dict(a, b):
    if len(a) == 0:
        return {}
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    keys, cnt = np.unique(np.stack([lo, hi], axis=1), axis=0, return_counts=True)
    return {(int(i), int(j)): int(c) for (i, j), c in zip(keys, cnt)}


def sample_new_interactions(w, root, alpha, rng, allow_self_loops=True):
    """New interactions at one time given explicit weights and a free root mass.

    Endpoints landing on the free root are partitioned by a CRP(alpha) into
    fresh atoms whose weights are split off the root mass by a Dirichlet
    draw.  Returns ``(pairs_dict, new_atom_weights, remaining_root)``; fresh
    atoms are indexed ``len(w), len(w)+1, ...``.
    """
    rng = _rng(rng)
    w = np.asarray(w, dtype=float)
    n = len(w)
    total = w.sum() + root
    d = int(sample_poisson(total * total, rng))
    if d == 0:
        return {}, np.zeros(0), root
    probs = np.append(w, root) / total
    ends = rng.choice(n + 1, size=2 * d, p=probs)
    on_root = np.flatnonzero(ends == n)
    new_w = np.zeros(0)
    if len(on_root):
        tab = crp_assignments(len(on_root), alpha, rng)
        sizes = np.bincount(tab)
        g = sample_gamma(np.append(sizes, alpha).astype(float), 1.0, rng)
        frac = g / g.sum()
        new_w = root * frac[:-1]
        root = root * frac[-1]
        ends = ends.copy()
        ends[on_root] = n + tab
    a, b = ends[0::2], ends[1::2]
    if not allow_self_loops:
        keep = a != b
        a, b = a[keep], b[keep]
    return _pairs_to_dict(a, b), new_w, root


def step_forgetting(n_prev, rho, delta_t, rng):
    """Binomial thinning of the previous interaction counts: the remembered part."""
    rng = _rng(rng)
    if not n_prev:
        return {}
    keys = list(n_prev)
    vals = np.fromiter((n_prev[k] for k in keys), dtype=np.int64, count=len(keys))
    if np.any(vals < 0):
        raise ValueError("interaction counts must be >= 0")
    kept = sample_binomial(vals, np.exp(-rho * delta_t), rng)
    return {k: int(v) for k, v in zip(keys, kept) if v > 0}


def simulate_interactions(proc: LatentProcess, hp: HyperParams, rng, allow_self_loops=True):
    """Draw new and remembered interactions over time given explicit weights.

    Fresh atoms materialised from the free root are appended to ``proc`` in
    place.  Returns the :class:`InteractionTensor`.
    """
    rng = _rng(rng)
    T = proc.T
    gaps = hp.gaps(T)
    new, old = [], []
    for t in range(T):
        n_new, fresh, proc.root[t] = sample_new_interactions(
            proc.weights[t], proc.root[t], hp.alpha, rng, allow_self_loops)
        if len(fresh):
            cols = np.zeros((T, len(fresh)))
            cols[t] = fresh
            proc.append_atoms(cols)
        n_old = {} if t == 0 else step_forgetting(_total(new[-1], old[-1]), hp.rho, gaps[t - 1], rng)
        new.append(n_new)
        old.append(n_old)
    return InteractionTensor(new, old)


def _total(a, b):
    out = dict(a)
    for k, v in b.items():
        out[k] = out.get(k, 0) + v
    return out


@dataclass
class Simulation:
    hp: HyperParams
    process: LatentProcess
    interactions: InteractionTensor
    graph: DynamicGraph
    allow_self_loops: bool

    @property
    def weights(self):
        return self.process.weight_chain()

    @property
    def counts(self):
        return self.process.count_chain()

    @property
    def T(self):
        return self.process.T


def simulate_network(hp: HyperParams, T, rng, allow_self_loops=False):
    """Full joint draw of weights, latent counts, interactions and graphs."""
    rng = _rng(rng)
    proc = sample_latent_process(hp, T, rng)
    inter = simulate_interactions(proc, hp, rng, allow_self_loops)
    graph = DynamicGraph.from_interactions(inter)
    log.debug("simulated T=%d, %d atoms", T, proc.n_atoms)
    return Simulation(hp, proc, inter, graph, allow_self_loops)


def simulate_pair_edges(wi_path, wj_path, rho, rng, size):
    """Edge indicator at the last time for one pair with fixed weight paths, ``size`` replicates."""
    rng = _rng(rng)
    wi = np.asarray(wi_path, dtype=float)
    wj = np.asarray(wj_path, dtype=float)
    n = np.zeros(size, dtype=np.int64)
    for t in range(len(wi)):
        if t > 0:
            n = sample_binomial(n, np.exp(-rho), rng)
        n = n + sample_poisson(np.full(size, 2.0 * wi[t] * wj[t]), rng)
    return n > 0


def lift_unobserved(root_mass, root_counts, hp: HyperParams, rng):
    """Explicit atoms of an unobserved sub-process given its total masses and counts.

    Given the totals (U_t, c*_t) of a dependent gamma process, draws the fine
    structure from its conditional law: each round's counts are allocated by
    the Polya urn over the previous round's atoms (weight = their counts)
    plus fresh atoms (weight alpha), and the masses are split by a Dirichlet
    draw.  Returns a :class:`LatentProcess` whose total masses equal
    ``root_mass`` exactly.
    """
    rng = _rng(rng)
    U = np.asarray(root_mass, dtype=float)
    cstar = np.asarray(root_counts, dtype=np.int64)
    T = len(U)
    if len(cstar) != max(T - 1, 0):
        raise ValueError("need one root count per transition")
    atom_counts = []  # per time t (0..T-2): dict atom -> count
    n_atoms = 0
    w_entries = []  # (t, atom, weight)
    root = np.zeros(T)
    prev = {}
    for t in range(T):
        cur = {}
        if t < T - 1:
            keys = list(prev)
            base = np.array([prev[k] for k in keys], dtype=float)
            base_total = base.sum()
            cum = np.cumsum(base)
            draws = []
            tally = {}
            n_fresh = 0
            for n in range(int(cstar[t])):
                u = rng.random() * (hp.alpha + base_total + n)
                if u < hp.alpha:
                    key = ("f", n_fresh)
                    n_fresh += 1
                elif u < hp.alpha + base_total:
                    key = ("p", keys[int(np.searchsorted(cum, u - hp.alpha, side="right"))])
                else:
                    key = draws[int(u - hp.alpha - base_total)]
                draws.append(key)
                tally[key] = tally.get(key, 0) + 1
            for (kind, k), c in tally.items():
                if kind == "p":
                    cur[k] = c
            for f in range(n_fresh):
                cur[n_atoms + f] = tally[("f", f)]
            n_atoms += n_fresh
        # mass split: previous atoms carry c_{t-1} + c_t, fresh ones c_t, remainder alpha
        members = sorted(set(prev) | set(cur))
        shape = np.array([prev.get(k, 0) + cur.get(k, 0) for k in members] + [hp.alpha], dtype=float)
        g = sample_gamma(shape, 1.0, rng)
        frac = g / g.sum()
        for k, f in zip(members, frac[:-1]):
            w_entries.append((t, k, U[t] * f))
        root[t] = U[t] * frac[-1]
        if t < T - 1:
            atom_counts.append(cur)
        prev = cur
    weights = np.zeros((T, n_atoms))
    for t, k, v in w_entries:
        weights[t, k] = v
    counts = np.zeros((max(T - 1, 0), n_atoms), dtype=np.int64)
    for t, cur in enumerate(atom_counts):
        for k, c in cur.items():
            counts[t, k] = c
    return LatentProcess(weights, counts, root)


@dataclass
class BirthDeathResult:
    """Event log of the continuous-time interaction process.

    ``events`` rows are (time, +1 birth / -1 death, i, j, count after event),
    sorted by time.
    """

    events: list
    horizon: float
    initial: dict

    def trajectory(self, pair):
        """Breakpoints and counts of n_ij(t): count[k] holds on [times[k], times[k+1])."""
        pair = (min(pair), max(pair))
        times = [0.0]
        counts = [self.initial.get(pair, 0)]
        for time, _, i, j, after in self.events:
            if (i, j) == pair:
                times.append(time)
                counts.append(after)
        return np.array(times), np.array(counts)

    def time_average(self, pair, start=0.0):
        times, counts = self.trajectory(pair)
        edges = np.append(times, self.horizon)
        lo = np.clip(edges[:-1], start, self.horizon)
        hi = np.clip(edges[1:], start, self.horizon)
        return float(np.sum(counts * (hi - lo)) / (self.horizon - start))

    def connected(self, pair, time):
        times, counts = self.trajectory(pair)
        return bool(counts[np.searchsorted(times, time, side="right") - 1] >= 1)


def _piecewise(path):
    breaks, values = path
    breaks = np.asarray(breaks, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(breaks) != len(values) + 1 or np.any(np.diff(breaks) <= 0):
        raise ValueError("a weight path needs increasing breakpoints and one value per piece")
    if np.any(values < 0):
        raise ValueError("weights must be non-negative")
    return breaks, values


def simulate_birth_death(weight_paths, rho, rng, allow_self_loops=False):
    """Event-driven simulation of the continuous-time interaction process.

    ``weight_paths`` maps node -> (breakpoints, values): piecewise-constant
    sociabilities on [breakpoints[0], breakpoints[-1]], all sharing the same
    horizon.  Interactions between i != j arrive as a Poisson process with
    rate 2 w_i(t) w_j(t) (w_i(t)^2 for self-pairs) and each lives an
    Exponential(rho) time.
    """
    rng = _rng(rng)
    if not rho > 0:
        raise ValueError("rho must be > 0 for the birth-death process")
    paths = {k: _piecewise(p) for k, p in weight_paths.items()}
    if not paths:
        return BirthDeathResult([], 0.0, {})
    starts = {p[0][0] for p in paths.values()}
    ends = {p[0][-1] for p in paths.values()}
    if len(starts) != 1 or len(ends) != 1:
        raise ValueError("all weight paths must share the same time window")
    t0, horizon = starts.pop(), ends.pop()
    nodes = sorted(paths)
    raw = []
    for a, i in enumerate(nodes):
        for j in nodes[a:]:
            if i == j and not allow_self_loops:
                continue
            grid = np.union1d(paths[i][0], paths[j][0])
            mids = 0.5 * (grid[:-1] + grid[1:])
            wi = paths[i][1][np.searchsorted(paths[i][0], mids, side="right") - 1]
            wj = paths[j][1][np.searchsorted(paths[j][0], mids, side="right") - 1]
            rate = (1.0 if i == j else 2.0) * wi * wj
            for lo, hi, lam in zip(grid[:-1], grid[1:], rate):
                if lam <= 0:
                    continue
                k = int(rng.poisson(lam * (hi - lo)))
                if k == 0:
                    continue
                born = np.sort(rng.uniform(lo, hi, size=k))
                dies = born + rng.exponential(1.0 / rho, size=k)
                for b, d in zip(born, dies):
                    raw.append((b, 1, i, j))
                    if d < horizon:
                        raw.append((d, -1, i, j))
    raw.sort(key=lambda e: (e[0], -e[1]))
    counts = {}
    events = []
    for time, kind, i, j in raw:
        counts[(i, j)] = counts.get((i, j), 0) + kind
        events.append((time - t0 if t0 else time, kind, i, j, counts[(i, j)]))
    return BirthDeathResult(events, horizon - t0 if t0 else horizon, {})
