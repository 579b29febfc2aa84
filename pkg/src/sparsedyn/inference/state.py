"""Dense MCMC state over the observed nodes.

Time indices are 0-based throughout the inference package.  Node k is
*alive* at t when ``w[t, k] > 0``; lifetimes are contiguous, and
``c[t, k] > 0`` exactly when k is alive at both t and t+1.  Mass and
counts of all atoms never seen in an interaction are carried as the root
totals ``w_root`` and ``c_root``.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from ..types import HyperParams, ObservedNetwork, ObsKind


@dataclass
class HmcConfig:
    step_size: float = 0.05
    n_leapfrog: int = 10
    mass: float = 1.0

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValueError("HMC step size must be > 0")
        if self.n_leapfrog < 0:
            raise ValueError("number of leapfrog steps must be >= 0")
        if not self.mass > 0:
            raise ValueError("HMC mass must be > 0")


@dataclass
class McmcState:
    kind: ObsKind
    hp: HyperParams
    w: np.ndarray        # (T, K)
    w_root: np.ndarray   # (T,)
    c: np.ndarray        # (T-1, K)
    c_root: np.ndarray   # (T-1,)
    pairs: np.ndarray    # (P, 2), i <= j
    n_new: np.ndarray    # (T, P)
    n_old: np.ndarray    # (T, P)
    z: np.ndarray | None = None  # (T, P) bool, BINARY observations
    no_memory: bool = False
    no_death: bool = False
    m: np.ndarray = field(default=None)
    labels: list | None = None

    def __post_init__(self):
        if self.m is None:
            self.refresh()

    @property
    def T(self):
        return self.w.shape[0]

    @property
    def K(self):
        return self.w.shape[1]

    def gaps(self):
        return self.hp.gaps(self.T)

    def forget_probs(self):
        """Survival probability for each transition t-1 -> t (entry t-1)."""
        if self.no_death:
            return np.ones(self.T - 1)
        return np.exp(-self.hp.rho * self.gaps())

    def rate(self, t):
        return self.hp.rate(t + 1, self.T)

    def multiplicities(self, t):
        nn = self.n_new[t]
        return (np.bincount(self.pairs[:, 0], weights=nn, minlength=self.K)
                + np.bincount(self.pairs[:, 1], weights=nn, minlength=self.K)).astype(np.int64)

    def refresh(self):
        self.m = np.stack([self.multiplicities(t) for t in range(self.T)]) if self.T else np.zeros((0, self.K), np.int64)

    def n_total(self, t):
        return self.n_new[t] + self.n_old[t]

    def count_shape(self, t):
        """c_{t-1} + c_t per node (missing neighbours count as zero)."""
        a = np.zeros(self.K, dtype=np.int64)
        if t > 0:
            a += self.c[t - 1]
        if t < self.T - 1:
            a += self.c[t]
        return a

    def root_shape(self, t):
        a = self.hp.alpha
        if t > 0:
            a += self.c_root[t - 1]
        if t < self.T - 1:
            a += self.c_root[t]
        return a

    def total_mass(self):
        return self.w.sum(axis=1) + self.w_root

    def copy(self):
        return copy.deepcopy(self)

    def lifetimes(self):
        """(first, last) alive time per node; (-1, -1) for never-alive nodes."""
        alive = self.w > 0
        out = np.full((self.K, 2), -1, dtype=np.int64)
        any_alive = alive.any(axis=0)
        out[any_alive, 0] = np.argmax(alive[:, any_alive], axis=0)
        out[any_alive, 1] = self.T - 1 - np.argmax(alive[::-1, any_alive], axis=0)
        return out

    def check(self, tol=1e-9):
        """Raise ``AssertionError`` if any structural invariant is violated."""
        T, K = self.T, self.K
        assert np.all(self.w >= 0) and np.all(self.w_root > 0), "weights must be >= 0, root > 0"
        assert np.all(self.c >= 0) and np.all(self.c_root >= 0), "counts must be >= 0"
        alive = self.w > 0
        if T > 1:
            both = alive[:-1] & alive[1:]
            assert np.array_equal(self.c > 0, both), "c > 0 must coincide with alive at t and t+1"
        lt = self.lifetimes()
        for k in range(K):
            b, e = lt[k]
            assert b >= 0, f"node {k} is never alive"
            assert alive[b:e + 1, k].all(), f"node {k} has a broken lifetime"
        m = np.stack([self.multiplicities(t) for t in range(T)])
        assert np.array_equal(m, self.m), "multiplicity cache is stale"
        assert np.all(alive | (m == 0)), "interactions at a dead node"
        a = m + np.stack([self.count_shape(t) for t in range(T)])
        assert np.all(a[alive] > 0), "alive node with nothing anchoring its weight"
        assert np.all(self.n_new >= 0) and np.all(self.n_old >= 0)
        assert not np.any(self.n_old[0]), "remembered interactions at the first time"
        for t in range(1, T):
            assert np.all(self.n_old[t] <= self.n_total(t - 1)), "remembered count exceeds previous total"
            if self.no_death:
                assert np.array_equal(self.n_old[t], self.n_total(t - 1)), "no-death mode keeps every interaction"
        if self.no_memory:
            assert not np.any(self.n_old), "no-memory mode has no remembered interactions"
        if self.kind is ObsKind.BINARY and self.z is not None:
            assert np.array_equal(self.n_total_all() > 0, self.z), "edge indicator mismatch"
        return True

    def n_total_all(self):
        return self.n_new + self.n_old


def _init_weights(m, T, K, hp, phi):
    w = np.zeros((T, K))
    c = np.zeros((max(T - 1, 0), K), dtype=np.int64)
    seen = m > 0
    for k in range(K):
        ts = np.flatnonzero(seen[:, k])
        if len(ts) == 0:
            raise ValueError(f"node {k} has no interactions")
        b, e = ts[0], ts[-1]
        if e > b and phi == 0:
            raise ValueError("phi = 0 cannot link a node across time steps")
        for t in range(b, e + 1):
            rate = hp.rate(t + 1, T)
            w[t, k] = (m[t, k] + 1.0) / (rate + np.sqrt(m[t].sum() + 1.0))
        for t in range(b, e):
            c[t, k] = max(1, int(round(phi * w[t, k])))
    return w, c


def init_state(obs: ObservedNetwork, hp: HyperParams, no_memory=False, no_death=False):
    """A valid starting state for the sampler given observations."""
    T = obs.T
    if T == 0:
        raise ValueError("cannot fit a network with no time steps")
    gaps = obs.deltas()
    if hp.delta is None and T > 1 and not np.allclose(gaps, 1.0):
        hp = hp.replace(delta=tuple(gaps))
    keys = sorted({k for sl in obs.slices for k, v in sl.items() if v > 0})
    used = sorted({i for p in keys for i in p})
    remap = {old: new for new, old in enumerate(used)}
    pairs = np.array([(remap[i], remap[j]) for i, j in keys], dtype=np.int64).reshape(-1, 2)
    K, P = len(used), len(keys)
    index = {k: p for p, k in enumerate(keys)}
    obs_arr = np.zeros((T, P), dtype=np.int64)
    for t, sl in enumerate(obs.slices):
        for k, v in sl.items():
            if v > 0:
                obs_arr[t, index[k]] = v
    n_new = np.zeros((T, P), dtype=np.int64)
    n_old = np.zeros((T, P), dtype=np.int64)
    z = None
    if obs.kind is ObsKind.COUNTS:
        n_new[:] = obs_arr
        if no_death and not no_memory:
            for t in range(1, T):
                n_old[t] = n_new[t - 1] + n_old[t - 1]
    else:
        if no_memory:
            raise ValueError("no-memory mode needs observed interaction counts")
        z = obs_arr > 0
        for t in range(T):
            if no_death and t > 0:
                prev = n_new[t - 1] + n_old[t - 1]
                if np.any(prev[~z[t]] > 0):
                    raise ValueError("edges disappear but the no-death mode forbids it")
                n_old[t] = prev
                n_new[t] = (z[t] & (prev == 0)).astype(np.int64)
            else:
                n_new[t] = z[t].astype(np.int64)
    m = (np.stack([np.bincount(pairs[:, 0], weights=n_new[t], minlength=K)
                   + np.bincount(pairs[:, 1], weights=n_new[t], minlength=K) for t in range(T)])
         .astype(np.int64))
    w, c = _init_weights(m, T, K, hp, hp.phi)
    w_root = np.array([hp.alpha / hp.rate(t + 1, T) for t in range(T)])
    c_root = np.array([int(round(hp.phi * w_root[t])) for t in range(T - 1)], dtype=np.int64)
    labels = [obs.labels[i] for i in used] if obs.labels else used
    st = McmcState(obs.kind, hp, w, w_root, c, c_root, pairs, n_new, n_old, z,
                   no_memory=no_memory, no_death=no_death, labels=labels)
    return st


def state_from_simulation(sim, kind=ObsKind.BINARY, no_memory=False, no_death=False):
    """Project a full simulated draw onto the observed-node state used by the sampler.

    Atoms that never interact are folded into the root totals.
    """
    proc, inter = sim.process, sim.interactions
    T = proc.T
    keys = sorted({k for t in range(T) for k in inter.total(t)})
    used = sorted({i for p in keys for i in p})
    remap = {old: new for new, old in enumerate(used)}
    pairs = np.array([(remap[i], remap[j]) for i, j in keys], dtype=np.int64).reshape(-1, 2)
    n_new = np.array([[inter.new[t].get(k, 0) for k in keys] for t in range(T)], dtype=np.int64).reshape(T, -1)
    n_old = np.array([[inter.old[t].get(k, 0) for k in keys] for t in range(T)], dtype=np.int64).reshape(T, -1)
    if no_memory:
        n_old[:] = 0
    hidden = np.ones(proc.n_atoms, dtype=bool)
    hidden[used] = False
    w = proc.weights[:, used].copy()
    c = proc.counts[:, used].copy() if T > 1 else np.zeros((0, len(used)), dtype=np.int64)
    w_root = proc.root + proc.weights[:, hidden].sum(axis=1)
    c_root = proc.counts[:, hidden].sum(axis=1).astype(np.int64) if T > 1 else np.zeros(0, dtype=np.int64)
    z = (n_new + n_old) > 0 if kind is ObsKind.BINARY else None
    return McmcState(ObsKind(kind), sim.hp, w, w_root, c, c_root, pairs, n_new, n_old, z,
                     no_memory=no_memory, no_death=no_death, labels=used)


def process_from_state(state: McmcState, rng):
    """Inverse of :func:`state_from_simulation` up to relabelling.

    Observed atoms keep their weights and counts; the root totals are
    expanded into explicit atoms by an exact conditional draw.
    """
    from ..generative import LatentProcess, lift_unobserved

    hidden = lift_unobserved(state.w_root, state.c_root, state.hp, rng)
    w = np.concatenate([state.w, hidden.weights], axis=1)
    c = np.concatenate([state.c, hidden.counts], axis=1)
    return LatentProcess(w, c, hidden.root.copy())
