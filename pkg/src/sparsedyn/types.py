"""Domain types shared by simulation, inference and I/O."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class HyperParams:
    """Model hyperparameters.

    ``delta`` holds the T-1 gaps between consecutive snapshots; ``None``
    means unit gaps.
    """

    alpha: float
    tau: float
    phi: float
    rho: float
    delta: tuple | None = None

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if not self.tau > 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if not self.phi >= 0:
            raise ValueError(f"phi must be >= 0, got {self.phi}")
        if not self.rho >= 0:
            raise ValueError(f"rho must be >= 0, got {self.rho}")
        if self.delta is not None:
            self.delta = tuple(float(d) for d in self.delta)
            if any(not d > 0 for d in self.delta):
                raise ValueError("every time gap must be > 0")

    def gaps(self, T):
        if self.delta is None:
            return np.ones(max(T - 1, 0))
        if len(self.delta) != T - 1:
            raise ValueError(f"expected {T - 1} time gaps, got {len(self.delta)}")
        return np.asarray(self.delta, dtype=float)

    def forget_prob(self, delta_t=1.0):
        """Survival probability of a remembered interaction over one gap."""
        return math.exp(-self.rho * delta_t)

    def rate(self, t, T):
        """Gamma rate of the weights at 1-based time ``t``.

        Interior times see both neighbouring latent counts (tau + 2 phi);
        the first and last snapshot see only one (tau + phi).  A single
        snapshot has no latent counts at all and falls back to tau.
        """
        return self.tau + self.phi * ((t > 1) + (t < T))

    def replace(self, **kw):
        d = dict(alpha=self.alpha, tau=self.tau, phi=self.phi, rho=self.rho, delta=self.delta)
        d.update(kw)
        return HyperParams(**d)


@dataclass
class PriorConfig:
    """Gamma(shape, rate) priors on the hyperparameters plus the random-walk scale."""

    a_alpha: float = 1.0
    b_alpha: float = 1.0
    a_phi: float = 1.0
    b_phi: float = 0.1
    a_tau: float = 1.0
    b_tau: float = 1.0
    a_rho: float = 1.0
    b_rho: float = 1.0
    rw_sigma: float = 0.1

    def __post_init__(self):
        for k, v in self.__dict__.items():
            if not v > 0:
                raise ValueError(f"prior setting {k} must be > 0, got {v}")


@dataclass
class WeightChain:
    """Per-time sparse node weights plus the root (unattached) mass."""

    weights: list  # list of dict node -> weight > 0
    root: np.ndarray  # shape (T,)

    def __post_init__(self):
        self.root = np.asarray(self.root, dtype=float)
        if len(self.weights) != len(self.root):
            raise ValueError("weights and root masses must have the same length")
        if np.any(self.root < 0):
            raise ValueError("root mass must be non-negative")
        for t, wt in enumerate(self.weights):
            for k, v in wt.items():
                if not v > 0:
                    raise ValueError(f"stored weight must be > 0 (t={t + 1}, node={k})")

    @property
    def T(self):
        return len(self.weights)

    def nodes(self):
        out = set()
        for wt in self.weights:
            out.update(wt)
        return sorted(out)

    def total_mass(self):
        return np.array([sum(wt.values()) for wt in self.weights]) + self.root

    def path(self, node):
        return np.array([wt.get(node, 0.0) for wt in self.weights])


@dataclass
class CountChain:
    """Per-time latent Poisson counts; one slice per transition t -> t+1."""

    counts: list  # list of dict node -> int >= 0
    root: np.ndarray

    def __post_init__(self):
        self.root = np.asarray(self.root, dtype=np.int64)
        if len(self.counts) != len(self.root):
            raise ValueError("counts and root counts must have the same length")
        if np.any(self.root < 0):
            raise ValueError("counts must be non-negative")
        for ct in self.counts:
            if any(v < 0 for v in ct.values()):
                raise ValueError("counts must be non-negative")

    def total(self):
        return np.array([sum(ct.values()) for ct in self.counts], dtype=np.int64) + self.root


def _pair(i, j):
    return (i, j) if i <= j else (j, i)


@dataclass
class InteractionTensor:
    """Per-time sparse symmetric interaction counts split into new and remembered parts.

    Pairs are stored once with ``i <= j``; the symmetric entry is implied.
    """

    new: list  # list of dict (i, j) -> int
    old: list

    def __post_init__(self):
        if len(self.new) != len(self.old):
            raise ValueError("new and old slices must have the same length")
        for sl in (*self.new, *self.old):
            for (i, j), v in sl.items():
                if i > j:
                    raise ValueError(f"pair keys must satisfy i <= j, got {(i, j)}")
                if v < 0:
                    raise ValueError("interaction counts must be non-negative")
        if self.old and any(v > 0 for v in self.old[0].values()):
            raise ValueError("no remembered interactions at the first time")

    @property
    def T(self):
        return len(self.new)

    def total(self, t):
        """Total counts at 0-based time index ``t``."""
        out = dict(self.new[t])
        for k, v in self.old[t].items():
            out[k] = out.get(k, 0) + v
        return {k: v for k, v in out.items() if v > 0}

    def get(self, t, i, j, part="total"):
        key = _pair(i, j)
        if part == "new":
            return self.new[t].get(key, 0)
        if part == "old":
            return self.old[t].get(key, 0)
        return self.new[t].get(key, 0) + self.old[t].get(key, 0)

    def multiplicities(self, t):
        """Endpoint multiplicities of new interactions at time index ``t``.

        A self-pair contributes two endpoints to its node.
        """
        m = {}
        for (i, j), v in self.new[t].items():
            if v == 0:
                continue
            m[i] = m.get(i, 0) + v
            m[j] = m.get(j, 0) + v
        return m

    def check(self):
        for t in range(1, self.T):
            prev = self.total(t - 1)
            for key, v in self.old[t].items():
                if v > prev.get(key, 0):
                    raise ValueError(f"remembered count exceeds previous total at t={t + 1}, pair={key}")


@dataclass
class DynamicGraph:
    """Per-time undirected edge sets derived from interaction counts."""

    edges: list  # list of set of (i, j), i <= j

    @classmethod
    def from_interactions(cls, inter: InteractionTensor):
        return cls([set(inter.total(t)) for t in range(inter.T)])

    @property
    def T(self):
        return len(self.edges)

    def node_count(self, t):
        nodes = set()
        for i, j in self.edges[t]:
            nodes.add(i)
            nodes.add(j)
        return len(nodes)

    def edge_count(self, t):
        return len(self.edges[t])

    def degrees(self, t):
        deg = {}
        for i, j in self.edges[t]:
            deg[i] = deg.get(i, 0) + 1
            if j != i:
                deg[j] = deg.get(j, 0) + 1
        return deg


class ObsKind(str, enum.Enum):
    COUNTS = "counts"
    BINARY = "binary"


@dataclass
class ObservedNetwork:
    """Observed dynamic network on dense integer node ids ``0..N-1``.

    ``slices[t]`` maps pairs ``(i, j)`` with ``i <= j`` to a count (COUNTS:
    observed new interactions) or to 1 (BINARY: edge present).
    """

    kind: ObsKind
    slices: list
    n_nodes: int
    allow_self_loops: bool = False
    times: list = field(default=None)
    labels: list = field(default=None)

    def __post_init__(self):
        self.kind = ObsKind(self.kind)
        if self.times is None:
            self.times = list(range(1, len(self.slices) + 1))
        if len(self.times) != len(self.slices):
            raise ValueError("times and slices must have the same length")
        for t, sl in enumerate(self.slices):
            for (i, j), v in sl.items():
                if i > j:
                    raise ValueError(f"pair keys must satisfy i <= j, got {(i, j)}")
                if not (0 <= i < self.n_nodes and 0 <= j < self.n_nodes):
                    raise ValueError(f"node id out of range in pair {(i, j)}")
                if v < 0:
                    raise ValueError(f"negative count at t={self.times[t]}, pair={(i, j)}")
                if self.kind is ObsKind.BINARY and v not in (0, 1):
                    raise ValueError(f"binary observation must be 0/1, got {v}")
                if i == j and not self.allow_self_loops and v > 0:
                    raise ValueError(f"self-loop {(i, j)} present but self-loops are disabled")

    @property
    def T(self):
        return len(self.slices)

    def deltas(self):
        return np.diff(np.asarray(self.times, dtype=float))
