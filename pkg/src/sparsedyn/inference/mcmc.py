"""Sweep composition and the sampling driver."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..types import HyperParams, ObservedNetwork, ObsKind, PriorConfig
from . import hyper, kernels, scale
from .hmc import DualAveraging, update_weights_hmc
from .state import HmcConfig, McmcState, init_state

log = logging.getLogger(__name__)


@dataclass
class Schedule:
    """What a sweep updates and how samples are collected."""

    burnin: int = 500
    samples: int = 1000
    thin: int = 1
    hmc: HmcConfig = field(default_factory=HmcConfig)
    adapt: bool = True
    target_accept: float = 0.65
    update_alpha: bool = True
    update_phi: bool = True
    update_tau: bool = True
    update_rho: bool = True
    lifetime_moves: bool = True
    scale_moves: bool = True
    scale_step: float = 0.1
    no_memory: bool = False
    no_death: bool = False

    def __post_init__(self):
        if self.burnin < 0 or self.samples < 0:
            raise ValueError("burnin and samples must be >= 0")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if not self.scale_step > 0:
            raise ValueError("scale_step must be > 0")


class AcceptanceLog:
    def __init__(self):
        self.acc = {}
        self.tried = {}

    def add(self, name, accepted, tried=1):
        self.acc[name] = self.acc.get(name, 0) + int(accepted)
        self.tried[name] = self.tried.get(name, 0) + int(tried)

    def rates(self):
        return {k: (self.acc[k] / self.tried[k] if self.tried[k] else float("nan")) for k in self.tried}


class Sampler:
    """One Markov chain over :class:`McmcState`.

    Kernels can be swapped through ``overrides`` (name -> callable with the
    same signature), which the validation harness uses for its negative
    controls.
    """

    def __init__(self, state: McmcState, schedule: Schedule, prior: PriorConfig | None = None,
                 overrides=None):
        self.state = state
        self.schedule = schedule
        self.prior = prior or PriorConfig()
        self.log = AcceptanceLog()
        self.step_sizes = np.full(state.T, schedule.hmc.step_size)
        self.adapters = None
        self.scale_steps = np.full(state.T, schedule.scale_step)
        self.scale_adapters = None
        self.k = dict(
            hmc=update_weights_hmc,
            latent_counts=kernels.update_latent_counts,
            lifetime=kernels.lifetime_moves,
            scale=scale.scale_moves,
            interactions=kernels.update_interaction_slice,
            root_count=kernels.update_root_count,
            root_weight=kernels.update_root_weight,
            alpha=hyper.update_alpha,
            phi=hyper.update_phi,
            tau=hyper.update_tau,
            rho=hyper.update_rho,
        )
        if overrides:
            unknown = set(overrides) - set(self.k)
            if unknown:
                raise ValueError(f"unknown kernels: {sorted(unknown)}")
            self.k.update(overrides)

    def start_adaptation(self):
        self.adapters = [DualAveraging(s, self.schedule.target_accept) for s in self.step_sizes]
        # early trial steps can be huge; a log-factor sd above 1 is never useful here
        self.scale_adapters = [DualAveraging(s, 0.44, max_step=1.0) for s in self.scale_steps]

    def stop_adaptation(self):
        if self.adapters is not None:
            self.step_sizes = np.array([a.final() for a in self.adapters])
        if self.scale_adapters is not None:
            self.scale_steps = np.array([a.final() for a in self.scale_adapters])
        self.adapters = self.scale_adapters = None

    def sweep(self, rng):
        st, sc, k = self.state, self.schedule, self.k
        T = st.T
        cfg = sc.hmc
        for t in range(T):
            stats = {}
            step = self.adapters[t].step_size if self.adapters else self.step_sizes[t]
            c = HmcConfig(step, cfg.n_leapfrog, cfg.mass)
            self.log.add("hmc", k["hmc"](st, t, c, rng, stats))
            if self.adapters and "accept_prob" in stats:
                self.adapters[t].update(stats["accept_prob"])
        if sc.scale_moves:
            self.log.add("scale", *k["scale"](st, self.scale_steps, rng, self.scale_adapters))
        if T > 1:
            self.log.add("latent_count", *k["latent_counts"](st, rng))
            if sc.lifetime_moves:
                self.log.add("lifetime", *k["lifetime"](st, rng))
        self._interactions(rng)
        for t in range(T - 1):
            self.log.add("root_count", k["root_count"](st, t, rng))
        for t in range(T):
            self.log.add("root_weight", k["root_weight"](st, t, rng))
        self._hyper(rng)

    def _interactions(self, rng):
        st, k = self.state, self.k
        if st.kind is ObsKind.BINARY:
            for t in range(st.T):
                if st.no_death:
                    kernels.gibbs_interactions_no_death(st, t, rng)
                else:
                    self.log.add("interactions", *k["interactions"](st, t, rng))
        elif not st.no_death:
            kernels.resample_remembered_counts(st, rng)

    def _hyper(self, rng):
        st, sc, k, prior = self.state, self.schedule, self.k, self.prior
        if sc.update_alpha:
            self.log.add("alpha", k["alpha"](st, prior, rng))
        moved = False
        if sc.update_phi and st.hp.phi > 0:
            self.log.add("phi", k["phi"](st, prior, rng, resample=False))
            moved = True
        if sc.update_tau:
            self.log.add("tau", k["tau"](st, prior, rng, resample=False))
            moved = True
        if moved:
            kernels.resample_counts_exact(st, rng)
        if sc.update_rho and not (st.no_death or st.no_memory) and st.hp.rho > 0:
            self.log.add("rho", k["rho"](st, prior, rng))


def sample_record(state: McmcState, iteration, rates=None):
    """Self-describing snapshot: hyperparameters, sparse weights per time, root masses."""
    labels = state.labels if state.labels is not None else list(range(state.K))
    weights = []
    for t in range(state.T):
        nz = np.flatnonzero(state.w[t])
        weights.append({str(labels[k]): float(state.w[t, k]) for k in nz})
    hp = state.hp
    rec = {
        "iteration": int(iteration),
        "hyper": {"alpha": hp.alpha, "tau": hp.tau, "phi": hp.phi, "rho": hp.rho},
        "weights": weights,
        "root": [float(x) for x in state.w_root],
    }
    if rates is not None:
        rec["acceptance"] = {k: float(v) for k, v in rates.items()}
    return rec


def run_mcmc(obs: ObservedNetwork, hp: HyperParams, schedule: Schedule, rng,
             prior: PriorConfig | None = None, init: McmcState | None = None, overrides=None):
    """Run one chain; yields sample records after burn-in at the thinning interval.

    The final record of the stream carries the per-kernel acceptance rates.
    """
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    if init is None:
        init = init_state(obs, hp, no_memory=schedule.no_memory, no_death=schedule.no_death)
    try:
        init.check()
    except AssertionError as e:
        raise ValueError(f"initial state is inconsistent with the observations: {e}") from None
    sampler = Sampler(init, schedule, prior, overrides)
    if schedule.adapt and schedule.burnin > 0:
        sampler.start_adaptation()
    for it in range(schedule.burnin):
        sampler.sweep(rng)
    sampler.stop_adaptation()
    log.info("burn-in done; step sizes %s", np.round(sampler.step_sizes, 4))
    total = schedule.samples * schedule.thin
    for it in range(total):
        sampler.sweep(rng)
        if (it + 1) % schedule.thin == 0:
            last = it + 1 == total
            yield sample_record(sampler.state, schedule.burnin + it + 1,
                                sampler.log.rates() if last else None)


def run_chains(obs, hp, schedule, seed, n_chains=1, prior=None):
    """Independent chains with spawned RNG streams; returns one list of records per chain."""
    seeds = np.random.SeedSequence(seed).spawn(n_chains)
    return [list(run_mcmc(obs, hp, schedule, np.random.default_rng(s), prior)) for s in seeds]
