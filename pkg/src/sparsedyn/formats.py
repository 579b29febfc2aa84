"""Edge-list ingestion, configuration files and the posterior sample stream.

Edge lists are whitespace-separated lines ``<t> <src> <dst> [<count>]``
with ``#`` comments; a count column on every line means the file holds
observed interaction counts, no count column means binary edges.  Node
tokens are mapped to dense integers in sorted token order, so that
parsing a serialised network gives back the same ids, and the map is
stored next to the data as ``<file>.ids``.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .inference.mcmc import Schedule
from .inference.state import HmcConfig
from .types import HyperParams, ObservedNetwork, ObsKind, PriorConfig

log = logging.getLogger(__name__)


class FormatError(ValueError):
    pass


# ---- edge lists ---------------------------------------------------------

def parse_edge_list(path, allow_self_loops=False, write_ids=True):
    path = Path(path)
    rows = []
    kind = None
    with path.open() as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) not in (3, 4):
                raise FormatError(f"{path}:{lineno}: expected '<t> <src> <dst> [<count>]', got {raw.strip()!r}")
            this = ObsKind.COUNTS if len(parts) == 4 else ObsKind.BINARY
            if kind is None:
                kind = this
            elif kind is not this:
                raise FormatError(f"{path}:{lineno}: count column must be present on every line or on none")
            try:
                t = int(parts[0])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: time stamp {parts[0]!r} is not an integer") from None
            count = 1
            if this is ObsKind.COUNTS:
                try:
                    count = int(parts[3])
                except ValueError:
                    raise FormatError(f"{path}:{lineno}: count {parts[3]!r} is not an integer") from None
                if count < 0:
                    raise FormatError(f"{path}:{lineno}: negative count {count}")
            src, dst = parts[1], parts[2]
            if src == dst and not allow_self_loops:
                raise FormatError(f"{path}:{lineno}: self-loop on {src!r} but self-loops are disabled")
            rows.append((lineno, t, src, dst, count))
    ids = {tok: k for k, tok in enumerate(sorted({x for r in rows for x in r[2:4]}))}
    rows = [(lineno, t, ids[a], ids[b], count) for lineno, t, a, b, count in rows]
    kind = kind or ObsKind.BINARY
    times = sorted({r[1] for r in rows})
    index = {t: k for k, t in enumerate(times)}
    slices = [{} for _ in times]
    for lineno, t, i, j, count in rows:
        key = (min(i, j), max(i, j))
        sl = slices[index[t]]
        if kind is ObsKind.BINARY:
            if key in sl:
                log.warning("%s:%d: duplicate edge %s at t=%d ignored", path, lineno, key, t)
            sl[key] = 1
        else:
            sl[key] = sl.get(key, 0) + count
    for sl in slices:
        for key in [k for k, v in sl.items() if v == 0]:
            del sl[key]
    labels = list(ids)
    if write_ids:
        write_ids_file(ids, ids_path(path))
    return ObservedNetwork(kind, slices, len(ids), allow_self_loops=allow_self_loops,
                           times=times, labels=labels)


def ids_path(path):
    path = Path(path)
    return path.with_name(path.name + ".ids")


def write_ids_file(ids, path):
    with Path(path).open("w") as fh:
        for tok, k in ids.items():
            fh.write(f"{tok}\t{k}\n")


def read_ids_file(path):
    out = {}
    with Path(path).open() as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                tok, k = line.rstrip("\n").split("\t")
                out[tok] = int(k)
            except ValueError:
                raise FormatError(f"{path}:{lineno}: malformed id line") from None
    return out


def write_edge_list(obs: ObservedNetwork, path):
    labels = obs.labels or [str(i) for i in range(obs.n_nodes)]
    with Path(path).open("w") as fh:
        for t, sl in zip(obs.times, obs.slices):
            for (i, j), v in sorted(sl.items()):
                if obs.kind is ObsKind.COUNTS:
                    fh.write(f"{t} {labels[i]} {labels[j]} {v}\n")
                else:
                    fh.write(f"{t} {labels[i]} {labels[j]}\n")


def network_from_simulation(sim, kind=ObsKind.BINARY):
    """Observed network (binary edges or new-interaction counts) of a simulated draw."""
    inter = sim.interactions
    if kind is ObsKind.BINARY:
        slices = [{k: 1 for k in inter.total(t)} for t in range(inter.T)]
    else:
        slices = [{k: v for k, v in inter.new[t].items() if v > 0} for t in range(inter.T)]
    used = sorted({i for sl in slices for p in sl for i in p})
    remap = {old: new for new, old in enumerate(used)}
    slices = [{(remap[i], remap[j]): v for (i, j), v in sl.items()} for sl in slices]
    return ObservedNetwork(kind, slices, len(used), allow_self_loops=sim.allow_self_loops,
                           labels=[str(u) for u in used])


# ---- sample stream ------------------------------------------------------

def write_samples(stream, path):
    """One JSON record per line; floats keep full precision.  Returns the record count."""
    n = 0
    with Path(path).open("w") as fh:
        for rec in stream:
            fh.write(json.dumps(rec, allow_nan=True, separators=(",", ":")))
            fh.write("\n")
            n += 1
    return n


def read_samples(path):
    """Stream records back; a truncated or corrupt line raises naming its byte offset."""
    offset = 0
    with Path(path).open("rb") as fh:
        for raw in fh:
            if not raw.endswith(b"\n"):
                raise FormatError(f"{path}: partial record at byte offset {offset}")
            if raw.strip():
                try:
                    yield json.loads(raw)
                except json.JSONDecodeError as e:
                    raise FormatError(f"{path}: corrupt record at byte offset {offset}: {e.msg}") from None
            offset += len(raw)


def dense_weights(record, labels):
    """(T, len(labels)) weight matrix of a record; absent entries are zero."""
    col = {str(k): n for n, k in enumerate(labels)}
    out = np.zeros((len(record["weights"]), len(labels)))
    for t, wt in enumerate(record["weights"]):
        for k, v in wt.items():
            out[t, col[k]] = v
    return out


# ---- configuration ------------------------------------------------------

@dataclass
class Config:
    """Everything a configuration file can set, with defaults."""

    alpha: float = 3.0
    tau: float = 1.0
    phi: float = 20.0
    rho: float = 0.1
    delta: tuple | None = None
    T: int = 30
    self_loops: bool = False
    kind: str = "binary"
    a_alpha: float = 1.0
    b_alpha: float = 1.0
    a_phi: float = 1.0
    b_phi: float = 0.1
    a_tau: float = 1.0
    b_tau: float = 1.0
    a_rho: float = 1.0
    b_rho: float = 1.0
    rw_sigma: float = 0.1
    burnin: int = 500
    samples: int = 1000
    thin: int = 1
    step_size: float = 0.05
    leapfrog: int = 10
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
    extra: dict = field(default_factory=dict, repr=False)

    def hyper(self):
        return HyperParams(self.alpha, self.tau, self.phi, self.rho, self.delta)

    def prior(self):
        return PriorConfig(self.a_alpha, self.b_alpha, self.a_phi, self.b_phi, self.a_tau,
                           self.b_tau, self.a_rho, self.b_rho, self.rw_sigma)

    def schedule(self):
        return Schedule(burnin=self.burnin, samples=self.samples, thin=self.thin,
                        hmc=HmcConfig(self.step_size, self.leapfrog), adapt=self.adapt,
                        target_accept=self.target_accept, update_alpha=self.update_alpha,
                        update_phi=self.update_phi, update_tau=self.update_tau, update_rho=self.update_rho,
                        lifetime_moves=self.lifetime_moves, scale_moves=self.scale_moves,
                        scale_step=self.scale_step, no_memory=self.no_memory, no_death=self.no_death)

    def validate(self):
        self.hyper()
        self.prior()
        self.schedule()
        if self.kind not in ("binary", "counts"):
            raise ValueError(f"kind must be 'binary' or 'counts', got {self.kind!r}")
        if self.T < 1:
            raise ValueError(f"T must be >= 1, got {self.T}")
        if self.no_death:
            self.rho = 0.0
        return self


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _convert(key, typ, text):
    try:
        if typ in ("bool", bool):
            low = text.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError
        if typ in ("int", int):
            return int(text)
        if typ in ("float", float):
            v = float(text)
            if not math.isfinite(v):
                raise ValueError
            return v
        if typ in ("str", str):
            return text
        # delta: comma-separated gaps
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise FormatError(f"config key {key!r}: cannot read {text!r} as {getattr(typ, '__name__', typ)}") from None


def parse_config_text(text, source="<config>"):
    types = {f.name: f.type for f in fields(Config) if f.name != "extra"}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        for item in line.split():
            if "=" not in item:
                raise FormatError(f"{source}:{lineno}: expected key=value, got {item!r}")
            key, val = item.split("=", 1)
            name = key.strip().replace("-", "_")
            if name not in types:
                raise FormatError(f"{source}:{lineno}: unknown config key {key!r}")
            values[name] = _convert(key, types[name], val.strip())
    cfg = Config(**values)
    try:
        return cfg.validate()
    except ValueError as e:
        raise FormatError(f"{source}: {e}") from None


def load_config(path):
    """Read a flat ``key=value`` file; returns a validated :class:`Config`."""
    path = Path(path)
    return parse_config_text(path.read_text(), str(path))


def dump_config(cfg: Config):
    out = []
    for f in fields(Config):
        if f.name == "extra":
            continue
        v = getattr(cfg, f.name)
        if v is None:
            continue
        if isinstance(v, tuple):
            v = ",".join(repr(x) for x in v)
        elif isinstance(v, bool):
            v = "true" if v else "false"
        out.append(f"{f.name.replace('_', '-')}={v}")
    return "\n".join(out) + "\n"
