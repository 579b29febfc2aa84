"""Command-line entry point: ``sparsedyn <subcommand> ...``.

Set ``SPARSEDYN_LOG`` (DEBUG, INFO, WARNING, ...) to control verbosity.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import formats
from .generative import simulate_birth_death, simulate_network
from .types import ObsKind

log = logging.getLogger("sparsedyn")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _csv_writer(fh):
    return csv.writer(fh, lineterminator="\n")


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return x


def _write_rows(path, header, rows):
    with Path(path).open("w", newline="") as fh:
        wr = _csv_writer(fh)
        wr.writerow(header)
        for r in rows:
            wr.writerow([_fmt(v) for v in r])


def _config(args):
    return formats.load_config(args.config) if args.config else formats.Config().validate()


# ---- simulate -----------------------------------------------------------

def _read_weight_paths(path):
    """CSV ``node,time,weight``: weight holds from ``time`` until the node's next row.

    The last row of each node only closes its final piece (its weight is ignored).
    """
    rows = {}
    with Path(path).open(newline="") as fh:
        rd = csv.DictReader(fh)
        if rd.fieldnames is None or not {"node", "time", "weight"} <= set(rd.fieldnames):
            raise ValueError(f"{path}: expected columns node,time,weight")
        for n, r in enumerate(rd, 2):
            try:
                rows.setdefault(r["node"], []).append((float(r["time"]), float(r["weight"])))
            except ValueError:
                raise ValueError(f"{path}:{n}: non-numeric time or weight") from None
    paths = {}
    for node, pts in rows.items():
        pts.sort()
        if len(pts) < 2:
            raise ValueError(f"{path}: node {node!r} needs at least two rows")
        paths[node] = ([p[0] for p in pts], [p[1] for p in pts[:-1]])
    return paths


def cmd_simulate(args):
    cfg = _config(args)
    rng = np.random.default_rng(args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.continuous:
        return _simulate_continuous(args, cfg, rng, out)
    sim = simulate_network(cfg.hyper(), cfg.T, rng, allow_self_loops=cfg.self_loops)
    kind = ObsKind(cfg.kind)
    obs = formats.network_from_simulation(sim, kind)
    formats.write_edge_list(obs, out / "edges.txt")
    snap = out / "snapshots"
    snap.mkdir(exist_ok=True)
    inter = sim.interactions
    width = max(4, len(str(cfg.T)))
    for t in range(cfg.T):
        keys = sorted(set(inter.new[t]) | set(inter.old[t]))
        _write_rows(snap / f"t{t + 1:0{width}d}.csv", ["src", "dst", "new", "old"],
                    [(i, j, inter.new[t].get((i, j), 0), inter.old[t].get((i, j), 0)) for i, j in keys])
    proc = sim.process
    w_rows = [(t + 1, k, float(proc.weights[t, k])) for t in range(cfg.T) for k in np.flatnonzero(proc.weights[t])]
    _write_rows(out / "weights.csv", ["t", "node", "weight"], w_rows)
    c_rows = [(t + 1, k, int(proc.counts[t, k])) for t in range(cfg.T - 1) for k in np.flatnonzero(proc.counts[t])]
    _write_rows(out / "counts.csv", ["t", "node", "count"], c_rows)
    _write_rows(out / "root.csv", ["t", "root_weight"], [(t + 1, float(v)) for t, v in enumerate(proc.root)])
    (out / "truth.cfg").write_text(formats.dump_config(cfg))
    log.info("simulated %d snapshots with %d atoms", cfg.T, proc.n_atoms)
    print(f"wrote {cfg.T} snapshots to {out}")
    return 0


def _simulate_continuous(args, cfg, rng, out):
    if args.weights:
        paths = _read_weight_paths(args.weights)
    else:
        # piecewise-constant paths from a discrete draw, one unit per snapshot
        sim = simulate_network(cfg.hyper(), cfg.T, rng, allow_self_loops=cfg.self_loops)
        W = sim.process.weights
        breaks = np.arange(cfg.T + 1, dtype=float)
        paths = {str(k): (breaks, W[:, k]) for k in range(W.shape[1]) if W[:, k].any()}
    if not cfg.rho > 0:
        raise ValueError("the birth-death process needs rho > 0")
    res = simulate_birth_death(paths, cfg.rho, rng, allow_self_loops=cfg.self_loops)
    _write_rows(out / "events.csv", ["time", "event", "src", "dst", "count"],
                [(float(tm), "birth" if d > 0 else "death", i, j, n) for tm, d, i, j, n in res.events])
    print(f"wrote {len(res.events)} events to {out / 'events.csv'}")
    return 0


# ---- fit ----------------------------------------------------------------

def _fit_chain(job):
    obs, cfg, seed, path = job
    from .inference import run_mcmc

    stream = run_mcmc(obs, cfg.hyper(), cfg.schedule(), np.random.default_rng(seed), cfg.prior())
    last = {}

    def keep(s):
        for rec in s:
            last.clear()
            last.update(rec)
            yield rec

    n = formats.write_samples(keep(stream), path)
    return n, last.get("acceptance", {})


def cmd_fit(args):
    cfg = _config(args)
    for name in ("burnin", "samples", "thin"):
        v = getattr(args, name)
        if v is not None:
            setattr(cfg, name, v)
    cfg.validate()
    obs = formats.parse_edge_list(args.data, allow_self_loops=cfg.self_loops)
    if obs.T == 0:
        raise ValueError(f"{args.data}: no observations to fit")
    if cfg.no_memory and obs.kind is ObsKind.BINARY:
        raise ValueError("no-memory mode needs a count column in the data")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seeds = np.random.SeedSequence(args.seed).spawn(args.chains)
    names = ["samples.jsonl"] if args.chains == 1 else [f"samples_chain{i + 1}.jsonl" for i in range(args.chains)]
    jobs = [(obs, cfg, s, out / n) for s, n in zip(seeds, names)]
    workers = min(args.chains, os.cpu_count() or 1)
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            results = list(ex.map(_fit_chain, jobs))
    else:
        results = [_fit_chain(j) for j in jobs]
    rows = []
    for chain, (n, acc) in enumerate(results, 1):
        for kernel in sorted(acc):
            rows.append((chain, kernel, float(acc[kernel])))
    _write_rows(out / "acceptance.csv", ["chain", "kernel", "rate"], rows)
    print(f"wrote {sum(r[0] for r in results)} samples over {args.chains} chain(s) to {out}")
    return 0


# ---- geweke -------------------------------------------------------------

def cmd_geweke(args):
    from .validation import geweke_test

    cfg = _config(args)
    rep = geweke_test(cfg.hyper(), cfg.T, args.n, np.random.default_rng(args.seed), prior=cfg.prior(),
                      sample_hyper=args.sample_hyper, kind=ObsKind(cfg.kind), n_chains=args.chains)
    wr = _csv_writer(sys.stdout)
    wr.writerow(["statistic", "z", "marginal_mean", "successive_mean"])
    for k in rep.z:
        wr.writerow([k, _fmt(float(rep.z[k])), _fmt(float(rep.marginal_mean[k])),
                     _fmt(float(rep.successive_mean[k]))])
    worst = rep.max_abs_z()
    ok = rep.passed(args.threshold)
    print(f"# max |z| = {worst:.3f}; {'pass' if ok else 'FAIL'} at threshold {args.threshold}", file=sys.stderr)
    return 0 if ok else 1


# ---- diagnose -----------------------------------------------------------

def _autocorr1(x):
    x = np.asarray(x, float)
    if len(x) < 3 or np.var(x) == 0:
        return float("nan")
    d = x - x.mean()
    return float(np.dot(d[:-1], d[1:]) / np.dot(d, d))


def summarize_samples(records, level=0.9):
    """Posterior means and central intervals for weights and hyperparameters."""
    lo_q, hi_q = (1 - level) / 2, 1 - (1 - level) / 2
    hyper = {}
    weights = {}
    n = 0
    T = None
    for rec in records:
        if T is None:
            T = len(rec["weights"])
        for k, v in rec["hyper"].items():
            hyper.setdefault(k, []).append(v)
        for t, wt in enumerate(rec["weights"]):
            for label, v in wt.items():
                weights.setdefault(label, {}).setdefault(t, []).append((n, v))
        n += 1
    if n == 0:
        raise ValueError("no samples to summarize")
    node_rows = []
    for label in sorted(weights, key=lambda s: (len(s), s)):
        for t in range(T):
            vals = np.zeros(n)
            for i, v in weights[label].get(t, []):
                vals[i] = v
            node_rows.append((label, t + 1, float(vals.mean()), float(np.quantile(vals, lo_q)),
                              float(np.quantile(vals, hi_q)), float((vals > 0).mean())))
    hyper_rows = []
    for k, vals in hyper.items():
        v = np.asarray(vals, float)
        hyper_rows.append((k, float(v.mean()), float(v.std()), float(np.quantile(v, lo_q)),
                           float(np.median(v)), float(np.quantile(v, hi_q)), _autocorr1(v)))
    return node_rows, hyper_rows, hyper, T


def cmd_diagnose(args):
    from .plotting import plot_traces, plot_weight_intervals

    node_rows, hyper_rows, traces, T = summarize_samples(formats.read_samples(args.samples))
    out = Path(args.out) if args.out else Path(args.samples).parent
    out.mkdir(parents=True, exist_ok=True)
    _write_rows(out / "weights_summary.csv", ["node", "t", "mean", "lo90", "hi90", "alive_prob"], node_rows)
    _write_rows(out / "hyper_summary.csv", ["param", "mean", "sd", "lo90", "median", "hi90", "lag1_autocorr"],
                hyper_rows)
    # figure: the nodes with the largest average posterior mean
    by_node = {}
    for label, t, mean, lo, hi, _ in node_rows:
        by_node.setdefault(label, []).append((mean, lo, hi))
    top = sorted(by_node, key=lambda k: -sum(r[0] for r in by_node[k]))[:args.top]
    times = np.arange(1, T + 1)
    plot_weight_intervals(times, {k: tuple(np.array(by_node[k]).T) for k in top}, out / "weights.png")
    plot_traces(traces, out / "traces.png")
    wr = _csv_writer(sys.stdout)
    wr.writerow(["param", "mean", "sd", "lo90", "median", "hi90", "lag1_autocorr"])
    for r in hyper_rows:
        wr.writerow([_fmt(v) for v in r])
    return 0


# ---- sparsity -----------------------------------------------------------

def _alphas(text):
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty alpha list")
    return vals


def cmd_sparsity(args):
    from .validation import dense_control, sparsity_experiment

    cfg = _config(args)
    rng = np.random.default_rng(args.seed)
    rows = sparsity_experiment(args.alphas, cfg.hyper(), cfg.T, args.replicates, rng)
    dense = dense_control(args.alphas, cfg.hyper(), cfg.T, args.replicates, rng) if args.dense else None
    wr = _csv_writer(sys.stdout)
    wr.writerow(["model", "alpha", "median_ratio", "nonempty", "replicates"])
    for name, table in (("model", rows), ("dense", dense or [])):
        for r in table:
            wr.writerow([name, _fmt(float(r["alpha"])), _fmt(float(r["median_ratio"])), r["nonempty"],
                         r["replicates"]])
    if args.out:
        from .plotting import plot_sparsity

        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        table = [(n, r) for n, t in (("model", rows), ("dense", dense or [])) for r in t]
        _write_rows(out / "sparsity.csv", ["model", "alpha", "median_ratio", "nonempty", "replicates"],
                    [(n, float(r["alpha"]), float(r["median_ratio"]), r["nonempty"], r["replicates"])
                     for n, r in table])
        plot_sparsity(rows, out / "sparsity.png", dense)
    return 0


# ---- entry point --------------------------------------------------------

def build_parser():
    p = _Parser(prog="sparsedyn", description="Sparse dynamic network model: simulation, inference, checks.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("simulate", help="forward-simulate a dynamic network")
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--continuous", action="store_true", help="continuous-time birth-death interactions")
    s.add_argument("--weights", help="CSV node,time,weight paths for --continuous")
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="run MCMC on an edge list")
    f.add_argument("--data", required=True)
    f.add_argument("--config")
    f.add_argument("--out", required=True)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--burnin", type=int)
    f.add_argument("--samples", type=int)
    f.add_argument("--thin", type=int)
    f.add_argument("--chains", type=int, default=1)
    f.set_defaults(func=cmd_fit)

    g = sub.add_parser("geweke", help="joint-distribution test of the sampler")
    g.add_argument("--config")
    g.add_argument("--n", type=int, default=10000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--chains", type=int, default=100)
    g.add_argument("--threshold", type=float, default=4.0)
    g.add_argument("--sample-hyper", action="store_true")
    g.set_defaults(func=cmd_geweke)

    d = sub.add_parser("diagnose", help="summaries and figures from a sample stream")
    d.add_argument("--samples", required=True)
    d.add_argument("--out")
    d.add_argument("--top", type=int, default=8)
    d.set_defaults(func=cmd_diagnose)

    y = sub.add_parser("sparsity", help="edge / node^2 ratio against alpha")
    y.add_argument("--config")
    y.add_argument("--alphas", type=_alphas, default=[2.0, 8.0, 32.0, 128.0])
    y.add_argument("--replicates", type=int, default=20)
    y.add_argument("--seed", type=int, default=0)
    y.add_argument("--dense", action="store_true", help="add the constant-weight control")
    y.add_argument("--out")
    y.set_defaults(func=cmd_sparsity)
    return p


def main(argv=None):
    level = os.environ.get("SPARSEDYN_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return 2
    if getattr(args, "chains", 1) < 1:
        print(f"{parser.prog}: error: --chains must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ValueError, OSError, formats.FormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
