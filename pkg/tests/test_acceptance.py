"""Acceptance checks, one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` or as a script.
"""

import math
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy import integrate

from sparsedyn.densities import edge_persistence_probs, edge_prob_from_history, weight_transition_density
from sparsedyn.formats import dense_weights, network_from_simulation
from sparsedyn.generative import sample_latent_process, simulate_birth_death, simulate_network, simulate_pair_edges
from sparsedyn.inference import Schedule, init_state, kernels, run_mcmc
from sparsedyn.inference.hmc import slice_gradient, slice_terms
from sparsedyn.inference.state import state_from_simulation
from sparsedyn.types import HyperParams, ObservedNetwork, ObsKind
from sparsedyn.validation import (Grid, check_gradient, dense_control, empirical, enumerate_tiny_posterior,
                                  geweke_test, sparsity_experiment, squared_ratio_overrides, tv_distance)


@pytest.fixture
def report(acceptance_log):
    def emit(n, ok, detail):
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        acceptance_log(line)
        assert ok, line
    return emit


# ---- 1, 2: stationarity and the mean recursion ---------------------------

@pytest.fixture(scope="module")
def stationary_draws():
    hp = HyperParams(3.0, 1.0, 20.0, 0.0)
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    mass = np.array([sample_latent_process(hp, 50, rng).total_mass() for _ in range(10 ** 4)])
    return hp, mass, time.perf_counter() - t0


def test_c01_stationarity(stationary_draws, report):
    hp, mass, elapsed = stationary_draws
    n = len(mass)
    worst = 0.0
    for t in (1, 10, 50):
        x = mass[:, t - 1]
        m2 = x.var()
        z_mean = (x.mean() - hp.alpha / hp.tau) / math.sqrt(m2 / n)
        se_var = math.sqrt((np.mean((x - x.mean()) ** 4) - m2 ** 2) / n)
        z_var = (x.var(ddof=1) - hp.alpha / hp.tau ** 2) / se_var
        worst = max(worst, abs(z_mean), abs(z_var))
    report(1, worst < 3 and elapsed < 120, f"max |z| {worst:.2f} over t in (1, 10, 50); {elapsed:.0f}s")


def test_c02_mean_recursion(stationary_draws, report):
    hp, mass, _ = stationary_draws
    x, y = mass[:, 9], mass[:, 10]
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    se = math.sqrt(resid.var(ddof=2) / ((x - x.mean()) ** 2).sum())
    target = hp.phi / (hp.phi + hp.tau)
    z = (slope - target) / se
    report(2, abs(z) < 3, f"slope {slope:.4f} vs {target:.4f}, z {z:.2f}")


# ---- 3: edge probability ---------------------------------------------------

def test_c03_edge_probability(report):
    wi, wj, rho = [0.3, 0.5, 0.2, 0.4], [0.6, 0.1, 0.7, 0.3], 0.4
    n = 10 ** 5
    z = simulate_pair_edges(wi, wj, rho, 3, n)
    p = edge_prob_from_history(wi, wj, rho)
    zscore = (z.mean() - p) / math.sqrt(p * (1 - p) / n)
    rng = np.random.default_rng(3)
    gap = 0.0
    for _ in range(1000):
        L = int(rng.integers(2, 8))
        a, b = rng.uniform(0, 2, L), rng.uniform(0, 2, L)
        r = float(rng.uniform(0.01, 5))
        stay, appear = edge_persistence_probs(a, b, r)
        prev, now = edge_prob_from_history(a[:-1], b[:-1], r), edge_prob_from_history(a, b, r)
        gap = max(gap, abs(stay * prev + appear * (1 - prev) - now))
    report(3, abs(zscore) < 3 and gap < 1e-10, f"frequency z {zscore:.2f}; total-probability gap {gap:.1e}")


# ---- 4: Bessel marginal -----------------------------------------------------

def _transition_mass(phi, tau, w):
    atom, _ = weight_transition_density(0.0, w, phi, tau)
    f = lambda x: weight_transition_density(x, w, phi, tau)[1]
    return atom + sum(integrate.quad(f, a, b, limit=200, epsabs=1e-13)[0]
                      for a, b in [(0, 1e-3), (1e-3, 1), (1, 10), (10, np.inf)])


def test_c04_bessel_marginal(report):
    rng = np.random.default_rng(4)
    err = max(abs(_transition_mass(*rng.uniform([0.2, 0.2, 0.05], [20, 5, 3])) - 1) for _ in range(10))
    phi, tau, w = 2.0, 1.0, 0.7
    n = 10 ** 6
    c = rng.poisson(phi * w, n)
    draws = rng.gamma(np.maximum(c, 1), 1.0 / (tau + phi))[c > 0]
    edges = np.linspace(0, np.quantile(draws, 0.99), 51)
    p = np.histogram(draws, edges)[0] / n
    f = lambda x: weight_transition_density(x, w, phi, tau)[1]
    expect = np.array([integrate.quad(f, a, b)[0] for a, b in zip(edges[:-1], edges[1:])])
    zmax = float(np.max(np.abs(p - expect) / np.sqrt(expect * (1 - expect) / n)))
    report(4, err < 1e-6 and zmax < 3, f"max normalisation error {err:.1e}; max bin |z| {zmax:.2f}")


# ---- 5: gradient ------------------------------------------------------------

def test_c05_gradient(report):
    rng = np.random.default_rng(5)
    worst, n = 0.0, 0
    while n < 20:
        sim = simulate_network(HyperParams(float(rng.uniform(0.5, 6)), 1.0, 3.0, 0.3), 4, rng, allow_self_loops=True)
        st = state_from_simulation(sim)
        ts = [t for t in range(st.T) if (st.w[t] > 0).any()]
        if not ts:
            continue
        worst = max(worst, check_gradient(st, int(rng.choice(ts))))
        n += 1
    st = state_from_simulation(simulate_network(HyperParams(4, 1, 3, 0.3), 4, 6, allow_self_loops=True))
    t = int(np.argmax(st.m.sum(axis=1)))

    def broken(y, a, root, rate):
        active = slice_terms(st, t)[0]
        return slice_gradient(y, a - st.m[t, active], root, rate)

    bad = check_gradient(st, t, grad=broken)
    report(5, worst < 1e-6 and bad > 1e-2, f"max relative error {worst:.1e}; corrupted control {bad:.1e}")


# ---- 6: kernel exactness on tiny instances -------------------------------------

HP6 = HyperParams(1.0, 1.0, 2.0, 0.5)
CUT = 30


def _one_node(slices):
    obs = ObservedNetwork(ObsKind.COUNTS, slices, 1, allow_self_loops=True)
    return init_state(obs, HP6, no_memory=True)


def _run(state, step, n, rng, record):
    out = []
    for _ in range(n):
        step(state, rng)
        out.append(record(state))
    return out


def _tv_latent_count(rng, n):
    st = _one_node([{(0, 0): 1}, {(0, 0): 1}])
    post = enumerate_tiny_posterior(st, {("c", 0, 0): range(1, CUT + 1)})
    draws = _run(st, lambda s, r: kernels.update_latent_count(s, 0, 0, r), n, rng, lambda s: int(s.c[0, 0]))
    return tv_distance(post.marginal(0), empirical(draws))


def _tv_lifetime(rng, n, birth):
    slices = [{}, {(0, 0): 1}] if birth else [{(0, 0): 1}, {}]
    st = _one_node(slices)
    wt = 0 if birth else 1
    grid = Grid(-12.0, 3.0, panels=15, per_panel=12, allow_zero=True)
    post = enumerate_tiny_posterior(st, {("c", 0, 0): range(0, CUT + 1), ("w", wt, 0): grid})
    move = kernels.update_birth_move if birth else kernels.update_joint_count_weight_death
    draws = _run(st, lambda s, r: move(s, 0, 0, r), n, rng,
                 lambda s: (int(s.c[0, 0]), int(grid.categorize(s.w[wt, 0]))))
    return tv_distance(post.joint([("c", 0, 0), ("w", wt, 0)]), empirical(draws))


def _tv_interactions(rng, n):
    obs = ObservedNetwork(ObsKind.BINARY, [{(0, 1): 1}, {(0, 1): 1}], 2)
    st = init_state(obs, HyperParams(1.0, 1.0, 2.0, 0.7))
    st.w[:] = [[0.8, 0.6], [0.7, 0.9]]
    st.c[:] = [[2, 2]]
    free = {("n_new", 0, 0): range(0, CUT + 1), ("n_new", 1, 0): range(0, CUT + 1),
            ("n_old", 1, 0): range(0, CUT + 1)}
    post = enumerate_tiny_posterior(st, free)

    def step(s, r):
        kernels.update_interaction_counts(s, 0, 0, r)
        kernels.update_interaction_counts(s, 1, 0, r)

    draws = _run(st, step, n, rng, lambda s: (int(s.n_new[0, 0]), int(s.n_new[1, 0]), int(s.n_old[1, 0])))
    return tv_distance(post.joint(list(free)), empirical(draws))


def _tv_root_count(rng, n):
    st = _one_node([{(0, 0): 1}, {(0, 0): 1}])
    st.w_root[:] = [0.9, 0.6]
    post = enumerate_tiny_posterior(st, {("c_root", 0): range(0, CUT + 1)})
    draws = _run(st, lambda s, r: kernels.update_root_count(s, 0, r), n, rng, lambda s: int(s.c_root[0]))
    return tv_distance(post.marginal(0), empirical(draws))


def test_c06_kernel_exactness(report):
    rng = np.random.default_rng(6)
    cases = {
        "latent count": lambda: _tv_latent_count(rng, 200_000),
        "death": lambda: _tv_lifetime(rng, 400_000, birth=False),
        "birth": lambda: _tv_lifetime(rng, 400_000, birth=True),
        "interactions": lambda: _tv_interactions(rng, 400_000),
        "root count": lambda: _tv_root_count(rng, 200_000),
    }
    parts, ok = [], True
    for name, run in cases.items():
        t0 = time.perf_counter()
        tv = run()
        dt = time.perf_counter() - t0
        ok &= tv < 0.01 and dt < 300
        parts.append(f"{name} {tv:.4f} ({dt:.0f}s)")
    report(6, ok, "TV " + ", ".join(parts))


# ---- 7: Geweke ----------------------------------------------------------------

GEWEKE_HP = HyperParams(1.5, 1.0, 5.0, 0.5)


def test_c07_geweke(report):
    good = geweke_test(GEWEKE_HP, 5, 10 ** 4, 7)
    bad = geweke_test(GEWEKE_HP, 5, 10 ** 4, 7, overrides=squared_ratio_overrides(("lifetime",)))
    worst_name = max(bad.z, key=lambda k: abs(bad.z[k]))
    ok = good.passed(4.0) and bad.max_abs_z() > 6
    report(7, ok, f"max |z| {good.max_abs_z():.2f}; squared-ratio control max |z| {bad.max_abs_z():.1f} "
                  f"({worst_name})")


# ---- 8: sparsity ----------------------------------------------------------------

def test_c08_sparsity(report):
    hp = HyperParams(1.0, 1.0, 20.0, 0.1)
    alphas = [2, 8, 32, 128]
    sparse = [r["median_ratio"] for r in sparsity_experiment(alphas, hp, 10, 20, 8)]
    dense = [r["median_ratio"] for r in dense_control(alphas, hp, 10, 20, 8)]
    ok = all(b < a for a, b in zip(sparse, sparse[1:])) and all(b >= a for a, b in zip(dense, dense[1:]))
    fmt = lambda v: ", ".join(f"{x:.4f}" for x in v)
    report(8, ok, f"model [{fmt(sparse)}]; dense control [{fmt(dense)}]")


# ---- 9: recovery ------------------------------------------------------------

RECOVERY_HP = HyperParams(3.0, 1.0, 20.0, 0.1)
RECOVERY_SWEEPS = (1000, 2400)


def recovery_coverage(seed, burnin, samples, level=0.9):
    """Fraction of alive node-times whose central credible interval covers the true weight."""
    rng = np.random.default_rng(seed)
    sim = simulate_network(RECOVERY_HP, 30, rng, allow_self_loops=True)
    obs = network_from_simulation(sim, ObsKind.BINARY)
    truth = sim.process.weights[:, [int(x) for x in obs.labels]]
    sched = Schedule(burnin=burnin, samples=samples)
    W = np.stack([dense_weights(r, obs.labels) for r in run_mcmc(obs, RECOVERY_HP, sched, rng)])
    lo, hi = np.quantile(W, [(1 - level) / 2, (1 + level) / 2], axis=0)
    alive = truth > 0
    hit = ((truth >= lo) & (truth <= hi))[alive]
    return int(hit.sum()), int(hit.size), len(obs.labels)


def test_c09_recovery(report):
    t0 = time.perf_counter()
    hits = total = 0
    per = []
    for rep in range(5):
        h, n, K = recovery_coverage(900 + rep, *RECOVERY_SWEEPS)
        hits += h
        total += n
        per.append(f"{h / n:.2f}(K={K},{time.perf_counter() - t0:.0f}s)")
    cov = hits / total
    dt = time.perf_counter() - t0
    report(9, 0.85 <= cov <= 0.95 and dt < 1800, f"coverage {cov:.3f} over {total} node-times "
                                                  f"[{' '.join(per)}]; {dt / 60:.1f} min")


# ---- 10: birth-death process -----------------------------------------------------

def test_c10_birth_death(report):
    H, rho, wi, wj = 4000.0, 1.5, 0.8, 1.25
    paths = {0: ([0.0, H], [wi]), 1: ([0.0, H], [wj])}
    res = simulate_birth_death(paths, rho, 10)
    burn = 20.0
    avg = res.time_average((0, 1), start=burn)
    target = 2 * wi * wj / rho
    # M/M/inf count: Poisson marginal, autocorrelation exp(-rho s)
    se = math.sqrt(2 * target / (rho * (H - burn)))
    z = (avg - target) / se
    report(10, abs(z) < 3, f"time-average {avg:.4f} vs {target:.4f}, z {z:.2f}")


# ---- 11: determinism ------------------------------------------------------------

def _cli(cwd, *args):
    r = subprocess.run([sys.executable, "-m", "sparsedyn.cli", *args], capture_output=True, cwd=cwd)
    return r.returncode, r.stdout


def _tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_c11_determinism(tmp_path, report):
    outputs = []
    for r in range(2):
        # each repeat runs in its own directory with the same relative paths,
        # so the messages that echo output paths are comparable too
        root = tmp_path / f"run{r}"
        root.mkdir()
        (root / "run.cfg").write_text("alpha=2 tau=1 phi=5 rho=0.5 T=4 burnin=20 samples=20\n")
        cli = lambda *a: _cli(root, *a)
        streams = [
            cli("simulate", "--config", "run.cfg", "--out", "sim", "--seed", "7"),
            cli("simulate", "--config", "run.cfg", "--out", "ct", "--seed", "7", "--continuous"),
            cli("fit", "--data", "sim/edges.txt", "--config", "run.cfg", "--out", "fit", "--seed", "7",
                "--chains", "2"),
            cli("diagnose", "--samples", "fit/samples_chain1.jsonl", "--out", "diag"),
            cli("sparsity", "--config", "run.cfg", "--alphas", "2,8", "--replicates", "2", "--seed", "7",
                "--dense", "--out", "sp"),
            cli("geweke", "--config", "run.cfg", "--n", "1000", "--chains", "10", "--seed", "7"),
        ]
        outputs.append((streams, _tree(root)))
    same = outputs[0] == outputs[1] and all(code == 0 for code, _ in outputs[0][0][:5])
    n_files = len(outputs[0][1])
    report(11, same, f"6 subcommand runs, {n_files} files byte-identical across repeats" if same else
                     "outputs differ between identical runs")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", *sys.argv[1:]]))
