"""Invariant suites over built-in randomized instances.

Every suite draws from ``numpy.random.default_rng(master_seed)`` so reports
are reproducible; each check yields a ``Check`` with a short detail string.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from . import analysis, capacity, chains, weights
from .model import CircuitNetwork, InterferenceGraph, schedule_space

MASTER_SEED = 20240611
SUITES = ("chains", "analysis", "weights", "capacity")
# root of exp(-x) = 1 - x/2 on x > 0
HALF_LINE_ROOT = 1.5936242600400401


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.suite}.{self.name}: {self.detail}"


# --- instance generators ------------------------------------------------------

def random_graph(rng: np.random.Generator, n_max: int = 5) -> InterferenceGraph:
    n = int(rng.integers(2, n_max + 1))
    p = rng.uniform(0.1, 0.7)
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    return InterferenceGraph.from_edges(n, edges)


def random_circuit(rng: np.random.Generator, max_states: int = 256) -> CircuitNetwork:
    while True:
        n_links = int(rng.integers(1, 4))
        caps = {f"l{k}": int(rng.integers(1, 5)) for k in range(n_links)}
        ids = list(caps)
        routes = []
        for _ in range(int(rng.integers(2, 5))):
            mask = rng.random(n_links) < 0.5
            if not mask.any():
                mask[rng.integers(n_links)] = True
            routes.append([ids[k] for k in np.flatnonzero(mask)])
        net = CircuitNetwork.build(caps, routes)
        if len(schedule_space(net, cap=max_states + 1)) <= max_states:
            return net


def wireless_instances(count: int = 20, seed: int = MASTER_SEED, w_max: float = 3.0):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        g = random_graph(rng)
        yield g, rng.uniform(0.0, w_max, g.n)


def circuit_instances(count: int = 20, seed: int = MASTER_SEED + 1, w_max: float = 3.0):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        net = random_circuit(rng)
        yield net, rng.uniform(0.0, w_max, net.n)


def random_reversible(rng: np.random.Generator, pi: np.ndarray, laziness: float = 0.0) -> np.ndarray:
    """Kernel reversible w.r.t. ``pi`` built from a random symmetric flow matrix."""
    m = len(pi)
    F = rng.random((m, m))
    F = F + F.T
    np.fill_diagonal(F, 0.0)
    rows = F.sum(axis=1) / pi
    F *= (1.0 - laziness) / rows.max()
    P = F / pi[:, None]
    P[np.diag_indices(m)] = 1.0 - P.sum(axis=1)
    return P


def random_distribution(rng: np.random.Generator, m: int, floor: float = 0.0) -> np.ndarray:
    p = rng.random(m) + floor
    return p / p.sum()


# --- per-instance exact quantities ---------------------------------------------

@dataclass
class ChainFacts:
    kind: str
    size: int
    product_form_err: float
    balance_err: float
    norm_P: float
    norm_exp: float
    rate: float
    bound: chains.MixingBound
    cheeger: tuple[float, float] | None  # (1 - lambda_max, phi^2 / 2)


def chain_facts(topology, W) -> ChainFacts:
    k, rate = chains.scheduling_chain(topology, W)
    pi_eig = chains.stationary_from_kernel(k)
    I = np.eye(k.size)
    norm_P = chains.matrix_norm(k.P, k.pi)
    norm_exp = chains.matrix_norm(chains.expm(rate * (k.P - I)), k.pi)
    w_max = float(np.max(W))
    if isinstance(topology, InterferenceGraph):
        bound = chains.mixing_bound_glauber(topology.n, w_max)
    else:
        bound = chains.mixing_bound_lossnet(topology.n, topology.c_max, w_max)
    cheeger = None
    if k.size <= chains.CONDUCTANCE_MAX_STATES and k.size >= 2:
        phi = chains.conductance(k)
        cheeger = (1.0 - norm_P, phi * phi / 2.0)
    return ChainFacts(topology.kind, k.size, float(np.max(np.abs(pi_eig - k.pi))),
                      chains.detailed_balance_error(k.P, k.pi), norm_P, norm_exp, rate, bound, cheeger)


# --- suites ------------------------------------------------------------------------

def suite_chains(seed: int = MASTER_SEED) -> Iterator[Check]:
    facts = [chain_facts(g, W) for g, W in wireless_instances(20, seed)]
    facts += [chain_facts(net, W) for net, W in circuit_instances(20, seed + 1)]
    worst = lambda attr: max(getattr(f, attr) for f in facts)
    yield Check("chains", "detailed_balance", worst("balance_err") <= 1e-10,
                f"max |pi_i P_ij - pi_j P_ji| = {worst('balance_err'):.2e} over {len(facts)} instances")
    yield Check("chains", "product_form", worst("product_form_err") <= 1e-10,
                f"max sup-norm gap to eigensolve = {worst('product_form_err'):.2e}")
    dom = [f.bound.dominates(f.norm_P, f.norm_exp) for f in facts]
    yield Check("chains", "mixing_bound_P", all(d[0] for d in dom),
                f"{sum(d[0] for d in dom)}/{len(dom)} instances within the one-step bound")
    yield Check("chains", "mixing_bound_exp", all(d[1] for d in dom),
                f"{sum(d[1] for d in dom)}/{len(dom)} instances within the continuous-time bound")
    ch = [f.cheeger for f in facts if f.cheeger is not None]
    ok = [gap >= half - 1e-12 for gap, half in ch]
    yield Check("chains", "cheeger", all(ok), f"{sum(ok)}/{len(ok)} instances with |Omega| <= 24")
    exp_ok = []
    for f in facts:
        if f.kind != "wireless":
            continue
        x = f.rate * (1.0 - f.norm_P)
        first = f.norm_exp <= math.exp(-x) + 1e-12
        second = x > HALF_LINE_ROOT or math.exp(-x) <= 1.0 - x / 2.0 + 1e-12
        exp_ok.append(first and second)
    yield Check("chains", "exp_contraction", all(exp_ok),
                f"{sum(exp_ok)}/{len(exp_ok)} wireless instances satisfy the exponential chain")
    yield from _norm_properties(np.random.default_rng(seed + 2), 100, "chains")


def _norm_properties(rng: np.random.Generator, pairs: int, suite: str) -> Iterator[Check]:
    tri = hom = sub = eq = True
    worst_eq = 0.0
    for _ in range(pairs):
        m = int(rng.integers(2, 9))
        pi = random_distribution(rng, m, floor=0.05)
        A = random_reversible(rng, pi, laziness=rng.uniform(0, 0.5))
        B = random_reversible(rng, pi, laziness=rng.uniform(0, 0.5))
        nA, nB = chains.matrix_norm(A, pi), chains.matrix_norm(B, pi)
        c = rng.uniform(-3, 3)
        tri &= chains.matrix_norm(A + B, pi) <= nA + nB + 1e-12
        hom &= abs(chains.matrix_norm(c * A, pi) - abs(c) * nA) <= 1e-9
        sub &= chains.matrix_norm(A @ B, pi) <= nA * nB + 1e-12
        d = abs(nA - chains.slem(A, pi))
        worst_eq = max(worst_eq, d)
        eq &= d <= 1e-9
    yield Check(suite, "norm_triangle", bool(tri), f"{pairs} reversible pairs")
    yield Check(suite, "norm_homogeneity", bool(hom), f"{pairs} reversible pairs")
    yield Check(suite, "norm_submultiplicative", bool(sub), f"{pairs} reversible pairs")
    yield Check(suite, "norm_equals_slem", bool(eq), f"max deviation {worst_eq:.2e}")


def suite_analysis(seed: int = MASTER_SEED) -> Iterator[Check]:
    rng = np.random.default_rng(seed + 10)
    ok = True
    for _ in range(200):
        m = int(rng.integers(2, 10))
        mu = random_distribution(rng, m, floor=1e-3)
        nu = random_distribution(rng, m)
        ok &= analysis.chi2_distance(nu, mu) >= 2 * analysis.tv_distance(nu, mu) - 1e-12
    yield Check("analysis", "chi2_dominates_tv", bool(ok), "200 random pairs")

    fe_ok = prop_ok = True
    for _ in range(50):
        m = int(rng.integers(1, 65))
        T = rng.normal(0, 3, m)
        nu = analysis.gibbs_from_potential(T)
        best = analysis.free_energy(T, nu)
        for _ in range(100):
            mu = rng.dirichlet(np.full(m, rng.uniform(0.1, 2.0)))
            fe_ok &= best >= analysis.free_energy(T, mu) - 1e-9
        prop_ok &= float(nu @ T) >= T.max() - math.log(m) - 1e-9
    yield Check("analysis", "free_energy_max", bool(fe_ok), "50 potentials x 100 distributions")
    yield Check("analysis", "gibbs_mean_bound", bool(prop_ok), "E_nu[T] >= max T - log|Omega|")

    app = [analysis.expm_perturbation_check(*_matrix_pair(rng))[2] for _ in range(200)]
    yield Check("analysis", "expm_perturbation", all(app), f"{sum(app)}/200 random pairs")

    con = True
    for _ in range(50):
        m = int(rng.integers(2, 9))
        pi = random_distribution(rng, m, floor=0.05)
        P = random_reversible(rng, pi, laziness=rng.uniform(0, 0.5))
        nP = chains.matrix_norm(P, pi)
        mu = random_distribution(rng, m)
        con &= analysis.chi2_distance(mu @ P, pi) <= nP * analysis.chi2_distance(mu, pi) + 1e-12
    yield Check("analysis", "chi2_contraction", bool(con), "50 reversible kernels")

    cvx = True
    for _ in range(50):
        a, b = rng.uniform(0, 1e4, 3), rng.uniform(0, 1e4, 3)
        mid = analysis.lyapunov_wireless((a + b) / 2)
        cvx &= mid <= 0.5 * (analysis.lyapunov_wireless(a) + analysis.lyapunov_wireless(b)) + 1e-9
    yield Check("analysis", "lyapunov_midpoint_convex", bool(cvx), "50 sampled pairs")


def _matrix_pair(rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    N = int(rng.integers(1, 7))
    return rng.uniform(-1, 1, (N, N)), rng.uniform(-1, 1, (N, N))


def suite_weights(seed: int = MASTER_SEED) -> Iterator[Check]:
    grid = np.logspace(1, 60, 60)
    rep = weights.validate_weight_function(weights.LOGLOG, grid)
    yield Check("weights", "loglog_screen", rep.passed, f"trend decreasing {rep.trend_decreasing}")
    rep = weights.validate_weight_function(lambda x: math.log1p(x), grid)
    yield Check("weights", "log_rejected", not rep.trend_pass, "log(1+x) grows too fast")
    rng = np.random.default_rng(seed + 20)
    q = rng.uniform(0, 1e6, (50, 4))
    ok = all(np.all(weights.node_weights(row) >= math.sqrt(weights.f_loglog(row.max())) - 1e-15) for row in q)
    yield Check("weights", "qmax_floor", bool(ok), "50 random queue vectors")


def suite_capacity(seed: int = MASTER_SEED) -> Iterator[Check]:
    rng = np.random.default_rng(seed + 30)
    hom = mono = True
    for _ in range(30):
        g = random_graph(rng)
        sched = tuple(schedule_space(g))
        lam = rng.uniform(0, 1, g.n)
        base = capacity.load_factor(capacity.CapacityQuery(tuple(lam), sched)).load
        c = rng.uniform(0.1, 5)
        scaled = capacity.load_factor(capacity.CapacityQuery(tuple(c * lam), sched)).load
        hom &= abs(scaled - c * base) <= 1e-8 * max(1.0, c * base)
        more = capacity.load_factor(capacity.CapacityQuery(tuple(lam + rng.uniform(0, 0.5, g.n)), sched)).load
        mono &= more >= base - 1e-9
    yield Check("capacity", "homogeneous", bool(hom), "30 random graphs")
    yield Check("capacity", "monotone", bool(mono), "30 random graphs")


SUITE_FUNCS: dict[str, Callable[[int], Iterator[Check]]] = {
    "chains": suite_chains,
    "analysis": suite_analysis,
    "weights": suite_weights,
    "capacity": suite_capacity,
}


def run_suite(name: str, seed: int = MASTER_SEED) -> list[Check]:
    names = SUITES if name == "all" else (name,)
    if any(s not in SUITE_FUNCS for s in names):
        raise KeyError(f"unknown suite {name!r}; choose from {SUITES + ('all',)}")
    return [c for s in names for c in SUITE_FUNCS[s](seed)]
