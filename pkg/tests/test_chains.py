import csv
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import (
    brute_conductance,
    eig_stationary,
    expm_ref,
    glauber_matrix,
    lossnet_matrix,
    pi_norm,
)
from schednet import chains
from schednet.chains import ChainKernel
from schednet.errors import (
    DimensionMismatch,
    NonPositiveMeasure,
    PeriodicChain,
    ReducibleChain,
    StateSpaceTooLarge,
)
from schednet.model import CircuitNetwork, InterferenceGraph, k2, schedule_space, shared_link
from schednet.verify import random_distribution, random_reversible

LOG2 = math.log(2)


@st.composite
def weighted_graphs(draw):
    n = draw(st.integers(1, 5))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    edges = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    W = draw(st.lists(st.floats(0, 3), min_size=n, max_size=n))
    return InterferenceGraph.from_edges(n, edges), np.array(W)


@st.composite
def weighted_circuits(draw):
    n_links = draw(st.integers(1, 3))
    caps = {f"l{k}": draw(st.integers(1, 3)) for k in range(n_links)}
    routes = draw(st.lists(st.lists(st.sampled_from(sorted(caps)), min_size=1, max_size=3, unique=True),
                           min_size=1, max_size=3))
    W = draw(st.lists(st.floats(0, 3), min_size=len(routes), max_size=len(routes)))
    return CircuitNetwork.build(caps, routes), np.array(W)


# --- kernels against hand expansions and the brute-force builders -------------

def test_glauber_single_node():
    k = chains.glauber_kernel(InterferenceGraph(1), [0.0])
    np.testing.assert_allclose(k.P, [[0.5, 0.5], [0.5, 0.5]], atol=1e-15)


def test_glauber_k2_row():
    k = chains.glauber_kernel(k2(), [0.0, 0.0])
    row = k.P[k.index()[(1, 0)]]
    np.testing.assert_allclose(row, [0.25, 0.0, 0.75], atol=1e-15)


@given(weighted_graphs())
def test_glauber_matches_oracle(gw):
    g, W = gw
    k = chains.glauber_kernel(g, W)
    np.testing.assert_allclose(k.P, glauber_matrix(k.states, g.edges, W), atol=1e-14)
    assert k.check() == [] or k.pi is None


def test_glauber_uniform_at_zero_weight():
    g = InterferenceGraph.from_edges(4, [(0, 1), (1, 2), (2, 3)])
    pi = chains.glauber_stationary(g, np.zeros(4))
    np.testing.assert_allclose(pi, np.full(len(pi), 1 / len(pi)), atol=1e-15)


def test_glauber_stationary_k2():
    np.testing.assert_allclose(chains.glauber_stationary(k2(), [LOG2, LOG2]), [0.2, 0.4, 0.4], atol=1e-15)
    np.testing.assert_allclose(chains.glauber_stationary(InterferenceGraph(1), [0.0]), [0.5, 0.5])


def test_lossnet_examples():
    k = chains.lossnet_kernel(shared_link(1, 1), [1.0])
    np.testing.assert_allclose(k.P, [[0.5, 0.5], [0.5, 0.5]], atol=1e-15)
    k = chains.lossnet_kernel(shared_link(1, 2), [1.0])
    np.testing.assert_allclose(k.P[1], [1 / 3, 1 / 3, 1 / 3], atol=1e-15)
    np.testing.assert_allclose(chains.lossnet_stationary(shared_link(1, 2), [1.0]), [0.4, 0.4, 0.2], atol=1e-15)


@pytest.mark.parametrize("phi", [0.3, 1.0, 7.0])
def test_lossnet_shared_symmetric(phi):
    pi = chains.lossnet_stationary(shared_link(2, 1), [phi, phi])
    np.testing.assert_allclose(pi, [1 / (1 + 2 * phi), phi / (1 + 2 * phi), phi / (1 + 2 * phi)], rtol=1e-14)


@given(weighted_circuits())
def test_lossnet_matches_oracle(nw):
    net, W = nw
    phi = np.exp(W)
    k = chains.lossnet_kernel(net, phi)
    routes = [list(r) for r in net.routes]
    np.testing.assert_allclose(k.P, lossnet_matrix(k.states, net.capacity, routes, phi), atol=1e-14)
    np.testing.assert_allclose(k.P.sum(axis=1), 1.0, atol=1e-12)


def test_lossnet_rejects_nonpositive_rates():
    with pytest.raises(ValueError):
        chains.lossnet_kernel(shared_link(), [1.0, 0.0])


# --- stationary distributions -------------------------------------------------------

@given(weighted_graphs())
def test_glauber_product_form(gw):
    g, W = gw
    k, _ = chains.scheduling_chain(g, W)
    assert np.max(np.abs(eig_stationary(k.P) - k.pi)) <= 1e-10
    assert chains.detailed_balance_error(k.P, k.pi) <= 1e-10
    assert k.check() == []


@given(weighted_circuits())
def test_lossnet_product_form(nw):
    net, W = nw
    k, _ = chains.scheduling_chain(net, W)
    assert np.max(np.abs(eig_stationary(k.P) - k.pi)) <= 1e-10
    assert chains.detailed_balance_error(k.P, k.pi) <= 1e-10


def test_stationary_from_kernel_examples():
    with pytest.raises(ReducibleChain):
        chains.stationary_from_kernel(ChainKernel([(0,), (1,)], np.eye(2)))
    with pytest.raises(PeriodicChain):
        chains.stationary_from_kernel(ChainKernel([(0,), (1,)], np.array([[0.0, 1.0], [1.0, 0.0]])))
    half = ChainKernel([(0,), (1,)], np.full((2, 2), 0.5))
    np.testing.assert_allclose(chains.stationary_from_kernel(half), [0.5, 0.5])
    k = chains.glauber_kernel(k2(), [LOG2, LOG2])
    np.testing.assert_allclose(chains.stationary_from_kernel(k), [0.2, 0.4, 0.4], atol=1e-13)


def test_periodic_three_cycle():
    P = np.roll(np.eye(3), 1, axis=1)
    with pytest.raises(PeriodicChain):
        chains.stationary_from_kernel(ChainKernel([(0,), (1,), (2,)], P))


def test_check_reports_broken_rows():
    k = ChainKernel([(0,), (1,)], np.array([[0.5, 0.6], [0.5, 0.5]]))
    assert any("row" in msg for msg in k.check())


# --- norms, conductance, exponentials -----------------------------------------------

def test_matrix_norm_examples():
    u = np.array([0.2, 0.3, 0.5])
    assert chains.matrix_norm(np.eye(3), u) == pytest.approx(1.0, abs=1e-14)
    assert chains.matrix_norm(np.full((2, 2), 0.5), [0.5, 0.5]) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(DimensionMismatch):
        chains.matrix_norm(np.eye(2), u)
    with pytest.raises(NonPositiveMeasure):
        chains.matrix_norm(np.eye(2), [1.0, 0.0])


@given(st.integers(0, 10 ** 6))
def test_matrix_norm_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, 8))
    u = random_distribution(rng, m, floor=0.05)
    A = rng.normal(size=(m, m))
    assert chains.matrix_norm(A, u) == pytest.approx(pi_norm(A, u), rel=1e-10, abs=1e-12)


@given(st.integers(0, 10 ** 6))
def test_reversible_norm_is_slem(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, 8))
    pi = random_distribution(rng, m, floor=0.05)
    P = random_reversible(rng, pi, laziness=float(rng.uniform(0, 0.5)))
    ev = np.linalg.eigvals(P)
    ev = np.sort(np.abs(ev))[:-1]
    assert chains.matrix_norm(P, pi) == pytest.approx(ev.max(), abs=1e-9)
    assert chains.slem(P, pi) == pytest.approx(ev.max(), abs=1e-9)


def test_conductance_examples():
    half = ChainKernel([(0,), (1,)], np.full((2, 2), 0.5))
    assert chains.conductance(half) == pytest.approx(1.0)
    ident = ChainKernel([(0,), (1,)], np.eye(2))
    assert chains.conductance(ident, np.array([0.5, 0.5])) == 0.0


@given(weighted_graphs())
def test_conductance_matches_brute_force(gw):
    g, W = gw
    k, _ = chains.scheduling_chain(g, W)
    if k.size > 12:
        return
    assert chains.conductance(k) == pytest.approx(brute_conductance(k.P, k.pi), rel=1e-9)


def test_conductance_state_limit():
    g = InterferenceGraph(5)  # 32 independent sets
    k, _ = chains.scheduling_chain(g, np.zeros(5))
    with pytest.raises(StateSpaceTooLarge):
        chains.conductance(k)
    est = chains.conductance_estimate(k, samples=500)
    assert est["estimate"] and est["value"] > 0


def test_conductance_24_states():
    rng = np.random.default_rng(3)
    pi = random_distribution(rng, 24, floor=0.1)
    P = random_reversible(rng, pi, laziness=0.3)
    k = ChainKernel([(i,) for i in range(24)], P, pi)
    phi = chains.conductance(k)
    # a few explicit cuts upper-bound the minimum
    for _ in range(200):
        x = rng.random(24) < 0.4
        ps = pi[x].sum()
        if 0 < ps <= 0.5:
            assert phi <= (pi[x][:, None] * P[np.ix_(x, ~x)]).sum() / (ps * (1 - ps)) + 1e-12


def test_expm_swap_matrix():
    k = ChainKernel([(0,), (1,)], np.array([[0.0, 1.0], [1.0, 0.0]]))
    U = chains.uniformized_kernel(k, 1.0).P
    a, b = (1 + math.exp(-2)) / 2, (1 - math.exp(-2)) / 2
    np.testing.assert_allclose(U, [[a, b], [b, a]], atol=1e-15)


def test_uniformized_tiny_rate():
    k = chains.glauber_kernel(k2(), [1.0, 2.0])
    np.testing.assert_allclose(chains.uniformized_kernel(k, 1e-14).P, np.eye(3), atol=1e-12)
    with pytest.raises(ValueError):
        chains.uniformized_kernel(k, 0.0)


@given(st.integers(0, 10 ** 6), st.floats(0.01, 30))
def test_expm_matches_scipy(seed, scale):
    rng = np.random.default_rng(seed)
    A = rng.uniform(-1, 1, (5, 5)) * scale
    ref = expm_ref(A)
    np.testing.assert_allclose(chains.expm(A), ref, rtol=1e-11, atol=1e-12 * np.abs(ref).max())


# --- mixing bounds -------------------------------------------------------------------

def test_glauber_bound_values():
    assert chains.mixing_bound_glauber(1, 0).bound_P == pytest.approx(0.96875, abs=1e-15)
    assert chains.mixing_bound_glauber(2, 0).bound_P == pytest.approx(1 - 1 / 512, abs=1e-15)
    assert chains.mixing_bound_glauber(1, 0).bound_exp == pytest.approx(1 - 1 / 64, abs=1e-15)


def test_lossnet_bound_values():
    b = chains.mixing_bound_lossnet(1, 1, 0)
    assert b.bound_P == pytest.approx(0.875, abs=1e-15)
    assert b.bound_exp == pytest.approx(1 - 1 / 16, abs=1e-15)
    assert chains.mixing_bound_lossnet(2, 2, 0).log_gap_P == pytest.approx(
        -math.log(8 * 16 * 2 ** (8 + 4 + 2)))


def test_bounds_stay_finite_in_log_domain():
    b = chains.mixing_bound_glauber(8, 50.0)
    assert math.isfinite(b.log_gap_P) and b.bound_P == 1.0
    assert b.dominates(1 - 1e-300, 1 - 1e-300) == (False, False) or b.log_gap_P < math.log(1e-300)


@given(weighted_graphs())
def test_glauber_bound_dominates(gw):
    g, W = gw
    k, rate = chains.scheduling_chain(g, W)
    nP = chains.matrix_norm(k.P, k.pi)
    nE = chains.matrix_norm(chains.expm(rate * (k.P - np.eye(k.size))), k.pi)
    assert all(chains.mixing_bound_glauber(g.n, float(W.max())).dominates(nP, nE))
    # exponential contraction chain
    x = rate * (1 - nP)
    assert nE <= math.exp(-x) + 1e-12


@given(weighted_circuits())
def test_lossnet_bound_dominates(nw):
    net, W = nw
    k, rate = chains.scheduling_chain(net, W)
    nP = chains.matrix_norm(k.P, k.pi)
    nE = chains.matrix_norm(chains.expm(rate * (k.P - np.eye(k.size))), k.pi)
    assert all(chains.mixing_bound_lossnet(net.n, net.c_max, float(W.max())).dominates(nP, nE))


def test_scheduling_rates():
    _, r = chains.scheduling_chain(k2(), [0.5, 0.5])
    assert r == 2.0
    _, r = chains.scheduling_chain(shared_link(2, 3), [0.0, math.log(2)])
    assert r == pytest.approx(2 * (1 + 2 + 3))


# --- export --------------------------------------------------------------------------

def test_csv_export(tmp_path):
    k, _ = chains.scheduling_chain(k2(), [LOG2, LOG2])
    chains.kernel_to_csv(k, tmp_path / "P.csv")
    chains.distribution_to_csv(k.states, k.pi, tmp_path / "pi.csv")
    rows = list(csv.reader((tmp_path / "P.csv").read_text(encoding="utf-8").splitlines()))
    assert rows[0] == ["from", "00", "01", "10"]
    np.testing.assert_allclose(np.array([[float(v) for v in r[1:]] for r in rows[1:]]), k.P, rtol=0)
    pi_rows = list(csv.reader((tmp_path / "pi.csv").read_text(encoding="utf-8").splitlines()))
    assert [float(r[1]) for r in pi_rows[1:]] == pytest.approx([0.2, 0.4, 0.4])
