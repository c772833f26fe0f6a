import itertools
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import brute_allocations, brute_independent_sets
from schednet.errors import ConfigInvalid, DimensionMismatch, EnumerationCapExceeded
from schednet.model import (
    CircuitNetwork,
    InterferenceGraph,
    NetworkState,
    enumerate_allocations,
    enumerate_independent_sets,
    is_feasible,
    k2,
    schedule_violation,
    shared_link,
    topology_from_dict,
    validate_state,
)


@st.composite
def graphs(draw, n_max=10):
    n = draw(st.integers(1, n_max))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    edges = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    return InterferenceGraph.from_edges(n, edges)


@st.composite
def circuits(draw):
    n_links = draw(st.integers(1, 3))
    caps = {f"l{k}": draw(st.integers(1, 3)) for k in range(n_links)}
    routes = draw(st.lists(st.lists(st.sampled_from(sorted(caps)), min_size=1, max_size=3, unique=True),
                           min_size=1, max_size=3))
    return CircuitNetwork.build(caps, routes)


def test_single_node_sets():
    assert enumerate_independent_sets(InterferenceGraph(1)) == [(0,), (1,)]


def test_k2_sets():
    assert enumerate_independent_sets(k2()) == [(0, 0), (0, 1), (1, 0)]


def test_triangle_sets():
    c3 = InterferenceGraph.from_edges(3, [(0, 1), (1, 2), (0, 2)])
    assert enumerate_independent_sets(c3) == [(0, 0, 0), (0, 0, 1), (0, 1, 0), (1, 0, 0)]


@given(graphs())
def test_sets_match_brute_force(g):
    got = enumerate_independent_sets(g)
    assert got == brute_independent_sets(g.n, g.edges)
    assert got == sorted(got)


def test_sets_count_n16_path():
    n = 16
    g = InterferenceGraph.from_edges(n, [(i, i + 1) for i in range(n - 1)])
    # independent sets of a path are counted by Fibonacci numbers
    fib = [1, 2]
    while len(fib) <= n:
        fib.append(fib[-1] + fib[-2])
    assert len(enumerate_independent_sets(g, cap=10 ** 5)) == fib[n]


@given(graphs(n_max=8))
def test_enumerated_sets_validate_and_others_fail(g):
    sets = set(enumerate_independent_sets(g))
    for v in itertools.product((0, 1), repeat=g.n):
        state = NetworkState(np.zeros(g.n), v)
        assert (validate_state(g, state) is None) == (v in sets)


def test_enumeration_cap():
    with pytest.raises(EnumerationCapExceeded):
        enumerate_independent_sets(InterferenceGraph(13))
    assert len(enumerate_independent_sets(InterferenceGraph(12))) == 4096


def test_allocation_examples():
    assert enumerate_allocations(shared_link(1, 1)) == [(0,), (1,)]
    assert enumerate_allocations(shared_link(1, 2)) == [(0,), (1,), (2,)]
    assert enumerate_allocations(shared_link(2, 1)) == [(0, 0), (0, 1), (1, 0)]


@given(circuits())
def test_allocations_match_brute_force(net):
    routes = [list(r) for r in net.routes]
    assert enumerate_allocations(net) == brute_allocations(net.capacity, routes)


def test_allocation_cap():
    net = CircuitNetwork.build({"a": 3}, [["a"]] * 6)
    with pytest.raises(EnumerationCapExceeded):
        enumerate_allocations(net, cap=50)


def test_violation_messages():
    g = k2()
    assert "edge (0,1)" in validate_state(g, NetworkState(np.zeros(2), (1, 1)))
    assert validate_state(g, NetworkState(np.array([3.0, 0.0]), (1, 0))) is None
    net = shared_link(1, 1)
    assert "link capacity" in validate_state(net, NetworkState(np.zeros(1), (2,)))
    assert "negative queue" in validate_state(g, NetworkState(np.array([-1.0, 0.0]), (0, 0)))
    assert "integers" in validate_state(net, NetworkState(np.array([0.5]), (0,)))


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        validate_state(k2(), NetworkState(np.zeros(3), (0, 0)))
    with pytest.raises(DimensionMismatch):
        schedule_violation(k2(), (0, 0, 0))


def test_is_feasible_nonbinary():
    assert not is_feasible(k2(), (2, 0))
    assert not is_feasible(shared_link(2, 2), (-1, 0))


def test_graph_validation():
    with pytest.raises(ValueError):
        InterferenceGraph.from_edges(2, [(0, 0)])
    with pytest.raises(ValueError):
        InterferenceGraph.from_edges(2, [(0, 2)])
    assert InterferenceGraph.from_edges(2, [(1, 0)]) == k2()


def test_circuit_validation():
    with pytest.raises(ValueError):
        CircuitNetwork.build({"a": 0}, [["a"]])
    with pytest.raises(ValueError):
        CircuitNetwork.build({"a": 1}, [["b"]])
    with pytest.raises(ValueError):
        CircuitNetwork.build({"a": 1}, [[]])


def test_incidence():
    net = CircuitNetwork.build({"a": 2, "b": 1}, [["a"], ["a", "b"]])
    assert net.incidence.tolist() == [[1, 1], [0, 1]]
    assert net.c_max == 2
    assert net.fits((1, 1)) and not net.fits((0, 2))


@given(st.one_of(graphs(), circuits()))
def test_dict_round_trip(topo):
    assert topology_from_dict(json.loads(json.dumps(topo.to_dict()))) == topo


def test_topology_rejects_unknown_keys():
    with pytest.raises(ConfigInvalid):
        topology_from_dict({"kind": "wireless", "n": 2, "edges": [], "colour": 1})
    with pytest.raises(ConfigInvalid):
        topology_from_dict({"kind": "circuit", "links": [{"id": "a", "capacity": 1, "x": 0}], "routes": [["a"]]})
    with pytest.raises(ConfigInvalid):
        topology_from_dict({"kind": "mesh"})
    with pytest.raises(ConfigInvalid):
        topology_from_dict({"kind": "circuit", "links": [{"id": "a", "capacity": 1}], "routes": [["z"]]})


def test_enumeration_stable():
    g = InterferenceGraph.from_edges(6, [(0, 1), (2, 3), (4, 5), (1, 2)])
    a = json.dumps(enumerate_independent_sets(g))
    b = json.dumps(enumerate_independent_sets(InterferenceGraph.from_edges(6, [(1, 2), (4, 5), (2, 3), (0, 1)])))
    assert a == b
