"""Network topologies, schedule spaces and state validation.

Two topologies are supported:

* ``InterferenceGraph``: n wireless queues with an undirected conflict graph.
  Feasible schedules are the independent sets of the graph, as 0/1 tuples.
* ``CircuitNetwork``: capacitated links plus n routes. Feasible schedules are
  integer vectors of active flows that respect every link capacity.

Schedule spaces are enumerated in lexicographic order; the position of a
schedule in that list is its canonical state index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence, Union

import numpy as np

from .errors import ConfigInvalid, DimensionMismatch, EnumerationCapExceeded

DEFAULT_CAP = 4096

State = tuple[int, ...]


@dataclass(frozen=True)
class InterferenceGraph:
    n: int
    edges: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("graph needs at least one node")
        norm = set()
        for e in self.edges:
            i, j = (int(v) for v in e)
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i},{j}) out of range for n={self.n}")
            norm.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(norm))

    @classmethod
    def from_edges(cls, n: int, edges: Sequence[Sequence[int]] = ()) -> "InterferenceGraph":
        return cls(n, frozenset(tuple(e) for e in edges))

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        adj: list[set[int]] = [set() for _ in range(self.n)]
        for i, j in self.edges:
            adj[i].add(j)
            adj[j].add(i)
        return tuple(tuple(sorted(a)) for a in adj)

    @property
    def kind(self) -> str:
        return "wireless"

    def to_dict(self) -> dict:
        return {"kind": "wireless", "n": self.n, "edges": [list(e) for e in sorted(self.edges)]}


@dataclass(frozen=True)
class CircuitNetwork:
    """Links with integral capacities, accessed by a fixed set of routes.

    ``links`` maps link id to capacity; ``routes[i]`` is the tuple of link ids
    used by route i.
    """

    links: tuple[tuple[str, int], ...]
    routes: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        caps = {}
        for lid, c in self.links:
            if lid in caps:
                raise ValueError(f"duplicate link id {lid!r}")
            if int(c) != c or c < 1:
                raise ValueError(f"link {lid!r} capacity must be a positive integer, got {c}")
            caps[lid] = int(c)
        if not self.routes:
            raise ValueError("network needs at least one route")
        for i, r in enumerate(self.routes):
            if not r:
                raise ValueError(f"route {i} is empty")
            for lid in r:
                if lid not in caps:
                    raise ValueError(f"route {i} uses unknown link {lid!r}")
        object.__setattr__(self, "links", tuple((lid, caps[lid]) for lid, _ in self.links))
        object.__setattr__(self, "routes", tuple(tuple(r) for r in self.routes))

    @classmethod
    def build(cls, capacities: dict[str, int], routes: Sequence[Sequence[str]]) -> "CircuitNetwork":
        return cls(tuple(capacities.items()), tuple(tuple(r) for r in routes))

    @property
    def n(self) -> int:
        return len(self.routes)

    @property
    def kind(self) -> str:
        return "circuit"

    @cached_property
    def capacity(self) -> dict[str, int]:
        return dict(self.links)

    @property
    def c_max(self) -> int:
        return max(c for _, c in self.links)

    @cached_property
    def incidence(self) -> np.ndarray:
        """Link-by-route 0/1 matrix; row order follows ``links``."""
        ids = [lid for lid, _ in self.links]
        a = np.zeros((len(ids), self.n), dtype=np.int64)
        for i, r in enumerate(self.routes):
            for lid in r:
                a[ids.index(lid), i] = 1
        return a

    @cached_property
    def cap_vector(self) -> np.ndarray:
        return np.array([c for _, c in self.links], dtype=np.int64)

    def fits(self, z: Sequence[int]) -> bool:
        return bool(np.all(self.incidence @ np.asarray(z, dtype=np.int64) <= self.cap_vector))

    def to_dict(self) -> dict:
        return {
            "kind": "circuit",
            "links": [{"id": lid, "capacity": c} for lid, c in self.links],
            "routes": [list(r) for r in self.routes],
        }


Topology = Union[InterferenceGraph, CircuitNetwork]


@dataclass
class NetworkState:
    Q: np.ndarray
    x: tuple[int, ...]
    t: float = 0.0


def enumerate_independent_sets(g: InterferenceGraph, cap: int = DEFAULT_CAP) -> list[State]:
    """All independent sets of ``g`` as 0/1 tuples, lexicographically ordered."""
    out: list[State] = []
    sigma = [0] * g.n
    nbrs = g.neighbors

    def rec(i: int) -> None:
        if i == g.n:
            if len(out) >= cap:
                raise EnumerationCapExceeded(f"more than {cap} independent sets")
            out.append(tuple(sigma))
            return
        sigma[i] = 0
        rec(i + 1)
        # only earlier nodes are assigned, so checking them suffices
        if not any(sigma[j] for j in nbrs[i] if j < i):
            sigma[i] = 1
            rec(i + 1)
            sigma[i] = 0

    rec(0)
    return out


def enumerate_allocations(net: CircuitNetwork, cap: int = DEFAULT_CAP) -> list[State]:
    """All feasible active-flow vectors of ``net``, lexicographically ordered."""
    inc = net.incidence
    caps = net.cap_vector
    out: list[State] = []
    z = [0] * net.n
    used = np.zeros(len(caps), dtype=np.int64)

    def rec(i: int) -> None:
        if i == net.n:
            if len(out) >= cap:
                raise EnumerationCapExceeded(f"more than {cap} feasible allocations")
            out.append(tuple(z))
            return
        col = inc[:, i]
        k = 0
        while True:
            z[i] = k
            rec(i + 1)
            if np.any(used + col > caps):
                break
            used[:] += col
            k += 1
        used[:] -= k * col
        z[i] = 0

    rec(0)
    return out


def schedule_space(topology: Topology, cap: int = DEFAULT_CAP) -> list[State]:
    if isinstance(topology, InterferenceGraph):
        return enumerate_independent_sets(topology, cap)
    return enumerate_allocations(topology, cap)


def is_feasible(topology: Topology, x: Sequence[int]) -> bool:
    return schedule_violation(topology, x) is None


def schedule_violation(topology: Topology, x: Sequence[int]) -> str | None:
    if len(x) != topology.n:
        raise DimensionMismatch(f"schedule has length {len(x)}, topology has n={topology.n}")
    if isinstance(topology, InterferenceGraph):
        for i, v in enumerate(x):
            if v not in (0, 1):
                return f"sigma[{i}]={v} is not binary"
        for i, j in sorted(topology.edges):
            if x[i] and x[j]:
                return f"edge ({i},{j}) has both endpoints active"
        return None
    for i, v in enumerate(x):
        if int(v) != v or v < 0:
            return f"z[{i}]={v} is not a non-negative integer"
    load = topology.incidence @ np.asarray(x, dtype=np.int64)
    for (lid, c), used in zip(topology.links, load):
        if used > c:
            return f"link capacity exceeded on {lid!r}: {used} > {c}"
    return None


def validate_state(topology: Topology, state: NetworkState) -> str | None:
    """Return ``None`` when ``state`` is valid, else a description of the first violation."""
    Q = np.asarray(state.Q)
    if Q.shape != (topology.n,) or len(state.x) != topology.n:
        raise DimensionMismatch(
            f"expected length {topology.n}, got Q{Q.shape} and x of length {len(state.x)}"
        )
    bad = np.flatnonzero(Q < 0)
    if bad.size:
        return f"negative queue at indices {bad.tolist()}"
    if isinstance(topology, CircuitNetwork) and np.any(Q != np.floor(Q)):
        return "circuit queue values must be integers"
    if state.t < 0:
        return f"negative time {state.t}"
    return schedule_violation(topology, state.x)


_WIRELESS_KEYS = {"kind", "n", "edges"}
_CIRCUIT_KEYS = {"kind", "links", "routes"}


def topology_from_dict(d: dict) -> Topology:
    """Parse the topology JSON schema; unknown keys are rejected."""
    if not isinstance(d, dict) or "kind" not in d:
        raise ConfigInvalid("topology must be an object with a 'kind' key")
    kind = d["kind"]
    try:
        if kind == "wireless":
            extra = set(d) - _WIRELESS_KEYS
            if extra:
                raise ConfigInvalid(f"unknown topology keys: {sorted(extra)}")
            return InterferenceGraph.from_edges(int(d["n"]), d.get("edges", []))
        if kind == "circuit":
            extra = set(d) - _CIRCUIT_KEYS
            if extra:
                raise ConfigInvalid(f"unknown topology keys: {sorted(extra)}")
            for link in d["links"]:
                if set(link) - {"id", "capacity"}:
                    raise ConfigInvalid(f"unknown link keys: {sorted(set(link) - {'id', 'capacity'})}")
            return CircuitNetwork.build(
                {str(l["id"]): l["capacity"] for l in d["links"]},
                [[str(x) for x in r] for r in d["routes"]],
            )
    except (KeyError, TypeError) as exc:
        raise ConfigInvalid(f"malformed topology: {exc!r}") from exc
    except ValueError as exc:
        if isinstance(exc, ConfigInvalid):
            raise
        raise ConfigInvalid(str(exc)) from exc
    raise ConfigInvalid(f"unknown topology kind {kind!r}")


def load_topology(path) -> Topology:
    with open(path, encoding="utf-8") as fh:
        return topology_from_dict(json.load(fh))


# small named instances used by tests, scripts and the verify harness

def k2() -> InterferenceGraph:
    return InterferenceGraph.from_edges(2, [(0, 1)])


def shared_link(routes: int = 2, capacity: int = 1) -> CircuitNetwork:
    return CircuitNetwork.build({"e": capacity}, [["e"]] * routes)
