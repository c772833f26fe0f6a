"""Event-driven simulation of the randomized schedulers and MW baselines.

Wireless: every node carries an independent rate-1 exponential clock. On a
tick the node backs off if a neighbour transmits, otherwise it transmits with
probability ``exp(W_i)/(1+exp(W_i))``. Work is served continuously at unit
rate; Bernoulli arrivals land at the end of each unit slot.

Circuit: each route issues requests as a Poisson process of rate
``exp(W_i)``; an accepted request takes the head-of-line flow (or a dummy
flow if the buffer is empty) onto every link of the route for an
Exponential(1) holding time. Flows are never preempted.

Weights are recomputed from ``Q(floor(t))`` at integer times only.
"""

from __future__ import annotations

import csv
import heapq
import io
import json
import math
import os
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import ConfigInvalid
from .model import (
    CircuitNetwork,
    InterferenceGraph,
    Topology,
    enumerate_independent_sets,
    is_feasible,
)
from .weights import WeightFunction, WeightMode, get_weight_function, node_weights_fast


class Algorithm(str, Enum):
    RANDOMIZED = "randomized"
    MW = "mw"
    MW_F = "mw_f"


@dataclass(frozen=True)
class SimConfig:
    topology: Topology
    lam: tuple[float, ...]
    horizon: float
    seed: int = 0
    weight_fn: str = "loglog"
    weight_mode: str = "with_qmax"
    algorithm: str = "randomized"
    sample_every: float = 1.0
    sample_times: tuple[float, ...] | None = None
    q0: tuple[float, ...] | None = None
    x0: tuple[int, ...] | None = None
    # arrivals and service off, weights pinned to the initial queues
    frozen: bool = False
    record_events: bool = False

    def validate(self) -> None:
        n = self.topology.n
        if len(self.lam) != n:
            raise ConfigInvalid(f"lambda has length {len(self.lam)}, topology has n={n}")
        if not self.horizon > 0:
            raise ConfigInvalid("horizon must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigInvalid("seed must be a 64-bit unsigned integer")
        if any(l < 0 for l in self.lam):
            raise ConfigInvalid("arrival rates must be non-negative")
        wireless = isinstance(self.topology, InterferenceGraph)
        if wireless and any(l > 1 for l in self.lam):
            raise ConfigInvalid("wireless arrivals are Bernoulli: lambda must lie in [0, 1]")
        try:
            algo = Algorithm(self.algorithm)
            WeightMode(self.weight_mode)
        except ValueError as exc:
            raise ConfigInvalid(str(exc)) from exc
        get_weight_function(self.weight_fn)
        if algo is not Algorithm.RANDOMIZED and not wireless:
            raise ConfigInvalid("MW baselines preempt flows and are not defined for circuit networks")
        if algo is not Algorithm.RANDOMIZED and (self.sample_every != int(self.sample_every) or self.frozen):
            raise ConfigInvalid("MW runs are slotted: integer sample_every and no frozen mode")
        if self.sample_every <= 0:
            raise ConfigInvalid("sample_every must be positive")
        if self.sample_times is not None:
            st = list(self.sample_times)
            if any(b <= a for a, b in zip(st, st[1:])) or (st and (st[0] < 0 or st[-1] > self.horizon)):
                raise ConfigInvalid("sample_times must be strictly increasing within [0, horizon]")
        if self.q0 is not None:
            if len(self.q0) != n or any(q < 0 for q in self.q0):
                raise ConfigInvalid("q0 must be a non-negative vector of length n")
            if not wireless and any(q != int(q) for q in self.q0):
                raise ConfigInvalid("circuit queues hold whole flows: q0 must be integral")
        if self.x0 is not None:
            if len(self.x0) != n or not is_feasible(self.topology, self.x0):
                raise ConfigInvalid("x0 is not a feasible schedule")
            if not wireless and any(self.x0):
                raise ConfigInvalid("circuit runs start with no active flows")

    def snapshot_times(self) -> list[float]:
        if self.sample_times is not None:
            return [float(t) for t in self.sample_times]
        k = int(math.floor(self.horizon / self.sample_every + 1e-9))
        return [j * self.sample_every for j in range(k + 1)]


@dataclass
class Trace:
    """Snapshots plus cumulative counters of one run.

    ``served`` counts real work taken from the buffers: service time for
    wireless, admitted flows for circuit. ``departures`` counts real flows
    that finished (circuit) and equals ``served`` for wireless. ``dummies``
    is dummy transmission time (wireless) or dummy flows admitted (circuit).
    All counter arrays are cumulative from time 0 and aligned with ``times``.
    """

    kind: str
    seed: int
    horizon: float
    times: np.ndarray
    Q: np.ndarray
    x: np.ndarray
    arrivals: np.ndarray
    served: np.ndarray
    departures: np.ndarray
    dummies: np.ndarray
    ticks: int = 0
    events: list | None = None
    flows: list | None = None

    @property
    def n(self) -> int:
        return self.Q.shape[1]

    def summary(self) -> dict:
        last = -1
        cast = (lambda a: [float(v) for v in a]) if self.kind == "wireless" else (lambda a: [int(v) for v in a])
        return {
            "arrivals": [int(v) for v in self.arrivals[last]],
            "departures": cast(self.departures[last]),
            "dummies": cast(self.dummies[last]),
            "horizon": self.horizon,
            "seed": self.seed,
        }

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = self.n
        w.writerow(["t"] + [f"Q_{i}" for i in range(n)] + [f"x_{i}" for i in range(n)])
        qfmt = repr if self.kind == "wireless" else (lambda v: str(int(v)))
        for t, q, x in zip(self.times, self.Q, self.x):
            w.writerow([repr(float(t))] + [qfmt(float(v)) for v in q] + [str(int(v)) for v in x])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    def summary_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True)

    def qmax_time_average(self, start: float = 0.0, end: float | None = None) -> float:
        """Mean of ``max_i Q_i`` over snapshots with ``start <= t <= end``."""
        end = self.horizon if end is None else end
        sel = (self.times >= start) & (self.times <= end)
        return float(self.Q[sel].max(axis=1).mean())


class _Recorder:
    def __init__(self, n: int, times: list[float]):
        self.times = times
        self.k = 0
        self.rows: list[tuple] = []

    @property
    def next_time(self) -> float:
        return self.times[self.k] if self.k < len(self.times) else math.inf

    def take(self, Q, x, A, S, D, M) -> None:
        self.rows.append((self.times[self.k], list(Q), list(x), list(A), list(S), list(D), list(M)))
        self.k += 1

    def build(self, kind, cfg, ticks, events, flows, qtype) -> Trace:
        n = cfg.topology.n
        m = len(self.rows)

        def col(j, dtype):
            if not m:
                return np.zeros((0, n), dtype=dtype)
            return np.array([r[j] for r in self.rows], dtype=dtype)

        return Trace(
            kind=kind,
            seed=cfg.seed,
            horizon=float(cfg.horizon),
            times=np.array([r[0] for r in self.rows], dtype=float),
            Q=col(1, qtype),
            x=col(2, np.int64),
            arrivals=col(3, np.int64),
            served=col(4, qtype),
            departures=col(5, qtype),
            dummies=col(6, qtype),
            ticks=ticks,
            events=events,
            flows=flows,
        )


def simulate(cfg: SimConfig) -> Trace:
    cfg.validate()
    algo = Algorithm(cfg.algorithm)
    if algo is not Algorithm.RANDOMIZED:
        return simulate_mw(cfg)
    if isinstance(cfg.topology, InterferenceGraph):
        return simulate_wireless(cfg)
    return simulate_circuit(cfg)


def _p_on(W: list[float]) -> list[float]:
    return [1.0 / (1.0 + math.exp(-w)) for w in W]


def simulate_wireless(cfg: SimConfig) -> Trace:
    """Continuous-time run of the randomized wireless scheduler."""
    cfg.validate()
    g = cfg.topology
    if not isinstance(g, InterferenceGraph):
        raise ConfigInvalid("simulate_wireless needs an interference graph")
    if Algorithm(cfg.algorithm) is not Algorithm.RANDOMIZED:
        raise ConfigInvalid("simulate_wireless runs the randomized algorithm only")
    n = g.n
    f = get_weight_function(cfg.weight_fn)
    local = WeightMode(cfg.weight_mode) is WeightMode.LOCAL_ONLY
    rng = random.Random(cfg.seed)
    lam = [float(v) for v in cfg.lam]
    nbrs = g.neighbors
    frozen = cfg.frozen
    horizon = float(cfg.horizon)

    Q = [float(v) for v in cfg.q0] if cfg.q0 is not None else [0.0] * n
    sigma = list(cfg.x0) if cfg.x0 is not None else [0] * n
    A = [0] * n
    D = [0.0] * n
    M = [0.0] * n
    p_on = _p_on(node_weights_fast(Q, f, local))
    events = [] if cfg.record_events else None
    rec = _Recorder(n, cfg.snapshot_times())

    heap = [(rng.expovariate(1.0), i) for i in range(n)]
    heapq.heapify(heap)
    t = 0.0
    next_int = 1.0
    ticks = 0
    if rec.next_time == 0.0:
        rec.take(Q, sigma, A, D, D, M)

    while True:
        t_tick = heap[0][0]
        t_bound = min(next_int, rec.next_time)
        t_next = min(t_tick, t_bound)
        if t_next > horizon:
            t_next = horizon
        dt = t_next - t
        if dt > 0 and not frozen:
            for i in range(n):
                if sigma[i]:
                    s = Q[i] if Q[i] < dt else dt
                    Q[i] -= s
                    D[i] += s
                    M[i] += dt - s
        t = t_next
        if t_tick < t_bound and t_tick <= horizon:
            _, i = heapq.heappop(heap)
            ticks += 1
            if any(sigma[j] for j in nbrs[i]):
                sigma[i] = 0
            else:
                sigma[i] = 1 if rng.random() < p_on[i] else 0
            if events is not None:
                events.append((t, "tick", i, sigma[i]))
            heapq.heappush(heap, (t + rng.expovariate(1.0), i))
            continue
        if t_bound > horizon:
            break
        if t_bound == next_int:
            if not frozen:
                for i in range(n):
                    if lam[i] > 0 and rng.random() < lam[i]:
                        Q[i] += 1.0
                        A[i] += 1
                        if events is not None:
                            events.append((t, "arrival", i, 1))
                p_on = _p_on(node_weights_fast(Q, f, local))
            next_int += 1.0
        if t_bound == rec.next_time:
            rec.take(Q, sigma, A, D, D, M)
    return rec.build("wireless", cfg, ticks, events, None, float)


_ARRIVAL, _REQUEST, _DEPART = 0, 1, 2


def simulate_circuit(cfg: SimConfig) -> Trace:
    """Continuous-time run of the randomized circuit-switched scheduler."""
    cfg.validate()
    net = cfg.topology
    if not isinstance(net, CircuitNetwork):
        raise ConfigInvalid("simulate_circuit needs a circuit network")
    n = net.n
    f = get_weight_function(cfg.weight_fn)
    local = WeightMode(cfg.weight_mode) is WeightMode.LOCAL_ONLY
    rng = random.Random(cfg.seed)
    lam = [float(v) for v in cfg.lam]
    frozen = cfg.frozen
    horizon = float(cfg.horizon)
    link_ids = [lid for lid, _ in net.links]
    cap = [c for _, c in net.links]
    route_links = [[link_ids.index(l) for l in r] for r in net.routes]
    used = [0] * len(cap)

    Q = [int(v) for v in cfg.q0] if cfg.q0 is not None else [0] * n
    z = [0] * n
    A = [0] * n
    S = [0] * n
    D = [0] * n
    M = [0] * n
    rates = [math.exp(w) for w in node_weights_fast(Q, f, local)]
    gen = [0] * n
    events = [] if cfg.record_events else None
    flows = [] if cfg.record_events else None
    active: dict[int, tuple] = {}
    rec = _Recorder(n, cfg.snapshot_times())

    # entries: (time, route, kind, tag); tag = generation for requests, flow id for departures
    heap: list[tuple] = []
    for i in range(n):
        if lam[i] > 0 and not frozen:
            heap.append((rng.expovariate(lam[i]), i, _ARRIVAL, 0))
        heap.append((rng.expovariate(rates[i]), i, _REQUEST, 0))
    heapq.heapify(heap)
    next_int = 1.0
    flow_id = 0
    ticks = 0
    if rec.next_time == 0.0:
        rec.take(Q, z, A, S, D, M)

    while True:
        t_ev = heap[0][0] if heap else math.inf
        t_bound = min(next_int, rec.next_time)
        if t_ev < t_bound and t_ev <= horizon:
            t, i, kind, tag = heapq.heappop(heap)
            if kind == _REQUEST:
                if tag != gen[i]:
                    continue
                ticks += 1
                links = route_links[i]
                if all(used[l] < cap[l] for l in links):
                    for l in links:
                        used[l] += 1
                    z[i] += 1
                    real = Q[i] > 0 and not frozen
                    if real:
                        Q[i] -= 1
                        S[i] += 1
                    else:
                        M[i] += 1
                    hold = rng.expovariate(1.0)
                    active[flow_id] = (i, real, t, hold)
                    heapq.heappush(heap, (t + hold, i, _DEPART, flow_id))
                    flow_id += 1
                    if events is not None:
                        events.append((t, "admit", i, "real" if real else "dummy"))
                elif events is not None:
                    events.append((t, "reject", i, ""))
                heapq.heappush(heap, (t + rng.expovariate(rates[i]), i, _REQUEST, gen[i]))
            elif kind == _DEPART:
                r, real, t_on, hold = active.pop(tag)
                for l in route_links[r]:
                    used[l] -= 1
                z[r] -= 1
                if real:
                    D[r] += 1
                if flows is not None:
                    flows.append((r, real, t_on, hold, t))
                if events is not None:
                    events.append((t, "depart", r, "real" if real else "dummy"))
            else:
                Q[i] += 1
                A[i] += 1
                if events is not None:
                    events.append((t, "arrival", i, 1))
                heapq.heappush(heap, (t + rng.expovariate(lam[i]), i, _ARRIVAL, 0))
            continue
        if t_bound > horizon:
            break
        t = t_bound
        if t_bound == next_int:
            if not frozen:
                rates = [math.exp(w) for w in node_weights_fast(Q, f, local)]
                # pending requests were drawn at the old rates
                for i in range(n):
                    gen[i] += 1
                    heapq.heappush(heap, (t + rng.expovariate(rates[i]), i, _REQUEST, gen[i]))
            next_int += 1.0
        if t_bound == rec.next_time:
            rec.take(Q, z, A, S, D, M)
    return rec.build("circuit", cfg, ticks, events, flows, np.int64)


# --- MW baselines ---------------------------------------------------------

def _argmax_schedule(states: np.ndarray, w: np.ndarray) -> tuple[int, ...]:
    # np.argmax returns the first maximiser, i.e. the lexicographically first schedule
    return tuple(int(v) for v in states[int(np.argmax(states @ w))])


def mw_schedule(g: InterferenceGraph, Q: Sequence[float], states=None) -> tuple[int, ...]:
    """Lexicographically first maximiser of ``Q . rho`` over the independent sets."""
    S = np.asarray(enumerate_independent_sets(g) if states is None else states, dtype=float)
    return _argmax_schedule(S, np.asarray(Q, dtype=float))


def mw_f_schedule(g: InterferenceGraph, Q: Sequence[float], f: WeightFunction | str = "loglog",
                  states=None) -> tuple[int, ...]:
    f = get_weight_function(f) if isinstance(f, str) else f
    S = np.asarray(enumerate_independent_sets(g) if states is None else states, dtype=float)
    return _argmax_schedule(S, np.asarray(f(np.asarray(Q, dtype=float)), dtype=float))


def simulate_mw(cfg: SimConfig) -> Trace:
    """Slotted MW / MW-f: the schedule is fixed from ``Q(tau)`` for each unit slot."""
    cfg.validate()
    g = cfg.topology
    algo = Algorithm(cfg.algorithm)
    if algo is Algorithm.RANDOMIZED:
        raise ConfigInvalid("simulate_mw needs algorithm 'mw' or 'mw_f'")
    n = g.n
    S = np.asarray(enumerate_independent_sets(g), dtype=float)
    f = get_weight_function(cfg.weight_fn)
    rng = random.Random(cfg.seed)
    lam = [float(v) for v in cfg.lam]
    Q = [float(v) for v in cfg.q0] if cfg.q0 is not None else [0.0] * n
    A = [0] * n
    D = [0.0] * n
    M = [0.0] * n
    rec = _Recorder(n, cfg.snapshot_times())
    events = [] if cfg.record_events else None
    T = int(math.floor(cfg.horizon))
    sigma = [0] * n
    for tau in range(T + 1):
        w = np.asarray(Q) if algo is Algorithm.MW else np.asarray(f(np.asarray(Q)), dtype=float)
        sigma = list(_argmax_schedule(S, w))
        if events is not None:
            events.append((float(tau), "schedule", -1, tuple(sigma)))
        while rec.next_time <= tau:
            rec.take(Q, sigma, A, D, D, M)
        if tau == T:
            break
        for i in range(n):
            if sigma[i]:
                s = min(Q[i], 1.0)
                Q[i] -= s
                D[i] += s
                M[i] += 1.0 - s
        for i in range(n):
            if lam[i] > 0 and rng.random() < lam[i]:
                Q[i] += 1.0
                A[i] += 1
    return rec.build("wireless", cfg, 0, events, None, float)


# --- replicas ----------------------------------------------------------------

def replica_seed(master: int, index: int) -> int:
    """Deterministic 64-bit seed for replica ``index`` of a master seed."""
    words = np.random.SeedSequence([int(master), int(index)]).generate_state(2, np.uint32)
    return (int(words[0]) << 32) | int(words[1])


def worker_count() -> int:
    env = os.environ.get("SCHEDNET_THREADS")
    if env:
        return max(1, int(env))
    return max(1, min(os.cpu_count() or 1, 8))


def run_replicas(cfg: SimConfig, seeds: Sequence[int], workers: int | None = None) -> list[Trace]:
    """Independent runs of ``cfg`` under each seed, returned in ascending seed order."""
    seeds = sorted(int(s) for s in seeds)
    cfgs = [replace(cfg, seed=s) for s in seeds]
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(cfgs) < 2:
        return [simulate(c) for c in cfgs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(simulate, cfgs, chunksize=max(1, len(cfgs) // (4 * workers))))


def pilot_thresholds() -> dict[str, float]:
    """Frozen stability thresholds written by ``scripts/pilot_calibration.py``."""
    from importlib.resources import files

    data = json.loads(files("schednet").joinpath("data/pilot_thresholds.json").read_text("utf-8"))
    return {name: s["threshold"] for name, s in data["scenarios"].items()}
