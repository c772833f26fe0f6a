"""Distances, Lyapunov drift, variational checks and time-scale diagnostics."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.special import expi

from . import chains
from .errors import (
    DimensionMismatch,
    NegativeInput,
    NoSnapshotNear,
    ReferenceNotFullSupport,
    WindowOutOfRange,
)
from .model import DEFAULT_CAP, CircuitNetwork, InterferenceGraph, Topology, schedule_space
from .sim import SimConfig, Trace, replica_seed, run_replicas
from .weights import LOGLOG, WeightFunction, WeightMode, f_loglog, get_weight_function, node_weights

E = math.e


# --- distances -------------------------------------------------------------

def _pair(mu, nu) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(mu, dtype=float)
    b = np.asarray(nu, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"distributions have shapes {a.shape} and {b.shape}")
    return a, b


def tv_distance(mu, nu) -> float:
    a, b = _pair(mu, nu)
    return 0.5 * float(np.abs(a - b).sum())


def chi2_distance(nu, mu) -> float:
    """``|| nu/mu - 1 ||_{2,mu}``; the reference ``mu`` must have full support."""
    v, m = _pair(nu, mu)
    if np.any(m <= 0):
        raise ReferenceNotFullSupport("chi-square distance needs a strictly positive reference")
    # a denormal reference mass legitimately sends the distance to inf
    with np.errstate(over="ignore"):
        return math.sqrt(float(np.sum((v - m) ** 2 / m)))


@dataclass
class DistanceReport:
    tv: float
    chi: float | None


def distance_report(mu, pi) -> DistanceReport:
    tv = tv_distance(mu, pi)
    chi = chi2_distance(mu, pi) if np.all(np.asarray(pi) > 0) else None
    return DistanceReport(tv, chi)


# --- Lyapunov function -------------------------------------------------------

def adaptive_simpson(f: Callable[[float], float], a: float, b: float, rtol: float = 1e-10) -> float:
    """Adaptive Simpson quadrature of a smooth scalar function."""
    if b <= a:
        return 0.0

    def simpson(fa, fm, fb, lo, hi):
        return (hi - lo) * (fa + 4.0 * fm + fb) / 6.0

    def rec(lo, hi, fa, fm, fb, whole, tol, depth):
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, lo, mid)
        right = simpson(fm, frm, fb, mid, hi)
        if depth <= 0 or abs(left + right - whole) <= 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        return (rec(lo, mid, fa, flm, fm, left, tol / 2, depth - 1)
                + rec(mid, hi, fm, frm, fb, right, tol / 2, depth - 1))

    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    whole = simpson(fa, fm, fb, a, b)
    # a relative target needs a scale; the crude estimate is within a few % for smooth f
    tol = rtol * max(abs(whole), 1e-300)
    return rec(a, b, fa, fm, fb, whole, tol, 50)


def _loglog_scalar(y: float) -> float:
    # log(log(y+e)) = log1p(log1p(y/e)), which keeps full relative precision near 0
    return math.log1p(math.log1p(y / E))


_EI1 = float(expi(1.0))


def loglog_antiderivative(x: float) -> float:
    """``F(x) = int_0^x log log(y+e) dy``.

    With ``u = log(y+e)`` the integrand becomes ``e^u log u``, giving
    ``F(x) = (x+e) f(x) - Ei(log(x+e)) + Ei(1)``. Near 0 the two terms cancel,
    so small arguments go through quadrature instead.
    """
    if x < 0:
        raise NegativeInput(f"F needs x >= 0, got {x}")
    if x < 0.5:
        return adaptive_simpson(_loglog_scalar, 0.0, x)
    u = math.log(x + E)
    return (x + E) * math.log(u) - float(expi(u)) + _EI1


def antiderivative(f: WeightFunction | Callable, x: float) -> float:
    if f is LOGLOG or f is f_loglog:
        return loglog_antiderivative(x)
    if x < 0:
        raise NegativeInput(f"F needs x >= 0, got {x}")
    g = f.at if isinstance(f, WeightFunction) else (lambda v: float(f(v)))
    return adaptive_simpson(g, 0.0, x)


def lyapunov_wireless(Q: Sequence[float], f: WeightFunction | Callable = LOGLOG) -> float:
    """``sum_i F(Q_i)`` with ``F`` the antiderivative of the weight function."""
    q = np.asarray(Q, dtype=float)
    if np.any(q < 0):
        raise NegativeInput("queue lengths must be non-negative")
    return float(sum(antiderivative(f, float(v)) for v in q))


def lyapunov_circuit(Q: Sequence[float], z: Sequence[int], f: WeightFunction | Callable = LOGLOG) -> float:
    """``sum_i F(Q_i + z_i)``: buffered plus active flows per route."""
    q = np.asarray(Q, dtype=float)
    zz = np.asarray(z, dtype=float)
    if q.shape != zz.shape:
        raise DimensionMismatch("Q and z must have the same length")
    if np.any(q < 0) or np.any(zz < 0):
        raise NegativeInput("queue lengths and active flows must be non-negative")
    return lyapunov_wireless(q + zz, f)


@dataclass
class DriftReport:
    window: tuple[int, int]
    L_start: float
    L_end: float
    deltas: list[float]
    drift: float


def trace_lyapunov(trace: Trace, f: WeightFunction | Callable = LOGLOG) -> tuple[np.ndarray, np.ndarray]:
    """Lyapunov values at the integer-time snapshots of ``trace``."""
    sel = np.isclose(trace.times, np.round(trace.times))
    times = np.round(trace.times[sel]).astype(int)
    Q = trace.Q[sel].astype(float)
    if trace.kind == "circuit":
        Q = Q + trace.x[sel]
    cache: dict[float, float] = {}

    def F(v: float) -> float:
        if v not in cache:
            cache[v] = antiderivative(f, v)
        return cache[v]

    L = np.array([sum(F(float(v)) for v in row) for row in Q])
    return times, L


def drift_report(trace: Trace, b1: int, b2: int, f: WeightFunction | Callable = LOGLOG) -> DriftReport:
    """Per-step Lyapunov changes over integer times ``b1..b2``; reporting only."""
    if not (0 <= b1 < b2 <= trace.horizon):
        raise WindowOutOfRange(f"window ({b1}, {b2}) outside [0, {trace.horizon}]")
    times, L = trace_lyapunov(trace, f)
    pos = {int(t): k for k, t in enumerate(times)}
    missing = [t for t in range(b1, b2 + 1) if t not in pos]
    if missing:
        raise WindowOutOfRange(f"trace lacks integer snapshots at {missing[:5]}")
    vals = L[[pos[t] for t in range(b1, b2 + 1)]]
    deltas = np.diff(vals)
    return DriftReport((b1, b2), float(vals[0]), float(vals[-1]), deltas.tolist(),
                       float((vals[-1] - vals[0]) / (b2 - b1)))


# --- variational characterisation --------------------------------------------

def gibbs_from_potential(T: Sequence[float]) -> np.ndarray:
    t = np.asarray(T, dtype=float)
    w = np.exp(t - t.max())
    return w / w.sum()


def entropy(mu) -> float:
    m = np.asarray(mu, dtype=float)
    nz = m[m > 0]
    return float(-np.sum(nz * np.log(nz)))


def free_energy(T: Sequence[float], mu: Sequence[float]) -> float:
    """``E_mu[T] + H(mu)`` with ``0 log 0 = 0``."""
    t, m = _pair(T, mu)
    return float(m @ t) + entropy(m)


def log_partition(T: Sequence[float]) -> float:
    t = np.asarray(T, dtype=float)
    c = t.max()
    return float(c + math.log(np.exp(t - c).sum()))


@dataclass
class GoodPiReport:
    expected_weight: float
    max_weight: float
    slack: float
    envelope: float
    floor_excess: float
    slack_bound: float
    potential_mean: float
    potential_max: float
    log_states: float
    gibbs_bound_holds: bool
    epsilon: float
    target_weight: float
    target_gap: float


def verify_goodpi(topology: Topology, Q: Sequence[float], epsilon: float = 0.1,
                  f: WeightFunction = LOGLOG, mode: WeightMode | str = WeightMode.WITH_QMAX,
                  cap: int = DEFAULT_CAP, tol: float = 1e-9) -> GoodPiReport:
    """Compare the stationary mean weight with the max-weight schedule.

    The stationary law for weights ``W(Q)`` is ``pi(x) ~ exp(T(x))`` with
    ``T(x) = sum_i W_i x_i - log(x_i!)``. The unconditional bound
    ``E_pi[T] >= max T - log |Omega|`` is checked; the ``(1 - eps/4) M - O(1)``
    form is only reported since its constant is unspecified.

    Since ``W >= f(Q)``, that bound gives ``slack <= envelope + floor_excess``
    with ``envelope = log |Omega| + max sum log x_i!`` and
    ``floor_excess = max_x (W - f(Q)) . x``; both are reported.
    """
    q = np.asarray(Q, dtype=float)
    if np.any(q < 0):
        raise NegativeInput("queue lengths must be non-negative")
    states = np.asarray(schedule_space(topology, cap), dtype=float)
    W = node_weights(q, f, mode)
    fq = np.asarray(f(q), dtype=float)
    log_fact = np.array([sum(math.lgamma(v + 1) for v in row) for row in states])
    T = states @ W - log_fact
    pi = gibbs_from_potential(T)
    expected = float(pi @ (states @ fq))
    M = float((states @ fq).max())
    logm = math.log(len(states))
    mean_T, max_T = float(pi @ T), float(T.max())
    target = (1.0 - epsilon / 4.0) * M
    envelope = logm + float(log_fact.max())
    excess = float((states @ (W - fq)).max())
    return GoodPiReport(
        expected_weight=expected,
        max_weight=M,
        slack=M - expected,
        envelope=envelope,
        floor_excess=excess,
        slack_bound=envelope + excess,
        potential_mean=mean_T,
        potential_max=max_T,
        log_states=logm,
        gibbs_bound_holds=mean_T >= max_T - logm - tol,
        epsilon=epsilon,
        target_weight=target,
        target_gap=target - expected,
    )


# --- schedule distributions ------------------------------------------------------

def empirical_distribution(traces: Sequence[Trace], t: float, states: Sequence[tuple],
                           atol: float = 1e-9) -> tuple[np.ndarray, int]:
    """Frequency of each schedule at the snapshot nearest ``t`` across replicas."""
    if not traces:
        raise NoSnapshotNear("no traces given")
    idx = {tuple(int(v) for v in s): k for k, s in enumerate(states)}
    counts = np.zeros(len(states))
    for tr in traces:
        if tr.times.size == 0:
            raise NoSnapshotNear("trace has no snapshots")
        k = int(np.argmin(np.abs(tr.times - t)))
        if abs(tr.times[k] - t) > max(atol, 0.5 * _spacing(tr.times)):
            raise NoSnapshotNear(f"trace seed={tr.seed} has no snapshot near t={t}")
        counts[idx[tuple(int(v) for v in tr.x[k])]] += 1
    return counts / counts.sum(), len(traces)


def _spacing(times: np.ndarray) -> float:
    return float(np.min(np.diff(times))) if times.size > 1 else 0.0


def frozen_weights(topology: Topology, Q0: Sequence[float], f: WeightFunction | str = "loglog",
                   mode: WeightMode | str = WeightMode.WITH_QMAX) -> np.ndarray:
    f = get_weight_function(f) if isinstance(f, str) else f
    return node_weights(np.asarray(Q0, dtype=float), f, mode)


def exact_schedule_law(topology: Topology, W: Sequence[float], t: float,
                       x0: Sequence[int] | None = None) -> tuple[list, np.ndarray, np.ndarray]:
    """Law of the schedule after time ``t`` with weights pinned at ``W``.

    Returns ``(states, mu_t, pi)``, using ``mu_t = delta_{x0} exp(t r (P - I))``.
    """
    k, rate = chains.scheduling_chain(topology, W)
    start = np.zeros(k.size)
    x0 = tuple([0] * topology.n) if x0 is None else tuple(x0)
    start[k.index()[x0]] = 1.0
    mu = start if t == 0 else start @ chains.expm(t * rate * (k.P - np.eye(k.size)))
    return k.states, mu, k.pi


@dataclass
class TimescaleRow:
    t: float
    tv: float
    stderr: float


def timescale_report(topology: Topology, Q0: Sequence[float], replicas: int, times: Sequence[float],
                     lam: Sequence[float] | None = None, frozen: bool = True, seed: int = 0,
                     weight_fn: str = "loglog", weight_mode: str = "with_qmax",
                     workers: int | None = None) -> list[TimescaleRow]:
    """Monte Carlo TV distance between the schedule law and ``pi(0)`` over time.

    ``pi(0)`` is the stationary law for the weights of ``Q0``. ``stderr`` is the
    sampling scale ``sqrt(|Omega| / replicas)`` used for error budgets.
    """
    if replicas < 1:
        raise ValueError("need at least one replica")
    times = sorted(float(t) for t in times)
    W0 = frozen_weights(topology, Q0, weight_fn, weight_mode)
    states, _, pi0 = exact_schedule_law(topology, W0, 0.0)
    lam = tuple([0.0] * topology.n) if lam is None else tuple(lam)
    cfg = SimConfig(topology, lam, horizon=max(times[-1], 1e-9), weight_fn=weight_fn,
                    weight_mode=weight_mode, sample_times=tuple(times), q0=tuple(Q0), frozen=frozen)
    seeds = [replica_seed(seed, r) for r in range(replicas)]
    traces = run_replicas(cfg, seeds, workers)
    scale = math.sqrt(len(states) / replicas)
    rows = []
    for t in times:
        mu, _ = empirical_distribution(traces, t, states)
        rows.append(TimescaleRow(t, tv_distance(mu, pi0), scale))
    return rows


def timescale_csv(rows: Sequence[TimescaleRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "tv", "stderr"])
    for r in rows:
        w.writerow([repr(r.t), repr(r.tv), repr(r.stderr)])
    return buf.getvalue()


# --- perturbation bound for matrix exponentials -------------------------------

def expm_perturbation_check(P1, P2, tol: float = 1e-9) -> tuple[float, float, bool]:
    """``||e^{P1} - e^{P2}||_inf`` against ``e^{N M} ||P1 - P2||_inf`` (max row sum)."""
    A = np.asarray(P1, dtype=float)
    B = np.asarray(P2, dtype=float)
    if A.shape != B.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"need equal square matrices, got {A.shape} and {B.shape}")
    N = A.shape[0]
    inf = lambda X: float(np.abs(X).sum(axis=1).max())
    M = max(inf(A), inf(B))
    lhs = inf(chains.expm(A) - chains.expm(B))
    rhs = math.exp(N * M) * inf(A - B)
    return lhs, rhs, lhs <= rhs + tol


def report_dict(obj) -> dict:
    return asdict(obj)
