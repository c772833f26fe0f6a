"""Finite Markov chains over schedule spaces.

Glauber dynamics on independent sets and the discrete-time loss network
chain, their product-form stationary laws, and the spectral quantities used
to bound mixing: conductance, the pi-weighted operator norm and the
matrix exponential of the uniformized generator.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from math import lgamma
from typing import Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import (
    DimensionMismatch,
    NonPositiveMeasure,
    PeriodicChain,
    ReducibleChain,
    StateSpaceTooLarge,
)
from .model import (
    DEFAULT_CAP,
    CircuitNetwork,
    InterferenceGraph,
    State,
    Topology,
    enumerate_allocations,
    enumerate_independent_sets,
)

CONDUCTANCE_MAX_STATES = 24


@dataclass
class ChainKernel:
    states: list[State]
    P: np.ndarray
    pi: np.ndarray | None = None

    def __post_init__(self):
        self.P = np.asarray(self.P, dtype=float)
        m = len(self.states)
        if self.P.shape != (m, m):
            raise DimensionMismatch(f"P has shape {self.P.shape}, expected ({m}, {m})")

    @property
    def size(self) -> int:
        return len(self.states)

    def index(self) -> dict[State, int]:
        return {s: k for k, s in enumerate(self.states)}

    def check(self, tol_rows: float = 1e-12, tol_pi: float = 1e-10) -> list[str]:
        """Return the list of broken invariants (empty when the kernel is sound)."""
        bad = []
        if np.any(self.P < 0):
            bad.append("negative entries")
        if np.max(np.abs(self.P.sum(axis=1) - 1.0)) > tol_rows:
            bad.append("rows do not sum to 1")
        if self.pi is not None:
            if np.max(np.abs(self.pi @ self.P - self.pi)) > tol_pi:
                bad.append("pi is not stationary")
            if detailed_balance_error(self.P, self.pi) > tol_pi:
                bad.append("detailed balance fails")
        return bad


def detailed_balance_error(P: np.ndarray, pi: np.ndarray) -> float:
    flow = pi[:, None] * P
    return float(np.max(np.abs(flow - flow.T)))


# --- Glauber dynamics ---------------------------------------------------

def glauber_kernel(g: InterferenceGraph, W: Sequence[float], cap: int = DEFAULT_CAP) -> ChainKernel:
    """Transition matrix of single-site Glauber dynamics with node weights ``W``."""
    W = np.asarray(W, dtype=float)
    if W.shape != (g.n,):
        raise DimensionMismatch(f"W has shape {W.shape}, graph has {g.n} nodes")
    states = enumerate_independent_sets(g, cap)
    idx = {s: k for k, s in enumerate(states)}
    # exp(W)/(1+exp(W)) without overflow
    p_on = 1.0 / (1.0 + np.exp(-W))
    P = np.zeros((len(states), len(states)))
    n = g.n
    for a, s in enumerate(states):
        for i in range(n):
            if any(s[j] for j in g.neighbors[i]):
                P[a, a] += 1.0 / n
                continue
            on = s[:i] + (1,) + s[i + 1:]
            off = s[:i] + (0,) + s[i + 1:]
            P[a, idx[on]] += p_on[i] / n
            P[a, idx[off]] += (1.0 - p_on[i]) / n
    return ChainKernel(states, P)


def glauber_stationary(g: InterferenceGraph, W: Sequence[float], cap: int = DEFAULT_CAP) -> np.ndarray:
    """Gibbs law ``pi(sigma) ~ exp(W . sigma)`` over the independent sets."""
    states = enumerate_independent_sets(g, cap)
    logw = np.asarray(states, dtype=float) @ np.asarray(W, dtype=float)
    return _normalize_log(logw)


# --- loss network ---------------------------------------------------------

def lossnet_kernel(net: CircuitNetwork, phi: Sequence[float], cap: int = DEFAULT_CAP) -> ChainKernel:
    """Embedded loss-network chain: route picked uniformly, normaliser sum(phi) + C_max."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (net.n,):
        raise DimensionMismatch(f"phi has shape {phi.shape}, network has {net.n} routes")
    if np.any(phi <= 0):
        raise ValueError("arrival rates phi must be positive")
    states = enumerate_allocations(net, cap)
    idx = {s: k for k, s in enumerate(states)}
    R = float(phi.sum()) + net.c_max
    n = net.n
    P = np.zeros((len(states), len(states)))
    for a, z in enumerate(states):
        for i in range(n):
            up = z[:i] + (z[i] + 1,) + z[i + 1:]
            p_up = phi[i] / R if up in idx else 0.0
            p_down = z[i] / R
            if p_up:
                P[a, idx[up]] += p_up / n
            if p_down:
                P[a, idx[z[:i] + (z[i] - 1,) + z[i + 1:]]] += p_down / n
            P[a, a] += (1.0 - p_up - p_down) / n
    return ChainKernel(states, P)


def lossnet_normalizer(net: CircuitNetwork, phi: Sequence[float]) -> float:
    return float(np.sum(phi)) + net.c_max


def lossnet_stationary(net: CircuitNetwork, phi: Sequence[float], cap: int = DEFAULT_CAP) -> np.ndarray:
    """Product form ``pi(z) ~ prod_i phi_i^z_i / z_i!``."""
    states = enumerate_allocations(net, cap)
    logphi = np.log(np.asarray(phi, dtype=float))
    logw = np.array([sum(zi * lp - lgamma(zi + 1) for zi, lp in zip(z, logphi)) for z in states])
    return _normalize_log(logw)


def _normalize_log(logw: np.ndarray) -> np.ndarray:
    w = np.exp(logw - logw.max())
    return w / w.sum()


def scheduling_chain(topology: Topology, W: Sequence[float], cap: int = DEFAULT_CAP):
    """Chain driven by the algorithm for fixed weights ``W``.

    Returns ``(kernel, rate)`` where ``exp(t * rate * (P - I))`` is the law of
    the schedule after ``t`` units of continuous time. The kernel carries the
    product-form stationary distribution.
    """
    W = np.asarray(W, dtype=float)
    if isinstance(topology, InterferenceGraph):
        k = glauber_kernel(topology, W, cap)
        k.pi = glauber_stationary(topology, W, cap)
        return k, float(topology.n)
    phi = np.exp(W)
    k = lossnet_kernel(topology, phi, cap)
    k.pi = lossnet_stationary(topology, phi, cap)
    return k, topology.n * lossnet_normalizer(topology, phi)


# --- stationary distribution ----------------------------------------------

def _period(P: np.ndarray) -> int:
    m = P.shape[0]
    if np.all(np.diag(P) > 0):
        return 1
    level = np.full(m, -1)
    level[0] = 0
    frontier = [0]
    g = 0
    while frontier:
        nxt = []
        for u in frontier:
            for v in np.flatnonzero(P[u] > 0):
                if level[v] < 0:
                    level[v] = level[u] + 1
                    nxt.append(v)
                else:
                    g = math.gcd(g, int(level[u] + 1 - level[v]))
        frontier = nxt
    return g


def stationary_from_kernel(k: ChainKernel, tol: float = 1e-12) -> np.ndarray:
    """Unique stationary distribution of an irreducible aperiodic kernel."""
    P = k.P
    m = P.shape[0]
    ncomp, _ = connected_components(csr_matrix(P > 0), directed=True, connection="strong")
    if ncomp > 1:
        raise ReducibleChain(f"kernel has {ncomp} communicating classes")
    d = _period(P)
    if d != 1:
        raise PeriodicChain(f"kernel has period {d}")
    A = np.eye(m) - P.T
    A[-1, :] = 1.0
    b = np.zeros(m)
    b[-1] = 1.0
    pi = np.linalg.solve(A, b)
    for _ in range(50):
        if np.max(np.abs(pi @ P - pi)) <= tol:
            break
        pi = pi @ P
        pi = pi / pi.sum()
    return np.clip(pi, 0.0, None) / np.clip(pi, 0.0, None).sum()


# --- spectral quantities --------------------------------------------------

def symmetrized(P: np.ndarray, pi: np.ndarray) -> np.ndarray:
    """``D^{1/2} P D^{-1/2}`` symmetrised; exact symmetric for reversible P."""
    d = np.sqrt(pi)
    S = d[:, None] * P / d[None, :]
    return 0.5 * (S + S.T)


def slem(P: np.ndarray, pi: np.ndarray) -> float:
    """Second largest eigenvalue modulus of a reversible kernel."""
    ev = np.sort(np.linalg.eigvalsh(symmetrized(P, pi)))
    rest = ev[:-1]
    return float(max(abs(rest[0]), abs(rest[-1]))) if rest.size else 0.0


def matrix_norm(A: np.ndarray, u: Sequence[float]) -> float:
    """Operator norm of ``A`` on u-centred vectors in the ``L^2(u)`` norm."""
    A = np.asarray(A, dtype=float)
    u = np.asarray(u, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] != u.shape[0]:
        raise DimensionMismatch(f"A{A.shape} incompatible with u{u.shape}")
    if np.any(u <= 0):
        raise NonPositiveMeasure("reference measure must be strictly positive")
    d = np.sqrt(u)
    B = d[:, None] * A / d[None, :]
    s = d / np.linalg.norm(d)
    proj = np.eye(len(u)) - np.outer(s, s)
    return float(np.linalg.norm(B @ proj, ord=2))


def conductance(k: ChainKernel, pi: np.ndarray | None = None) -> float:
    """Exact ``min_{pi(S) <= 1/2} Q(S, S^c) / (pi(S) pi(S^c))`` over all cuts.

    Exhaustive over the ``2^m`` subsets, evaluated meet-in-the-middle: the
    states are split in two halves and the quadratic form is assembled from
    per-half tables, so ``m = 24`` costs a few 4096x4096 blocks.
    """
    m = k.size
    if m > CONDUCTANCE_MAX_STATES:
        raise StateSpaceTooLarge(f"{m} states; exhaustive conductance supports <= {CONDUCTANCE_MAX_STATES}")
    if m < 2:
        return math.inf
    if pi is None:
        pi = k.pi if k.pi is not None else stationary_from_kernel(k)
    F = pi[:, None] * k.P
    h = m // 2
    lo = np.arange(h)
    hi = np.arange(h, m)

    def bits(width: int) -> np.ndarray:
        codes = np.arange(2 ** width)
        return ((codes[:, None] >> np.arange(width)[None, :]) & 1).astype(float)

    A = bits(len(lo))
    B = bits(len(hi))
    pa = A @ pi[lo]
    pb = B @ pi[hi]
    qa = np.einsum("ij,jk,ik->i", A, F[np.ix_(lo, lo)], A)
    qb = np.einsum("ij,jk,ik->i", B, F[np.ix_(hi, hi)], B)
    cross = F[np.ix_(lo, hi)] + F[np.ix_(hi, lo)].T
    AB = A @ cross
    best = math.inf
    chunk = 512
    for start in range(0, len(A), chunk):
        sl = slice(start, start + chunk)
        ps = pa[sl, None] + pb[None, :]
        inside = qa[sl, None] + qb[None, :] + AB[sl] @ B.T
        flow = ps - inside
        ok = (ps > 0) & (ps <= 0.5 + 1e-12)
        if not ok.any():
            continue
        ratio = flow[ok] / (ps[ok] * (1.0 - ps[ok]))
        best = min(best, float(ratio.min()))
    return max(best, 0.0)


def conductance_estimate(k: ChainKernel, samples: int = 20000, seed: int = 0) -> dict:
    """Sampled cuts for large chains; an upper estimate of the true conductance."""
    pi = k.pi if k.pi is not None else stationary_from_kernel(k)
    F = pi[:, None] * k.P
    rng = np.random.default_rng(seed)
    best = math.inf
    for _ in range(samples):
        x = (rng.random(k.size) < rng.random()).astype(float)
        ps = float(x @ pi)
        if ps <= 0 or ps > 0.5:
            continue
        best = min(best, float(ps - x @ F @ x) / (ps * (1 - ps)))
    return {"value": best, "estimate": True, "samples": samples}


# --- matrix exponential ---------------------------------------------------

def expm(A: np.ndarray) -> np.ndarray:
    """Scaling and squaring on a truncated Taylor series."""
    A = np.asarray(A, dtype=float)
    norm = np.linalg.norm(A, 1)
    s = max(0, int(math.ceil(math.log2(norm / 0.5)))) if norm > 0.5 else 0
    X = A / (2.0 ** s)
    out = np.eye(A.shape[0])
    term = np.eye(A.shape[0])
    for j in range(1, 60):
        term = term @ X / j
        out = out + term
        # remaining tail is bounded by a geometric series with ratio <= 1/2
        if np.linalg.norm(term, 1) * 2 < 1e-17:
            break
    for _ in range(s):
        out = out @ out
    return out


def uniformized_kernel(k: ChainKernel, rate: float) -> ChainKernel:
    """``exp(rate (P - I))``: the schedule law after a Poisson(rate) number of steps."""
    if rate <= 0:
        raise ValueError("rate must be positive")
    M = expm(rate * (k.P - np.eye(k.size)))
    return ChainKernel(list(k.states), M, None if k.pi is None else k.pi.copy())


# --- mixing bounds -----------------------------------------------------------

@dataclass(frozen=True)
class MixingBound:
    """Bounds of the form ``1 - gap``; gaps are kept in log space."""

    log_gap_P: float
    log_gap_exp: float

    @property
    def bound_P(self) -> float:
        return float(-np.expm1(self.log_gap_P))

    @property
    def bound_exp(self) -> float:
        return float(-np.expm1(self.log_gap_exp))

    def dominates(self, norm_P: float, norm_exp: float) -> tuple[bool, bool]:
        """Compare exact norms against the bounds on the gap scale."""
        return (_log_gap(norm_P) >= self.log_gap_P, _log_gap(norm_exp) >= self.log_gap_exp)


def _log_gap(norm: float) -> float:
    gap = 1.0 - norm
    return math.log(gap) if gap > 0 else -math.inf


def mixing_bound_glauber(n: int, w_max: float) -> MixingBound:
    if n < 1 or w_max < 0:
        raise ValueError("need n >= 1 and w_max >= 0")
    ln2 = math.log(2.0)
    core = 2 * (n + 1) * w_max
    return MixingBound(
        log_gap_P=-(2 * math.log(n) + (2 * n + 3) * ln2 + core),
        log_gap_exp=-(math.log(n) + (2 * n + 4) * ln2 + core),
    )


def mixing_bound_lossnet(n: int, c_max: int, w_max: float) -> MixingBound:
    """Bounds for ``||P||`` and ``||exp(n R (P - I))||`` of the loss network chain."""
    if n < 1 or c_max < 1 or w_max < 0:
        raise ValueError("need n >= 1, c_max >= 1 and w_max >= 0")
    powc = (2 * n * c_max + 2 * n + 2) * math.log(c_max)
    core = 2 * (n * c_max + 1) * w_max
    return MixingBound(
        log_gap_P=-(math.log(8) + 4 * math.log(n) + powc + core),
        log_gap_exp=-(math.log(16) + 3 * math.log(n) + powc + core),
    )


# --- export -----------------------------------------------------------------

def _label(s: State) -> str:
    return "".join(str(v) for v in s) if all(v < 10 for v in s) else "-".join(map(str, s))


def kernel_to_csv(k: ChainKernel, path) -> None:
    labels = [_label(s) for s in k.states]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["from"] + labels)
        for lab, row in zip(labels, k.P):
            w.writerow([lab] + [repr(float(v)) for v in row])


def distribution_to_csv(states: list[State], probs: np.ndarray, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["state", "prob"])
        for s, p in zip(states, probs):
            w.writerow([_label(s), repr(float(p))])
