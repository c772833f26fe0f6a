"""Queue-size weight functions and the node-weight rule.

The default weight is ``f(x) = log log(x + e)``; a node's weight is
``max(f(Q_i), sqrt(f(Q_max)))`` (``with_qmax``) or ``f(Q_i)`` alone
(``local_only``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigInvalid, EmptyVector, GridTooSmall, NegativeInput

E = math.e


def _check_nonneg(x):
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise NegativeInput(f"weight functions need x >= 0, got {x!r}")
    return arr


def f_loglog(x):
    """``log(log(x + e))``; accepts scalars or arrays."""
    arr = _check_nonneg(x)
    out = np.log(np.log(arr + E))
    return float(out) if out.ndim == 0 else out


def f_sqrtlog(x):
    arr = _check_nonneg(x)
    out = np.sqrt(np.log1p(arr))
    return float(out) if out.ndim == 0 else out


def f_eps_log(x):
    # eps(x) = 1/sqrt(1 + log(1+x)): eps(0) = 1 and decreases to 0
    arr = _check_nonneg(x)
    lg = np.log1p(arr)
    out = lg / np.sqrt(1.0 + lg)
    return float(out) if out.ndim == 0 else out


def f_logloglog(x):
    arr = _check_nonneg(x)
    out = np.log(np.log(np.log(arr + math.exp(E))))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class WeightFunction:
    id: str
    evaluator: Callable = field(compare=False)
    validated: bool = True
    # plain-float version for the simulator's inner loop
    scalar: Callable[[float], float] | None = field(default=None, compare=False)

    def __call__(self, x):
        return self.evaluator(x)

    def at(self, x: float) -> float:
        return self.scalar(x) if self.scalar is not None else float(self.evaluator(x))


_EE = math.exp(E)

LOGLOG = WeightFunction("loglog", f_loglog, scalar=lambda x: math.log(math.log(x + E)))

BUILTIN = {
    "loglog": LOGLOG,
    "sqrtlog": WeightFunction("sqrtlog", f_sqrtlog, scalar=lambda x: math.sqrt(math.log1p(x))),
    "eps_log": WeightFunction(
        "eps_log", f_eps_log, scalar=lambda x: math.log1p(x) / math.sqrt(1.0 + math.log1p(x))
    ),
    "logloglog": WeightFunction(
        "logloglog", f_logloglog, scalar=lambda x: math.log(math.log(math.log(x + _EE)))
    ),
}


def custom(evaluator: Callable, name: str = "custom") -> WeightFunction:
    """Wrap a user function; it stays tagged unvalidated until checked."""
    return WeightFunction(name, evaluator, validated=False)


def get_weight_function(name: str) -> WeightFunction:
    try:
        return BUILTIN[name]
    except KeyError:
        raise ConfigInvalid(f"unknown weight_fn {name!r}; choose from {sorted(BUILTIN)}") from None


class WeightMode(str, Enum):
    WITH_QMAX = "with_qmax"
    LOCAL_ONLY = "local_only"


def node_weights(Q: Sequence[float], f: WeightFunction | Callable = LOGLOG,
                 mode: WeightMode | str = WeightMode.WITH_QMAX) -> np.ndarray:
    """Weights from a queue snapshot. Callers pass ``Q(floor(t))``."""
    q = np.asarray(Q, dtype=float)
    if q.size == 0:
        raise EmptyVector("queue vector is empty")
    fq = np.asarray(f(q), dtype=float)
    mode = WeightMode(mode)
    if mode is WeightMode.LOCAL_ONLY:
        return fq
    floor = math.sqrt(float(f(float(q.max()))))
    return np.maximum(fq, floor)


def node_weights_fast(Q: list, f: WeightFunction, local_only: bool) -> list[float]:
    """Same rule as :func:`node_weights` on plain lists, without validation."""
    w = [f.at(q) for q in Q]
    if local_only:
        return w
    floor = math.sqrt(max(w)) if f.scalar is not None else math.sqrt(f.at(max(Q)))
    return [v if v > floor else floor for v in w]


def inverse(f: Callable, y: float, hi: float = 1e15, rtol: float = 1e-12) -> float:
    """Bisection for ``f(x) = y`` on ``[0, hi]`` with increasing ``f``."""
    lo = 0.0
    if f(hi) < y:
        raise ValueError(f"target {y} not reached on [0, {hi}]")
    while hi - lo > rtol * max(hi, 1e-300):
        mid = 0.5 * (lo + hi)
        if f(mid) < y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def derivative(f: Callable, x: float) -> float:
    h = 1e-5 * max(1.0, abs(x))
    lo = max(x - h, 0.0)
    return (f(x + h) - f(lo)) / (x + h - lo)


@dataclass
class WeightReport:
    function: str
    zero_ok: bool
    monotone: bool
    unbounded: bool
    log_trend: dict[float, list[float]]
    trend_decreasing: dict[float, bool]
    caveat: str = "finite grid: a decreasing tail is evidence for, not proof of, the limit"

    @property
    def trend_pass(self) -> bool:
        return all(self.trend_decreasing.values())

    @property
    def passed(self) -> bool:
        return self.zero_ok and self.monotone and self.unbounded and self.trend_pass


def validate_weight_function(f: Callable, grid: Sequence[float],
                             deltas: Sequence[float] = (0.25, 0.5, 0.75)) -> WeightReport:
    """Numerical screen for the slow-growth condition on ``f``.

    For each ``delta`` the quantity ``exp(f(x)) * f'(f^{-1}(delta f(x)))`` is
    tabulated on ``grid`` as its natural log (fast-growing ``f`` overflows
    otherwise); the trend passes when it strictly decreases over the points
    in the grid's top decade.
    """
    xs = np.asarray(grid, dtype=float)
    if xs.size < 8:
        raise GridTooSmall(f"need at least 8 grid points, got {xs.size}")
    if np.any(xs <= 0) or np.any(np.diff(xs) <= 0):
        raise ValueError("grid must be positive and strictly increasing")
    g = (lambda v: float(f(v)))
    vals = np.array([g(v) for v in xs])
    zero_ok = abs(g(0.0)) <= 1e-12
    monotone = bool(np.all(np.diff(vals) > 0)) and vals[0] > g(0.0)
    unbounded = g(1e12) > g(1e6)

    top = xs >= xs[-1] / 10.0
    trend, dec = {}, {}
    for d in deltas:
        q = []
        for v in xs:
            # f^{-1}(d f(v)) <= v for increasing f and d < 1
            y = inverse(g, d * g(v), hi=float(v))
            q.append(g(v) + math.log(derivative(g, y)))
        trend[d] = q
        tail = np.asarray(q)[top]
        dec[d] = bool(tail.size >= 2 and np.all(np.diff(tail) < 0))
    name = getattr(f, "id", getattr(f, "__name__", "custom"))
    return WeightReport(name, zero_ok, monotone, unbounded, trend, dec)
