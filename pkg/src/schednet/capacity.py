"""Capacity region membership via the schedule-covering linear program."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .errors import Infeasible, NegativeInput
from .model import DEFAULT_CAP, Topology, schedule_space

COVER_TOL = 1e-9


@dataclass(frozen=True)
class CapacityQuery:
    lam: tuple[float, ...]
    schedules: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if not self.schedules:
            raise ValueError("schedule list is empty")
        n = len(self.lam)
        if any(len(s) != n for s in self.schedules):
            raise ValueError("schedules and lambda differ in length")
        if any(v < 0 for v in self.lam):
            raise NegativeInput("arrival rates must be non-negative")
        if tuple([0] * n) not in self.schedules:
            raise ValueError("schedule list must contain the zero schedule")

    @classmethod
    def for_topology(cls, topology: Topology, lam: Sequence[float], cap: int = DEFAULT_CAP) -> "CapacityQuery":
        return cls(tuple(float(v) for v in lam), tuple(schedule_space(topology, cap)))


@dataclass
class LoadResult:
    load: float
    witness: np.ndarray
    admissible: bool
    strictly_admissible: bool

    def to_dict(self) -> dict:
        return {
            "load": self.load,
            "admissible": self.admissible,
            "strictly_admissible": self.strictly_admissible,
            "witness": [{"state_index": int(k), "alpha": float(a)}
                        for k, a in enumerate(self.witness) if a > 0],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def load_factor(q: CapacityQuery) -> LoadResult:
    """Minimal total time share ``sum alpha`` whose schedule mix covers ``lam``."""
    X = np.asarray(q.schedules, dtype=float)  # states x n
    lam = np.asarray(q.lam, dtype=float)
    if not lam.any():
        alpha = np.zeros(len(X))
        return LoadResult(0.0, alpha, True, True)
    # the solver's tolerances are absolute, so solve for lam / max(lam) and rescale
    scale = float(lam.max())
    res = linprog(np.ones(len(X)), A_ub=-X.T, b_ub=-lam / scale, bounds=(0, None), method="highs",
                  options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise Infeasible(f"covering program failed: {res.message}")
    alpha = np.where(res.x > 1e-12, res.x, 0.0) * scale
    short = lam - alpha @ X
    if np.any(short > COVER_TOL * max(1.0, scale)):
        raise Infeasible(f"witness misses coverage by {short.max():.3e}")
    load = float(alpha.sum())
    return LoadResult(load, alpha, load <= 1.0 + COVER_TOL, load < 1.0 - COVER_TOL)


def load_of(topology: Topology, lam: Sequence[float], cap: int = DEFAULT_CAP) -> float:
    return load_factor(CapacityQuery.for_topology(topology, lam, cap)).load


def scale_to_load(direction: Sequence[float], target_load: float,
                  schedules: Sequence[Sequence[int]]) -> np.ndarray:
    """Rate vector ``c * direction`` with load ``target_load``.

    Load is positively homogeneous, so ``c = target / load(direction)`` is
    exact; the result is re-solved as a check.
    """
    d = np.asarray(direction, dtype=float)
    if not np.any(d > 0):
        raise ValueError("direction must have a positive entry")
    if target_load < 0:
        raise NegativeInput("target load must be non-negative")
    sched = tuple(tuple(int(v) for v in s) for s in schedules)
    if target_load == 0:
        return np.zeros_like(d)
    base = load_factor(CapacityQuery(tuple(d), sched)).load
    lam = d * (target_load / base)
    got = load_factor(CapacityQuery(tuple(lam), sched)).load
    if abs(got - target_load) > 1e-6:
        raise Infeasible(f"scaled load {got} differs from target {target_load}")
    return lam
