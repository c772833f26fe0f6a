"""Pilot runs that fix the stability thresholds used by the test suite.

Runs each stable scenario at three times the test horizon on seeds disjoint
from the test seeds and writes ``threshold = FACTOR * mean`` of the
last-half time-average of Q_max to ``src/schednet/data/pilot_thresholds.json``.
"""

import argparse
import json
import time
from pathlib import Path

import numpy as np

from schednet.model import InterferenceGraph, k2, shared_link
from schednet.sim import SimConfig, run_replicas

PILOT_SEEDS = list(range(9001, 9011))
FACTOR = 3.0
OUT = Path(__file__).resolve().parents[1] / "src" / "schednet" / "data" / "pilot_thresholds.json"

SCENARIOS = {
    "wireless_k2_load0.5": dict(topology=k2(), lam=(0.25, 0.25), horizon=3e5),
    "circuit_shared_link_load0.4": dict(topology=shared_link(), lam=(0.2, 0.2), horizon=3e5),
    "mw_single_node_load0.5": dict(topology=InterferenceGraph(1), lam=(0.5,), horizon=3e4, algorithm="mw"),
}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=OUT)
    args = ap.parse_args()
    result = {"factor": FACTOR, "pilot_seeds": PILOT_SEEDS, "scenarios": {}}
    for name, kw in SCENARIOS.items():
        t0 = time.time()
        traces = run_replicas(SimConfig(**kw), PILOT_SEEDS)
        h = kw["horizon"]
        stats = [tr.qmax_time_average(h / 2, h) for tr in traces]
        result["scenarios"][name] = {
            "pilot_horizon": h,
            "lambda": list(kw["lam"]),
            "pilot_means": stats,
            "pilot_mean": float(np.mean(stats)),
            "pilot_max": float(np.max(stats)),
            "threshold": FACTOR * float(np.mean(stats)),
        }
        print(f"{name}: mean={np.mean(stats):.4f} max={np.max(stats):.4f} "
              f"threshold={FACTOR * np.mean(stats):.4f} ({time.time() - t0:.1f}s)")
    args.out.write_text(json.dumps(result, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
