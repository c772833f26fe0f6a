"""Time-average Q_max across loads for the randomized scheduler and MW baselines."""

import argparse

import numpy as np

from schednet.capacity import scale_to_load
from schednet.model import k2, schedule_space, shared_link
from schednet.sim import SimConfig, replica_seed, run_replicas


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--loads", type=float, nargs="+", default=[0.3, 0.5, 0.7, 0.9])
    ap.add_argument("--horizon", type=float, default=2e4)
    ap.add_argument("--seeds", type=int, default=4)
    args = ap.parse_args()
    seeds = [replica_seed(42, r) for r in range(args.seeds)]
    cases = [
        ("wireless randomized", k2(), {}),
        ("wireless mw", k2(), {"algorithm": "mw"}),
        ("wireless mw_f", k2(), {"algorithm": "mw_f"}),
        ("circuit randomized", shared_link(), {}),
    ]
    print(f"{'case':22s} " + " ".join(f"load={l:<6g}" for l in args.loads))
    for name, topo, extra in cases:
        sched = schedule_space(topo)
        row = []
        for load in args.loads:
            lam = tuple(scale_to_load(np.ones(topo.n), load, sched))
            traces = run_replicas(SimConfig(topo, lam, args.horizon, **extra), seeds)
            row.append(np.mean([tr.qmax_time_average(args.horizon / 2) for tr in traces]))
        print(f"{name:22s} " + " ".join(f"{v:<11.3f}" for v in row))


if __name__ == "__main__":
    main()
