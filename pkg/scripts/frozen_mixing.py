"""TV distance between the schedule law and the frozen-weight stationary law.

Monte Carlo estimates from replicas are printed next to the exact law
obtained from the matrix exponential of the scheduling chain.
"""

import argparse
import math

from schednet.analysis import exact_schedule_law, frozen_weights, timescale_report, tv_distance
from schednet.model import k2, shared_link


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--replicas", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args()
    q_big = math.ceil(math.exp(math.e ** 2) - math.e)
    times = [0, 0.5, 1, 2, 5, 10, 25, 50, 100]
    for name, topo, q0 in [("K2", k2(), (q_big, 0)), ("shared link", shared_link(), (q_big, 0)),
                           ("K2 empty", k2(), (0, 0))]:
        W = frozen_weights(topo, q0)
        rows = timescale_report(topo, q0, args.replicas, times, seed=args.seed)
        print(f"{name}: W={W.round(4).tolist()}")
        for r in rows:
            _, mu, pi = exact_schedule_law(topo, W, r.t)
            print(f"  t={r.t:<5g} mc_tv={r.tv:.4f} exact_tv={tv_distance(mu, pi):.4f} (+-{3 * r.stderr:.3f})")


if __name__ == "__main__":
    main()
