"""Compare achieved throughput with the dual upper bound across theta."""
import argparse

import numpy as np

from ornlab import routing, tradeoff
from ornlab.schedule import OrnSchedule


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=int, default=5)
    ap.add_argument("--trials", type=int, default=10)
    args = ap.parse_args()
    s = OrnSchedule(args.p, 2, 1)
    L = routing.scheme_max_latency(s)
    demands = [routing.PermDemand.random(s.N, 1, np.random.default_rng([11, i])) for i in range(args.trials)]
    thr = [1 / routing.max_load(routing.induced_load_oblivious(s, d))[0] for d in demands]
    print(f"N={s.N} T={s.T} L={L}; mean achieved throughput {float(np.mean([float(x) for x in thr])):.4f}")
    print("theta  mean_dual  min_gap  heavy_share  closed_form")
    for theta in range(1, 5):
        tables = tradeoff._reach_tables(s, theta, L)
        bounds = [tradeoff.dual_throughput_bound(s, d.sigma, theta, L, tables) for d in demands]
        gap = min(b.value - t for b, t in zip(bounds, thr))
        heavy = np.mean([b.n_heavy / (s.N * s.T) for b in bounds])
        print(f"{theta:<6} {np.mean([float(b.value) for b in bounds]):<10.4f} {float(gap):<8.4f} "
              f"{heavy:<12.3f} {tradeoff.closed_form_dual(s.N, theta, L):.4f}")


if __name__ == "__main__":
    main()
