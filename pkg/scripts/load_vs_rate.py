"""Max edge load of the oblivious and failover schemes as the rate grows."""
import argparse
from fractions import Fraction

import numpy as np

from ornlab import routing
from ornlab.schedule import OrnSchedule, SornSchedule


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=int, default=7)
    ap.add_argument("--seeds", type=int, default=5)
    args = ap.parse_args()
    orn = OrnSchedule(args.p, 2, 2)
    sorn = SornSchedule(args.p, 2, 1)
    print("rate    orn_oblivious   sorn_failover   sorn_semi_mode")
    for i in range(1, 10):
        r = Fraction(i, 20)
        worst_o = worst_f = Fraction(0)
        modes = set()
        for s in range(args.seeds):
            rng = np.random.default_rng([s, i])
            d = routing.PermDemand.random(orn.N, r, rng)
            worst_o = max(worst_o, routing.max_load(routing.induced_load_oblivious(orn, d))[0])
            worst_f = max(worst_f, routing.max_load(routing.induced_load_failover(sorn, d))[0])
            modes.add(routing.semi_oblivious_route(sorn, d).mode.value)
        print(f"{float(r):<7.2f} {float(worst_o):<15.4f} {float(worst_f):<15.4f} {','.join(sorted(modes))}")


if __name__ == "__main__":
    main()
