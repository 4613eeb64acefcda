"""Locate where the lower semi-oblivious curve crosses above the upper one.

For each band g the ratio L_low/L_upp equals eps^(1/g) + N^(1/(g+1) - 1/g),
so it passes 1 once eps is close enough to 1. Prints, per band, the
crossing eps (found by bisection) and the share of the band that lies above.
"""
import argparse
from fractions import Fraction

from ornlab import tradeoff


def ratio(g: int, eps: float, N: float) -> float:
    return eps ** (1 / g) + N ** (1 / (g + 1) - 1 / g)


def crossing(g: int, N: float) -> float | None:
    lo, hi = 1e-12, 1 - 1e-12
    if ratio(g, hi, N) <= 1:
        return None
    for _ in range(200):
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if ratio(g, mid, N) <= 1 else (lo, mid)
    return hi


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=float, default=1e20)
    ap.add_argument("--gmax", type=int, default=12)
    ap.add_argument("--count", type=int, default=1000)
    args = ap.parse_args()
    print(f"{'g':>3} {'eps*':>10} {'share of band above':>20}")
    for g in range(1, args.gmax + 1):
        e = crossing(g, args.N)
        print(f"{g:>3} {'-' if e is None else f'{e:.6f}':>10} {0 if e is None else 1 - e:>20.4f}")
    grid = tradeoff.curve_grid(args.N, args.count)
    bad = [r for r in grid if (row := tradeoff.curve_row(r, args.N))["L_low"] > row["L_upp"]]
    print(f"grid: {len(bad)} of {len(grid)} points have L_low > L_upp")
    for r in sorted(bad, reverse=True)[:5]:
        g, eps = tradeoff.exact_g_eps(r)
        print(f"  r={float(r):.4f} g={g} eps={float(eps):.4f} ratio={ratio(g, float(eps), args.N):.4f}")


if __name__ == "__main__":
    main()
