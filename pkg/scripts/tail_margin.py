"""Empirical tail frequency against the analytic bound for the generated corpus."""
import argparse

from ornlab import cli, prob


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--specs", type=int, default=6)
    ap.add_argument("--trials", type=int, default=20000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print(f"{'spec':>4} {'N':>4} {'C_ratio':>8} {'gamma':>6} {'sided':>7} {'freq':>9} {'bound':>9}")
    for k, spec in enumerate(cli.generated_corpus(args.specs, args.seed)):
        for gamma in (0.3, 0.5, 1.0):
            for sided in ("single", "double"):
                rep = prob.tail_experiment(spec, gamma, sided, args.trials, args.seed)
                print(f"{k:>4} {spec.N:>4} {spec.C_ratio:>8.1f} {gamma:>6} {sided:>7} "
                      f"{rep.empirical_freq:>9.5f} {rep.bound:>9.5f}{'' if rep.passes else '  FAIL'}")


if __name__ == "__main__":
    main()
