"""Desk-scale invariant suite behind ``ornlab verify``.

Each check returns a :class:`CheckResult`; the suite is deterministic given
its seed. The acceptance tests run larger versions of the same properties.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from itertools import permutations

import numpy as np

from . import ff, prob, routing, schedule, tradeoff


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def to_dict(self) -> dict:
        return asdict(self)


def check_constellations(max_p: int = 13) -> CheckResult:
    n = 0
    for p in (q for q in range(3, max_p + 1) if ff.is_prime(q)):
        for g in (2, 3):
            for C in range(1, p // (g + 1) + 1):
                cons = ff.Constellation(tuple(ff.vandermonde(x, g, p) for x in range(C * (g + 1))), C, p)
                for A in schedule.diagonal_family(p, g):
                    if not ff.is_constellation(ff.twist(A, cons).vectors, g, p):
                        return CheckResult("constellations", False, f"twist failed at p={p} g={g} C={C}")
                n += 1
    return CheckResult("constellations", True, f"{n} constellations, all twists valid")


def check_count_bracket(p: int = 5, g: int = 2, C: int = 1) -> CheckResult:
    sched = schedule.OrnSchedule(p, g, C)
    lo, hi = (p - 2) * C ** (g + 1), (p - 1) * C ** (g + 1)
    seen = set()
    for a in range(sched.N):
        for b in range(sched.N):
            for t in range(sched.T):
                seen.add(len(routing.enumerate_pseudopaths(sched, a, b, t)))
    ok = min(seen) >= lo and max(seen) <= hi
    return CheckResult("pseudopath_count_bracket", ok, f"counts {sorted(seen)} within [{lo}, {hi}]")


def check_hop_bounds(seed: int, trials: int = 10, p: int = 7, g: int = 2, C: int = 2, rate=Fraction(3, 10)) -> CheckResult:
    sched = schedule.OrnSchedule(p, g, C)
    bound = Fraction(p - 1, p - 2) * rate
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        d = routing.PermDemand.random(sched.N, rate, rng)
        hl = routing.hop_loads(sched, d)
        if hl.hop_max(0) > bound or hl.hop_max(g) > bound:
            return CheckResult("hop_bounds", False, "first/last hop flow exceeds bound")
        if hl.total().total() != routing.expected_total_load(sched, d):
            return CheckResult("hop_bounds", False, "conservation identity failed")
    return CheckResult("hop_bounds", True, f"{trials} demands, first/last hop <= {bound}, conservation exact")


def check_latency(p: int = 7, g: int = 2, C: int = 2) -> CheckResult:
    sched = schedule.OrnSchedule(p, g, C)
    lat = routing.scheme_max_latency(sched)
    bound = C * (g + 2) * (p - 1)
    return CheckResult("orn_max_latency", lat <= bound, f"max latency {lat} <= {bound}")


def check_failover(seed: int, p: int = 7, g: int = 2, C: int = 1, rate=Fraction(1, 10)) -> CheckResult:
    sched = schedule.SornSchedule(p, g, C)
    d = routing.PermDemand.random(sched.N, rate, np.random.default_rng(seed))
    fl = routing.failover_hop_loads(sched, d)
    bound = rate * (g + 1) * (p - 1) ** g / Fraction((p - 2) ** g)
    ok = fl.hop_max(0) <= bound and fl.hop_max(1) <= bound
    return CheckResult("failover_bound", ok, f"per-hop max {max(fl.hop_max(0), fl.hop_max(1))} <= {bound}")


def check_coverage(p: int = 5, g: int = 2, C: int = 1) -> CheckResult:
    sched = schedule.SornSchedule(p, g, C)
    c = sched.coords
    counts = np.zeros((sched.N, sched.N), dtype=np.int64)
    for k in range(sched.T):
        np.add.at(counts, (np.arange(sched.N), sched.table[k]), 1)
    diff_ok = ((c[None, :, :] - c[:, None, :]) % p != 0).all(axis=2)
    vals = set(counts[diff_ok].tolist())
    return CheckResult("sorn_coverage", vals == {C * (g + 1)}, f"direct connections per pair {sorted(vals)}")


def check_counting_lemma(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    scheds = [schedule.OrnSchedule(5, 2, 1), schedule.SornSchedule(5, 2, 1)]
    n = 0
    for s in scheds:
        for _ in range(20):
            L = int(rng.integers(3, 25))
            h = int(rng.integers(0, L // 3 + 1))
            a, t0 = int(rng.integers(s.N)), int(rng.integers(s.T))
            size = len(schedule.reachable_set(s, a, t0, L, h))
            if size > tradeoff.counting_bound(L, h).value:
                return CheckResult("counting_lemma", False, f"{size} nodes at L={L}, h={h}")
            n += 1
    return CheckResult("counting_lemma", True, f"{n} samples within 2*binom(L,h)")


def check_negative_association(seed: int, cases: int = 500) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = None
    for _ in range(cases):
        n = int(rng.integers(2, 6))
        A = prob.ConsistentMatrix.random(n, rng)
        idx = rng.permutation(n)
        k = int(rng.integers(1, n))
        dec = bool(rng.integers(2))
        fns = []
        for part in (idx[:k], idx[k:]):
            kind = "min" if rng.integers(2) else "step"
            fns.append(prob.MonotoneFn(kind, tuple(int(i) for i in part),
                                       tuple(int(rng.integers(-6, 7) if dec else rng.integers(0, 7)) for _ in part), dec))
        cov = prob.covariance_oracle(A, fns[0], fns[1])
        worst = cov if worst is None else max(worst, cov)
    m = prob.double_sided_moments()
    ok = worst <= 0 and m["E[X1X2]"] == Fraction(1, 6) and m["E[X1X2]"] > m["E[X1]"] * m["E[X2]"]
    return CheckResult("negative_association", ok, f"max covariance {worst} over {cases} cases; E[X1X2] = {m['E[X1X2]']}")


def check_coloring(max_n: int = 6) -> CheckResult:
    n_checked = 0
    for n in range(1, max_n + 1):
        for s in permutations(range(n)):
            c = prob.balanced_3_coloring(s)
            if not (c.is_proper() and c.is_balanced()):
                return CheckResult("balanced_coloring", False, f"sigma={s}")
            n_checked += 1
    return CheckResult("balanced_coloring", True, f"{n_checked} permutations")


def check_weak_duality(seed: int, trials: int = 5, p: int = 7, g: int = 2, C: int = 2) -> CheckResult:
    sched = schedule.OrnSchedule(p, g, C)
    L = routing.scheme_max_latency(sched)
    tables = tradeoff._reach_tables(sched, g + 1, L)
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        d = routing.PermDemand.random(sched.N, 1, rng)
        if d.sigma == tuple(range(sched.N)):
            continue
        ml, _ = routing.max_load(routing.induced_load_oblivious(sched, d))
        thr = 1 / ml
        dual = tradeoff.dual_throughput_bound(sched, d.sigma, g + 1, L, tables).value
        if thr > dual:
            return CheckResult("weak_duality", False, f"throughput {thr} > dual {dual}")
    return CheckResult("weak_duality", True, f"{trials} demands at L={L}")


def check_hypothesis_gating() -> CheckResult:
    try:
        tradeoff.derive_params(Fraction(1, 4), 7)
        return CheckResult("hypothesis_gating", False, "r=1/4 accepted")
    except tradeoff.EpsilonOne:
        pass
    try:
        tradeoff.derive_params(Fraction(3, 10), 7, strict=True)
        return CheckResult("hypothesis_gating", False, "p=7 accepted at r=3/10")
    except tradeoff.PrimeTooSmall as exc:
        return CheckResult("hypothesis_gating", True, str(exc))


def run_suite(seed: int = 0) -> list[CheckResult]:
    return [
        check_constellations(),
        check_count_bracket(),
        check_hop_bounds(seed),
        check_latency(),
        check_failover(seed),
        check_coverage(),
        check_counting_lemma(seed),
        check_negative_association(seed),
        check_coloring(),
        check_weak_duality(seed),
        check_hypothesis_gating(),
    ]
