"""Design parameters, latency/throughput curves, the counting lemma and
LP-dual throughput upper bounds for concrete schedules.

Integer and rational parameters (g, h, theta, epsilon, epsilon_o) are exact;
curves are evaluated in binary64.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import ff
from .routing import RateLike, as_rate
from .schedule import ORN, SORN, Schedule


class EpsilonOne(ValueError):
    """1/r is an integer, so the slack epsilon equals 1."""


class PrimeTooSmall(ValueError):
    pass


@dataclass(frozen=True)
class HypothesisCheck:
    name: str
    lhs: str
    rhs: float
    holds: bool


@dataclass(frozen=True)
class DesignParams:
    r: Fraction
    p: int
    mode: str
    g: int
    N: int
    eps: Fraction
    h: int
    eps_o: Fraction
    theta: int
    gamma_orn: Optional[float]
    gamma_sorn: Optional[float]
    delta: float
    C: Optional[int]
    checks: tuple[HypothesisCheck, ...] = field(default=())

    @property
    def hypotheses_hold(self) -> bool:
        return all(c.holds for c in self.checks)

    @property
    def violated(self) -> list[HypothesisCheck]:
        return [c for c in self.checks if not c.holds]

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("r", "eps", "eps_o"):
            d[k] = str(d[k])
        d["checks"] = [asdict(c) for c in self.checks]
        d["hypotheses_hold"] = self.hypotheses_hold
        return d


def exact_g_eps(r: RateLike) -> tuple[int, Fraction]:
    """g = floor(1/r - 1) and epsilon = g + 2 - 1/r, both exact."""
    r = as_rate(r)
    if r <= 0:
        raise ValueError("rate must be positive")
    inv = 1 / r
    g = math.floor(inv - 1)
    return g, g + 2 - inv


def exact_h_eps_o(r: RateLike) -> tuple[int, Fraction]:
    r = as_rate(r)
    half = 1 / (2 * r)
    h = math.floor(half)
    return h, h + 1 - half


def _log(x: float) -> Optional[float]:
    return math.log(x) if x > 0 else None


def c_from_gamma(N: int, gamma: Optional[float]) -> Optional[int]:
    """ceil(ln ln N * ln N / gamma^2), at least 1; None when gamma <= 0."""
    if gamma is None or gamma <= 0:
        return None
    lnN = math.log(N)
    lnln = math.log(lnN) if lnN > 1 else 0.0
    return max(1, math.ceil(lnln * lnN / gamma**2))


def derive_params(r: RateLike, p: int, mode: str = ORN, C: Optional[int] = None, strict: bool = False) -> DesignParams:
    """Design parameters for target rate r on prime p.

    Every hypothesis inequality is evaluated and reported. With ``strict``
    any violation raises :class:`PrimeTooSmall` naming each failed inequality.
    """
    r = as_rate(r)
    if not 0 < r <= Fraction(1, 2):
        raise ValueError("rate must lie in (0, 1/2]")
    if (1 / r).denominator == 1:
        raise EpsilonOne(f"1/r = {1 / r} is an integer, so epsilon = 1")
    ff.PrimeField(p)
    if mode not in (ORN, SORN):
        raise ValueError(f"unknown mode {mode!r}")
    g, eps = exact_g_eps(r)
    h, eps_o = exact_h_eps_o(r)
    N = p**g
    epsf = float(eps)
    gamma_orn = _log((g - epsf - 2 / (p - 2)) / (g - 1)) if g >= 2 and p > 2 else None
    gamma_sorn = _log((g + 2 - epsf) / (g + 1))
    delta = ((g + 1) / (g + 2 - epsf)) ** (1 / g)
    if C is None:
        C = c_from_gamma(N, gamma_orn if mode == ORN else gamma_sorn)
    checks = [
        HypothesisCheck("p > C(g+1)", f"p > C(g+1) = {C * (g + 1)}" if C else "p > C(g+1), C undefined since gamma <= 0",
                        float(C * (g + 1)) if C else math.inf, bool(C) and p > C * (g + 1)),
        HypothesisCheck("p > 2 + 2/(1-eps)", f"p > 2 + 2/(1-{eps})", float(2 + 2 / (1 - eps)), p > 2 + 2 / (1 - eps)),
    ]
    if mode == ORN:
        checks.append(HypothesisCheck("g >= 2", "g >= 2 for gamma_orn", 2.0, g >= 2))
    else:
        checks.append(HypothesisCheck("p > (g+3)/eps - 2", f"p > ({g}+3)/({eps}) - 2",
                                      float(Fraction(g + 3) / eps - 2), p > Fraction(g + 3) / eps - 2))
        bound = (2 - delta) / (1 - delta)
        checks.append(HypothesisCheck("p > (2-delta)/(1-delta)", f"p > (2-{delta:.6g})/(1-{delta:.6g})", bound, p > bound))
    params = DesignParams(r, p, mode, g, N, eps, h, eps_o, math.floor(1 / r),
                          gamma_orn, gamma_sorn, delta, C, tuple(checks))
    if strict and params.violated:
        names = "; ".join(f"{c.name} [{c.lhs}]" for c in params.violated)
        raise PrimeTooSmall(f"p = {p} violates: {names}")
    return params


# ---------------------------------------------------------------------------
# curves
# ---------------------------------------------------------------------------

CURVES = ("Lupp", "Llow", "Lobl", "Lsem", "VLBline")


def curve(r: RateLike, N: float, which: str) -> float:
    r = as_rate(r)
    if N <= 1:
        raise ValueError("N must exceed 1")
    g, eps = exact_g_eps(r)
    h, eps_o = exact_h_eps_o(r)
    if which == "Lupp":
        return g * N ** (1 / g)
    if which in ("Llow", "Lsem"):
        if eps == 1:
            raise EpsilonOne("epsilon = 1")
        e = float(eps)
        head = g * (e * N) ** (1 / g) if which == "Llow" else e * (e * N) ** (1 / g)
        tail = g * N ** (1 / (g + 1)) if which == "Llow" else N ** (1 / (g + 1))
        return head + tail
    if which == "Lobl":
        if eps_o == 1:
            raise EpsilonOne("epsilon_o = 1")
        e = float(eps_o)
        return e * (e * N) ** (1 / h) + N ** (1 / (h + 1))
    if which == "VLBline":
        # guaranteed oblivious rate 1/(2h) needs latency h N^(1/h); largest h with 1/(2h) >= r
        return h * N ** (1 / h)
    raise ValueError(f"unknown curve {which!r}")


def curve_grid(N: float, count: int = 200) -> list[Fraction]:
    """Rates i/(2 count) in (0, 1/2] excluding those with integral 1/r."""
    out = []
    for i in range(1, count + 1):
        r = Fraction(i, 2 * count)
        if (1 / r).denominator != 1:
            out.append(r)
    return out


def curve_row(r: RateLike, N: float) -> dict:
    row = {"r": float(as_rate(r)), "N": float(N)}
    for name, key in (("Lupp", "L_upp"), ("Llow", "L_low"), ("Lobl", "L_obl"), ("Lsem", "L_sem"), ("VLBline", "vlb_line")):
        try:
            row[key] = curve(r, N, name)
        except EpsilonOne:
            row[key] = float("nan")
    return row


# ---------------------------------------------------------------------------
# counting lemma
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CountingBound:
    value: int
    asserted: bool


def counting_bound(L: int, h: int) -> CountingBound:
    """2 * binom(L, h); only asserted when h <= L/3."""
    return CountingBound(2 * math.comb(L, h), 3 * h <= L)


# ---------------------------------------------------------------------------
# dual throughput bound
# ---------------------------------------------------------------------------


def _reach_tables(sched: Schedule, theta: int, L: int) -> tuple[np.ndarray, np.ndarray]:
    """Minimum elapsed times over the virtual topology, for every start node at once.

    ``arrive[k, m, u, x]``: fewest timesteps from some (u, k - tau) to (x, k)
    with at most m physical hops. ``depart[k, m, y, w]``: fewest timesteps
    from (y, k) to (w, k + tau) with at most m hops. Entries beyond L are
    left at a sentinel larger than L.
    """
    T, N = sched.T, sched.N
    big = L + 1
    arrive = np.full((T, theta, N, N), big, dtype=np.int32)
    depart = np.full((T, theta, N, N), big, dtype=np.int32)
    table = sched.table
    eye = np.arange(N)
    for s in range(T):
        hops = np.full((N, N), theta + 1, dtype=np.int32)
        hops[eye, eye] = 0
        for tau in range(L):
            k = (s + tau) % T
            for m in range(theta):
                ok = hops <= m
                np.minimum(arrive[k, m], np.where(ok, tau, big), out=arrive[k, m])
                np.minimum(depart[s, m], np.where(ok, tau, big), out=depart[s, m])
            nxt = hops.copy()
            perm = table[k]
            # a hop at time k moves column x to column perm[x]
            moved = np.full((N, N), theta + 1, dtype=np.int32)
            moved[:, perm] = hops + 1
            np.minimum(nxt, moved, out=nxt)
            hops = nxt
    return arrive, depart


def classify_edges(sched: Schedule, sigma: Sequence[int], theta: int, L: int, tables=None) -> np.ndarray:
    """(T, N) mask: edge lies on a <= theta hop, <= L latency path of a sigma pair."""
    if theta < 1 or L < 1:
        raise ValueError("theta and L must be positive")
    arrive, depart = tables if tables is not None else _reach_tables(sched, theta, L)
    T = sched.T
    sig = np.asarray(sigma)
    out = np.zeros((T, sched.N), dtype=bool)
    for k in range(T):
        perm = sched.table[k]
        k1 = (k + 1) % T
        for m1 in range(theta):
            m2 = theta - 1 - m1
            a = arrive[k, m1].T  # (x, u)
            b = depart[k1, m2][perm[:, None], sig[None, :]]  # (x, u)
            out[k] |= ((a + b) <= L - 1).any(axis=1)
    return out


@dataclass(frozen=True)
class DualBound:
    value: Fraction
    n_heavy: int
    n_edges: int
    n_fixed: int


def dual_throughput_bound(sched: Schedule, sigma: Sequence[int], theta: int, L: int, tables=None) -> DualBound:
    """Objective of the constructed dual solution for LP_sigma.

    beta = theta + 1 on classified edges, 1 elsewhere. Non-fixed sources get
    alpha = theta + 1; a fixed point has a pure waiting path, so its alpha is 0.
    """
    sigma = tuple(int(x) for x in sigma)
    fixed = sum(1 for i, s in enumerate(sigma) if i == s)
    if fixed == len(sigma):
        raise ValueError("identity demand: the dual objective has an empty denominator")
    heavy = int(classify_edges(sched, sigma, theta, L, tables).sum())
    n_edges = sched.T * sched.N
    total_beta = n_edges + theta * heavy
    value = Fraction(total_beta, (sched.N - fixed) * sched.T * (theta + 1))
    return DualBound(value, heavy, n_edges, fixed)


def closed_form_dual(N: int, theta: int, L: int) -> float:
    return (1 + 4 * theta / N * math.comb(2 * L, theta - 1)) / (theta + 1)


@dataclass(frozen=True)
class DualEstimate:
    mean: float
    halfwidth: float
    trials: int
    closed_form: float
    values: tuple[float, ...]


def expected_dual_bound(sched: Schedule, theta: int, L: int, trials: int, seed: int) -> DualEstimate:
    """Monte Carlo mean of the dual bound over uniform sigma, trial i seeded by (seed, i)."""
    tables = _reach_tables(sched, theta, L)
    vals = []
    for i in range(trials):
        rng = np.random.default_rng([int(seed), i])
        sigma = rng.permutation(sched.N)
        while (sigma == np.arange(sched.N)).all():
            sigma = rng.permutation(sched.N)
        vals.append(float(dual_throughput_bound(sched, sigma, theta, L, tables).value))
    arr = np.array(vals)
    hw = 1.96 * float(arr.std(ddof=1)) / math.sqrt(trials) if trials > 1 else 0.0
    return DualEstimate(float(arr.mean()), hw, trials, closed_form_dual(sched.N, theta, L), tuple(vals))


# ---------------------------------------------------------------------------
# latency lower bound
# ---------------------------------------------------------------------------


def maxlat_lowerbound(r: RateLike, N: float, d: float = 1.0) -> float:
    """Explicit pre-asymptotic maximum-latency lower bound at theta = floor(1/r).

    Returns 0.0 when the bracketed term is not positive (the bound is vacuous).
    """
    r = as_rate(r)
    if (1 / r).denominator == 1:
        raise EpsilonOne(f"1/r = {1 / r} is an integer")
    theta = math.floor(1 / r)
    if theta < 2:
        raise ValueError("need theta >= 2")
    k = theta - 1
    inner = ((N**d - 1) / N**d * float(r) - 1 / (theta + 1)) * math.sqrt(2 * math.pi * k) / (4 * theta)
    if inner <= 0:
        return 0.0
    return k / (2 * math.e) * N ** (1 / k) * inner ** (1 / k)
