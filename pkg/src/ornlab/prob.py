"""Probability laboratory: negatively associated samplers, exact covariance
oracles, Chernoff evaluators, bilinear-form tail experiments, random
submatrix tails and balanced 3-colorings of cycle diagrams.

Exact claims (covariances, the double-sided counterexample) use rationals.
Monte Carlo experiments use float64 and seeded numpy generators.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import permutations
from typing import Optional, Sequence, Union

import numpy as np

BLOCK = 1024  # trials per RNG stream


class DomainError(ValueError):
    pass


class IndexOverlap(ValueError):
    pass


class NotMonotone(ValueError):
    pass


class HypothesisViolated(ValueError):
    pass


class KTooLarge(ValueError):
    pass


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Independent stream for one block of trials, keyed by (seed, block)."""
    return np.random.default_rng([int(seed), int(block)])


def _blocks(trials: int):
    for b, lo in enumerate(range(0, trials, BLOCK)):
        yield b, min(BLOCK, trials - lo)


def random_perms(rng: np.random.Generator, n: int, count: int) -> np.ndarray:
    return rng.permuted(np.tile(np.arange(n), (count, 1)), axis=1)


# ---------------------------------------------------------------------------
# negative association
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConsistentMatrix:
    """Non-negative matrix whose rows are sorted by one common column order."""

    entries: tuple[tuple[Fraction, ...], ...]
    witness: tuple[int, ...] = ()

    def __post_init__(self):
        rows = tuple(tuple(Fraction(x) for x in row) for row in self.entries)
        if not rows or len({len(r) for r in rows}) != 1:
            raise ValueError("entries must be a non-empty rectangular matrix")
        if any(x < 0 for r in rows for x in r):
            raise ValueError("entries must be non-negative")
        m = len(rows[0])
        # a compatible order, if any, also orders the column sums
        order = tuple(sorted(range(m), key=lambda j: (sum(r[j] for r in rows), j)))
        for r in rows:
            if any(r[order[i]] > r[order[i + 1]] for i in range(m - 1)):
                raise ValueError("rows are not consistently ordered")
        object.__setattr__(self, "entries", rows)
        object.__setattr__(self, "witness", order)

    @property
    def n(self) -> int:
        return len(self.entries)

    @property
    def m(self) -> int:
        return len(self.entries[0])

    def as_float(self) -> np.ndarray:
        return np.array([[float(x) for x in r] for r in self.entries])

    @classmethod
    def random(cls, n: int, rng: np.random.Generator, m: Optional[int] = None, top: int = 6) -> "ConsistentMatrix":
        """Integer rows, each non-decreasing along one random column order."""
        m = n if m is None else m
        rows = np.sort(rng.integers(0, top + 1, size=(n, m)), axis=1)
        perm = rng.permutation(m)
        out = np.empty_like(rows)
        out[:, perm] = rows
        return cls(tuple(tuple(int(x) for x in r) for r in out))

    @classmethod
    def outer(cls, u: Sequence, v: Sequence) -> "ConsistentMatrix":
        return cls(tuple(tuple(Fraction(a) * Fraction(b) for b in v) for a in u))


def sample_na(A: ConsistentMatrix, rng: np.random.Generator) -> np.ndarray:
    """X_i = A[i, pi(i)] for a fresh uniform permutation pi."""
    if A.n != A.m:
        raise ValueError("sample_na needs a square matrix")
    pi = rng.permutation(A.n)
    M = A.as_float()
    return M[np.arange(A.n), pi]


@dataclass(frozen=True)
class MonotoneFn:
    """Monotone function of selected coordinates.

    kind ``min``: sum_i min(X_i, c_i). kind ``step``: product_i [X_i >= c_i].
    kind ``piecewise``: sum_i phi_i(X_i) with phi_i given by sorted
    breakpoints and values (the value at the largest breakpoint <= X_i,
    ``values[0]`` below the first one). ``decreasing`` evaluates the
    increasing form at -X.
    """

    kind: str
    indices: tuple[int, ...]
    params: tuple = ()
    decreasing: bool = False

    def __post_init__(self):
        if self.kind not in ("min", "step", "piecewise"):
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.kind == "piecewise":
            for bps, vals in self.params:
                if list(bps) != sorted(bps) or len(bps) != len(vals):
                    raise NotMonotone("breakpoints must be sorted and match values")
                if any(b > a for a, b in zip(vals[1:], vals)):
                    raise NotMonotone("piecewise values must be non-decreasing")
        elif len(self.params) != len(self.indices):
            raise ValueError("one threshold per index")

    def _scalable(self) -> bool:
        return self.kind != "piecewise"

    def evaluate(self, X: np.ndarray, scale: int = 1) -> np.ndarray:
        """Values for rows of X (shape (..., n)); thresholds are multiplied by ``scale``."""
        sign = -1 if self.decreasing else 1
        cols = sign * X[..., list(self.indices)]
        if self.kind == "min":
            th = np.array([c * scale for c in self.params], dtype=object)
            return np.minimum(cols, th).sum(axis=-1)
        if self.kind == "step":
            th = np.array([c * scale for c in self.params], dtype=object)
            return (cols >= th).all(axis=-1).astype(np.int64)
        total = 0
        for j, (bps, vals) in enumerate(self.params):
            x = cols[..., j]
            out = np.full(x.shape, vals[0], dtype=object)
            for b, v in zip(bps, vals):
                out = np.where(x >= b * scale, v, out)
            total = total + out
        return total


@dataclass(frozen=True)
class CovEstimate:
    value: float
    halfwidth: float
    trials: int


def _check_pair(f: MonotoneFn, g: MonotoneFn):
    if set(f.indices) & set(g.indices):
        raise IndexOverlap("f and g must depend on disjoint index sets")
    if f.decreasing != g.decreasing:
        raise NotMonotone("f and g must both be increasing or both decreasing")


def _all_perms(n: int) -> np.ndarray:
    return np.array(list(permutations(range(n))), dtype=np.int64)


def covariance_oracle(
    A: ConsistentMatrix,
    f: MonotoneFn,
    g: MonotoneFn,
    mode: str = "exact",
    trials: int = 10_000,
    seed: int = 0,
) -> Union[Fraction, CovEstimate]:
    """Cov(f(X), g(X)) for X_i = A[i, pi(i)].

    Exact mode enumerates all n! permutations after scaling A to integers,
    so the result is an exact rational.
    """
    _check_pair(f, g)
    if A.n != A.m:
        raise ValueError("square matrix required")
    n = A.n
    if mode == "exact":
        if n > 8:
            raise ValueError("exact mode enumerates n! permutations; n <= 8 only")
        fr = [x for r in A.entries for x in r]
        for fn in (f, g):
            if fn.kind != "piecewise":
                fr += [Fraction(c) for c in fn.params]
        lam = math.lcm(*(x.denominator for x in fr)) if f._scalable() and g._scalable() else None
        if lam is None:
            M = np.array(A.entries, dtype=object)
            lam = 1
        else:
            M = np.array([[int(x * lam) for x in r] for r in A.entries], dtype=object)
        P = _all_perms(n)
        X = M[np.arange(n)[None, :], P]
        fv = f.evaluate(X, lam)
        gv = g.evaluate(X, lam)
        cnt = len(P)
        num = Fraction(cnt) * Fraction(sum(fv * gv)) - Fraction(sum(fv)) * Fraction(sum(gv))
        sf = lam if f.kind == "min" else 1
        sg = lam if g.kind == "min" else 1
        return num / (cnt * cnt * sf * sg)
    if mode == "montecarlo":
        Mf = A.as_float()
        fs, gs = [], []
        for b, size in _blocks(trials):
            P = random_perms(block_rng(seed, b), n, size)
            X = Mf[np.arange(n)[None, :], P]
            fs.append(np.asarray(f.evaluate(X), dtype=float))
            gs.append(np.asarray(g.evaluate(X), dtype=float))
        fv, gv = np.concatenate(fs), np.concatenate(gs)
        prod = (fv - fv.mean()) * (gv - gv.mean())
        cov = float(prod.sum() / max(trials - 1, 1))
        hw = float(1.96 * prod.std(ddof=1) / math.sqrt(trials)) if trials > 1 else float("inf")
        return CovEstimate(cov, hw, trials)
    raise ValueError(f"unknown mode {mode!r}")


def double_sided_moments() -> dict[str, Fraction]:
    """Exact moments for the double-sided variables on u = v = (1,1,0,0), sigma = (1 2)(3 4).

    X_i = u_{tau(i)} v_{tau(sigma(i))} over uniform tau; returns E[X1], E[X2], E[X1 X2].
    """
    u = v = (1, 1, 0, 0)
    sigma = (1, 0, 3, 2)
    P = list(permutations(range(4)))
    x1 = [u[t[0]] * v[t[sigma[0]]] for t in P]
    x2 = [u[t[1]] * v[t[sigma[1]]] for t in P]
    n = len(P)
    return {
        "E[X1]": Fraction(sum(x1), n),
        "E[X2]": Fraction(sum(x2), n),
        "E[X1X2]": Fraction(sum(a * b for a, b in zip(x1, x2)), n),
    }


# ---------------------------------------------------------------------------
# Chernoff bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChernoffBound:
    exact: float
    simplified: Optional[float]


def chernoff_upper(gamma: float, mu: float) -> ChernoffBound:
    """Pr[sum X >= e^gamma mu] for negatively associated [0,1] variables."""
    if gamma <= 0:
        raise DomainError("gamma must be positive")
    if mu <= 0:
        raise DomainError("mu must be positive")
    eg = math.exp(gamma)
    return ChernoffBound(math.exp(mu * (eg - 1 - gamma * eg)), math.exp(-gamma * gamma * mu / 2))


def chernoff_lower(gamma: float, mu: float) -> ChernoffBound:
    """Pr[sum X <= e^-gamma mu]; the simplified form exists only for gamma < 1/2."""
    if gamma <= 0:
        raise DomainError("gamma must be positive")
    if mu <= 0:
        raise DomainError("mu must be positive")
    em = math.exp(-gamma)
    simple = math.exp(-gamma * gamma * mu / 3) if gamma < 0.5 else None
    return ChernoffBound(math.exp(mu * (em - 1 + gamma * em)), simple)


# ---------------------------------------------------------------------------
# bilinear forms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BilinearSpec:
    """Doubly stochastic D (or a permutation ``sigma``) with non-negative u, v."""

    u: tuple[float, ...]
    v: tuple[float, ...]
    sigma: Optional[tuple[int, ...]] = None
    D: Optional[tuple[tuple[Fraction, ...], ...]] = None

    def __post_init__(self):
        u = tuple(float(x) for x in self.u)
        v = tuple(float(x) for x in self.v)
        if len(u) != len(v):
            raise ValueError("u and v differ in length")
        if min(u) < 0 or min(v) < 0 or max(u) == 0 or max(v) == 0:
            raise ValueError("u and v must be non-zero and non-negative")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        if (self.sigma is None) == (self.D is None):
            raise ValueError("give exactly one of sigma or D")
        N = len(u)
        if self.sigma is not None:
            s = tuple(int(x) for x in self.sigma)
            if sorted(s) != list(range(N)):
                raise ValueError("sigma is not a permutation")
            object.__setattr__(self, "sigma", s)
        else:
            D = tuple(tuple(Fraction(x) for x in r) for r in self.D)
            if len(D) != N or any(len(r) != N for r in D):
                raise ValueError("D must be N x N")
            if any(x < 0 for r in D for x in r):
                raise ValueError("D must be non-negative")
            if any(sum(r) != 1 for r in D) or any(sum(r[j] for r in D) != 1 for j in range(N)):
                raise ValueError("D is not doubly stochastic")
            object.__setattr__(self, "D", D)

    @property
    def N(self) -> int:
        return len(self.u)

    @property
    def is_permutation(self) -> bool:
        if self.sigma is not None:
            return True
        return all(sorted(r) == [0] * (self.N - 1) + [1] for r in self.D)

    @property
    def C_ratio(self) -> float:
        u, v = np.array(self.u), np.array(self.v)
        return float(u.sum() / u.max() * v.sum() / v.max() / self.N)

    @property
    def M(self) -> int:
        return 1 if self.is_permutation else self.N**2

    def offdiag(self) -> np.ndarray:
        if self.sigma is not None:
            D = np.zeros((self.N, self.N))
            D[np.arange(self.N), self.sigma] = 1.0
        else:
            D = np.array([[float(x) for x in r] for r in self.D])
        np.fill_diagonal(D, 0.0)
        return D

    def digest(self) -> str:
        blob = json.dumps(
            {"u": self.u, "v": self.v, "sigma": self.sigma,
             "D": None if self.D is None else [[str(x) for x in r] for r in self.D]},
            sort_keys=True,
        )
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _bilinear_batch(spec: BilinearSpec, taus: np.ndarray, sided: str) -> np.ndarray:
    """Values for a batch of permutations tau (rows of ``taus``)."""
    u, v = np.array(spec.u), np.array(spec.v)
    vt = v[taus]
    ut = u[taus] if sided == "double" else np.broadcast_to(u, taus.shape)
    if sided not in ("single", "double"):
        raise ValueError(f"unknown sidedness {sided!r}")
    if spec.sigma is not None:
        s = np.array(spec.sigma)
        moved = np.flatnonzero(s != np.arange(spec.N))
        return (ut[:, moved] * vt[:, s[moved]]).sum(axis=1)
    D = spec.offdiag()
    return np.einsum("bi,ij,bj->b", ut, D, vt)


def bilinear_value(spec: BilinearSpec, P: Sequence[int], sided: str = "single") -> float:
    """B(u, Pv) or B(Pu, Pv) with (Pw)_i = w_{tau(i)} for P_{i,tau(i)} = 1."""
    tau = np.asarray(P, dtype=np.int64)[None, :]
    return float(_bilinear_batch(spec, tau, sided)[0])


@dataclass(frozen=True)
class TailReport:
    spec_digest: str
    gamma: float
    sided: str
    trials: int
    seed: int
    threshold: float
    empirical_freq: float
    ci_halfwidth: float
    bound: float

    @property
    def slack(self) -> float:
        """Three binomial standard deviations at the bound's probability."""
        b = min(self.bound, 1.0)
        return 3 * math.sqrt(b * (1 - b) / self.trials)

    @property
    def passes(self) -> bool:
        return self.empirical_freq <= self.bound + self.slack

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["passes"] = self.passes
        return d


def tail_bound(spec: BilinearSpec, gamma: float, sided: str) -> float:
    C = spec.C_ratio
    if sided == "single":
        return spec.M * math.exp(-gamma * gamma * C / 2)
    return 15 * spec.M * math.exp(-gamma * gamma * C / 100)


def tail_experiment(spec: BilinearSpec, gamma: float, sided: str, trials: int, seed: int) -> TailReport:
    if spec.C_ratio < 1:
        raise HypothesisViolated(f"C_ratio = {spec.C_ratio:.4g} < 1")
    if trials < 1:
        raise ValueError("trials must be positive")
    if gamma <= 0:
        raise DomainError("gamma must be positive")
    u, v = np.array(spec.u), np.array(spec.v)
    thr = math.exp(gamma) * u.sum() * v.sum() / spec.N
    hits = 0
    for b, size in _blocks(trials):
        taus = random_perms(block_rng(seed, b), spec.N, size)
        hits += int((_bilinear_batch(spec, taus, sided) >= thr).sum())
    freq = hits / trials
    hw = 1.96 * math.sqrt(max(freq * (1 - freq), 1.0 / trials) / trials)
    return TailReport(spec.digest(), gamma, sided, trials, seed, thr, freq, hw, tail_bound(spec, gamma, sided))


# ---------------------------------------------------------------------------
# random submatrices
# ---------------------------------------------------------------------------


def _disjoint_pairs(rng: np.random.Generator, N: int, K: int, count: int) -> tuple[np.ndarray, np.ndarray]:
    P = random_perms(rng, N, count)
    return P[:, :K], P[:, K:2 * K]


def submatrix_sample(u: Sequence[float], v: Sequence[float], K: int, rng: np.random.Generator) -> float:
    """sum_{i in Q} sum_{j in R} u_i v_j for a uniform disjoint pair of K-sets."""
    u, v = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
    N = len(u)
    if 2 * K > N:
        raise KTooLarge(f"K={K} exceeds N/2")
    if K == 0:
        return 0.0
    Q, R = _disjoint_pairs(rng, N, K, 1)
    return float(u[Q[0]].sum() * v[R[0]].sum())


@dataclass(frozen=True)
class SubmatrixReport:
    K: int
    gamma: float
    trials: int
    seed: int
    mean_target: float
    upper_freq: float
    upper_bound: float
    lower_freq: float
    lower_bound: float

    def _slack(self, b: float) -> float:
        b = min(b, 1.0)
        return 3 * math.sqrt(b * (1 - b) / self.trials)

    @property
    def passes(self) -> bool:
        return (self.upper_freq <= self.upper_bound + self._slack(self.upper_bound)
                and self.lower_freq <= self.lower_bound + self._slack(self.lower_bound))

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["passes"] = self.passes
        return d


def submatrix_experiment(u, v, K: int, gamma: float, trials: int, seed: int) -> SubmatrixReport:
    if not 0 < gamma < 1:
        raise DomainError("the submatrix bounds need 0 < gamma < 1")
    u, v = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
    N = len(u)
    if 2 * K > N:
        raise KTooLarge(f"K={K} exceeds N/2")
    C = u.sum() / u.max() * v.sum() / v.max() / N
    target = K * K / (N * N) * u.sum() * v.sum()
    up = lo = 0
    for b, size in _blocks(trials):
        Q, R = _disjoint_pairs(block_rng(seed, b), N, K, size)
        vals = u[Q].sum(axis=1) * v[R].sum(axis=1)
        up += int((vals >= math.exp(gamma) * target).sum())
        lo += int((vals <= math.exp(-gamma) * target).sum())
    return SubmatrixReport(
        K, gamma, trials, seed, target,
        up / trials, 2 * math.exp(-gamma * gamma * C * K / (8 * N)),
        lo / trials, 2 * math.exp(-gamma * gamma * C * K / (12 * N)),
    )


# ---------------------------------------------------------------------------
# balanced 3-colorings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ColoredCycles:
    sigma: tuple[int, ...]
    coloring: dict = field(hash=False)

    @property
    def moved(self) -> list[int]:
        return [i for i, s in enumerate(self.sigma) if s != i]

    def counts(self) -> list[int]:
        c = [0, 0, 0]
        for x in self.coloring.values():
            c[x] += 1
        return c

    def is_proper(self) -> bool:
        return set(self.coloring) == set(self.moved) and all(
            self.coloring[i] != self.coloring[self.sigma[i]] for i in self.moved
        )

    def is_balanced(self) -> bool:
        n = len(self.coloring)
        return all(n // 3 <= c <= -(-n // 3) for c in self.counts())


def cycles(sigma: Sequence[int]) -> list[list[int]]:
    """Non-trivial cycles of sigma, each listed from its smallest element."""
    seen, out = set(), []
    for i in range(len(sigma)):
        if i in seen or sigma[i] == i:
            continue
        cyc, j = [], i
        while j not in seen:
            seen.add(j)
            cyc.append(j)
            j = sigma[j]
        out.append(cyc)
    return out


def color_cycle(k: int) -> list[int]:
    """Balanced proper coloring of a k-cycle, vertex i (1-based) gets i mod 3."""
    if k < 2:
        raise ValueError("cycles in a cycle diagram have length >= 2")
    cols = [i % 3 for i in range(1, k + 1)]
    if k % 3 == 1:
        cols[-1] = ({0, 1, 2} - {cols[-2], cols[0]}).pop()
    return cols


def _overused(counts: Sequence[int], n: int) -> set[int]:
    return {q for q in range(3) if counts[q] > n // 3}


def _merge(c0: list[int], n0: int, c1: list[int], n1: int) -> tuple[int, ...]:
    """Color permutation for G1 making the union balanced."""
    n = n0 + n1
    over0 = _overused(c0, n0)
    for perm in permutations(range(3)):
        moved = [0, 0, 0]
        for q in range(3):
            moved[perm[q]] = c1[q]
        over1 = _overused(moved, n1)
        if len(over0) + len(over1) <= 3:
            ok = not (over0 & over1)
        else:
            ok = len(over0 | over1) == 3 and len(over0 & over1) == 1
        total = [a + b for a, b in zip(c0, moved)]
        if ok and all(n // 3 <= t <= -(-n // 3) for t in total):
            return perm
    raise AssertionError("no balancing recoloring found")


def balanced_3_coloring(sigma: Sequence[int]) -> ColoredCycles:
    sigma = tuple(int(x) for x in sigma)
    coloring: dict[int, int] = {}
    counts, n = [0, 0, 0], 0
    for cyc in cycles(sigma):
        cols = color_cycle(len(cyc))
        c1 = [cols.count(q) for q in range(3)]
        perm = _merge(counts, n, c1, len(cyc))
        for node, c in zip(cyc, cols):
            coloring[node] = perm[c]
            counts[perm[c]] += 1
        n += len(cyc)
    return ColoredCycles(sigma, coloring)


def brute_force_balanced_exists(sigma: Sequence[int]) -> bool:
    """Oracle: does any proper balanced coloring of the cycle diagram exist?"""
    moved = [i for i, s in enumerate(sigma) if s != i]
    n = len(moved)
    pos = {v: i for i, v in enumerate(moved)}
    for code in range(3**n):
        cols = [(code // 3**i) % 3 for i in range(n)]
        if all(cols[pos[i]] != cols[pos[sigma[i]]] for i in moved):
            if all(n // 3 <= cols.count(q) <= -(-n // 3) for q in range(3)):
                return True
    return n == 0
