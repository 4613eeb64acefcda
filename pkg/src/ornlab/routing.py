"""Routing on connection schedules: pseudo-paths, the oblivious (g+1)-hop
distribution, 2-hop failover, the semi-oblivious hybrid, and exact loads.

All loads and weights are exact rationals. A :class:`LoadMap` stores one
integer numerator per physical edge (timestep residue k, tail node) over a
shared denominator, which keeps the bulk arithmetic in numpy while staying
exact.

Pseudo-path enumeration for a pair (a, b) only depends on the difference
b - a in unlabeled coordinates and on the block in which the path departs.
The load engine exploits that: for every departure block and every tuple of
phases it inverts the first g phase vectors once, after which the solutions
for all sources and all values of the free coefficient are one broadcast
expression.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Iterable, Iterator, Optional, Sequence, Union

import numpy as np

from . import ff
from .schedule import PhysEdge, Schedule, SornSchedule, TopologyEdge

Rate = Fraction
RateLike = Union[Fraction, int, str]


class NoIntermediate(ValueError):
    """No node b' has all-non-zero differences to both endpoints."""


def as_rate(r: RateLike) -> Fraction:
    """Parse an exact rate. Floats are refused so that no rounding sneaks in."""
    if isinstance(r, float):
        raise TypeError("rates must be exact (Fraction, int or 'a/b' string), not float")
    q = Fraction(r)
    if q < 0:
        raise ValueError("rate must be non-negative")
    return q


# ---------------------------------------------------------------------------
# demands and load maps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PermDemand:
    sigma: tuple[int, ...]
    rate: Fraction

    def __post_init__(self):
        sigma = tuple(int(x) for x in self.sigma)
        if sorted(sigma) != list(range(len(sigma))):
            raise ValueError("sigma is not a permutation of [N]")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "rate", as_rate(self.rate))

    @property
    def N(self) -> int:
        return len(self.sigma)

    @classmethod
    def identity(cls, N: int, rate: RateLike) -> "PermDemand":
        return cls(tuple(range(N)), rate)

    @classmethod
    def random(cls, N: int, rate: RateLike, rng: np.random.Generator) -> "PermDemand":
        return cls(tuple(int(x) for x in rng.permutation(N)), rate)

    def with_rate(self, rate: RateLike) -> "PermDemand":
        return PermDemand(self.sigma, rate)


def demand_from_json(text: str, rate: RateLike, N: Optional[int] = None) -> PermDemand:
    """Read sigma from a JSON array (or an object with a ``sigma`` key)."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed demand file: {exc}") from None
    if isinstance(obj, dict):
        obj = obj.get("sigma")
    if not isinstance(obj, list) or not all(isinstance(x, int) for x in obj):
        raise ValueError("malformed demand file: expected a JSON array of integers")
    if N is not None and len(obj) != N:
        raise ValueError(f"demand has {len(obj)} entries, schedule has N={N}")
    return PermDemand(tuple(obj), rate)


def demand_random(N: int, rate: RateLike, seed: int) -> PermDemand:
    return PermDemand.random(N, rate, np.random.default_rng(seed))


@dataclass(eq=False)
class LoadMap:
    """Exact load per physical edge: ``numer[k, tail] / denom``."""

    T: int
    N: int
    numer: np.ndarray
    denom: int = 1

    def __post_init__(self):
        self.numer = np.asarray(self.numer, dtype=object).reshape(self.T, self.N)
        if self.denom <= 0:
            raise ValueError("denominator must be positive")
        if any(x < 0 for x in self.numer.flat):
            raise ValueError("loads must be non-negative")

    @classmethod
    def zeros(cls, T: int, N: int) -> "LoadMap":
        return cls(T, N, np.zeros((T, N), dtype=object), 1)

    @classmethod
    def from_mapping(cls, T: int, N: int, loads: dict) -> "LoadMap":
        fracs = {PhysEdge(int(e[0]), int(e[1]) % T): Fraction(v) for e, v in loads.items()}
        den = math.lcm(1, *(f.denominator for f in fracs.values()))
        numer = np.zeros((T, N), dtype=object)
        for e, f in fracs.items():
            numer[e.k, e.tail] += f.numerator * (den // f.denominator)
        return cls(T, N, numer, den)

    def __getitem__(self, e: PhysEdge) -> Fraction:
        return Fraction(int(self.numer[e.k % self.T, e.tail]), self.denom)

    def items(self) -> Iterator[tuple[PhysEdge, Fraction]]:
        """Non-zero entries in (k, tail) order."""
        for k, tail in zip(*np.nonzero(self.numer != 0)):
            yield PhysEdge(int(tail), int(k)), Fraction(int(self.numer[k, tail]), self.denom)

    def total(self) -> Fraction:
        return Fraction(int(sum(self.numer.flat)), self.denom)

    def scaled(self, factor: RateLike) -> "LoadMap":
        f = Fraction(factor)
        return LoadMap(self.T, self.N, self.numer * f.numerator, self.denom * f.denominator)

    def __add__(self, other: "LoadMap") -> "LoadMap":
        if (self.T, self.N) != (other.T, other.N):
            raise ValueError("shape mismatch")
        den = math.lcm(self.denom, other.denom)
        numer = self.numer * (den // self.denom) + other.numer * (den // other.denom)
        return LoadMap(self.T, self.N, numer, den)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LoadMap) or (self.T, self.N) != (other.T, other.N):
            return NotImplemented
        return bool(np.all(self.numer * other.denom == other.numer * self.denom))

    def as_dict(self) -> dict[PhysEdge, Fraction]:
        return dict(self.items())


def max_load(load: LoadMap) -> tuple[Fraction, Optional[PhysEdge]]:
    """Largest load and an edge attaining it (None for an all-zero map)."""
    flat = load.numer.ravel()
    if not len(flat):
        return Fraction(0), None
    i = max(range(len(flat)), key=flat.__getitem__)
    if flat[i] == 0:
        return Fraction(0), None
    k, tail = divmod(i, load.N)
    return Fraction(int(flat[i]), load.denom), PhysEdge(tail, k)


def is_feasible(load: LoadMap) -> bool:
    return bool(all(x <= load.denom for x in load.numer.flat))


def overloaded_edges(load: LoadMap, threshold: Fraction = Fraction(1)) -> list[PhysEdge]:
    bound = threshold * load.denom
    ks, tails = np.nonzero(np.vectorize(lambda x: x > bound, otypes=[bool])(load.numer))
    return [PhysEdge(int(t), int(k)) for k, t in zip(ks, tails)]


def loadmap_to_csv(load: LoadMap, sched: Schedule) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tail_index", "timestep_k", "head_index", "load_num", "load_den"])
    for e, v in sorted(load.items(), key=lambda ev: (ev[0].k, ev[0].tail)):
        w.writerow([e.tail, e.k, sched.head(e), v.numerator, v.denominator])
    return buf.getvalue()


def loadmap_to_json(load: LoadMap, sched: Schedule) -> dict:
    return {
        "T": load.T,
        "N": load.N,
        "edges": [
            {"tail": e.tail, "k": e.k, "head": sched.head(e), "num": v.numerator, "den": v.denominator}
            for e, v in sorted(load.items(), key=lambda ev: (ev[0].k, ev[0].tail))
        ],
    }


def loadmap_from_csv(text: str, T: int, N: int) -> LoadMap:
    """Inverse of :func:`loadmap_to_csv`; leading ``#`` metadata lines are skipped."""
    body = "".join(line for line in io.StringIO(text) if not line.startswith("#"))
    rows = csv.DictReader(io.StringIO(body))
    return LoadMap.from_mapping(
        T, N, {(int(r["tail_index"]), int(r["timestep_k"])): Fraction(int(r["load_num"]), int(r["load_den"])) for r in rows}
    )


# ---------------------------------------------------------------------------
# pseudo-paths
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RoutePath:
    src: int
    start: int
    edges: tuple[TopologyEdge, ...]

    @property
    def latency(self) -> int:
        return len(self.edges)

    @property
    def dst(self) -> int:
        return self.edges[-1].head if self.edges else self.src

    @property
    def physical(self) -> list[TopologyEdge]:
        return [e for e in self.edges if e.physical]


@dataclass(frozen=True)
class PseudoPath:
    """One phase per consecutive block, from ``first_block`` on.

    ``hops[i] = (x_i, alpha_i)``: x_i is the phase number inside the
    (g+1)-block cycle (ORN) or inside the constellation (SORN).
    """

    src: int
    dst: int
    start: int
    first_block: int
    hops: tuple[tuple[int, int], ...]

    def vectors(self, sched: Schedule) -> list[ff.NodeVec]:
        C = sched.C
        return [sched.block_vectors(self.first_block + i)[x % C] for i, (x, _) in enumerate(self.hops)]

    def hop_times(self, sched: Schedule) -> list[Optional[int]]:
        C, p = sched.C, sched.p
        return [
            sched.block_start(self.first_block + i) + (x % C) * (p - 1) + a - 1 if a else None
            for i, (x, a) in enumerate(self.hops)
        ]

    @property
    def coefficients(self) -> tuple[int, ...]:
        return tuple(a for _, a in self.hops)

    def is_sound(self, sched: Schedule) -> bool:
        ua, ub = _unlabel(sched, self.src), _unlabel(sched, self.dst)
        d = ff.vec_sub(sched.node(ub), sched.node(ua), sched.p)
        return ff.combine(self.coefficients, self.vectors(sched), sched.p) == d

    def route(self, sched: Schedule) -> RoutePath:
        times = [t for t in self.hop_times(sched) if t is not None]
        hop_at = set(times)
        end = max(times) + 1 if times else self.start
        edges = []
        cur = self.src
        for t in range(self.start, end):
            if t in hop_at:
                nxt = int(sched.table[t % sched.T, cur])
                edges.append(TopologyEdge(True, cur, t, nxt))
                cur = nxt
            else:
                edges.append(TopologyEdge(False, cur, t, cur))
        if cur != self.dst:
            raise AssertionError("pseudo-path does not realize its endpoints")
        return RoutePath(self.src, self.start, tuple(edges))


def _unlabel(sched: Schedule, a: int) -> int:
    return a if sched.relabel is None else sched.relabel[a]


def _label(sched: Schedule, u: int) -> int:
    return u if sched.relabel is None else sched.relabel_inv[u]


def first_block(sched: Schedule, t: int) -> int:
    """Absolute block in which a path starting at time t takes its first hop.

    A start exactly on a window boundary departs in the window starting at t.
    For SORN schedules the window is a whole constellation.
    """
    w = -(-t // sched.window_len)
    return w * (sched.window_len // sched.block_len)


@dataclass(frozen=True)
class _PhaseTuple:
    choice: tuple[int, ...]  # index within each block
    xs: tuple[int, ...]  # phase numbers reported in PseudoPath.hops
    vectors: np.ndarray  # (g+1, g)
    winv: np.ndarray  # (g, g); winv @ d gives the first g coefficients when alpha_g = 0
    kern: np.ndarray  # (g,); first g coefficients per unit of alpha_g at d = 0


def _phase_tuples(sched: Schedule, b0: int) -> list[_PhaseTuple]:
    cache = sched.__dict__.setdefault("_phase_tuple_cache", {})
    blocks = tuple(sched.block_vectors(b0 + i) for i in range(sched.g + 1))
    if blocks in cache:
        return cache[blocks]
    p, g, C = sched.p, sched.g, sched.C
    out = []
    for choice in product(range(C), repeat=g + 1):
        vecs = [blocks[i][c] for i, c in enumerate(choice)]
        winv = np.array(ff.inverse_columns(vecs[:g], p), dtype=np.int64)
        kern = (-(winv @ np.array(vecs[g], dtype=np.int64))) % p
        xs = tuple(((b0 + i) % (g + 1)) * C + c for i, c in enumerate(choice))
        out.append(_PhaseTuple(choice, xs, np.array(vecs, dtype=np.int64), winv, kern))
    cache[blocks] = out
    return out


def enumerate_pseudopaths(sched: Schedule, a: int, b: int, t: int) -> list[PseudoPath]:
    """All non-degenerate (g+1)-hop pseudo-paths from a to b starting at t."""
    p, g = sched.p, sched.g
    if not (0 <= a < sched.N and 0 <= b < sched.N):
        raise ValueError("node out of range")
    b0 = first_block(sched, t)
    d = (sched.coords[_unlabel(sched, b)] - sched.coords[_unlabel(sched, a)]) % p
    out = []
    for tp in _phase_tuples(sched, b0):
        s0 = tp.winv @ d % p
        for beta in range(1, p):
            alpha = [int(x) for x in (s0 + beta * tp.kern) % p] + [beta]
            if alpha[0]:
                out.append(PseudoPath(a, b, t, b0, tuple(zip(tp.xs, alpha))))
    return out


# ---------------------------------------------------------------------------
# rho counts
# ---------------------------------------------------------------------------


def _count_solutions(vecs: Sequence[ff.NodeVec], d: Sequence[int], p: int, nonzero: int) -> int:
    """Number of alpha with sum alpha_i vecs_i = d and alpha[nonzero] != 0."""
    try:
        sol = ff.solve_in_span(vecs, d, p)
    except ff.SingularBasis:
        return sum(
            1
            for al in product(range(p), repeat=len(vecs))
            if al[nonzero] and ff.combine(al, vecs, p) == tuple(int(x) % p for x in d)
        )
    return int(sol is not None and sol[nonzero] != 0)


def _rho_blocks(sched: Schedule, blocks: Sequence[int], src_u: int, dst_u: int, nonzero: int) -> int:
    p = sched.p
    d = ff.vec_sub(sched.node(dst_u), sched.node(src_u), p)
    total = 0
    for choice in product(range(sched.C), repeat=len(blocks)):
        vecs = [sched.block_vectors(b)[c] for b, c in zip(blocks, choice)]
        total += _count_solutions(vecs, d, p, nonzero)
    return total


def rho_minus(sched: Schedule, q: int, i: int, e: PhysEdge) -> int:
    """q-hop pseudo-paths from i to tail(e) through the q blocks preceding e's block,
    with non-zero first coefficient. ``e.k`` is taken as an absolute timestep."""
    if not 0 <= q <= sched.g:
        raise ValueError("need 0 <= q <= g")
    if q == 0:
        return int(i == e.tail)
    be = e.k // sched.block_len
    blocks = range(be - q, be)
    return _rho_blocks(sched, blocks, _unlabel(sched, i), _unlabel(sched, e.tail), 0)


def rho_plus(sched: Schedule, q: int, e: PhysEdge, j: int) -> int:
    """q-hop pseudo-paths from head(e) to j through the q blocks following e's block,
    with non-zero last coefficient."""
    if not 0 <= q <= sched.g:
        raise ValueError("need 0 <= q <= g")
    head = sched.head(e)
    if q == 0:
        return int(head == j)
    be = e.k // sched.block_len
    blocks = range(be + 1, be + 1 + q)
    return _rho_blocks(sched, blocks, _unlabel(sched, head), _unlabel(sched, j), q - 1)


def pseudopath_count_rho(sched: Schedule, kind: str, q: int, *endpoints) -> int:
    """Dispatch: ``minus`` (i, e), ``plus`` (e, j), ``full`` (i, j, t) with q = g+1."""
    if kind == "minus":
        return rho_minus(sched, q, *endpoints)
    if kind == "plus":
        return rho_plus(sched, q, *endpoints)
    if kind == "full":
        if q != sched.g + 1:
            raise ValueError("full counts are for (g+1)-hop pseudo-paths")
        return len(enumerate_pseudopaths(sched, *endpoints))
    raise ValueError(f"unknown rho kind {kind!r}")


# ---------------------------------------------------------------------------
# exact oblivious load engine
# ---------------------------------------------------------------------------


def _start_groups(sched: Schedule, window_ok=None) -> list[tuple[int, int]]:
    """(first block, number of start times in [0, T) departing there)."""
    t = np.arange(sched.T)
    w = -(-t // sched.window_len)
    if window_ok is not None:
        t_keep = np.array([window_ok(int(x)) for x in w], dtype=bool)
        w = w[t_keep]
    ws, counts = np.unique(w, return_counts=True)
    ratio = sched.window_len // sched.block_len
    return [(int(x) * ratio, int(c)) for x, c in zip(ws, counts)]


def _unlabeled_sigma(sched: Schedule, sigma: Sequence[int]) -> np.ndarray:
    s = np.asarray(sigma, dtype=np.int64)
    if sched.relabel is None:
        return s
    tau = np.asarray(sched.relabel)
    inv = np.asarray(sched.relabel_inv)
    # sigma_0(tau(a)) = tau(sigma(a))
    return tau[s[inv]]


def _relabel_tails(sched: Schedule, arr: np.ndarray) -> np.ndarray:
    """Reindex the last (tail) axis from unlabeled to labeled nodes."""
    if sched.relabel is None:
        return arr
    return arr[..., np.asarray(sched.relabel)]


def _oblivious_hits(sched: Schedule, sigma_u: np.ndarray, window_ok=None) -> tuple[np.ndarray, int]:
    """Per-hop flow at rate 1 on unlabeled tails: numer (g+1, T, N) over denom."""
    p, g, N, T = sched.p, sched.g, sched.N, sched.T
    coords, place = sched.coords, sched.place
    d = (coords[sigma_u] - coords) % p
    betas = np.arange(1, p, dtype=np.int64)
    hits: dict[int, np.ndarray] = {}
    for b0, mult in _start_groups(sched, window_ok):
        tps = _phase_tuples(sched, b0)
        starts = [sched.block_start(b0 + i) for i in range(g + 1)]
        solved = []
        count = np.zeros(N, dtype=np.int64)
        for tp in tps:
            al = np.empty((N, p - 1, g + 1), dtype=np.int64)
            s0 = d @ tp.winv.T % p
            al[:, :, :g] = (s0[:, None, :] + betas[None, :, None] * tp.kern[None, None, :]) % p
            al[:, :, g] = betas[None, :]
            valid = al[:, :, 0] != 0
            count += valid.sum(axis=1)
            solved.append((tp, al, valid))
        cnt = np.broadcast_to(count[:, None], (N, p - 1))
        for tp, al, valid in solved:
            cur = np.broadcast_to(coords[:, None, :], (N, p - 1, g)).copy()
            for i in range(g + 1):
                ai = al[:, :, i]
                mask = valid & (ai != 0)
                k = (starts[i] + tp.choice[i] * (p - 1) + ai - 1) % T
                eid = (k * N + cur @ place)[mask]
                ce = cnt[mask]
                for c in np.unique(ce):
                    arr = hits.setdefault(int(c), np.zeros((g + 1, T * N), dtype=np.int64))
                    arr[i] += np.bincount(eid[ce == c], minlength=T * N) * mult
                cur = (cur + ai[:, :, None] * tp.vectors[i]) % p
    if not hits:
        return np.zeros((g + 1, T, N), dtype=object), 1
    den = math.lcm(*hits)
    numer = np.zeros((g + 1, T * N), dtype=object)
    for c, arr in hits.items():
        numer = numer + arr.astype(object) * (den // c)
    return numer.reshape(g + 1, T, N), den


@dataclass(eq=False)
class HopLoads:
    """Flow on each edge split by the block (hop index) it is used in."""

    T: int
    N: int
    numer: np.ndarray  # (g+1, T, N) object ints
    denom: int

    def hop(self, i: int) -> LoadMap:
        return LoadMap(self.T, self.N, self.numer[i], self.denom)

    def total(self) -> LoadMap:
        return LoadMap(self.T, self.N, self.numer.sum(axis=0), self.denom)

    def at(self, e: PhysEdge) -> list[Fraction]:
        return [Fraction(int(x), self.denom) for x in self.numer[:, e.k % self.T, e.tail]]

    def hop_max(self, i: int) -> Fraction:
        return Fraction(int(self.numer[i].max()), self.denom)


@lru_cache(maxsize=16)
def _hop_loads_cached(sched: Schedule, sigma: tuple[int, ...], rate: Fraction) -> HopLoads:
    numer, den = _oblivious_hits(sched, _unlabeled_sigma(sched, sigma))
    numer = _relabel_tails(sched, numer)
    return HopLoads(sched.T, sched.N, numer * rate.numerator, den * rate.denominator)


def hop_loads(sched: Schedule, demand: PermDemand) -> HopLoads:
    if demand.N != sched.N:
        raise ValueError("demand size differs from schedule size")
    return _hop_loads_cached(sched, demand.sigma, demand.rate)


def induced_load_oblivious(sched: Schedule, demand: PermDemand) -> LoadMap:
    """Exact per-edge load of the uniform non-degenerate (g+1)-hop distribution."""
    return hop_loads(sched, demand).total()


def hop_flow_decomposition(sched: Schedule, demand: PermDemand, e: PhysEdge) -> list[Fraction]:
    return hop_loads(sched, demand).at(e)


def expected_total_load(sched: Schedule, demand: PermDemand) -> Fraction:
    """Sum of all edge loads recomputed from explicit pseudo-path enumeration.

    Independent of the vectorized engine: it sums, per source and start time,
    weight times the number of physical hops. Enumerations are shared between
    sources with the same (difference, departure block) pair.
    """
    cache: dict[tuple[int, int], Fraction] = {}
    total = Fraction(0)
    groups = _start_groups(sched)
    for a in range(sched.N):
        ua, ub = _unlabel(sched, a), _unlabel(sched, demand.sigma[a])
        dkey = sched.index(ff.vec_sub(sched.node(ub), sched.node(ua), sched.p))
        for b0, mult in groups:
            key = (dkey, b0)
            if key not in cache:
                t = b0 * sched.block_len  # any start departing in block b0
                paths = enumerate_pseudopaths(sched, a, demand.sigma[a], t)
                hops = sum(sum(1 for c in pp.coefficients if c) for pp in paths)
                cache[key] = Fraction(hops, len(paths))
            total += mult * cache[key]
    return total * demand.rate


def scheme_max_latency(sched: Schedule, demand: Optional[PermDemand] = None) -> int:
    """Largest latency of any (g+1)-hop path the scheme can emit.

    Latency only depends on the start time, the last phase and the last
    coefficient; validity only on the pair's difference. With ``demand`` the
    maximum is over that demand's pairs, otherwise over every pair.
    """
    p, g, N = sched.p, sched.g, sched.N
    if demand is None:
        d = sched.coords
    else:
        d = (sched.coords[_unlabeled_sigma(sched, demand.sigma)] - sched.coords) % p
    betas = np.arange(1, p, dtype=np.int64)
    t = np.arange(sched.T)
    w = -(-t // sched.window_len)
    ratio = sched.window_len // sched.block_len
    best = 0
    for wv in np.unique(w):
        b0 = int(wv) * ratio
        t_min = int(t[w == wv].min())
        last = sched.block_start(b0 + g)
        for tp in _phase_tuples(sched, b0):
            a0 = (d @ tp.winv[0] % p)[:, None] + betas[None, :] * tp.kern[0]
            valid = (a0 % p != 0).any(axis=0)
            if valid.any():
                beta = int(betas[valid].max())
                best = max(best, last + tp.choice[g] * (p - 1) + beta - t_min)
    return best


def max_latency(paths: Iterable[RoutePath]) -> int:
    return max((pth.latency for pth in paths), default=0)


# ---------------------------------------------------------------------------
# 2-hop failover (SORN)
# ---------------------------------------------------------------------------


def _inv_table(p: int) -> np.ndarray:
    return np.array([0] + [pow(x, p - 2, p) for x in range(1, p)], dtype=np.int64)


def direct_residue(sched: SornSchedule, diff: np.ndarray, x: int) -> np.ndarray:
    """Timestep residue at which u is joined to u + diff along v(x).

    ``diff`` has shape (..., g) with all coordinates non-zero; x ranges over
    1..C(g+1). Solves diff = s A v(x) with A diagonal, first entry 1.
    """
    p, g = sched.p, sched.g
    inv = _inv_table(p)
    v = np.array(ff.vandermonde(x, g, p), dtype=np.int64)
    s = diff[..., 0] % p
    f = np.zeros(s.shape, dtype=np.int64)
    for j in range(1, g):
        a_j = diff[..., j] * inv[(s * v[j]) % p] % p
        f = f * (p - 1) + (a_j - 1)
    return f * sched.frame_len + (x - 1) * (p - 1) + s - 1


@dataclass(frozen=True)
class FailoverChoice:
    via: int
    k1: int
    k2: int
    weight: Fraction

    def hop_times(self, sched: SornSchedule, t: int) -> tuple[int, int]:
        t1 = -(-t // sched.frame_len) * sched.frame_len
        T = sched.T
        return t1 + (self.k1 - t1) % T, t1 + T + (self.k2 - t1) % T

    def route(self, sched: SornSchedule, src: int, t: int) -> RoutePath:
        h1, h2 = self.hop_times(sched, t)
        edges, cur = [], src
        for tt in range(t, h2 + 1):
            if tt in (h1, h2):
                nxt = int(sched.table[tt % sched.T, cur])
                edges.append(TopologyEdge(True, cur, tt, nxt))
                cur = nxt
            else:
                edges.append(TopologyEdge(False, cur, tt, cur))
        return RoutePath(src, t, tuple(edges))


def _valid_via(sched: SornSchedule, ua: np.ndarray, ub: np.ndarray) -> np.ndarray:
    """(len(ua), N) mask of intermediates with all-non-zero differences."""
    c = sched.coords
    d1 = (c[None, :, :] - c[ua][:, None, :]) % sched.p
    d2 = (c[ub][:, None, :] - c[None, :, :]) % sched.p
    return (d1 != 0).all(axis=2) & (d2 != 0).all(axis=2)


def failover_paths(sched: SornSchedule, a: int, b: int) -> list[FailoverChoice]:
    """Uniform distribution over valid intermediates and phase-vector pairs."""
    if not isinstance(sched, SornSchedule):
        raise TypeError("failover routing needs a SORN schedule")
    ua, ub = _unlabel(sched, a), _unlabel(sched, b)
    mask = _valid_via(sched, np.array([ua]), np.array([ub]))[0]
    vias = np.flatnonzero(mask)
    if len(vias) == 0:
        raise NoIntermediate(f"no valid intermediate between {a} and {b}; p is too small")
    V = sched.n_phases
    w = Fraction(1, len(vias) * V * V)
    c = sched.coords
    out = []
    for via in vias:
        d1 = (c[via] - c[ua]) % sched.p
        d2 = (c[ub] - c[via]) % sched.p
        for xa in range(1, V + 1):
            k1 = int(direct_residue(sched, d1, xa))
            for xb in range(1, V + 1):
                k2 = int(direct_residue(sched, d2, xb))
                out.append(FailoverChoice(_label(sched, int(via)), k1, k2, w))
    return out


def _failover_hits(sched: SornSchedule, sigma_u: np.ndarray, n_starts: int) -> tuple[np.ndarray, int]:
    """Two-hop loads at rate 1 for ``n_starts`` start times per source: (2, T, N) numer, denom."""
    N, T, V = sched.N, sched.T, sched.n_phases
    ua = np.arange(N)
    mask = _valid_via(sched, ua, sigma_u)
    nb = mask.sum(axis=1)
    if (nb == 0).any():
        bad = int(np.flatnonzero(nb == 0)[0])
        raise NoIntermediate(f"no valid intermediate for source {bad}; p is too small")
    src, via = np.nonzero(mask)
    c = sched.coords
    d1 = (c[via] - c[src]) % sched.p
    d2 = (c[sigma_u[src]] - c[via]) % sched.p
    den = math.lcm(*(int(x) for x in np.unique(nb))) * V
    wt = (den // (nb[src] * V)).astype(object) * n_starts
    numer = np.zeros((2, T * N), dtype=object)
    for x in range(1, V + 1):
        e1 = direct_residue(sched, d1, x) * N + src
        e2 = direct_residue(sched, d2, x) * N + via
        for h, e in ((0, e1), (1, e2)):
            # np.add.at on object arrays keeps Python-int exactness
            np.add.at(numer[h], e, wt)
    return numer.reshape(2, T, N), den


def failover_hop_loads(sched: SornSchedule, demand: PermDemand, n_starts: Optional[int] = None) -> HopLoads:
    """First- and second-hop failover loads (entries 0 and 1)."""
    n = sched.T if n_starts is None else n_starts
    numer, den = _failover_hits(sched, _unlabeled_sigma(sched, demand.sigma), n)
    numer = _relabel_tails(sched, numer)
    r = demand.rate
    return HopLoads(sched.T, sched.N, numer * r.numerator, den * r.denominator)


def induced_load_failover(sched: SornSchedule, demand: PermDemand) -> LoadMap:
    return failover_hop_loads(sched, demand).total()


def failover_max_latency(sched: SornSchedule, demand: PermDemand) -> int:
    """Exact worst latency over the failover paths used for ``demand``."""
    N, T = sched.N, sched.T
    sigma_u = _unlabeled_sigma(sched, demand.sigma)
    mask = _valid_via(sched, np.arange(N), sigma_u)
    src, via = np.nonzero(mask)
    d2 = (sched.coords[sigma_u[src]] - sched.coords[via]) % sched.p
    k2 = np.unique(np.concatenate([direct_residue(sched, d2, x) for x in range(1, sched.n_phases + 1)]))
    t = np.arange(T)
    t1 = -(-t // sched.frame_len) * sched.frame_len
    lat = t1[:, None] + T + (k2[None, :] - t1[:, None]) % T + 1 - t[:, None]
    return int(lat.max())


# ---------------------------------------------------------------------------
# semi-oblivious routing
# ---------------------------------------------------------------------------


class Mode(str, Enum):
    G_PLUS_ONE_HOP = "GPlusOneHop"
    TWO_HOP_FAILOVER = "TwoHopFailover"


@dataclass
class RoutingDecision:
    mode: Mode
    load: LoadMap
    overloaded_edges: list = field(default_factory=list)


def semi_oblivious_route(sched: SornSchedule, demand: PermDemand) -> RoutingDecision:
    primary = induced_load_oblivious(sched, demand)
    if is_feasible(primary):
        return RoutingDecision(Mode.G_PLUS_ONE_HOP, primary, [])
    return RoutingDecision(Mode.TWO_HOP_FAILOVER, induced_load_failover(sched, demand), overloaded_edges(primary))


def _slack(g: int, rate: Fraction) -> tuple[Fraction, Fraction]:
    """(epsilon, delta') for the contentious-constellation threshold."""
    eps = g + 2 - 1 / rate
    return eps, (1 - eps) / (2 * (g + 1))


def contention_threshold(sched: SornSchedule, rate: RateLike) -> Fraction:
    r = as_rate(rate)
    if r == 0:
        return Fraction(0)
    _, dprime = _slack(sched.g, r)
    return (1 + dprime) * (sched.g + 1) * r


def contention_kmax(sched: SornSchedule, rate: RateLike) -> int:
    r = as_rate(rate)
    if r == 0:
        return 0
    eps, _ = _slack(sched.g, r)
    return math.floor((1 - eps) * (sched.p - 2) ** sched.g / (4 * (sched.p - 1)))


def contentious_constellations(sched: SornSchedule, demand: PermDemand) -> tuple[frozenset, int]:
    """Constellations holding an edge whose (g+1)-hop load exceeds the slack threshold."""
    if demand.rate == 0:
        return frozenset(), 0
    load = induced_load_oblivious(sched, demand)
    bound = contention_threshold(sched, demand.rate) * load.denom
    per_k = np.array([max(row) for row in load.numer], dtype=object)
    hot = set()
    for f in range(sched.n_constellations):
        seg = per_k[f * sched.frame_len:(f + 1) * sched.frame_len]
        if any(x > bound for x in seg):
            hot.add(f)
    return frozenset(hot), contention_kmax(sched, demand.rate)


@dataclass
class MixedDecision:
    contentious: frozenset
    k_max: int
    applied: bool
    load: LoadMap


def mixed_route(sched: SornSchedule, demand: PermDemand) -> MixedDecision:
    """Per-constellation fallback: starts whose constellation is contentious go 2-hop.

    If more than k_max constellations are contentious the whole demand fails over.
    """
    hot, kmax = contentious_constellations(sched, demand)
    if len(hot) > kmax:
        return MixedDecision(hot, kmax, False, induced_load_failover(sched, demand))
    F = sched.n_constellations
    sigma_u = _unlabeled_sigma(sched, demand.sigma)
    numer, den = _oblivious_hits(sched, sigma_u, window_ok=lambda w: w % F not in hot)
    r = demand.rate
    primary = LoadMap(sched.T, sched.N, _relabel_tails(sched, numer.sum(axis=0)) * r.numerator, den * r.denominator)
    if not hot:
        return MixedDecision(hot, kmax, True, primary)
    fo = failover_hop_loads(sched, demand, n_starts=len(hot) * sched.frame_len).total()
    return MixedDecision(hot, kmax, True, primary + fo)


def mixed_bound(sched: SornSchedule, rate: RateLike, k: int) -> Fraction:
    r = as_rate(rate)
    p, g = sched.p, sched.g
    return contention_threshold(sched, r) + Fraction(2 * k * (p - 1), (p - 2) ** g) * r
