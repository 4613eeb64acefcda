"""Connection schedules: the fixed Vandermonde ORN schedule and the
constellation-rotating SORN schedule.

Timesteps are absolute integers; every query reduces mod the period T.
Nodes are integer indices in [0, p^g) (little-endian base p, see ``ff``).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from itertools import product
from typing import Iterator, NamedTuple, Optional, Sequence

import numpy as np

from . import ff

ORN = "orn"
SORN = "sorn"


class OutOfPeriod(ValueError):
    pass


class WindowTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class TimestepOrn:
    x: int
    s: int
    k: int


@dataclass(frozen=True)
class TimestepSorn:
    f: int
    x: int
    s: int
    k: int


def period(p: int, g: int, C: int, kind: str) -> int:
    base = C * (g + 1) * (p - 1)
    return base if kind == ORN else base * (p - 1) ** (g - 1)


def decompose(k: int, p: int, g: int, C: int, kind: str = ORN) -> TimestepOrn | TimestepSorn:
    T = period(p, g, C, kind)
    if not 0 <= k < T:
        raise OutOfPeriod(f"timestep {k} outside [0, {T})")
    f, rest = divmod(k, C * (g + 1) * (p - 1))
    x, s1 = divmod(rest, p - 1)
    if kind == ORN:
        return TimestepOrn(x=x, s=s1 + 1, k=k)
    return TimestepSorn(f=f, x=x, s=s1 + 1, k=k)


def compose(x: int, s: int, p: int, g: int, C: int, f: int = 0) -> int:
    """Inverse of :func:`decompose`; ``f`` is ignored (zero) for ORN timesteps."""
    if not 1 <= s < p:
        raise ValueError("scale must lie in [1, p)")
    if not 0 <= x < C * (g + 1):
        raise ValueError("phase out of range")
    return C * (g + 1) * (p - 1) * f + (p - 1) * x + s - 1


def diagonal_family(p: int, g: int) -> tuple[ff.DiagMatrix, ...]:
    """One representative per scalar class of invertible diagonal matrices.

    Representatives have first entry 1, ordered lexicographically.
    """
    return tuple(ff.DiagMatrix((1,) + rest, p) for rest in product(range(1, p), repeat=g - 1))


class PhysEdge(NamedTuple):
    tail: int
    k: int


class TopologyEdge(NamedTuple):
    physical: bool
    tail: int
    t: int
    head: int


class Schedule:
    """Shared machinery of the two schedule families.

    Subclasses define the phase vectors of every absolute phase block and the
    routing window (the unit to which a path's start is rounded up).
    """

    kind: str

    def __init__(self, p: int, g: int, C: int, relabel: Optional[Sequence[int]] = None):
        ff.PrimeField(p)
        if g < 1 or C < 1:
            raise ValueError("g and C must be positive")
        self.p, self.g, self.C = p, g, C
        self.N = p**g
        if relabel is not None:
            relabel = tuple(int(x) for x in relabel)
            if sorted(relabel) != list(range(self.N)):
                raise ValueError("relabel must be a permutation of [N]")
        self.relabel = relabel

    # -- sizes -----------------------------------------------------------
    @property
    def n_phases(self) -> int:
        return self.C * (self.g + 1)

    @property
    def block_len(self) -> int:
        return self.C * (self.p - 1)

    @property
    def T(self) -> int:
        return period(self.p, self.g, self.C, self.kind)

    @property
    def window_len(self) -> int:
        raise NotImplementedError

    # -- nodes -----------------------------------------------------------
    @cached_property
    def coords(self) -> np.ndarray:
        """(N, g) array of node coordinates."""
        idx = np.arange(self.N)
        return np.stack([(idx // self.p**j) % self.p for j in range(self.g)], axis=1)

    @cached_property
    def place(self) -> np.ndarray:
        return self.p ** np.arange(self.g)

    def node(self, i: int) -> ff.NodeVec:
        return ff.index_to_node(i, self.p, self.g)

    def index(self, v: Sequence[int]) -> int:
        return ff.node_to_index(v, self.p)

    @cached_property
    def relabel_inv(self) -> Optional[tuple[int, ...]]:
        if self.relabel is None:
            return None
        inv = [0] * self.N
        for a, b in enumerate(self.relabel):
            inv[b] = a
        return tuple(inv)

    # -- phases ----------------------------------------------------------
    def phase_vector(self, k: int) -> ff.NodeVec:
        raise NotImplementedError

    def block_vectors(self, block: int) -> tuple[ff.NodeVec, ...]:
        """The C phase vectors of absolute phase block ``block``."""
        raise NotImplementedError

    def block_start(self, block: int) -> int:
        return block * self.block_len

    # -- permutations ----------------------------------------------------
    def scale(self, k: int) -> int:
        return (k % self.T) % (self.p - 1) + 1

    def perm_unlabeled(self, k: int, a: int) -> int:
        step = ff.vec_scale(self.scale(k), self.phase_vector(k), self.p)
        return self.index(ff.vec_add(self.node(a), step, self.p))

    def perm(self, k: int, a: int) -> int:
        if self.relabel is None:
            return self.perm_unlabeled(k, a)
        return self.relabel_inv[self.perm_unlabeled(k, self.relabel[a])]

    @cached_property
    def table(self) -> np.ndarray:
        """(T, N) array with table[k, a] = pi_k(a)."""
        T, N, p = self.T, self.N, self.p
        out = np.empty((T, N), dtype=np.int64)
        for k in range(T):
            step = np.array(self.phase_vector(k)) * self.scale(k) % p
            out[k] = ((self.coords + step) % p) @ self.place
        if self.relabel is not None:
            tau = np.array(self.relabel)
            inv = np.array(self.relabel_inv)
            out = inv[out[:, tau]]
        return out

    def head(self, e: PhysEdge) -> int:
        return int(self.table[e.k % self.T, e.tail])

    # -- serialization ---------------------------------------------------
    def to_dict(self) -> dict:
        raise NotImplementedError

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    def __eq__(self, other):
        return type(self) is type(other) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(self._key)

    @cached_property
    def _key(self) -> str:
        return self.dumps()

    def __repr__(self):
        tag = "" if self.relabel is None else ", relabeled"
        return f"{type(self).__name__}(p={self.p}, g={self.g}, C={self.C}{tag})"


class OrnSchedule(Schedule):
    kind = ORN

    def __init__(self, p: int, g: int, C: int, relabel: Optional[Sequence[int]] = None):
        super().__init__(p, g, C, relabel)
        if p < self.n_phases:
            raise ValueError(f"need p >= C(g+1) = {self.n_phases} distinct Vandermonde vectors")
        self.phases = tuple(ff.vandermonde(x, g, p) for x in range(self.n_phases))

    @property
    def window_len(self) -> int:
        return self.block_len

    def phase_vector(self, k: int) -> ff.NodeVec:
        return self.phases[(k % self.T) // (self.p - 1)]

    def block_vectors(self, block: int) -> tuple[ff.NodeVec, ...]:
        j = block % (self.g + 1)
        return self.phases[j * self.C:(j + 1) * self.C]

    def decompose(self, k: int) -> TimestepOrn:
        return decompose(k % self.T, self.p, self.g, self.C, ORN)

    def to_dict(self) -> dict:
        return {
            "kind": ORN, "p": self.p, "g": self.g, "C": self.C,
            "phases": [list(v) for v in self.phases],
            "relabel": None if self.relabel is None else list(self.relabel),
        }


class SornSchedule(Schedule):
    kind = SORN

    def __init__(self, p: int, g: int, C: int, relabel: Optional[Sequence[int]] = None):
        if g < 2:
            raise ValueError("SORN schedules need g >= 2")
        super().__init__(p, g, C, relabel)
        if p <= self.n_phases:
            raise ValueError(f"need p > C(g+1) = {self.n_phases}: v(0) is excluded from the constellation")
        self.base = ff.Constellation(
            tuple(ff.vandermonde(x, g, p) for x in range(1, self.n_phases + 1)), C, p
        )
        self.family = diagonal_family(p, g)
        self._twisted = tuple(tuple(A.apply(v) for v in self.base.vectors) for A in self.family)

    @property
    def n_constellations(self) -> int:
        return len(self.family)

    @property
    def frame_len(self) -> int:
        return self.n_phases * (self.p - 1)

    @property
    def window_len(self) -> int:
        return self.frame_len

    def constellation(self, f: int) -> ff.Constellation:
        return ff.twist(self.family[f], self.base)

    def phase_vector(self, k: int) -> ff.NodeVec:
        f, rest = divmod(k % self.T, self.frame_len)
        return self._twisted[f][rest // (self.p - 1)]

    def block_vectors(self, block: int) -> tuple[ff.NodeVec, ...]:
        f = (block // (self.g + 1)) % self.n_constellations
        j = block % (self.g + 1)
        return self._twisted[f][j * self.C:(j + 1) * self.C]

    def decompose(self, k: int) -> TimestepSorn:
        return decompose(k % self.T, self.p, self.g, self.C, SORN)

    def to_dict(self) -> dict:
        return {
            "kind": SORN, "p": self.p, "g": self.g, "C": self.C,
            "phases": [list(v) for v in self.base.vectors],
            "family": [list(A.diag) for A in self.family],
            "relabel": None if self.relabel is None else list(self.relabel),
        }


def from_dict(d: dict) -> Schedule:
    cls = {ORN: OrnSchedule, SORN: SornSchedule}.get(d.get("kind"))
    if cls is None:
        raise ValueError(f"unknown schedule kind {d.get('kind')!r}")
    sched = cls(int(d["p"]), int(d["g"]), int(d["C"]), d.get("relabel"))
    if "phases" in d and [list(v) for v in d["phases"]] != sched.to_dict()["phases"]:
        raise ValueError("phase list does not match the canonical construction")
    if "family" in d and [list(v) for v in d["family"]] != sched.to_dict()["family"]:
        raise ValueError("family order does not match the canonical construction")
    return sched


def loads(text: str) -> Schedule:
    return from_dict(json.loads(text))


def random_relabel(N: int, rng: np.random.Generator) -> tuple[int, ...]:
    return tuple(int(x) for x in rng.permutation(N))


def _as_index(sched: Schedule, a) -> tuple[int, bool]:
    if isinstance(a, (tuple, list)):
        return sched.index(a), True
    return int(a), False


def orn_permutation(sched: OrnSchedule, k: int, a):
    """pi_k(a) = a + s v(x), under the relabeling if present.

    Accepts a node index or coordinate tuple and answers in kind.
    """
    i, vec = _as_index(sched, a)
    j = sched.perm(k, i)
    return sched.node(j) if vec else j


def sorn_permutation(sched: SornSchedule, k: int, a):
    """pi_k(a) = a + s A_f v_x, under the relabeling if present."""
    i, vec = _as_index(sched, a)
    j = sched.perm(k, i)
    return sched.node(j) if vec else j


def reachable_set(sched: Schedule, a: int, t0: int, L: int, h: int) -> set[int]:
    """Nodes reachable from (a, t0) within L timesteps using at most h physical hops.

    BFS over time layers of the virtual topology; states are (node, hops used)
    deduplicated per layer. The start node itself is excluded.
    """
    if L < 0 or h < 0:
        raise ValueError("L and h must be non-negative")
    table = sched.table
    # fewest physical hops needed to sit at each node in the current layer
    best = np.full(sched.N, h + 1, dtype=np.int64)
    best[a] = 0
    seen = np.zeros(sched.N, dtype=bool)
    seen[a] = True
    for dt in range(L):
        if h == 0:
            break
        nxt = best.copy()
        perm = table[(t0 + dt) % sched.T]
        live = best < h
        np.minimum.at(nxt, perm[live], best[live] + 1)
        best = nxt
        seen |= best <= h
    seen[a] = False
    return set(np.flatnonzero(seen).tolist())


def virtual_topology_edges(sched: Schedule, start: int, stop: int, cap: int = 1_000_000) -> Iterator[TopologyEdge]:
    """Virtual and physical edges leaving time layers start..stop-1."""
    if stop < start:
        raise ValueError("empty or reversed window")
    if 2 * sched.N * (stop - start) > cap:
        raise WindowTooLarge(f"window would emit more than {cap} edges")
    for t in range(start, stop):
        perm = sched.table[t % sched.T]
        for i in range(sched.N):
            yield TopologyEdge(False, i, t, i)
            yield TopologyEdge(True, i, t, int(perm[i]))
