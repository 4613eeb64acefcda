"""Prime-field arithmetic and small linear algebra over F_p^g.

Node identifiers are length-g coordinate tuples of plain ints reduced mod p.
The :class:`Fp` element type is available for callers that want operator
overloading; the hot paths elsewhere in the package work on ints directly.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Optional, Sequence

NodeVec = tuple[int, ...]


class SingularBasis(ValueError):
    """Raised when a supposed basis is linearly dependent."""


class IndexOutOfRange(ValueError):
    pass


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


@dataclass(frozen=True)
class PrimeField:
    p: int

    def __post_init__(self):
        if not is_prime(self.p):
            raise ValueError(f"{self.p} is not prime")

    def __call__(self, value: int) -> "Fp":
        return Fp(value % self.p, self)

    def inv(self, a: int) -> int:
        a %= self.p
        if a == 0:
            raise ZeroDivisionError("0 has no inverse in F_p")
        return pow(a, self.p - 2, self.p)

    def elements(self) -> range:
        return range(self.p)


@dataclass(frozen=True)
class Fp:
    value: int
    field: PrimeField

    def __post_init__(self):
        if not 0 <= self.value < self.field.p:
            object.__setattr__(self, "value", self.value % self.field.p)

    def _coerce(self, other) -> int:
        if isinstance(other, Fp):
            if other.field != self.field:
                raise ValueError("mixing elements of different fields")
            return other.value
        return int(other)

    def __add__(self, other):
        return self.field(self.value + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self.field(self.value - self._coerce(other))

    def __rsub__(self, other):
        return self.field(self._coerce(other) - self.value)

    def __mul__(self, other):
        return self.field(self.value * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self):
        return self.field(-self.value)

    def __truediv__(self, other):
        return self.field(self.value * self.field.inv(self._coerce(other)))

    def __pow__(self, e: int):
        if e < 0:
            return self.field(pow(self.field.inv(self.value), -e, self.field.p))
        return self.field(pow(self.value, e, self.field.p))

    def __eq__(self, other):
        if isinstance(other, Fp):
            return self.field == other.field and self.value == other.value
        if isinstance(other, int):
            return self.value == other % self.field.p
        return NotImplemented

    def __hash__(self):
        return hash((self.value, self.field.p))

    def __int__(self):
        return self.value

    def __repr__(self):
        return f"Fp({self.value} mod {self.field.p})"


def _ints(v: Iterable) -> tuple[int, ...]:
    return tuple(int(c) for c in v)


def vandermonde(x: int, g: int, p: int) -> NodeVec:
    """Return (1, x, x^2, ..., x^(g-1)) over F_p."""
    x = int(x) % p
    out, acc = [], 1
    for _ in range(g):
        out.append(acc)
        acc = acc * x % p
    return tuple(out)


def vec_add(a: Sequence[int], b: Sequence[int], p: int) -> NodeVec:
    return tuple((x + y) % p for x, y in zip(a, b))


def vec_sub(a: Sequence[int], b: Sequence[int], p: int) -> NodeVec:
    return tuple((x - y) % p for x, y in zip(a, b))


def vec_scale(s: int, a: Sequence[int], p: int) -> NodeVec:
    return tuple(s * x % p for x in a)


def combine(coeffs: Sequence[int], vectors: Sequence[Sequence[int]], p: int) -> NodeVec:
    """Linear combination sum_i coeffs[i] * vectors[i]."""
    g = len(vectors[0])
    out = [0] * g
    for c, v in zip(coeffs, vectors):
        c = int(c)
        if c:
            for j in range(g):
                out[j] += c * int(v[j])
    return tuple(x % p for x in out)


def rank(vectors: Sequence[Sequence[int]], p: int) -> int:
    rows = [list(_ints(v)) for v in vectors]
    if not rows:
        return 0
    ncols = len(rows[0])
    r = 0
    for col in range(ncols):
        piv = next((i for i in range(r, len(rows)) if rows[i][col] % p), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        inv = pow(rows[r][col], p - 2, p)
        rows[r] = [x * inv % p for x in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][col] % p:
                f = rows[i][col]
                rows[i] = [(x - f * y) % p for x, y in zip(rows[i], rows[r])]
        r += 1
        if r == len(rows):
            break
    return r


def inverse_columns(basis: Sequence[Sequence[int]], p: int) -> list[list[int]]:
    """Inverse of the g x g matrix whose columns are the basis vectors.

    Row i of the result maps a target vector to the coefficient of basis[i].
    """
    g = len(basis)
    if any(len(b) != g for b in basis):
        raise ValueError("basis must contain g vectors of length g")
    # augmented [M | I] with M[j][i] = basis[i][j]
    m = [[int(basis[i][j]) % p for i in range(g)] + [int(i == j) for i in range(g)] for j in range(g)]
    for col in range(g):
        piv = next((r for r in range(col, g) if m[r][col]), None)
        if piv is None:
            raise SingularBasis("basis vectors are linearly dependent")
        m[col], m[piv] = m[piv], m[col]
        inv = pow(m[col][col], p - 2, p)
        m[col] = [x * inv % p for x in m[col]]
        for r in range(g):
            if r != col and m[r][col]:
                f = m[r][col]
                m[r] = [(x - f * y) % p for x, y in zip(m[r], m[col])]
    return [row[g:] for row in m]


def solve_coeffs(basis: Sequence[Sequence[int]], target: Sequence[int], p: int) -> tuple[int, ...]:
    """Unique alpha with sum_i alpha_i * basis_i == target, by Gaussian elimination."""
    inv = inverse_columns(basis, p)
    t = _ints(target)
    return tuple(sum(row[j] * t[j] for j in range(len(t))) % p for row in inv)


def solve_in_span(vectors: Sequence[Sequence[int]], target: Sequence[int], p: int) -> Optional[tuple[int, ...]]:
    """Coefficients expressing ``target`` over linearly independent ``vectors``.

    Returns None when the target lies outside their span.
    """
    q = len(vectors)
    t = _ints(target)
    if q == 0:
        return () if not any(c % p for c in t) else None
    g = len(t)
    # rows of the augmented system [v_1 ... v_q | target]
    rows = [[int(vectors[i][j]) % p for i in range(q)] + [t[j] % p] for j in range(g)]
    pivots = []
    r = 0
    for col in range(q):
        piv = next((i for i in range(r, g) if rows[i][col]), None)
        if piv is None:
            raise SingularBasis("vectors are linearly dependent")
        rows[r], rows[piv] = rows[piv], rows[r]
        inv = pow(rows[r][col], p - 2, p)
        rows[r] = [x * inv % p for x in rows[r]]
        for i in range(g):
            if i != r and rows[i][col]:
                f = rows[i][col]
                rows[i] = [(x - f * y) % p for x, y in zip(rows[i], rows[r])]
        pivots.append(r)
        r += 1
    if any(rows[i][q] for i in range(r, g)):
        return None
    return tuple(rows[i][q] for i in pivots)


def is_constellation(vectors: Sequence[Sequence[int]], g: int, p: int) -> bool:
    """True iff every g-element subset of ``vectors`` is a basis of F_p^g.

    Exhaustive over subsets; meant for at most ~20 vectors.
    """
    vecs = [_ints(v) for v in vectors]
    if len(vecs) < g:
        return False
    return all(rank(sub, p) == g for sub in combinations(vecs, g))


@dataclass(frozen=True)
class DiagMatrix:
    diag: tuple[int, ...]
    p: int

    def __post_init__(self):
        d = tuple(int(x) % self.p for x in self.diag)
        if any(x == 0 for x in d):
            raise ValueError("diagonal matrix must be invertible")
        object.__setattr__(self, "diag", d)

    def apply(self, v: Sequence[int]) -> NodeVec:
        return tuple(a * int(x) % self.p for a, x in zip(self.diag, v))

    def is_scalar_multiple_of(self, other: "DiagMatrix") -> bool:
        s = other.diag[0] * pow(self.diag[0], self.p - 2, self.p) % self.p
        return all(s * a % self.p == b for a, b in zip(self.diag, other.diag))


@dataclass(frozen=True)
class Constellation:
    """C(g+1) vectors of F_p^g, any g of which form a basis."""

    vectors: tuple[NodeVec, ...]
    block_size: int
    p: int

    def __post_init__(self):
        vecs = tuple(_ints(v) for v in self.vectors)
        object.__setattr__(self, "vectors", vecs)
        g = len(vecs[0])
        if len(vecs) != self.block_size * (g + 1):
            raise ValueError(f"expected {self.block_size * (g + 1)} vectors, got {len(vecs)}")
        if not is_constellation(vecs, g, self.p):
            raise ValueError("some g vectors are linearly dependent")

    @property
    def g(self) -> int:
        return len(self.vectors[0])


def twist(a: DiagMatrix, cons: Constellation) -> Constellation:
    return Constellation(tuple(a.apply(v) for v in cons.vectors), cons.block_size, cons.p)


def node_to_index(v: Sequence[int], p: int) -> int:
    """Little-endian base-p encoding: coordinate 0 is least significant."""
    idx = 0
    for c in reversed(_ints(v)):
        idx = idx * p + c % p
    return idx


def index_to_node(i: int, p: int, g: int) -> NodeVec:
    if not 0 <= i < p**g:
        raise IndexOutOfRange(f"index {i} outside [0, {p**g})")
    out = []
    for _ in range(g):
        i, c = divmod(i, p)
        out.append(c)
    return tuple(out)
