from itertools import combinations, product

import hypothesis.strategies as st
import pytest
from hypothesis import given, settings

from ornlab import ff, schedule

from .oracles import brute_rank

PRIMES = [2, 3, 5, 7, 11, 13]


def test_is_prime_small():
    assert [n for n in range(30) if ff.is_prime(n)] == [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]


def test_prime_field_rejects_composite():
    with pytest.raises(ValueError):
        ff.PrimeField(9)


@given(st.sampled_from(PRIMES), st.integers(), st.integers())
def test_fp_arithmetic_matches_integers(p, a, b):
    F = ff.PrimeField(p)
    x, y = F(a), F(b)
    assert int(x + y) == (a + b) % p
    assert int(x - y) == (a - b) % p
    assert int(x * y) == (a * b) % p
    if b % p:
        assert (x / y) * y == x


@given(st.sampled_from(PRIMES), st.integers(1, 10**6))
def test_inverse(p, a):
    if a % p == 0:
        return
    assert a * ff.PrimeField(p).inv(a) % p == 1


def test_vandermonde_values():
    assert ff.vandermonde(3, 3, 7) == (1, 3, 2)
    assert ff.vandermonde(0, 2, 5) == (1, 0)


@given(st.sampled_from([2, 3, 5, 7]), st.integers(1, 3), st.data())
def test_index_round_trip(p, g, data):
    i = data.draw(st.integers(0, p**g - 1))
    assert ff.node_to_index(ff.index_to_node(i, p, g), p) == i


def test_index_out_of_range():
    with pytest.raises(ff.IndexOutOfRange):
        ff.index_to_node(25, 5, 2)


def test_little_endian():
    assert ff.node_to_index((1, 0), 5) == 1
    assert ff.node_to_index((0, 1), 5) == 5


@settings(max_examples=60)
@given(st.sampled_from([2, 3, 5]), st.integers(1, 3), st.data())
def test_rank_matches_span_enumeration(p, g, data):
    vecs = data.draw(st.lists(st.tuples(*[st.integers(0, p - 1)] * g), min_size=1, max_size=3))
    assert ff.rank(vecs, p) == brute_rank(vecs, p)


@settings(max_examples=80)
@given(st.sampled_from([3, 5, 7, 11]), st.integers(2, 3), st.data())
def test_solve_coeffs_round_trip(p, g, data):
    basis = [ff.vandermonde(x, g, p) for x in data.draw(st.lists(st.integers(0, p - 1), min_size=g, max_size=g, unique=True))]
    target = data.draw(st.tuples(*[st.integers(0, p - 1)] * g))
    alpha = ff.solve_coeffs(basis, target, p)
    assert ff.combine(alpha, basis, p) == target


def test_singular_basis():
    with pytest.raises(ff.SingularBasis):
        ff.solve_coeffs([(1, 2), (2, 4)], (1, 1), 5)


def test_solve_in_span():
    p = 5
    vecs = [(1, 0, 0), (0, 1, 0)]
    assert ff.solve_in_span(vecs, (3, 4, 0), p) == (3, 4)
    assert ff.solve_in_span(vecs, (0, 0, 1), p) is None
    assert ff.solve_in_span([], (0, 0, 0), p) == ()


@pytest.mark.parametrize("p", [5, 7])
def test_vandermonde_sets_are_constellations(p):
    for g in (2, 3):
        vecs = [ff.vandermonde(x, g, p) for x in range(p)]
        assert ff.is_constellation(vecs, g, p)


def test_non_constellation_detected():
    assert not ff.is_constellation([(1, 0), (2, 0), (0, 1)], 2, 5)


def test_twist_preserves_constellation_and_scalars_collapse():
    p, g = 7, 2
    cons = ff.Constellation(tuple(ff.vandermonde(x, g, p) for x in range(3)), 1, p)
    fam = schedule.diagonal_family(p, g)
    assert len(fam) == (p - 1) ** (g - 1)
    for A in fam:
        assert ff.is_constellation(ff.twist(A, cons).vectors, g, p)
    # no two family members differ by a scalar
    for A, B in combinations(fam, 2):
        assert not A.is_scalar_multiple_of(B)


def test_diag_must_be_invertible():
    with pytest.raises(ValueError):
        ff.DiagMatrix((1, 0), 5)


def test_combine_is_linear():
    p = 7
    vecs = [(1, 2), (3, 4), (5, 6)]
    for c in product(range(p), repeat=3):
        expect = tuple(sum(ci * v[j] for ci, v in zip(c, vecs)) % p for j in range(2))
        assert ff.combine(c, vecs, p) == expect


def test_worked_examples():
    assert ff.vandermonde(2, 3, 5) == (1, 2, 4)
    assert ff.solve_coeffs([(1, 1), (1, 2)], (1, 0), 5) == (2, 4)
    assert ff.is_constellation([ff.vandermonde(x, 2, 5) for x in range(3)], 2, 5)
    cons = ff.Constellation(((1, 0), (1, 1), (1, 2)), 1, 5)
    assert ff.twist(ff.DiagMatrix((2, 3), 5), cons).vectors == ((2, 0), (2, 3), (2, 1))
