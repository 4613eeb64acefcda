from fractions import Fraction
from itertools import product

import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given, settings

from ornlab import ff, routing, schedule
from ornlab.routing import LoadMap, PermDemand
from ornlab.schedule import OrnSchedule, PhysEdge, SornSchedule

from .oracles import (as_plain, brute_pseudopath_count, explicit_failover_load,
                      explicit_oblivious_load)

ORN5 = OrnSchedule(5, 2, 1)
SORN5 = SornSchedule(5, 2, 1)
ORN7 = OrnSchedule(7, 2, 2)


def rng(seed=0):
    return np.random.default_rng(seed)


# -- demands and load maps --------------------------------------------------


def test_as_rate_refuses_floats():
    with pytest.raises(TypeError):
        routing.as_rate(0.3)
    assert routing.as_rate("3/10") == Fraction(3, 10)
    with pytest.raises(ValueError):
        routing.as_rate(-1)


def test_perm_demand_validation():
    with pytest.raises(ValueError):
        PermDemand((0, 0, 1), 1)
    d = PermDemand.identity(4, "1/2")
    assert d.sigma == (0, 1, 2, 3) and d.rate == Fraction(1, 2)


def test_demand_from_json():
    assert routing.demand_from_json("[1, 0, 2]", 1).sigma == (1, 0, 2)
    assert routing.demand_from_json('{"sigma": [1, 0]}', 1).sigma == (1, 0)
    for bad in ("[1, 0", '["a"]', "[0, 0]"):
        with pytest.raises(ValueError):
            routing.demand_from_json(bad, 1)
    with pytest.raises(ValueError):
        routing.demand_from_json("[1, 0]", 1, N=3)


def test_demand_random_is_seeded():
    assert routing.demand_random(25, 1, 4) == routing.demand_random(25, 1, 4)


def test_loadmap_arithmetic():
    a = LoadMap.from_mapping(2, 3, {(0, 0): Fraction(1, 3), (2, 1): Fraction(1, 2)})
    b = LoadMap.from_mapping(2, 3, {(0, 0): Fraction(1, 6)})
    c = a + b
    assert c[PhysEdge(0, 0)] == Fraction(1, 2)
    assert c.total() == 1
    assert a.scaled(2)[PhysEdge(2, 1)] == 1
    assert routing.max_load(a) == (Fraction(1, 2), PhysEdge(2, 1))
    assert routing.max_load(LoadMap.zeros(2, 3)) == (Fraction(0), None)
    assert routing.is_feasible(a.scaled(2))
    assert not routing.is_feasible(a.scaled(3))
    assert routing.overloaded_edges(a.scaled(3)) == [PhysEdge(2, 1)]
    with pytest.raises(ValueError):
        LoadMap(1, 1, np.array([[-1]], dtype=object))


def test_loadmap_csv_round_trip():
    d = routing.demand_random(ORN5.N, "1/5", 0)
    load = routing.induced_load_oblivious(ORN5, d)
    text = routing.loadmap_to_csv(load, ORN5)
    assert text.splitlines()[0] == "tail_index,timestep_k,head_index,load_num,load_den"
    assert routing.loadmap_from_csv(text, ORN5.T, ORN5.N) == load
    js = routing.loadmap_to_json(load, ORN5)
    assert len(js["edges"]) == len(load.as_dict())


# -- pseudo-paths -------------------------------------------------------------


def test_pseudopaths_hand_computed():
    # v(0)=(1,0), v(1)=(1,1), v(2)=(1,2) over F_5; target difference (1,1)
    b = ORN5.index((1, 1))
    got = sorted(pp.coefficients for pp in routing.enumerate_pseudopaths(ORN5, 0, b, 0))
    assert got == [(1, 4, 1), (2, 2, 2), (3, 0, 3), (4, 3, 4)]
    # a == b still yields non-degenerate cycles through the three directions
    got = sorted(pp.coefficients for pp in routing.enumerate_pseudopaths(ORN5, 0, 0, 0))
    assert got == [(1, 3, 1), (2, 1, 2), (3, 4, 3), (4, 2, 4)]


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["orn", "sorn"]), st.integers(0, 24), st.integers(0, 24), st.integers(0, 200))
def test_pseudopath_count_matches_brute_force(kind, a, b, t):
    s = ORN5 if kind == "orn" else SORN5
    paths = routing.enumerate_pseudopaths(s, a, b, t)
    assert len(paths) == brute_pseudopath_count(s, a, b, t)
    for pp in paths:
        assert pp.is_sound(s)
        route = pp.route(s)
        assert route.dst == b and route.latency >= 1
        assert all(e.t >= t for e in route.edges)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 48), st.integers(0, 48), st.integers(0, 100))
def test_pseudopath_count_bracket_p7(a, b, t):
    n = len(routing.enumerate_pseudopaths(ORN7, a, b, t))
    assert 5 * 8 <= n <= 6 * 8


def test_first_block_boundary_convention():
    assert routing.first_block(ORN5, 0) == 0
    assert routing.first_block(ORN5, 1) == 1
    assert routing.first_block(ORN5, 4) == 1
    assert routing.first_block(SORN5, 12) == 3
    assert routing.first_block(SORN5, 13) == 6


def brute_rho_minus(s, q, i, e):
    be = e.k // s.block_len
    d = ff.vec_sub(s.node(e.tail), s.node(i), s.p)
    n = 0
    for choice in product(range(s.C), repeat=q):
        vecs = [s.block_vectors(be - q + j)[c] for j, c in enumerate(choice)]
        for al in product(range(s.p), repeat=q):
            if al[0] and ff.combine(al, vecs, s.p) == d:
                n += 1
    return n


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2), st.integers(0, 24), st.integers(0, 24), st.integers(0, 60))
def test_rho_minus_brute(q, i, tail, k):
    e = PhysEdge(tail, k)
    assert routing.rho_minus(ORN5, q, i, e) == (int(i == tail) if q == 0 else brute_rho_minus(ORN5, q, i, e))


def test_rho_plus_sums_to_tail_count():
    """Summed over j, the plus count for q hops is (p-1) p^(q-1) C^q."""
    s = ORN5
    e = PhysEdge(3, 5)
    for q in (1, 2):
        tot = sum(routing.rho_plus(s, q, e, j) for j in range(s.N))
        assert tot == (s.p - 1) * s.p ** (q - 1) * s.C**q


def test_rho_full_dispatch():
    assert routing.pseudopath_count_rho(ORN5, "full", 3, 0, 6, 0) == 4
    with pytest.raises(ValueError):
        routing.pseudopath_count_rho(ORN5, "full", 2, 0, 6, 0)


# -- oblivious loads ------------------------------------------------------------


@pytest.mark.parametrize("kind,relabel", [("orn", False), ("orn", True), ("sorn", False), ("sorn", True)])
def test_oblivious_load_matches_explicit_enumeration(kind, relabel):
    tau = schedule.random_relabel(25, rng(9)) if relabel else None
    s = OrnSchedule(5, 2, 1, tau) if kind == "orn" else SornSchedule(5, 2, 1, tau)
    d = PermDemand.random(s.N, Fraction(1, 5), rng(2))
    load = routing.induced_load_oblivious(s, d)
    assert as_plain(load) == explicit_oblivious_load(s, d)
    assert load.total() == routing.expected_total_load(s, d)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_first_last_hop_bound_is_deterministic(seed):
    d = PermDemand.random(ORN7.N, Fraction(3, 10), rng(seed))
    hl = routing.hop_loads(ORN7, d)
    bound = Fraction(6, 5) * Fraction(3, 10)
    assert hl.hop_max(0) <= bound and hl.hop_max(2) <= bound
    assert hl.total().total() == routing.expected_total_load(ORN7, d)


def test_hop_decomposition_sums_to_load():
    d = PermDemand.random(ORN5.N, 1, rng(5))
    load = routing.induced_load_oblivious(ORN5, d)
    for e, v in list(load.items())[:30]:
        assert sum(routing.hop_flow_decomposition(ORN5, d, e)) == v


def test_scheme_latency_matches_routes():
    worst = 0
    for a, b in product(range(ORN5.N), repeat=2):
        for t in range(ORN5.T):
            for pp in routing.enumerate_pseudopaths(ORN5, a, b, t):
                worst = max(worst, pp.route(ORN5).latency)
    assert routing.scheme_max_latency(ORN5) == worst
    assert worst <= ORN5.C * (ORN5.g + 2) * (ORN5.p - 1)


def test_orn7_latency_bound():
    assert routing.scheme_max_latency(ORN7) <= 48


# -- failover -------------------------------------------------------------------


def test_direct_residue_connects_pair():
    s = SORN5
    c = s.coords
    for a, b in [(0, 6), (3, 17), (24, 12)]:
        diff = (c[b] - c[a]) % s.p
        if not diff.all():
            continue
        for x in range(1, s.n_phases + 1):
            k = int(routing.direct_residue(s, diff, x))
            assert s.table[k, a] == b


@pytest.mark.parametrize("relabel", [False, True])
def test_failover_load_matches_explicit(relabel):
    tau = schedule.random_relabel(25, rng(4)) if relabel else None
    s = SornSchedule(5, 2, 1, tau)
    d = PermDemand.random(s.N, Fraction(1, 10), rng(8))
    assert as_plain(routing.induced_load_failover(s, d)) == explicit_failover_load(s, d)


def test_failover_bound_and_latency():
    s = SornSchedule(7, 2, 1)
    d = PermDemand.random(s.N, Fraction(1, 10), rng(1))
    fl = routing.failover_hop_loads(s, d)
    bound = Fraction(1, 10) * 3 * 36 / Fraction(25)
    assert fl.hop_max(0) <= bound and fl.hop_max(1) <= bound
    # starts just after a frame boundary wait almost a full frame
    worst = 0
    for a in range(0, s.N, 4):
        for ch in routing.failover_paths(s, a, d.sigma[a]):
            for t in (0, 1, 50):
                worst = max(worst, ch.route(s, a, t).latency)
    assert worst <= routing.failover_max_latency(s, d) <= 2 * s.T + s.frame_len


def test_failover_needs_sorn_and_intermediate():
    with pytest.raises(TypeError):
        routing.failover_paths(ORN5, 0, 1)


# -- semi-oblivious and mixed ------------------------------------------------


def test_semi_oblivious_mode_selection():
    s = SornSchedule(7, 2, 1)
    for r in (Fraction(1, 10), Fraction(3, 10)):
        d = PermDemand.random(s.N, r, rng(3))
        dec = routing.semi_oblivious_route(s, d)
        primary = routing.induced_load_oblivious(s, d)
        if routing.is_feasible(primary):
            assert dec.mode is routing.Mode.G_PLUS_ONE_HOP and dec.load == primary
        else:
            assert dec.mode is routing.Mode.TWO_HOP_FAILOVER
            assert dec.overloaded_edges == routing.overloaded_edges(primary)


def test_contention_parameters():
    s = SornSchedule(17, 2, 1)
    r = Fraction(3, 10)
    eps = 4 - Fraction(10, 3)
    assert routing.contention_threshold(s, r) == (1 + (1 - eps) / 6) * 3 * r
    assert routing.contention_kmax(s, r) == int((1 - eps) * 225 / 64)


def test_mixed_matches_explicit_with_forced_hot_set(monkeypatch):
    s = SORN5
    d = PermDemand.random(s.N, Fraction(1, 10), rng(6))
    hot = frozenset({1})
    monkeypatch.setattr(routing, "contentious_constellations", lambda sched, dem: (hot, 1))
    dec = routing.mixed_route(s, d)
    assert dec.applied
    from collections import defaultdict
    want = defaultdict(Fraction)
    F = s.n_constellations
    for a in range(s.N):
        b = d.sigma[a]
        choices = routing.failover_paths(s, a, b)
        for t in range(s.T):
            if (-(-t // s.frame_len)) % F in hot:
                for ch in choices:
                    for e in ch.route(s, a, t).physical:
                        want[(e.tail, e.t % s.T)] += d.rate * ch.weight
            else:
                paths = routing.enumerate_pseudopaths(s, a, b, t)
                for pp in paths:
                    for e in pp.route(s).physical:
                        want[(e.tail, e.t % s.T)] += d.rate / len(paths)
    assert as_plain(dec.load) == {k: v for k, v in want.items() if v}


def test_mixed_falls_back_when_too_many_hot():
    s = SornSchedule(7, 2, 1)
    d = PermDemand.random(s.N, Fraction(3, 10), rng(0))
    dec = routing.mixed_route(s, d)
    if len(dec.contentious) > dec.k_max:
        assert not dec.applied and dec.load == routing.induced_load_failover(s, d)


def test_rho_minus_totals_and_range_p7():
    e = PhysEdge(5, 30)
    for q in (1, 2):
        vals = [routing.rho_minus(ORN7, q, i, e) for i in range(ORN7.N)]
        assert sum(vals) == 6 * 7 ** (q - 1) * 2**q
    assert set(routing.rho_minus(ORN7, 1, i, e) for i in range(ORN7.N)) <= {0, 1, 2}


def test_sorn_edges_carry_one_hop_index():
    d = PermDemand.random(SORN5.N, 1, rng(11))
    hl = routing.hop_loads(SORN5, d)
    assert ((hl.numer != 0).sum(axis=0) <= 1).all()


def test_valid_intermediates_lower_bound():
    a, b = 0, SORN5.index((1, 1))
    vias = {ch.via for ch in routing.failover_paths(SORN5, a, b)}
    assert len(vias) >= (SORN5.p - 2) ** SORN5.g


def test_unit_load_is_feasible():
    assert routing.is_feasible(LoadMap.from_mapping(1, 2, {(0, 0): 1}))


def test_worked_latencies():
    assert routing.scheme_max_latency(ORN5) <= 16
    d = PermDemand.random(SORN5.N, 1, rng(0))
    assert routing.failover_max_latency(SORN5, d) <= 108


def test_saturating_demand_fails_over():
    s = SornSchedule(7, 2, 1)
    d = routing.demand_random(s.N, Fraction(3, 10), 0)
    dec = routing.semi_oblivious_route(s, d)
    assert dec.mode is routing.Mode.TWO_HOP_FAILOVER and dec.overloaded_edges
    assert routing.is_feasible(dec.load) is (routing.max_load(dec.load)[0] <= 1)


def test_zero_rate_has_no_contention():
    s = SornSchedule(7, 2, 1)
    hot, kmax = routing.contentious_constellations(s, PermDemand.identity(s.N, 0))
    assert hot == frozenset() and kmax == 0
