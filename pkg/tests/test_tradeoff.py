import math
from fractions import Fraction

import hypothesis.strategies as st
import mpmath
import numpy as np
import pytest
from hypothesis import given, settings

from ornlab import routing, schedule, tradeoff
from ornlab.schedule import OrnSchedule, SornSchedule

mpmath.mp.dps = 50

ORN5 = OrnSchedule(5, 2, 1)


# -- parameters -------------------------------------------------------------------


def test_params_worked_examples():
    assert tradeoff.exact_g_eps(Fraction(3, 10)) == (2, Fraction(2, 3))
    assert tradeoff.exact_g_eps(Fraction(11, 50)) == (3, Fraction(5, 11))
    assert tradeoff.exact_h_eps_o(Fraction(11, 50)) == (2, Fraction(8, 11))
    p = tradeoff.derive_params(Fraction(3, 10), 7)
    assert (p.g, p.eps, p.N, p.theta) == (2, Fraction(2, 3), 49, 3)


@given(st.integers(2, 60))
def test_integral_inverse_rate_rejected(n):
    with pytest.raises(tradeoff.EpsilonOne):
        tradeoff.derive_params(Fraction(1, n), 101)


@settings(max_examples=200)
@given(st.fractions(Fraction(1, 60), Fraction(1, 2)))
def test_g_eps_identities(r):
    if r == 0 or (1 / r).denominator == 1:
        return
    g, eps = tradeoff.exact_g_eps(r)
    assert 0 < eps < 1
    assert r == 1 / (g + 2 - eps)
    assert Fraction(1, g + 2) < r < Fraction(1, g + 1)


def test_strict_mode_names_each_violation():
    with pytest.raises(tradeoff.PrimeTooSmall) as exc:
        tradeoff.derive_params(Fraction(3, 10), 7, mode=schedule.SORN, C=1, strict=True)
    msg = str(exc.value)
    # (g+3)/eps - 2 = 5.5 < 7 holds; the other two fail
    assert "p > 2 + 2/(1-eps)" in msg and "p > (2-delta)/(1-delta)" in msg
    assert "(g+3)/eps" not in msg and "p > C(g+1)" not in msg


def test_hypothesis_values_sorn():
    p = tradeoff.derive_params(Fraction(3, 10), 7, mode=schedule.SORN, C=1)
    rhs = {c.name: c.rhs for c in p.checks}
    assert rhs["p > 2 + 2/(1-eps)"] == pytest.approx(8.0)
    assert rhs["p > (g+3)/eps - 2"] == pytest.approx(5.5)
    delta = (3 / (4 - 2 / 3)) ** 0.5
    assert rhs["p > (2-delta)/(1-delta)"] == pytest.approx((2 - delta) / (1 - delta))


def test_gamma_undefined_gives_no_C():
    # p = 7 <= 2 + 2/(1 - 2/3) = 8 makes the ORN log argument non-positive
    p = tradeoff.derive_params(Fraction(3, 10), 7)
    assert p.C is None and not p.hypotheses_hold


def test_C_from_gamma_natural_logs():
    N = 10**6
    gamma = 0.2
    want = math.ceil(math.log(math.log(N)) * math.log(N) / gamma**2)
    assert tradeoff.c_from_gamma(N, gamma) == want
    assert tradeoff.c_from_gamma(N, -0.1) is None


def test_large_prime_passes_every_hypothesis():
    # C grows like log^2 p, so the derived C fits only for a large prime
    assert tradeoff.derive_params(Fraction(3, 10), 10007).hypotheses_hold
    assert not tradeoff.derive_params(Fraction(3, 10), 10007, mode=schedule.SORN).hypotheses_hold
    p = tradeoff.derive_params(Fraction(3, 10), 30011, mode=schedule.SORN)
    assert p.C is not None and p.C * (p.g + 1) < p.p
    assert p.hypotheses_hold


# -- curves -------------------------------------------------------------------------


def mp_curves(r, N):
    """Independent multi-precision evaluation of every curve at rate r."""
    r = mpmath.mpf(r.numerator) / r.denominator
    N = mpmath.mpf(N)
    inv = 1 / r
    g = int(mpmath.floor(inv - 1))
    eps = g + 2 - inv
    h = int(mpmath.floor(inv / 2))
    eo = h + 1 - inv / 2
    return {
        "L_upp": g * N ** (mpmath.mpf(1) / g),
        "L_low": g * ((eps * N) ** (mpmath.mpf(1) / g) + N ** (mpmath.mpf(1) / (g + 1))),
        "L_sem": eps * (eps * N) ** (mpmath.mpf(1) / g) + N ** (mpmath.mpf(1) / (g + 1)),
        "L_obl": eo * (eo * N) ** (mpmath.mpf(1) / h) + N ** (mpmath.mpf(1) / (h + 1)),
        "vlb_line": h * N ** (mpmath.mpf(1) / h),
    }


def test_curve_worked_example():
    assert tradeoff.curve(Fraction(3, 10), 10**4, "Lupp") == pytest.approx(200)


@settings(max_examples=100)
@given(st.integers(1, 400))
def test_curves_match_multiprecision(i):
    r = Fraction(i, 800)
    if (1 / r).denominator == 1 or (1 / (2 * r)).denominator == 1:
        return
    row = tradeoff.curve_row(r, 1e20)
    ref = mp_curves(r, 10**20)
    for k, v in ref.items():
        assert abs(row[k] - float(v)) <= 1e-12 * float(v)


def test_curve_grid_excludes_integral_inverse():
    grid = tradeoff.curve_grid(1e20, 200)
    assert all((1 / r).denominator != 1 for r in grid)
    assert max(grid) < Fraction(1, 2) and min(grid) > 0


def test_half_ratio_holds_where_claimed():
    for r in tradeoff.curve_grid(1e20, 1000):
        g, eps = tradeoff.exact_g_eps(r)
        if eps >= Fraction(1, 2**g):
            row = tradeoff.curve_row(r, 1e20)
            assert row["L_low"] >= row["L_upp"] / 2


def test_unknown_curve():
    with pytest.raises(ValueError):
        tradeoff.curve(Fraction(3, 10), 100, "nope")


# -- counting lemma ----------------------------------------------------------


def test_counting_bound_example():
    assert tradeoff.counting_bound(12, 2) == tradeoff.CountingBound(132, True)
    assert not tradeoff.counting_bound(5, 2).asserted


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(["orn", "sorn"]), st.integers(0, 24), st.integers(0, 47), st.integers(3, 30), st.data())
def test_counting_lemma(kind, a, t0, L, data):
    h = data.draw(st.integers(0, L // 3))
    s = ORN5 if kind == "orn" else SornSchedule(5, 2, 1)
    assert len(schedule.reachable_set(s, a, t0, L, h)) <= 2 * math.comb(L, h)


# -- dual bound ---------------------------------------------------------------------


def brute_heavy(sched, sigma, theta, L):
    """Per (source, start) forward and backward hop-count sweeps."""
    T, N = sched.T, sched.N
    inf = 10**9
    heavy = np.zeros((T, N), dtype=bool)
    for u in range(N):
        dst = sigma[u]
        for t0 in range(T):
            fwd = [None] * (L + 1)
            cur = np.full(N, inf)
            cur[u] = 0
            for tau in range(L + 1):
                fwd[tau] = cur.copy()
                if tau < L:
                    nxt = cur.copy()
                    perm = sched.table[(t0 + tau) % T]
                    np.minimum.at(nxt, perm, cur + 1)
                    cur = nxt
            need = [None] * (L + 1)
            back = np.full(N, inf)
            back[dst] = 0
            need[L] = back.copy()
            for tau in range(L - 1, -1, -1):
                perm = sched.table[(t0 + tau) % T]
                back = np.minimum(back, 1 + back[perm])
                need[tau] = back.copy()
            for tau in range(L):
                k = (t0 + tau) % T
                perm = sched.table[k]
                ok = fwd[tau] + 1 + need[tau + 1][perm] <= theta
                heavy[k] |= ok
    return heavy


@pytest.mark.parametrize("theta,L", [(1, 6), (2, 8), (3, 10)])
def test_classify_edges_matches_brute(theta, L):
    sigma = tuple(int(x) for x in np.random.default_rng(theta).permutation(ORN5.N))
    got = tradeoff.classify_edges(ORN5, sigma, theta, L)
    assert (got == brute_heavy(ORN5, sigma, theta, L)).all()


def test_dual_bound_formula():
    sigma = tuple(int(x) for x in np.random.default_rng(0).permutation(ORN5.N))
    theta, L = 3, 10
    db = tradeoff.dual_throughput_bound(ORN5, sigma, theta, L)
    fixed = sum(i == s for i, s in enumerate(sigma))
    assert db.value == Fraction(ORN5.T * ORN5.N + theta * db.n_heavy, (ORN5.N - fixed) * ORN5.T * (theta + 1))
    with pytest.raises(ValueError):
        tradeoff.dual_throughput_bound(ORN5, tuple(range(ORN5.N)), theta, L)


def test_weak_duality_small():
    L = routing.scheme_max_latency(ORN5)
    tables = tradeoff._reach_tables(ORN5, 3, L)
    for seed in range(5):
        d = routing.demand_random(ORN5.N, 1, seed)
        ml, _ = routing.max_load(routing.induced_load_oblivious(ORN5, d))
        assert 1 / ml <= tradeoff.dual_throughput_bound(ORN5, d.sigma, 3, L, tables).value


def test_closed_form_special_case():
    for N in (10, 100, 10**6):
        assert tradeoff.closed_form_dual(N, 1, 5) == pytest.approx((1 + 4 / N) / 2)
    assert tradeoff.closed_form_dual(10**12, 1, 5) == pytest.approx(0.5)


def test_expected_dual_is_reproducible():
    a = tradeoff.expected_dual_bound(ORN5, 2, 6, 4, 3)
    b = tradeoff.expected_dual_bound(ORN5, 2, 6, 4, 3)
    assert a == b and len(a.values) == 4


# -- latency lower bound ------------------------------------------------------------


def mp_maxlat(r, N, d):
    r = mpmath.mpf(r.numerator) / r.denominator
    theta = int(mpmath.floor(1 / r))
    k = theta - 1
    inner = ((N**d - 1) / mpmath.mpf(N) ** d * r - mpmath.mpf(1) / (theta + 1)) * mpmath.sqrt(2 * mpmath.pi * k) / (4 * theta)
    return k / (2 * mpmath.e) * mpmath.mpf(N) ** (mpmath.mpf(1) / k) * inner ** (mpmath.mpf(1) / k)


def test_maxlat_lowerbound_matches_multiprecision():
    for r in (Fraction(3, 10), Fraction(11, 50), Fraction(2, 9)):
        v = tradeoff.maxlat_lowerbound(r, 1e6, 1)
        assert v > 0 and math.isfinite(v)
        assert v == pytest.approx(float(mp_maxlat(r, 10**6, 1)), rel=1e-12)


def test_maxlat_lowerbound_edge_cases():
    with pytest.raises(tradeoff.EpsilonOne):
        tradeoff.maxlat_lowerbound(Fraction(1, 3), 1e6)
    # with N^d tiny the bracket turns negative and the bound is vacuous
    assert tradeoff.maxlat_lowerbound(Fraction(3, 10), 2, 0.01) == 0.0
