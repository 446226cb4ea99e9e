from fractions import Fraction
from math import comb, factorial

import mpmath
import pytest
from flint import arb

from xijensen.asymptotics import (
    GmEstimate,
    Pi_value,
    Adk_via_A2,
    Qm_leading,
    Qm_partition,
    Z_poly,
    check_G2_relation,
    cdnj_envelope,
    fit_Gm,
    partitions,
    predict_Adk,
    sigma_diff,
    turan_cdnj_bound_report,
    ymk,
)
from xijensen.errors import TruncationUnsound
from xijensen.jensen import A_coeffs, hermite_expand
from xijensen.precision import from_fraction, workprec
from xijensen.xi_taylor import GammaTable

from oracles import q_series


def _f(x: arb) -> float:
    return float(x.mid())


def _mp(x: arb) -> mpmath.mpf:
    return mpmath.mpf(x.mid().str(60, radius=False))


# -- fitting ---------------------------------------------------------------------------------


def test_fit_recovers_synthetic_quadratic():
    M = 40
    with workprec(256):
        values = {M - j: (-arb(j * j)).exp() for j in range(0, M + 1)}
    est = fit_Gm(M, 6, GammaTable.from_values(values), None)
    assert abs(_f(est.a[1]) + 1) < 1e-20
    for m in (1, 3, 4, 5, 6):
        assert abs(_f(est.a[m - 1])) < 1e-20
    assert est.fit_residual < 1e-20


def test_fit_at_moderate_M(table, ctx):
    est = fit_Gm(400, 8, table, ctx)
    assert est.nodes == 16
    assert abs(_f(est.Gm(2)) - 1) < 0.01
    with pytest.raises(TruncationUnsound):
        est.Gm(9)


def test_G2_relation_on_synthetic_quadratic():
    D = from_fraction(Fraction(1, 20))
    est = GmEstimate.synthetic(100, [0, 1, 0, 0], D)
    rep = check_G2_relation(100, est)
    with workprec(256):
        assert rep.observed.overlaps(-D * D)


def test_G2_relation_residual_shrinks_like_delta4(table, ctx):
    obs = [_f(check_G2_relation(M, fit_Gm(M, 12, table, ctx)).observed) for M in (500, 1000)]
    assert 3 <= obs[0] / obs[1] <= 5


# -- exact combinatorics ------------------------------------------------------------------------


def test_sigma_diff_examples():
    assert sigma_diff(2, lambda x: x * x) == 2
    assert sigma_diff(3, lambda x: x * x) == 0
    assert sigma_diff(4, lambda x: x**4) == 24
    assert sigma_diff(3, [0, 1, 8, 27]) == 6


def test_ymk_examples():
    assert ymk(3, 2) == 6 == factorial(2) * comb(3, 2)
    assert ymk(5, 3) == 150 == sigma_diff(3, lambda x: x**5)
    assert ymk(2, 5) == 0


@pytest.mark.parametrize("m,k", [(7, 3), (10, 4), (12, 6)])
def test_ymk_is_k_factorial_times_stirling2(m, k):
    # Stirling numbers of the second kind by the triangle recurrence
    S = [[0] * (k + 1) for _ in range(m + 1)]
    S[0][0] = 1
    for i in range(1, m + 1):
        for j in range(1, min(i, k) + 1):
            S[i][j] = j * S[i - 1][j] + S[i - 1][j - 1]
    assert ymk(m, k) == factorial(k) * S[m][k]


def test_Pi_examples():
    assert all(Pi_value(i, 1) == 1 for i in range(1, 11))
    assert Pi_value(2, 5) == 4 == Fraction(3 * 5 + 1, 4)
    assert all(Pi_value(i, k) <= k ** (i - 1) for i in range(1, 11) for k in range(1, 31))


def test_partition_counts():
    assert [sum(1 for _ in partitions(m)) for m in range(9)] == [1, 1, 2, 3, 5, 7, 11, 15, 22]
    assert all(p.m == 6 for p in partitions(6))


# -- Q_m ------------------------------------------------------------------------------------------


def test_Q_trivial_cases(table, ctx):
    est = fit_Gm(500, 8, table, ctx)
    assert Qm_partition(0, 500, est) == 1
    with workprec(256):
        assert Qm_partition(1, 500, est).overlaps(est.G1_tilde * est.Delta**2)


@pytest.mark.parametrize("m", [2, 4, 7])
def test_Q_partition_matches_series_composition(table, ctx, m):
    est = fit_Gm(500, 8, table, ctx)
    with mpmath.workdps(60):
        oracle = q_series(est, m)
        assert abs(_mp(Qm_partition(m, 500, est)) / oracle - 1) < mpmath.mpf(10) ** -30


def test_Q_leading_synthetic_even_case():
    D = from_fraction(Fraction(1, 8))
    est = GmEstimate.synthetic(100, [0, 1, 0, 0], D)
    with workprec(256):
        expected = -D * D * (1 - from_fraction(Fraction(2, 4)) * D * D)
        assert Qm_leading(2, 100, est).overlaps(expected)


def test_Q_leading_m2_close_to_partition_sum(table, ctx):
    est = fit_Gm(500, 8, table, ctx)
    diff = abs(_f(Qm_leading(2, 500, est)) - _f(Qm_partition(2, 500, est)))
    assert diff <= 10 * _f(est.Delta) ** 4


def test_Q_leading_m3_ratio_improves(table, ctx):
    gaps = []
    for M in (500, 1000, 2000):
        est = fit_Gm(M, 8, table, ctx)
        gaps.append(abs(_f(Qm_leading(3, M, est) / Qm_partition(3, M, est)) - 1))
    assert gaps[0] > gaps[1] > gaps[2]


# -- A_{d,k} -------------------------------------------------------------------------------------


def test_Adk_k0_is_one(table, ctx):
    assert Adk_via_A2(6, 0, 60, fit_Gm(66, 8, table, ctx))[0] == 1


def test_Adk_via_A2_agrees_with_A1(table, ctx):
    est = fit_Gm(66, 8, table, ctx)
    v, note = Adk_via_A2(6, 3, 60, est)
    direct = A_coeffs(6, 60, table, ctx).A[3]
    assert abs(_f(v) / _f(direct) - 1) <= 1e-2
    assert "m=7" in note


def test_Adk_via_A2_needs_enough_Gm(table, ctx):
    with pytest.raises(TruncationUnsound):
        Adk_via_A2(6, 5, 60, fit_Gm(66, 8, table, ctx))


def test_Z_poly_values():
    G3, G4 = Fraction(7, 10), Fraction(3, 5)
    est = GmEstimate.synthetic(100, [0, 1, G3, G4], Fraction(1, 10))
    assert Z_poly(0, est) == 0 and Z_poly(1, est) == 0
    with workprec(256):
        expected = 2 * from_fraction(Fraction(-16, 3) + 4 * G3 - G4)
        assert Z_poly(2, est).overlaps(expected)


def test_predict_odd_k_improves_with_n(table, ctx):
    gaps = []
    for n in (100, 200, 400):
        rep = predict_Adk(10, 3, n, fit_Gm(n + 10, 8, table, ctx), table, ctx)
        gaps.append(abs(_f(rep.ratio) - 1))
        assert rep.expected_error_power == 3
    assert gaps[0] > gaps[1] > gaps[2]


def test_predict_flags_small_n(table, ctx):
    rep = predict_Adk(4, 4, 100, fit_Gm(104, 8, table, ctx), table, ctx)
    assert any("10k^3" in f for f in rep.flags)


# -- Hermite coordinates against the envelope ------------------------------------------------------


def test_c1_c2_vanish(table, ctx):
    c = hermite_expand(A_coeffs(10, 200, table, ctx))
    assert c[1].contains(0) and c[2].contains(0)


def test_c3_follows_odd_main_term(table, ctx):
    d, gaps = 14, []
    for n in (100, 400):
        nc = A_coeffs(d, n, table, ctx)
        est = fit_Gm(n + d, 8, table, ctx)
        with workprec(256):
            main = -factorial(d) // factorial(d - 3) * (est.Gm(3) - 2) * nc.Delta
            gaps.append(abs(_f(hermite_expand(nc)[3] / main) - 1))
    assert gaps[1] < gaps[0] <= 0.05


def _ratios(table, ctx, d, n) -> dict:
    return turan_cdnj_bound_report(d, n, None, table, ctx).params["ratios"]


def test_envelope_stable_where_main_terms_cancel(table, ctx):
    # odd j >= 5 and even j >= 8: ratio to the envelope stays put as n varies
    base = _ratios(table, ctx, 14, 200)
    for n in (100, 400, 500):
        r = _ratios(table, ctx, 14, n)
        for j in [5, 7, 8, 9, 10, 11, 12, 13, 14]:
            assert 0.25 <= r[j] / base[j] <= 4, (n, j)


@pytest.mark.xfail(strict=True, reason="c_3, c_4, c_6 carry O(Delta) / O(Delta^2) main terms (see decisions ledger)")
def test_envelope_stable_for_small_j(table, ctx):
    lo, hi = _ratios(table, ctx, 14, 100), _ratios(table, ctx, 14, 500)
    for j in (3, 4, 6):
        assert hi[j] / lo[j] <= 2, j


def test_envelope_shape():
    D = arb(1)
    assert cdnj_envelope(10, 4, D, Fraction(1)) == factorial(10) // (factorial(6) * 2) * 64 * 17**2
    assert cdnj_envelope(10, 3, D, Fraction(1)) == factorial(10) // factorial(7) * 17
