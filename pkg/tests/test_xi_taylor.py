import math
from functools import lru_cache

import mpmath
import pytest
from flint import arb

from xijensen.errors import MissingCoefficient
from xijensen.precision import PrecCtx, workprec
from xijensen.xi_taylor import (
    GammaTable,
    Provenance,
    eval_F,
    gamma,
    gamma0_direct,
    gamma_asym,
    solve_L,
)


def _mp(x: arb, digits: int = 80) -> mpmath.mpf:
    return mpmath.mpf(x.mid().str(digits, radius=False))


# -- independent oracles (mpmath only) ----------------------------------------------------


def _xi(s):
    return s * (s - 1) / 2 * mpmath.pi ** (-s / 2) * mpmath.gamma(s / 2) * mpmath.zeta(s)


def _phi(u):
    # Riemann's kernel: Xi(x/2) = 8 int_0^oo Phi(t) cos(x t) dt
    e4, eu = mpmath.exp(4 * u), mpmath.exp(u)
    return sum(
        (2 * mpmath.pi**2 * n**4 * e4 * e4 - 3 * mpmath.pi * n**2 * e4) * eu * mpmath.exp(-mpmath.pi * n * n * e4)
        for n in range(1, 7)
    )


@lru_cache(maxsize=None)
def _gamma_phi(j: int) -> mpmath.mpf:
    """gamma(j) = 8 4^j j!/(2j)! int_0^oo Phi(u) u^(2j) du; Phi < e^(-500000) beyond u = 3."""
    with mpmath.workdps(80):
        I = mpmath.quad(lambda u: _phi(u) * u ** (2 * j), mpmath.linspace(0, 3, 31))
        return 8 * 4**j * mpmath.factorial(j) / mpmath.factorial(2 * j) * I


# -- gamma -----------------------------------------------------------------------------------


@pytest.mark.parametrize("M", [0, 1, 2, 5, 20, 50])
def test_gamma_matches_phi_kernel_oracle(table, ctx, M):
    v = table.get(M, ctx)
    with mpmath.workdps(80):
        assert abs(_mp(v) / _gamma_phi(M) - 1) < mpmath.mpf(10) ** -40


@pytest.mark.parametrize("M", [1, 2])
def test_gamma_matches_xi_taylor_series(table, ctx, M):
    with mpmath.workdps(60):
        coeffs = mpmath.taylor(lambda z: _xi(mpmath.mpf(0.5) + z), 0, 2 * M)
        oracle = math.factorial(M) * coeffs[2 * M]
        assert abs(_mp(table.get(M, ctx)) / oracle - 1) < mpmath.mpf(10) ** -25


def test_gamma0_matches_zeta_and_gamma_values():
    v = gamma0_direct(PrecCtx(256))
    with mpmath.workdps(90):
        oracle = -mpmath.pi ** mpmath.mpf(-0.25) * mpmath.gamma(mpmath.mpf(0.25)) * mpmath.zeta(mpmath.mpf(0.5)) / 8
        assert abs(_mp(v) / oracle - 1) < mpmath.mpf(10) ** -70
    assert float(v.rad()) / float(v.mid()) <= 1e-30


def test_gamma0_low_precision_and_nesting():
    lo = gamma0_direct(PrecCtx(128))
    hi = gamma0_direct(PrecCtx(512))
    assert round(float(lo.mid()), 3) == 0.497
    assert lo.contains(hi)
    assert lo > 0 and hi > 0


def test_gamma_1_from_two_F_values():
    c = PrecCtx(200)
    F0, F2 = eval_F(0, c), eval_F(2, c)
    with workprec(240):
        # gamma(1) = 1!/2! * (32 C(2,2) F(0) - F(2)) / 2^4
        expected = (32 * F0 - F2) / 32
    g = gamma(1, c)
    assert g.overlaps(expected)
    assert g > 0


def test_gamma_enclosures_nest_across_precisions():
    lo = gamma(5, PrecCtx(128))
    hi = gamma(5, PrecCtx(512))
    assert lo.contains(hi)
    assert float(hi.rad()) < float(lo.rad())


def test_gamma_rejects_nonpositive_index():
    with pytest.raises(ValueError):
        gamma(0, PrecCtx())


# -- F(z) -------------------------------------------------------------------------------------


def test_F0_matches_truncated_theta_quadrature():
    v = eval_F(0, PrecCtx(128))
    with mpmath.workdps(50):
        f = lambda t: t ** mpmath.mpf(-0.75) * sum(mpmath.exp(-mpmath.pi * k * k * t) for k in range(1, 11))
        oracle = mpmath.quad(f, [1, 2, 4, 8, 16, 40])
        # closed form per theta term as a second opinion
        closed = sum((mpmath.pi * k * k) ** mpmath.mpf(-0.25) * mpmath.gammainc(0.25, mpmath.pi * k * k) for k in range(1, 11))
        assert abs(oracle - closed) < mpmath.mpf(10) ** -40
        assert abs(_mp(v) / oracle - 1) < mpmath.mpf(10) ** -30


def test_F_truncation_is_monotone():
    c = PrecCtx(128)
    K1 = eval_F(0, c, terms=1, target_rel_error=2.0**-10)
    K5 = eval_F(0, c, terms=5, target_rel_error=2.0**-10)
    assert K1.overlaps(K5)
    assert K1.contains(K5) or float(K1.rad()) >= float(K5.rad())


def test_F_positive_at_M10():
    assert eval_F(18, PrecCtx(128)) > 0


def test_F_rejects_negative_argument():
    with pytest.raises(ValueError):
        eval_F(-1, PrecCtx())


# -- L_M and the asymptotic main term -------------------------------------------------------------


def test_solve_L_at_exact_root():
    c = PrecCtx(128)
    with workprec(200):
        M = arb.pi() * arb(1).exp() + arb(0.75)
    assert solve_L(M, c).L.contains(1)


def test_solve_L_large_M_growth():
    L = solve_L(10**6, PrecCtx(128)).L
    ratio = float(L.mid()) / math.log(1e6 / math.log(1e6))
    assert abs(ratio - 1) <= 0.25


def test_solve_L_small_M_residual():
    lk = solve_L(2, PrecCtx(128))
    assert lk.L > 0
    with workprec(160):
        residual = lk.L * (arb.pi() * lk.L.exp() + arb(0.75)) - 2
    assert abs(float(residual.mid())) < 2.0**-60
    # bisection in mpmath as the oracle
    with mpmath.workdps(40):
        root = mpmath.findroot(lambda L: L * (mpmath.pi * mpmath.exp(L) + 0.75) - 2, (0.01, 2), solver="bisect")
        assert abs(_mp(lk.L) - root) < mpmath.mpf(10) ** -30


def test_gamma_asym_ratios(table, ctx):
    r50 = float((table.get(50, ctx) / gamma_asym(50, ctx)).mid())
    assert 0.8 <= r50 <= 1.2
    gaps = [abs(float((table.get(M, ctx) / gamma_asym(M, ctx)).mid()) - 1) for M in (200, 400)]
    assert gaps[0] <= 0.1
    assert gaps[1] <= gaps[0]


def test_gamma_asym_small_M_is_finite_positive():
    v = gamma_asym(2, PrecCtx())
    assert v.is_finite() and v > 0


# -- the table -----------------------------------------------------------------------------------


def test_cache_round_trip(tmp_path):
    c = PrecCtx(128)
    t = GammaTable()
    t.fill(range(0, 8), c)
    path = tmp_path / "cache.txt"
    t.save(path)
    u = GammaTable.load(path)
    assert u.indices() == list(range(8))
    for M in range(8):
        a, b = t.entries[M], u.entries[M]
        assert b.value.contains(a.value) and a.value.mid() == b.value.mid()
        assert (a.bits, a.provenance) == (b.bits, b.provenance)
    assert u.entries[0].provenance is Provenance.DIRECT
    assert u.entries[3].provenance is Provenance.INTEGRAL
    # a reload does not recompute, and a saved reload is byte-identical
    u.save(tmp_path / "again.txt")
    assert (tmp_path / "again.txt").read_text() == path.read_text()


def test_cache_coherent_with_fresh_computation(table, ctx):
    for M in (3, 17, 40):
        fresh = gamma(M, PrecCtx(320))
        assert table.get(M, ctx).overlaps(fresh)


def test_cache_rejects_unknown_header(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("# something else\n")
    with pytest.raises(ValueError):
        GammaTable.load(p)


def test_snapshot_round_trip_keeps_enclosures(table):
    snap = table.snapshot()[:20]
    u = GammaTable.from_snapshot(snap)
    for M, e in u.entries.items():
        old = table.entries[M].value
        assert e.value.mid() == old.mid() and e.value.contains(old)
        assert float(e.value.rad()) <= float(old.rad()) * (1 + 2.0**-28)


def test_synthetic_table_never_recomputes():
    t = GammaTable.from_values({0: 1, 1: 2})
    assert t.get(1, PrecCtx(512)) == 2
    assert t.entries[1].provenance is Provenance.SYNTHETIC
    with pytest.raises(MissingCoefficient):
        t.get(2)


def test_audit_flags_non_log_concave_values():
    t = GammaTable.from_values({0: 1, 1: 1, 2: 2, 3: -1})
    a = t.audit()
    assert a.positivity_failures == [3]
    assert 2 in a.log_concavity_failures
    assert not a.ok


def test_audit_of_real_table_passes(table):
    assert table.audit().ok
