"""Verification suites behind ``xijensen verify`` and ``xijensen threshold-scan``.

Each suite returns a list of :class:`~xijensen.reports.Record`.  Grid suites
evaluate one cell per (d, n) pair and can fan out over worker processes;
every worker rebuilds the gamma table from an exact snapshot.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from math import comb, factorial
from typing import Callable, Iterable, Optional, Sequence

from flint import arb

from .asymptotics import (
    Pi_value,
    check_G2_relation,
    fit_Gm,
    predict_Adk,
    sigma_diff,
    ymk,
)
from .hyperbolicity import Status, certify_hyperbolic, turan_holds, turan_threshold
from .jensen import A_coeffs, delta_unif, hermite_half_poly, normalized_poly
from .precision import PrecCtx, workprec
from .reports import Record, fmt_value
from .xi_taylor import GammaTable, gamma_asym

TIGHT = 1e-20  # radius required of A_{d,1} and A_{d,2} + d(d-1)

Cell = tuple[int, int]

# -- worker plumbing ---------------------------------------------------------------------------

_WORKER: dict = {}


def _init_worker(snap: list, ctx: PrecCtx) -> None:
    _WORKER["table"] = GammaTable.from_snapshot(snap)
    _WORKER["ctx"] = ctx


def _run_cell(args) -> Record:
    fn, cell = args
    return fn(cell, _WORKER["table"], _WORKER["ctx"])


def map_cells(
    fn: Callable[[Cell, GammaTable, PrecCtx], Record],
    cells: Sequence[Cell],
    table: GammaTable,
    ctx: PrecCtx,
    workers: int = 1,
) -> list:
    """Apply ``fn`` to every cell, in order, on up to ``workers`` processes."""
    if workers <= 1 or len(cells) < 2:
        return [fn(c, table, ctx) for c in cells]
    with ProcessPoolExecutor(
        max_workers=workers, initializer=_init_worker, initargs=(table.snapshot(), ctx)
    ) as pool:
        return list(pool.map(_run_cell, [(fn, c) for c in cells], chunksize=8))


def grid(d_values: Iterable[int], n_values: Iterable[int]) -> list:
    n_values = list(n_values)
    return [(d, n) for d in d_values for n in n_values]


# -- Lemma: first three normalized coefficients --------------------------------------------


def _encloses_zero_tightly(x: arb) -> bool:
    return bool(x.contains(0)) and float(x.rad()) <= TIGHT


def lemma23_cell(cell: Cell, table: GammaTable, ctx: PrecCtx) -> Record:
    d, n = cell
    nc = A_coeffs(d, n, table, ctx)
    ok = nc.A[0].is_exact() and nc.A[0] == 1
    worst = nc.A[1].rad()
    ok = ok and _encloses_zero_tightly(nc.A[1])
    if d >= 2:
        with workprec(ctx.bits):
            shifted = nc.A[2] + d * (d - 1)
        worst = max(worst, shifted.rad(), key=float)
        ok = ok and _encloses_zero_tightly(shifted)
    if d <= 2:
        ok = ok and normalized_poly(d, n, table, ctx).overlaps(hermite_half_poly(d))
    return Record("lemma23", {"d": d, "n": n}, observed=worst, passed=bool(ok), note="max radius")


def lemma23(table, ctx, d_values, n_values, workers=1) -> list:
    return map_cells(lemma23_cell, grid(d_values, n_values), table, ctx, workers)


# -- Lemma: finite differences of powers ---------------------------------------------------------


def _y_closed(k: int, i: int) -> Fraction:
    f = factorial(k)
    if i == 0:
        return Fraction(f)
    if i == 1:
        return Fraction(f * comb(k + 1, 2))
    if i == 2:
        return Fraction(f * comb(k + 2, 3) * (3 * k + 1), 4)
    return Fraction(f * comb(k + 3, 4) * (k * k + k), 2)


def _exp_minus_one_power(k: int, order: int) -> list:
    """Exact Taylor coefficients of (e^X - 1)^k up to X^order."""
    base = [Fraction(0)] + [Fraction(1, factorial(i)) for i in range(1, order + 1)]
    out = [Fraction(1)] + [Fraction(0)] * order
    for _ in range(k):
        nxt = [Fraction(0)] * (order + 1)
        for i, a in enumerate(out):
            if a:
                for j in range(1, order + 1 - i):
                    nxt[i + j] += a * base[j]
        out = nxt
    return out


def lemma41(k_max: int = 30, i_max: int = 10) -> list:
    recs = []
    bad = [
        (k, i)
        for k in range(1, k_max + 1)
        for i in range(4)
        if _y_closed(k, i) != sigma_diff(k, lambda x, m=k + i: x**m)
    ]
    recs.append(Record("y_closed_forms", {"k_max": k_max}, observed=len(bad), passed=not bad))
    below = [(m, k) for k in range(0, k_max + 1) for m in range(k) if ymk(m, k) != 0]
    recs.append(Record("y_below_diagonal_zero", {"k_max": k_max}, observed=len(below), passed=not below))
    p1 = [i for i in range(1, i_max + 1) if Pi_value(i, 1) != 1]
    recs.append(Record("P_i(1)=1", {"i_max": i_max}, observed=len(p1), passed=not p1))
    over = [
        (i, k)
        for i in range(1, i_max + 1)
        for k in range(1, k_max + 1)
        if Pi_value(i, k) > k ** (i - 1)
    ]
    recs.append(Record("P_i(k)<=k^(i-1)", {"i_max": i_max, "k_max": k_max}, observed=len(over), passed=not over))
    gf = [
        (k, m)
        for k in range(0, 9)
        for m, c in enumerate(_exp_minus_one_power(k, 20))
        if c != Fraction(ymk(m, k), factorial(m))
    ]
    recs.append(Record("generating_function", {"k_max": 8, "m_max": 20}, observed=len(gf), passed=not gf))
    return recs


# -- Theorem: uniformizer and G_m ----------------------------------------------------------------


def thm21(table, ctx, M_values: Sequence[int], m_max: int = 12) -> list:
    recs = []
    M_values = sorted(M_values)
    gaps = []
    for M in M_values:
        D = delta_unif(M, table, ctx)
        with workprec(ctx.bits):
            scaled = D * arb(2 * M).sqrt()
            ratio = table.get(M, ctx) / gamma_asym(M, ctx)
        recs.append(
            Record("Delta*sqrt(2M)", {"M": M}, observed=scaled, predicted=1,
                   passed=abs(float(scaled.mid()) - 1) <= 0.05)
        )
        gaps.append(abs(float(ratio.mid()) - 1))
        recs.append(Record("gamma/gamma_asym", {"M": M}, observed=ratio, predicted=1, passed=gaps[-1] <= 0.1))
    if len(gaps) > 1:
        mono = all(b < a for a, b in zip(gaps, gaps[1:]))
        recs.append(Record("gamma/gamma_asym_trend", {"M": M_values}, observed=gaps[-1], passed=mono,
                           note="|ratio-1| strictly decreasing in M"))
    rel = []
    for M in M_values:
        est = fit_Gm(M, m_max, table, ctx)
        G2, G3 = est.Gm(2), est.Gm(3)
        recs.append(Record("G_2", {"M": M, "m_max": m_max}, observed=G2, predicted=1,
                           passed=abs(float(G2.mid()) - 1) <= 0.02))
        recs.append(Record("G_3", {"M": M, "m_max": m_max}, observed=G3, predicted=Fraction(2, 3),
                           passed=abs(float(G3.mid()) * 1.5 - 1) <= 0.05))
        rep = check_G2_relation(M, est)
        rel.append(float(rep.ratio.mid()))
        recs.append(Record.from_asym(rep))
    if len(rel) > 1:
        same_sign = all(r > 0 for r in rel) or all(r < 0 for r in rel)
        spread = max(abs(r) for r in rel) / min(abs(r) for r in rel)
        recs.append(Record("G2_relation_stability", {"M": M_values}, observed=spread, predicted=4,
                           passed=same_sign and spread <= 4, note="max/min of residual/Delta^4"))
    return recs


# -- Theorem: A_{d,k} main terms --------------------------------------------------------------------


def thm22(table, ctx, pairs: Sequence[tuple], n_values: Sequence[int], m_max: int = 8) -> list:
    """Observed/predicted ratios of normalized A_{d,k}(n) along increasing n.

    Passes for a (d, k) pair when |ratio - 1| strictly decreases along
    ``n_values`` and is at most 0.1 at the largest n.
    """
    recs = []
    for d, k in pairs:
        gaps = []
        for n in sorted(n_values):
            est = fit_Gm(n + d, m_max, table, ctx)
            rep = predict_Adk(d, k, n, est, table, ctx)
            gaps.append(abs(float(rep.ratio.mid()) - 1))
            recs.append(Record.from_asym(rep))
        ok = all(b < a for a, b in zip(gaps, gaps[1:])) and gaps[-1] <= 0.1
        recs.append(Record("A_dk_trend", {"d": d, "k": k, "n": list(sorted(n_values))},
                           observed=gaps[-1], predicted=0.1, passed=ok))
    return recs


# -- Hyperbolicity and Turan ------------------------------------------------------------------------


def hyperbolic_cell(cell: Cell, table: GammaTable, ctx: PrecCtx) -> Record:
    d, n = cell
    v = certify_hyperbolic(d, n, table, ctx)
    return Record("hyperbolic", {"d": d, "n": n}, observed=v.real_root_count, predicted=d,
                  passed=v.status is Status.HYPERBOLIC, note=f"{v.status.value} at {v.bits_used} bits")


def hyperbolic(table, ctx, d_values, n_values, workers=1) -> list:
    return map_cells(hyperbolic_cell, grid(d_values, n_values), table, ctx, workers)


def turan_cell(cell: Cell, table: GammaTable, ctx: PrecCtx) -> Record:
    d, n = cell
    m = turan_holds(d, n, table, ctx)
    if m.holds is True:
        v = certify_hyperbolic(d, n, table, ctx)
        return Record("turan_implies_hyperbolic", {"d": d, "n": n}, observed=m.lhs, predicted=1,
                      passed=v.status is Status.HYPERBOLIC, note=f"criterion holds; {v.status.value}")
    state = "fails" if m.holds is False else "undecided"
    return Record("turan_implies_hyperbolic", {"d": d, "n": n}, observed=m.lhs, predicted=1,
                  passed=True, note=f"criterion {state}")


def turan(table, ctx, d_values, n_values, workers=1) -> list:
    return map_cells(turan_cell, grid(d_values, n_values), table, ctx, workers)


def _threshold_cell(cell: Cell, table: GammaTable, ctx: PrecCtx):
    d, n_max = cell
    margins: dict = {}
    n0 = turan_threshold(d, n_max, table, ctx, margins=margins)
    return d, n0, margins.get(n0).lhs if n0 is not None else None


def threshold_scan(table, ctx, d_values, n_max: int, workers=1) -> list:
    """Per-d empirical Turan threshold plus the slope of log N against d.

    A threshold of 0 (criterion holds from n = 0) enters the fit as N = 1.
    """
    cells = [(d, n_max) for d in d_values]
    recs, pts = [], []
    for d, n0, lhs in map_cells(_threshold_cell, cells, table, ctx, workers):
        if n0 is None:
            recs.append(Record("threshold", {"d": d, "n_max": n_max}, note="absent"))
        else:
            recs.append(Record("threshold", {"d": d, "n_max": n_max}, observed=n0,
                               note=f"criterion sum at N = {fmt_value(lhs)}"))
            pts.append((d, math.log(max(n0, 1))))
    if len(pts) >= 4:
        recs.append(Record("slope_log_N_vs_d", {"points": len(pts)}, observed=_slope(pts),
                           predicted=0.5, note="least squares of log max(N, 1)"))
    return recs


def _slope(pts: Sequence[tuple]) -> float:
    xs, ys = zip(*pts)
    mx, my = sum(xs) / len(xs), sum(ys) / len(ys)
    sxx = sum((x - mx) ** 2 for x in xs)
    return sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / sxx
