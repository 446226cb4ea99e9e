"""Expansion machinery around the uniformizer Delta(M).

The coefficients a_m(M) of

    log(gamma(M - j) / gamma(M)) = sum_{m >= 1} a_m(M) j^m

are extracted numerically and rescaled to G_m(M) = -a_m(M) / Delta(M)^(2m-2).
From them we build Q_m(M), the Taylor coefficients in j of

    S(j; M) = exp(Gt_1 Delta^2 j - sum_{m >= 2} G_m Delta^(2m-2) j^m),
    Gt_1 = sum_{m >= 2} G_m Delta^(2m-4),

and compare the predicted main terms for A_{d,k}(n) and c_{d,n,j} against the
values computed directly in :mod:`xijensen.jensen`.

Fitted quantities are midpoint estimates, not rigorous enclosures: they come
from a least-squares solve on ball midpoints.  The exact combinatorics
(:func:`sigma_diff`, :func:`ymk`, :func:`Pi_value`) is done in integers and
rationals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial
from typing import Callable, Iterator, Optional, Sequence, Union

import mpmath
from flint import arb

from .errors import IllConditioned, TruncationUnsound
from .jensen import A_coeffs, delta_unif, hermite_expand
from .precision import PrecCtx, from_fraction, workprec
from .xi_taylor import GammaTable

MAX_M = 12
TURAN_C = Fraction(100001, 100000)  # C = 1 + 1e-5


# -- records ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AsymReport:
    """Observed value against a predicted main term.

    ``ratio`` is observed / predicted when the prediction certifies nonzero,
    otherwise None.  ``expected_error_power`` is the power of Delta expected
    in the discrepancy.  ``flags`` carries caveats such as a violated
    size hypothesis.
    """

    quantity: str
    params: dict
    observed: arb
    predicted: arb
    ratio: Optional[arb]
    expected_error_power: int
    flags: tuple = ()

    @classmethod
    def build(cls, quantity, params, observed, predicted, power, flags=()):
        ratio = observed / predicted if (predicted > 0 or predicted < 0) else None
        return cls(quantity, dict(params), observed, predicted, ratio, power, tuple(flags))


@dataclass(frozen=True)
class GmEstimate:
    """Fitted a_m(M), G_m(M) for m = 1..m_max.

    ``G[m - 1]`` holds G_m.  ``fit_residual`` is the largest absolute
    least-squares residual over the nodes, relative to the largest sample.
    """

    M: int
    m_max: int
    G: tuple
    a: tuple
    Delta: arb
    fit_residual: float
    nodes: int
    bits: int = 256

    def Gm(self, m: int) -> arb:
        if not 1 <= m <= self.m_max:
            raise TruncationUnsound(f"G_{m} not available (m_max = {self.m_max})")
        return self.G[m - 1]

    @property
    def G1_tilde(self) -> arb:
        """Gt_1 = sum_{m >= 2} G_m Delta^(2m-4), truncated at m_max."""
        with workprec(self.bits):
            d2 = self.Delta * self.Delta
            acc, power = arb(0), arb(1)
            for m in range(2, self.m_max + 1):
                acc += self.G[m - 1] * power
                power *= d2
            return acc

    @classmethod
    def synthetic(cls, M: int, G: Sequence, Delta, bits: int = 256) -> "GmEstimate":
        """Estimate built from given G_1..G_m values (for tests and what-ifs)."""
        with workprec(bits):
            G = tuple(_arb(g) for g in G)
            Delta = _arb(Delta)
            a = tuple(-g * Delta ** (2 * m - 2) for m, g in enumerate(G, start=1))
        return cls(M, len(G), G, a, Delta, 0.0, 0, bits)


def _arb(x) -> arb:
    if isinstance(x, arb):
        return x
    if isinstance(x, Fraction):
        return from_fraction(x)
    return arb(x)


def _to_mpf(x: arb) -> mpmath.mpf:
    man, exp = x.mid().man_exp()
    return mpmath.mpf((int(man), int(exp)))


def _from_mpf(x: mpmath.mpf) -> arb:
    x = mpmath.mpf(x)
    man, exp = x.man_exp  # unsigned mantissa
    man = -int(man) if x < 0 else int(man)
    with workprec(max(64, abs(man).bit_length() + 8)):
        return arb(man) * arb(2) ** int(exp)


# -- fitting a_m -----------------------------------------------------------------------


def fit_Gm(
    M: int,
    m_max: int,
    table: GammaTable,
    ctx: Optional[PrecCtx] = None,
    nodes: Optional[int] = None,
    tol: float = 1e-10,
) -> GmEstimate:
    """Least-squares fit of log R_M(j) = sum_{m=1}^{m_max} a_m j^m on j = 1..nodes.

    ``nodes`` defaults to 2 * m_max.  Raises :class:`IllConditioned` when the
    relative residual exceeds ``tol``.
    """
    if not 1 <= m_max <= MAX_M:
        raise ValueError(f"m_max must lie in [1, {MAX_M}]")
    J = nodes if nodes is not None else 2 * m_max
    if J < m_max:
        raise ValueError("need at least m_max nodes")
    if M - J < 0:
        raise ValueError(f"fit needs gamma(M - {J}) with M = {M}")
    ctx = ctx or PrecCtx()
    bits = ctx.bits

    gM = table.get(M, ctx)
    with workprec(bits + 32):
        logs = [(table.get(M - j, ctx) / gM).log() for j in range(1, J + 1)]
    Delta = delta_unif(M, table, ctx)

    with mpmath.workprec(bits + 32):
        A = mpmath.matrix(J, m_max)
        b = mpmath.matrix(J, 1)
        for r in range(J):
            j = mpmath.mpf(r + 1)
            for c in range(m_max):
                A[r, c] = j ** (c + 1)
            b[r] = _to_mpf(logs[r])
        if J == m_max:
            sol = mpmath.lu_solve(A, b)
        else:
            sol, _ = mpmath.qr_solve(A, b)
        resid = A * sol - b
        scale = max(abs(b[r]) for r in range(J))
        rel = float(max(abs(resid[r]) for r in range(J)) / scale) if scale else 0.0
        a = tuple(_from_mpf(sol[c]) for c in range(m_max))

    if rel > tol:
        raise IllConditioned(f"fit residual {rel:.3g} exceeds {tol:.3g} at M={M}, m_max={m_max}")
    with workprec(bits + 32):
        d2 = Delta * Delta
        G = tuple(-a[m - 1] / d2 ** (m - 1) for m in range(1, m_max + 1))
    return GmEstimate(M, m_max, G, a, Delta, rel, J, bits)


def check_G2_relation(M: int, est: GmEstimate) -> AsymReport:
    """Residual of G_2 = 1 + (1 - 3 G_3) Delta^2 + O(Delta^4), scaled by Delta^4."""
    if est.m_max < 3:
        raise TruncationUnsound("need G_3")
    with workprec(est.bits):
        D2 = est.Delta**2
        observed = est.Gm(2) - 1 - (1 - 3 * est.Gm(3)) * D2
        return AsymReport.build("G2_relation", {"M": M}, observed, D2 * D2, 4)


# -- exact combinatorics ---------------------------------------------------------------


def sigma_diff(k: int, f: Union[Callable, Sequence]):
    """k-th forward difference at 0: sum_j (-1)^(k-j) C(k, j) f(j)."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    get = f if callable(f) else f.__getitem__
    acc = 0
    for j in range(k + 1):
        term = comb(k, j) * get(j)
        acc = acc + term if (k - j) % 2 == 0 else acc - term
    return acc


@lru_cache(maxsize=None)
def ymk(m: int, k: int) -> int:
    """y_{m,k} = sigma_{k,x}(x^m), an exact integer (k! S(m, k))."""
    if m < 0 or k < 0:
        raise ValueError("m and k must be nonnegative")
    if m > k + 64:
        raise ValueError("m exceeds k + 64")
    if m < k:
        return 0
    return sigma_diff(k, lambda j: j**m)


def Pi_value(i: int, k: int) -> Fraction:
    """P_i(k) = y_{k+i,k} / (k! C(k+i, i+1))."""
    if not (1 <= i <= 20 and 1 <= k <= 64):
        raise ValueError("Pi_value needs 1 <= i <= 20 and 1 <= k <= 64")
    return Fraction(ymk(k + i, k), factorial(k) * comb(k + i, i + 1))


# -- partitions and Q_m ------------------------------------------------------------------


@dataclass(frozen=True)
class Partition:
    """A partition of m by multiplicities: ``lam[i-1]`` parts equal to i."""

    lam: tuple
    L: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "L", sum(self.lam))

    @property
    def m(self) -> int:
        return sum(i * c for i, c in enumerate(self.lam, start=1))


def partitions(m: int) -> Iterator[Partition]:
    """All partitions of m as multiplicity vectors of length m, lexicographic."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    if m == 0:
        yield Partition(())
        return

    def rec(i: int, left: int, acc: list):
        if i > m:
            if left == 0:
                yield Partition(tuple(acc))
            return
        for c in range(left // i + 1):
            acc.append(c)
            yield from rec(i + 1, left - c * i, acc)
            acc.pop()

    yield from rec(1, m, [])


def _series_coeffs(est: GmEstimate, m: int) -> list:
    # coefficients of j^i in the exponent of S(j; M), i = 1..m
    D2 = est.Delta * est.Delta
    out = [est.G1_tilde * D2]
    for i in range(2, m + 1):
        out.append(-est.Gm(i) * D2 ** (i - 1))
    return out


def Qm_partition(m: int, M: int, est: GmEstimate) -> arb:
    """Q_m(M) as a sum over partitions of m (multinomial expansion of the exponential)."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    if m == 0:
        return arb(1)
    if m > est.m_max:
        raise TruncationUnsound(f"Q_{m} needs G_2..G_{m}, have m_max = {est.m_max}")
    if m > MAX_M:
        raise ValueError(f"m must be <= {MAX_M}")
    with workprec(est.bits):
        c = _series_coeffs(est, m)
        total = arb(0)
        for p in partitions(m):
            term = arb(1)
            for i, lam_i in enumerate(p.lam):
                if lam_i:
                    term *= c[i] ** lam_i / factorial(lam_i)
            total += term
        return total


def Qm_leading(m: int, M: int, est: GmEstimate) -> arb:
    """Leading term plus first correction of Q_m(M), split by the parity of m."""
    if m < 2:
        raise ValueError("Qm_leading needs m >= 2")
    if est.m_max < 3 or (m >= 4 and m % 2 == 0 and est.m_max < 4):
        raise TruncationUnsound("need G_2, G_3 (and G_4 for even m >= 4)")
    with workprec(est.bits):
        return _Qm_leading(m, est)


def _Qm_leading(m: int, est: GmEstimate) -> arb:
    D = est.Delta
    D2 = D * D
    G2, G3, Gt = est.Gm(2), est.Gm(3), est.G1_tilde
    h = m // 2
    pref = D**m / factorial(h)
    if h % 2:
        pref = -pref

    def G2pow(e: int) -> arb:
        return G2**e if e >= 0 else 1 / G2 ** (-e)

    if m % 2 == 0:
        corr = G2pow(h - 1) * Gt * Gt
        if m > 2:
            G4 = est.Gm(4)
            corr += (m - 2) * G4 * G2pow(h - 2) + (m - 2) * G3 * G2pow(h - 2) * Gt
        if m > 4:
            corr += from_fraction(Fraction((m - 2) * (m - 4), 4)) * G3 * G3 * G2pow(h - 3)
        inner = G2pow(h) - from_fraction(Fraction(m, 4)) * corr * D2
    else:
        inner = (G2pow(h) * Gt + h * G3 * G2pow(h - 1)) * D
    return pref * inner


# -- A_{d,k} and Turan envelopes -----------------------------------------------------------


def Adk_via_A2(
    d: int, k: int, n: int, est: GmEstimate, table: Optional[GammaTable] = None
) -> tuple[arb, str]:
    """A_{d,k}(n) = C(d,k) Delta^(-k) sum_{m=k}^{k+4} y_{m,k} Q_m(n+d), truncated.

    Returns the value and a note describing the truncation.
    """
    if not 0 <= k <= d:
        raise ValueError("need 0 <= k <= d")
    if est.M != n + d:
        raise ValueError(f"estimate is for M={est.M}, need M={n + d}")
    if k == 0:
        return arb(1), "exact"
    if est.m_max < k + 4:
        raise TruncationUnsound(f"A2 truncation at m = k + 4 = {k + 4} needs m_max >= {k + 4}")
    top = k + 4
    with workprec(est.bits):
        acc = arb(0)
        for m in range(k, top + 1):
            acc += ymk(m, k) * Qm_partition(m, est.M, est)
        return comb(d, k) * acc / est.Delta**k, f"truncated at m={top}"


def Z_poly(t: int, est: GmEstimate) -> arb:
    """Z_M(t) = t(t-1)(-(2/3)(3t+2) + 2t G_3 - ((t-2)/2) G_3^2 - G_4)."""
    G3, G4 = est.Gm(3), est.Gm(4)
    with workprec(est.bits):
        inner = (
            -from_fraction(Fraction(2 * (3 * t + 2), 3))
            + 2 * t * G3
            - from_fraction(Fraction(t - 2, 2)) * G3 * G3
            - G4
        )
        return t * (t - 1) * inner


def _hypothesis_flags(k: int, M: int) -> list:
    return [f"n+d={M} < 10k^3={10 * k**3}"] if M <= 10 * k**3 else []


def predict_Adk(
    d: int,
    k: int,
    n: int,
    est: GmEstimate,
    table: GammaTable,
    ctx: Optional[PrecCtx] = None,
) -> AsymReport:
    """Normalized A_{d,k}(n) against its predicted main term (k >= 3)."""
    if not 3 <= k <= d:
        raise ValueError("predict_Adk needs 3 <= k <= d")
    M = n + d
    if est.M != M:
        raise ValueError(f"estimate is for M={est.M}, need M={M}")
    h = k // 2
    nc = A_coeffs(d, n, table, ctx)
    norm = Fraction(factorial(d - k) * factorial(h), factorial(d))
    with workprec(est.bits):
        observed = from_fraction(norm) * nc.A[k]
        if h % 2:
            observed = -observed
        D = est.Delta
        if k % 2 == 0:
            predicted = 1 + Z_poly(h, est) * D * D
            power = 4
        else:
            predicted = h * (est.Gm(3) - 2) * D
            power = 3
        params = {"d": d, "k": k, "n": n, "M": M}
        return AsymReport.build("A_dk", params, observed, predicted, power, _hypothesis_flags(k, M))


def cdnj_envelope(d: int, j: int, Delta: arb, C: Fraction = TURAN_C) -> arb:
    """Shape of the bound on |c_{d,n,j}| for j >= 3, without its implied constant."""
    ell = j // 2
    base = from_fraction(16 * C * C + 1) ** ell
    if j % 2 == 0:
        return factorial(d) // (factorial(d - 2 * ell) * factorial(ell)) * ell**6 * base * Delta**4
    return factorial(d) // (factorial(d - 2 * ell - 1) * factorial(ell)) * ell**4 * base * Delta**3


def turan_cdnj_bound_report(
    d: int,
    n: int,
    est: Optional[GmEstimate],
    table: GammaTable,
    ctx: Optional[PrecCtx] = None,
    C: Fraction = TURAN_C,
) -> AsymReport:
    """Largest |c_{d,n,j}| / envelope_j over 3 <= j <= d.

    Per-j ratios are returned in ``params["ratios"]``; the ``observed`` field
    holds the maximum and ``predicted`` is 1 (the envelope's own scale).
    """
    nc = A_coeffs(d, n, table, ctx)
    c = hermite_expand(nc)
    Delta = est.Delta if est is not None else nc.Delta
    ratios = {}
    with workprec((ctx or PrecCtx()).bits):
        for j in range(3, d + 1):
            ratios[j] = abs(c[j]) / cdnj_envelope(d, j, Delta, C)
    worst = max(ratios.values(), key=lambda r: float(r.mid())) if ratios else arb(0)
    params = {"d": d, "n": n, "M": n + d, "ratios": {j: float(r.mid()) for j, r in ratios.items()}}
    return AsymReport.build("c_dnj_envelope", params, worst, arb(1), 4)
