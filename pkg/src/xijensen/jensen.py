"""Jensen polynomials, their normalization and the Hermite basis.

J^{d,n}(X) = sum_j C(d,j) gamma(n+j) X^j.  The normalized polynomial

    Jt^{d,n}(X) = gamma(M)^(d-1) / (gamma(M-1)^d Delta(M)^d)
                  * J^{d,n}(gamma(M-1)/gamma(M) * (Delta(M) X - 1)),  M = n + d,

is monic with vanishing X^(d-1) coefficient and tends to H_d(X/2).  Its
coefficients A_{d,k}(n) (of X^(d-k)) are computed two independent ways:
as finite differences of S(j; M) (:func:`A_coeffs`) and by expanding the
affine substitution directly (:func:`normalized_poly`).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial
from typing import Optional, Sequence

import flint
from flint import arb

from .errors import DomainError, InsufficientPrecision, RadicandUncertified
from .precision import PrecCtx, bits_for_cancellation, bits_of, from_fraction, refine_until, workprec
from .xi_taylor import GammaTable


class Basis(enum.Enum):
    MONOMIAL = "monomial"
    HERMITE_HALF = "hermite_half"  # coordinates w.r.t. H_i(X/2)


@dataclass(frozen=True)
class Poly:
    """Dense polynomial with ball coefficients, ascending powers."""

    coeffs: tuple
    basis: Basis = Basis.MONOMIAL

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(arb(c) if not isinstance(c, arb) else c for c in self.coeffs))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def leading(self) -> arb:
        return self.coeffs[-1]

    def __call__(self, x) -> arb:
        p = self.to_monomial()
        with workprec(bits_of(p.coeffs + (x,))):
            acc = arb(0)
            for c in reversed(p.coeffs):
                acc = acc * x + c
            return acc

    def to_monomial(self) -> "Poly":
        if self.basis is Basis.MONOMIAL:
            return self
        d = self.degree
        out = [arb(0)] * (d + 1)
        with workprec(bits_of(self.coeffs, 32 + 2 * d)):
            for i, b in enumerate(self.coeffs):
                for j, h in enumerate(hermite_half(i)):
                    if h:
                        out[j] += b * from_fraction(h)
        return Poly(tuple(out), Basis.MONOMIAL)

    def to_hermite_half(self) -> "Poly":
        if self.basis is Basis.HERMITE_HALF:
            return self
        rest = list(self.coeffs)
        d = self.degree
        out = [arb(0)] * (d + 1)
        with workprec(bits_of(self.coeffs, 32 + 2 * d)):
            # H_i(X/2) is monic, so peel off degrees from the top
            for i in range(d, -1, -1):
                b = rest[i]
                out[i] = b
                for j, h in enumerate(hermite_half(i)):
                    if h:
                        rest[j] -= b * from_fraction(h)
        return Poly(tuple(out), Basis.HERMITE_HALF)

    def overlaps(self, other: "Poly") -> bool:
        a, b = self.to_monomial().coeffs, other.to_monomial().coeffs
        n = max(len(a), len(b))
        a = a + (arb(0),) * (n - len(a))
        b = b + (arb(0),) * (n - len(b))
        return all(x.overlaps(y) for x, y in zip(a, b))


# -- Hermite polynomials -------------------------------------------------------------


@lru_cache(maxsize=None)
def hermite_int(d: int) -> tuple[int, ...]:
    """Integer coefficients of the physicists' H_d, ascending."""
    if d < 0:
        raise ValueError("d must be nonnegative")
    prev, cur = (1,), (0, 2)
    if d == 0:
        return prev
    for k in range(1, d):
        # H_{k+1} = 2x H_k - 2k H_{k-1}
        nxt = [0] * (k + 2)
        for i, c in enumerate(cur):
            nxt[i + 1] += 2 * c
        for i, c in enumerate(prev):
            nxt[i] -= 2 * k * c
        prev, cur = cur, tuple(nxt)
    return cur


@lru_cache(maxsize=None)
def hermite_half(d: int) -> tuple[Fraction, ...]:
    """Coefficients of H_d(X/2) (monic), ascending."""
    return tuple(Fraction(c, 2**i) for i, c in enumerate(hermite_int(d)))


def hermite(d: int) -> Poly:
    return Poly(tuple(arb(c) for c in hermite_int(d)))


def hermite_half_poly(d: int) -> Poly:
    return Poly(tuple(from_fraction(c) for c in hermite_half(d)))


# -- Jensen polynomials and the uniformizer ---------------------------------------------


def _bits(ctx: Optional[PrecCtx]) -> int:
    return (ctx or PrecCtx()).bits


def jensen_poly(d: int, n: int, table: GammaTable, ctx: Optional[PrecCtx] = None) -> Poly:
    if d < 0 or n < 0:
        raise ValueError("d and n must be nonnegative")
    with workprec(_bits(ctx) + 16):
        return Poly(tuple(comb(d, j) * table.get(n + j, ctx) for j in range(d + 1)))


def delta_unif(M: int, table: GammaTable, ctx: Optional[PrecCtx] = None) -> arb:
    """Delta(M) = sqrt((1 - gamma(M-2) gamma(M) / gamma(M-1)^2) / 2)."""
    if M < 2:
        raise ValueError("Delta(M) needs M >= 2")
    g0, g1, g2 = (table.get(i, ctx) for i in (M - 2, M - 1, M))
    with workprec(_bits(ctx) + 32):
        radicand = (1 - g0 * g2 / (g1 * g1)) / 2
        if radicand.is_exact() and radicand.is_zero():
            return arb(0)
        if radicand < 0:
            raise DomainError(f"gamma is not log-concave at M={M}; Delta({M}) is not real")
        if not radicand >= 0:
            raise RadicandUncertified(f"radicand of Delta({M}) not certified nonnegative")
        return radicand.sqrt()


def S_ratio(j: int, M: int, table: GammaTable, ctx: Optional[PrecCtx] = None) -> arb:
    """S(j; M) = gamma(M-j) gamma(M)^(j-1) / gamma(M-1)^j; exactly 1 for j = 0, 1."""
    if not 0 <= j <= M:
        raise ValueError("S(j; M) needs 0 <= j <= M")
    if j <= 1:
        return arb(1)
    gM, gM1 = table.get(M, ctx), table.get(M - 1, ctx)
    gMj = table.get(M - j, ctx)
    with workprec(max(flint.ctx.prec, _bits(ctx) + 32)):
        return gMj * gM ** (j - 1) / gM1**j


# -- normalized coefficients, two routes -------------------------------------------------


@dataclass(frozen=True)
class NormalizedCoeffs:
    d: int
    n: int
    A: tuple  # A_{d,0..d}, A_{d,k} multiplies X^(d-k)
    Delta: arb

    def poly(self) -> Poly:
        return Poly(tuple(reversed(self.A)))


def _delta_for(M: int, table: GammaTable, ctx: Optional[PrecCtx]) -> arb:
    # M = 1 only occurs for d = 1, n = 0, where the normalization does not
    # depend on Delta at all; any positive value gives Jt = X.
    return arb(1) if M < 2 else delta_unif(M, table, ctx)


def _guard_ok(A: Sequence[arb], d: int, guard: float) -> bool:
    ok = A[1].rad() < guard if d >= 1 else True
    if d >= 2:
        ok = ok and (A[2] + d * (d - 1)).rad() < guard
    return ok


def A_coeffs(
    d: int,
    n: int,
    table: GammaTable,
    ctx: Optional[PrecCtx] = None,
    guard: float = 2.0**-32,
) -> NormalizedCoeffs:
    """A_{d,k}(n) = C(d,k) Delta^(-k) sum_j (-1)^(k-j) C(k,j) S(j; n+d).

    Escalates precision until A_{d,1} and A_{d,2} have radius below ``guard``.
    """
    if d < 1 or n < 0:
        raise ValueError("A_coeffs needs d >= 1 and n >= 0")
    ctx = ctx or PrecCtx()
    M = n + d

    def compute(c: PrecCtx) -> NormalizedCoeffs:
        delta = _delta_for(M, table, c)
        if not delta > 0:
            raise InsufficientPrecision(f"Delta({M}) not certified positive")
        with workprec(c.bits + bits_for_cancellation(d, delta)):
            S = [S_ratio(j, M, table, c) for j in range(d + 1)]
            A = [arb(1)]
            inv = 1 / delta
            for k in range(1, d + 1):
                diff = arb(0)
                for j in range(k + 1):
                    term = comb(k, j) * S[j]
                    diff += term if (k - j) % 2 == 0 else -term
                A.append(comb(d, k) * inv**k * diff)
        return NormalizedCoeffs(d, n, tuple(A), delta)

    return refine_until(compute, lambda nc: _guard_ok(nc.A, d, guard), ctx)


def _taylor_shift(coeffs: list, b: arb) -> list:
    """Coefficients of p(Z + b) from those of p(Z) (synthetic Horner)."""
    c = list(coeffs)
    d = len(c) - 1
    for i in range(d):
        for j in range(d - 1, i - 1, -1):
            c[j] += b * c[j + 1]
    return c


def normalized_poly(
    d: int,
    n: int,
    table: GammaTable,
    ctx: Optional[PrecCtx] = None,
    guard: float = 2.0**-32,
) -> Poly:
    """Jt^{d,n} by expanding J^{d,n} under the affine map directly."""
    if d < 1 or n < 0:
        raise ValueError("normalized_poly needs d >= 1 and n >= 0")
    ctx = ctx or PrecCtx()
    M = n + d

    def compute(c: PrecCtx) -> Poly:
        delta = _delta_for(M, table, c)
        if not delta > 0:
            raise InsufficientPrecision(f"Delta({M}) not certified positive")
        with workprec(c.bits + bits_for_cancellation(d, delta)):
            gM, gM1 = table.get(M, c), table.get(M - 1, c)
            r = gM1 / gM
            coeffs = [comb(d, j) * table.get(n + j, c) for j in range(d + 1)]
            # J(r (Delta X - 1)) = J(Z - r) with Z = r Delta X
            shifted = _taylor_shift(coeffs, -r)
            scale = r * delta
            pref = gM ** (d - 1) / (gM1**d * delta**d)
            out = []
            power = arb(1)
            for cj in shifted:
                out.append(pref * cj * power)
                power *= scale
        return Poly(tuple(out))

    def accept(p: Poly) -> bool:
        A = tuple(reversed(p.coeffs))
        return _guard_ok(A, d, guard)

    return refine_until(compute, accept, ctx)


def hermite_expand(nc: NormalizedCoeffs) -> list:
    """c_{d,n,j} with Jt^{d,n}(X) = sum_j c_j H_{d-j}(X/2); c_0 = 1 exactly."""
    d, A = nc.d, nc.A
    out = []
    with workprec(bits_of(A, 32 + 4 * d)):
        for j in range(d + 1):
            acc = arb(0)
            for i in range(j // 2 + 1):
                weight = factorial(d - j + 2 * i) // (factorial(i) * factorial(d - j))
                acc += weight * A[j - 2 * i]
            out.append(acc)
    return out


def from_hermite_expansion(c: Sequence[arb]) -> Poly:
    """Monomial polynomial sum_j c_j H_{d-j}(X/2)."""
    d = len(c) - 1
    return Poly(tuple(reversed(list(c))), Basis.HERMITE_HALF).to_monomial()
