"""Certified real-root counting and hyperbolicity of Jensen polynomials.

Root counts come from Sturm chains.  With exact (rational or dyadic) input
the chain is computed in exact rational arithmetic; otherwise it runs in
ball arithmetic, renormalizing every remainder and escalating precision
whenever a leading coefficient or a sign fails to certify.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from math import factorial
from typing import Optional, Sequence, Union

from flint import arb

from .errors import (
    DegenerateChain,
    DomainError,
    FloorUncertified,
    InsufficientPrecision,
    PrecisionExhausted,
)
from .jensen import A_coeffs, Poly, hermite_expand, jensen_poly, normalized_poly
from .precision import PrecCtx, from_fraction, refine_until, sign, to_fraction, workprec
from .xi_taylor import GammaTable

Coeffs = Union[Poly, Sequence]


# -- Sturm chains ------------------------------------------------------------------------


def _trim_exact(c: list) -> list:
    while len(c) > 1 and c[-1] == 0:
        c.pop()
    return c


def _exact_coeffs(p: Coeffs) -> Optional[list]:
    """Exact rational coefficients (ascending) when every input is exact, else None."""
    coeffs = p.to_monomial().coeffs if isinstance(p, Poly) else tuple(p)
    out = []
    for c in coeffs:
        if isinstance(c, (int, Fraction)):
            out.append(Fraction(c))
        elif isinstance(c, arb) and c.is_exact():
            out.append(to_fraction(c))
        else:
            return None
    return _trim_exact(out)


def _rem_exact(a: list, b: list) -> list:
    a = list(a)
    lead = b[-1]
    while len(a) >= len(b) and any(a):
        q = a[-1] / lead
        shift = len(a) - len(b)
        for i, bi in enumerate(b):
            a[shift + i] -= q * bi
        a.pop()
        _trim_exact(a)
    return _trim_exact(a) if a else [Fraction(0)]


def _derivative(c: list) -> list:
    return [i * c[i] for i in range(1, len(c))] or [c[0] * 0]


def _sign_changes(signs: list) -> int:
    s = [x for x in signs if x != 0]
    return sum(1 for u, v in zip(s, s[1:]) if u != v)


def _count_exact(c: list) -> int:
    """Distinct real roots of an exact rational polynomial."""
    if len(c) <= 1:
        return 0
    chain = [c, _derivative(c)]
    while len(chain[-1]) > 1:
        r = _rem_exact(chain[-2], chain[-1])
        if len(r) == 1 and r[0] == 0:
            break  # repeated roots: chain ends in gcd(p, p'), still valid
        chain.append([-x for x in r])
    plus = [1 if q[-1] > 0 else -1 for q in chain]
    minus = [s if (len(q) - 1) % 2 == 0 else -s for s, q in zip(plus, chain)]
    return _sign_changes(minus) - _sign_changes(plus)


def _gcd_exact(a: list, b: list) -> list:
    while not (len(b) == 1 and b[0] == 0):
        a, b = b, _rem_exact(a, b)
    return [x / a[-1] for x in a]


def _div_exact(a: list, b: list) -> list:
    a = list(a)
    q = [Fraction(0)] * (len(a) - len(b) + 1)
    for s in range(len(a) - len(b), -1, -1):
        coef = a[s + len(b) - 1] / b[-1]
        q[s] = coef
        for i, bi in enumerate(b):
            a[s + i] -= coef * bi
    return q


def _count_exact_multiplicity(c: list) -> int:
    """Real roots counted with multiplicity (square-free decomposition)."""
    total = 0
    while len(c) > 1:
        g = _gcd_exact(c, _derivative(c))
        total += _count_exact(_div_exact(c, g)) if len(g) > 1 else _count_exact(c)
        if len(g) == 1:
            break
        c = g
    return total


def _scale(c: list) -> list:
    # divide by an exact positive number near the largest magnitude
    big = max((abs(x.mid()) for x in c), key=float)
    if big.is_zero():
        return c
    return [x / big for x in c]


def _rem_ball(a: list, b: list) -> list:
    a = list(a)
    lead = b[-1]
    while len(a) >= len(b):
        q = a[-1] / lead
        shift = len(a) - len(b)
        for i, bi in enumerate(b[:-1]):
            a[shift + i] -= q * bi
        a.pop()
    return a


def _count_ball(c: list, bits: int) -> int:
    with workprec(bits):
        c = _scale(list(c))
        if sign(c[-1]) in (0, None):
            raise InsufficientPrecision("leading coefficient not certified nonzero")
        chain = [c, _scale(_derivative(c))]
        while len(chain[-1]) > 1:
            r = _rem_ball(chain[-2], chain[-1])
            # drop exactly vanishing top coefficients; uncertain ones need more bits
            while len(r) > 1 and r[-1].is_exact() and r[-1].is_zero():
                r.pop()
            s = sign(r[-1]) if r else None
            if s is None:
                raise InsufficientPrecision("Sturm remainder has uncertified leading coefficient")
            if s == 0:
                raise InsufficientPrecision("Sturm chain vanished: repeated root or too few bits")
            chain.append(_scale([-x for x in r]))
        plus = [sign(q[-1]) for q in chain]
        minus = [s if (len(q) - 1) % 2 == 0 else -s for s, q in zip(plus, chain)]
        return _sign_changes(minus) - _sign_changes(plus)


def count_real_roots(p: Coeffs, ctx: Optional[PrecCtx] = None) -> int:
    """Certified number of distinct real roots of ``p``.

    Signs are taken at -oo and +oo (from leading coefficients), so no root
    bound is needed.  Ball input must be square-free at the resolution of its
    enclosures; otherwise precision escalates up to ``ctx.max_bits`` and then
    :class:`DegenerateChain` is raised.
    """
    exact = _exact_coeffs(p)
    if exact is not None:
        if len(exact) == 1 and exact[0] == 0:
            raise ValueError("zero polynomial")
        return _count_exact(exact)
    coeffs = list(p.to_monomial().coeffs if isinstance(p, Poly) else p)
    coeffs = [c if isinstance(c, arb) else arb(c) for c in coeffs]
    ctx = ctx or PrecCtx()
    try:
        return refine_until(lambda c: _count_ball(coeffs, c.bits), lambda _: True, ctx)
    except PrecisionExhausted as exc:
        raise DegenerateChain(str(exc)) from exc


# -- verdicts --------------------------------------------------------------------------


class Status(enum.Enum):
    HYPERBOLIC = "Hyperbolic"
    NOT_HYPERBOLIC = "NotHyperbolic"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class HyperbolicityVerdict:
    status: Status
    real_root_count: int  # -1 when indeterminate
    degree: int
    bits_used: int

    @property
    def hyperbolic(self) -> bool:
        return self.status is Status.HYPERBOLIC


def _verdict(count: int, degree: int, bits: int) -> HyperbolicityVerdict:
    status = Status.HYPERBOLIC if count == degree else Status.NOT_HYPERBOLIC
    return HyperbolicityVerdict(status, count, degree, bits)


def certify_poly(p: Coeffs, ctx: Optional[PrecCtx] = None) -> HyperbolicityVerdict:
    """Hyperbolicity of a fixed polynomial.

    Exact input is decided with multiplicities.  Ball input is decided through
    distinct roots, so a certified count equal to the degree is required.
    """
    ctx = ctx or PrecCtx()
    exact = _exact_coeffs(p)
    if exact is not None:
        if len(exact) == 1 and exact[0] == 0:
            raise ValueError("zero polynomial")
        return _verdict(_count_exact_multiplicity(exact), len(exact) - 1, 0)
    coeffs = list(p.to_monomial().coeffs if isinstance(p, Poly) else p)
    degree = len(coeffs) - 1
    used = {"bits": ctx.bits}

    def compute(c: PrecCtx) -> int:
        used["bits"] = c.bits
        return _count_ball(coeffs, c.bits)

    try:
        count = refine_until(compute, lambda _: True, ctx)
    except PrecisionExhausted:
        return HyperbolicityVerdict(Status.INDETERMINATE, -1, degree, ctx.max_bits)
    return _verdict(count, degree, used["bits"])


def certify_hyperbolic(
    d: int,
    n: int,
    table: GammaTable,
    ctx: Optional[PrecCtx] = None,
    normalized: bool = True,
) -> HyperbolicityVerdict:
    """Hyperbolicity verdict for J^{d,n}.

    By default the Sturm chain runs on the normalized polynomial, which has
    the same root reality (it is an affine image) but far better scaling.
    If the normalization does not exist (the table violates log-concavity)
    the raw Jensen polynomial is used instead.
    """
    ctx = ctx or PrecCtx()
    if d <= 1:
        return _verdict(d, d, ctx.bits)
    used = {"bits": ctx.bits}

    def compute(c: PrecCtx) -> int:
        used["bits"] = c.bits
        if normalized:
            p = normalized_poly(d, n, table, c, guard=math.inf)
        else:
            p = jensen_poly(d, n, table, c)
        return _count_ball(list(p.coeffs), c.bits + 32)

    try:
        count = refine_until(compute, lambda _: True, ctx)
    except DomainError:
        if not normalized:
            raise
        return certify_hyperbolic(d, n, table, ctx, normalized=False)
    except PrecisionExhausted:
        return HyperbolicityVerdict(Status.INDETERMINATE, -1, d, ctx.max_bits)
    return _verdict(count, d, used["bits"])


# -- Turan's criterion -----------------------------------------------------------------------


@dataclass(frozen=True)
class TuranMargin:
    d: int
    n: int
    lhs: arb
    holds: Optional[bool]  # None when the enclosure of lhs contains 1


def turan_lhs(c: Sequence[arb], d: int) -> arb:
    """sum_{j=3}^d 2^-j (d-j)!/(d-1)! c_j^2 for Hermite coordinates c."""
    acc = arb(0)
    for j in range(3, d + 1):
        acc += from_fraction(Fraction(factorial(d - j), 2**j * factorial(d - 1))) * c[j] ** 2
    return acc


def turan_holds(d: int, n: int, table: GammaTable, ctx: Optional[PrecCtx] = None) -> TuranMargin:
    """Evaluate Turan's sufficient criterion for J^{d,n} with a tri-state outcome."""
    if d < 3:
        raise ValueError("Turan's criterion is stated for d >= 3")
    ctx = ctx or PrecCtx()

    def compute(c: PrecCtx) -> TuranMargin:
        nc = A_coeffs(d, n, table, c)
        with workprec(c.bits + 32):
            lhs = turan_lhs(hermite_expand(nc), d)
        holds = True if lhs < 1 else False if lhs > 1 else None
        return TuranMargin(d, n, lhs, holds)

    try:
        return refine_until(compute, lambda m: m.holds is not None, ctx)
    except PrecisionExhausted:
        nc = A_coeffs(d, n, table, ctx)
        with workprec(ctx.bits + 32):
            return TuranMargin(d, n, turan_lhs(hermite_expand(nc), d), None)


def turan_threshold(
    d: int,
    n_max: int,
    table: GammaTable,
    ctx: Optional[PrecCtx] = None,
    probe: int = 10,
    margins: Optional[dict] = None,
) -> Optional[int]:
    """Smallest n <= n_max such that the criterion holds on n..min(n + probe, n_max).

    ``margins``, if given, is filled with every evaluated TuranMargin keyed by n.
    """
    if margins is None:
        margins = {}
    run_start = None
    for n in range(n_max + 1):
        m = margins.get(n) or turan_holds(d, n, table, ctx)
        margins[n] = m
        if m.holds is True:
            if run_start is None:
                run_start = n
            if n >= min(run_start + probe, n_max):
                return run_start
        else:
            run_start = None
    return None


# -- degree bound from a verified height ---------------------------------------------------


@dataclass(frozen=True)
class DegreeBound:
    closed_form_floor: int  # floor(T^2 + 1/2 + 1/(16 T^2))
    floor_T_squared: int  # floor(T)^2


def _as_fraction(T) -> Optional[Fraction]:
    if isinstance(T, (int, Fraction)):
        return Fraction(T)
    if isinstance(T, str):
        return Fraction(T)
    if isinstance(T, float):
        return Fraction(T)
    return None


def degree_bound_from_T(T, ctx: Optional[PrecCtx] = None) -> DegreeBound:
    """Degree bound floor(T^2 + 1/2 + 1/(16T^2)) and floor(T)^2 for T > 1/2.

    Exact rational input (int, Fraction, decimal string, float) is handled in
    exact arithmetic.  Ball input uses interval evaluation and raises
    :class:`FloorUncertified` if the enclosure straddles an integer.
    """
    q = _as_fraction(T)
    if q is not None:
        if q <= Fraction(1, 2):
            raise ValueError("T must exceed 1/2")
        value = q * q + Fraction(1, 2) + 1 / (16 * q * q)
        return DegreeBound(math.floor(value), math.floor(q) ** 2)
    ctx = ctx or PrecCtx()
    x = T if isinstance(T, arb) else arb(T)
    if not x > 0.5:
        raise ValueError("T must certifiably exceed 1/2")

    def compute(c: PrecCtx) -> DegreeBound:
        with workprec(c.bits):
            v = x * x + arb(0.5) + 1 / (16 * x * x)
            flo = _certified_floor(v)
            ft = _certified_floor(x)
        if flo is None or ft is None:
            raise InsufficientPrecision("floor not certified")
        return DegreeBound(flo, ft * ft)

    try:
        return refine_until(compute, lambda _: True, ctx)
    except PrecisionExhausted as exc:
        raise FloorUncertified(str(exc)) from exc


def _certified_floor(v: arb) -> Optional[int]:
    lo = math.floor(to_fraction(v.lower())) if v.is_finite() else None
    hi = math.floor(to_fraction(v.upper())) if v.is_finite() else None
    return lo if lo is not None and lo == hi else None
