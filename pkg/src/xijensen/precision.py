"""Ball arithmetic plumbing: precision contexts, escalation, rigorous quadrature.

Every real quantity in the package is a :class:`flint.arb` ball (midpoint plus
rigorous radius).  Arb rounds outward, so a ball always encloses the exact
value of the expression that produced it.  Working precision lives in the
process-global ``flint.ctx.prec``; :func:`workprec` scopes changes to it.
Because of that global, parallelism in this package is process based.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Callable, Iterator, Optional, TypeVar

import flint
from flint import acb, arb, fmpz

from .errors import DomainError, InsufficientPrecision, PrecisionExhausted

Real = arb
T = TypeVar("T")

MIN_BITS = 64


@contextmanager
def workprec(bits: int):
    """Temporarily set the global Arb working precision."""
    old = flint.ctx.prec
    flint.ctx.prec = int(bits)
    try:
        yield
    finally:
        flint.ctx.prec = old


@dataclass(frozen=True)
class PrecCtx:
    """Working precision plus the escalation ladder used by :func:`refine_until`."""

    bits: int = 256
    max_bits: int = 8192
    escalation_factor: Fraction = Fraction(2)

    def __post_init__(self):
        if self.bits < MIN_BITS:
            raise ValueError(f"bits must be >= {MIN_BITS}, got {self.bits}")
        if self.bits > self.max_bits:
            raise ValueError(f"bits ({self.bits}) exceeds max_bits ({self.max_bits})")
        if Fraction(self.escalation_factor) <= 1:
            raise ValueError("escalation_factor must be > 1")

    def with_bits(self, bits: int) -> "PrecCtx":
        bits = int(bits)
        return replace(self, bits=bits, max_bits=max(self.max_bits, bits))

    def plus(self, extra: int) -> "PrecCtx":
        return self.with_bits(self.bits + max(0, int(extra)))

    def ladder(self) -> Iterator["PrecCtx"]:
        """Yield this context, then escalated copies up to ``max_bits``."""
        bits = self.bits
        factor = Fraction(self.escalation_factor)
        while True:
            yield replace(self, bits=bits)
            if bits >= self.max_bits:
                return
            bits = min(self.max_bits, max(bits + 1, math.ceil(bits * factor)))


def refine_until(
    compute: Callable[[PrecCtx], T],
    accept: Callable[[T], bool],
    ctx: PrecCtx,
) -> T:
    """Run ``compute`` at increasing precision until ``accept`` holds.

    ``compute`` may raise :class:`InsufficientPrecision` to request the next
    rung of the ladder.  The first accepted result is returned unchanged.
    """
    last = None
    for c in ctx.ladder():
        try:
            candidate = compute(c)
        except InsufficientPrecision as exc:
            last = exc
            continue
        if accept(candidate):
            return candidate
    msg = f"no acceptable result up to {ctx.max_bits} bits"
    if last is not None:
        msg += f" (last failure: {last})"
    raise PrecisionExhausted(msg)


# -- small helpers on balls -------------------------------------------------


def sign(x: arb) -> Optional[int]:
    """Certified sign of ``x``: 1, -1, 0 (exactly zero) or None (undecided)."""
    if x > 0:
        return 1
    if x < 0:
        return -1
    if x.is_exact() and x.is_zero():
        return 0
    return None


def certifies_positive(x: arb) -> bool:
    return bool(x > 0)


def rel_radius(x: arb) -> float:
    """Radius over |midpoint| as a float (inf when the midpoint is zero)."""
    if x.is_exact():
        return 0.0
    mid = abs(x.mid())
    if mid.is_zero():
        return math.inf
    return float(x.rad() / mid)


def to_fraction(x: arb) -> Fraction:
    """Exact value of the midpoint of ``x``."""
    man, exp = x.mid().man_exp()
    man = int(man)
    exp = int(exp)
    return Fraction(man * 2**exp) if exp >= 0 else Fraction(man, 2**-exp)


def from_fraction(q: Fraction) -> arb:
    return arb(flint.fmpq(q.numerator, q.denominator))


def to_parts(x: arb) -> tuple[int, int, int, int]:
    """Exact (mid_man, mid_exp, rad_man, rad_exp) encoding, picklable."""
    mm, me = x.mid().man_exp()
    rm, re_ = x.rad().mid().man_exp()
    return int(mm), int(me), int(rm), int(re_)


def _dyadic(man: int, exp: int) -> arb:
    with workprec(max(flint.ctx.prec, abs(man).bit_length() + 16)):
        return arb(fmpz(man)) * arb(2) ** exp


def from_parts(parts: tuple[int, int, int, int]) -> arb:
    mm, me, rm, re_ = parts
    mid = _dyadic(mm, me)
    if rm == 0:
        return mid
    return arb(mid, _dyadic(rm, re_))


def to_decimal(x: arb, bits: int) -> tuple[str, str]:
    """Decimal (midpoint, radius) strings whose ball contains ``x``.

    The midpoint carries enough digits that parsing it back at ``bits`` bits
    reproduces the binary midpoint.
    """
    digits = math.ceil(bits * math.log10(2)) + 4
    mid, rad, exp = x.mid_rad_10exp(digits)
    return f"{int(mid)}e{int(exp)}", f"{int(rad) + 1}e{int(exp)}"


def from_decimal(mid: str, rad: str, bits: int) -> arb:
    with workprec(bits):
        return arb(mid, rad)


def bits_of(values, extra: int = 32) -> int:
    """Working precision matching the widest midpoint mantissa among ``values``."""
    widest = MIN_BITS
    for v in values:
        if isinstance(v, arb) and v.is_finite():
            man, _ = v.mid().man_exp()
            widest = max(widest, int(man).bit_length())
    return widest + extra


def round_to(x: arb, bits: int) -> arb:
    """Round the midpoint of ``x`` to ``bits`` bits, widening the radius."""
    with workprec(bits):
        return +x


# -- rigorous quadrature on [lower, oo) --------------------------------------


@dataclass(frozen=True)
class QuadratureSpec:
    """Parameters for :func:`integrate_decaying`.

    The integral over ``[lower_limit, oo)`` is computed in the variable ``u``
    with ``t = lower_limit - 1 + exp(u)``.  Integration first covers
    ``u in [0, cutoff]`` and then extends by ``cutoff_step`` until the
    integrand's rigorous tail bound beyond ``t(u)`` falls below a quarter of
    the target relative error.
    """

    target_rel_error: float = 2.0**-100
    lower_limit: float = 1.0
    cutoff: float = 4.0
    cutoff_step: float = 1.0
    max_cutoff: float = 64.0

    def __post_init__(self):
        if not 0 < self.target_rel_error < 1:
            raise ValueError("target_rel_error must lie in (0, 1)")
        if self.cutoff <= 0 or self.cutoff_step <= 0:
            raise ValueError("cutoff and cutoff_step must be positive")


class DecayingIntegrand:
    """An integrand on ``[lower, oo)`` with a certified tail bound.

    Subclasses implement :meth:`value` (holomorphic near the real half-line,
    evaluated on complex balls) and :meth:`tail_bound`.  They may override
    :meth:`substituted` when the integrand is simpler in ``u``.
    """

    def value(self, t: acb, analytic: bool) -> acb:
        raise NotImplementedError

    def tail_bound(self, T: arb) -> Optional[arb]:
        """Upper bound for the integral of ``|f|`` over ``[T, oo)``.

        Return None when no bound is available at this ``T`` yet.
        """
        raise NotImplementedError

    def substituted(self, u: acb, analytic: bool, shift: arb) -> acb:
        w = u.exp()
        return self.value(w + shift, analytic) * w


class FunctionIntegrand(DecayingIntegrand):
    """Wrap a plain callable ``f(t, analytic)`` and tail-bound callable."""

    def __init__(self, f, tail):
        self._f = f
        self._tail = tail

    def value(self, t, analytic):
        return self._f(t, analytic)

    def tail_bound(self, T):
        return self._tail(T)


def _integrate_once(f: DecayingIntegrand, spec: QuadratureSpec, bits: int) -> arb:
    with workprec(bits + 16):
        shift = arb(spec.lower_limit) - 1
        rel = arb(spec.target_rel_error)
        integrand = lambda u, analytic: f.substituted(u, analytic, shift)

        probe = integrand(acb(arb(spec.cutoff) / 2), False)
        if not probe.real.is_finite():
            raise DomainError("integrand returned a non-finite enclosure")

        total = arb(0)
        a, b = 0.0, float(spec.cutoff)
        while True:
            piece = acb.integral(
                integrand, a, b, rel_tol=rel / 8, eval_limit=2_000_000
            )
            if not piece.real.is_finite():
                raise InsufficientPrecision("quadrature piece not finite")
            total += piece.real
            tail = f.tail_bound(shift + arb(b).exp())
            if tail is not None and tail.is_finite():
                if tail.is_zero() and total.is_zero():
                    return total
                if tail <= rel * abs(total) / 4:
                    return total + arb(0, tail.upper())
            a, b = b, b + spec.cutoff_step
            if b > spec.max_cutoff:
                raise DomainError("tail bound never fell below target")


def integrate_decaying(
    f: DecayingIntegrand, spec: QuadratureSpec, ctx: PrecCtx
) -> arb:
    """Enclosure of the integral of ``f`` over ``[spec.lower_limit, oo)``.

    The finite part uses Arb's rigorous adaptive Gauss-Legendre integration
    (error bounds from Bernstein ellipses), the remainder is covered by
    ``f.tail_bound``.  Precision escalates until the relative radius meets
    ``spec.target_rel_error``.
    """

    def accept(x: arb) -> bool:
        return (x.is_exact() and x.is_zero()) or rel_radius(x) <= spec.target_rel_error

    return refine_until(lambda c: _integrate_once(f, spec, c.bits), accept, ctx)


def bits_for_cancellation(k: int, delta: arb) -> int:
    """Extra bits guarding a k-th finite difference of step size ~delta."""
    if k <= 0:
        return 32
    d = float(delta.mid()) if delta.is_finite() else 0.0
    if d <= 0:
        return 32 + 4 * k
    return math.ceil(k * max(0.0, -math.log2(d))) + 32
