"""Taylor coefficients gamma(M) of xi(1/2 + z) = sum gamma(j)/j! z^(2j).

gamma(0) = xi(1/2) comes straight from zeta and Gamma.  For M >= 1 the
coefficients come from the theta-Mellin moments

    F(z) = int_1^oo (log t)^z t^(-3/4) sum_{k>=1} exp(-pi k^2 t) dt

through

    gamma(M) = M!/(2M)! * (32 C(2M,2) F(2M-2) - F(2M)) / 2^(2M+2).

The power of two is 2M+2 rather than the often quoted 2M-1: the latter
yields 8*gamma(M), which disagrees with the Taylor coefficients of xi and
with gamma(0) = xi(1/2) (see ``tests/test_xi_taylor.py``).
"""

from __future__ import annotations

import enum
import logging
import math
import os
import threading
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, factorial
from typing import Iterable, Mapping, Optional, Union

from flint import acb, arb, fmpq

from .errors import (
    ConvergenceFailure,
    InsufficientPrecision,
    MissingCoefficient,
    PrecisionExhausted,
    SignUncertified,
)
from .precision import (
    DecayingIntegrand,
    PrecCtx,
    QuadratureSpec,
    from_decimal,
    from_fraction,
    from_parts,
    integrate_decaying,
    refine_until,
    round_to,
    to_decimal,
    to_parts,
    workprec,
)

log = logging.getLogger(__name__)

Number = Union[int, Fraction, float, arb]

CACHE_FORMAT_VERSION = 1
_CACHE_HEADER = f"# xijensen gamma table, format {CACHE_FORMAT_VERSION}"


# -- F(z) ----------------------------------------------------------------------


def theta_terms(bits: int) -> int:
    """Smallest K with exp(-pi K^2) < 2^(-bits-10)."""
    K = 1
    while math.pi * K * K <= (bits + 10) * math.log(2):
        K += 1
    return K


class ThetaMellin(DecayingIntegrand):
    """(log t)^z t^(-3/4) theta(t) on [1, oo), theta truncated at ``terms``.

    The dropped theta terms are added back as a rigorous ball at every
    evaluation point, so the enclosure is valid for any ``terms`` >= 1.
    """

    def __init__(self, z: Union[int, Fraction], terms: int):
        if z < 0:
            raise ValueError("z must be nonnegative")
        self.z = z
        self.terms = terms
        self._int_z = int(z) if Fraction(z).denominator == 1 else None

    def _theta(self, w: acb) -> acb:
        pi = arb.pi()
        s = acb(0)
        for k in range(1, self.terms + 1):
            s += (-pi * (k * k) * w).exp()
        c = w.real.lower()
        if not c > 0:
            return acb(arb("nan"))
        K1 = self.terms + 1
        tail = (-pi * (K1 * K1) * c).exp() / (1 - (-pi * (2 * K1 + 1) * c).exp())
        t = tail.upper()
        return s + acb(arb(0, t), arb(0, t))

    def _power(self, u: acb, analytic: bool) -> acb:
        if self._int_z is not None:
            return u**self._int_z
        q = Fraction(self.z)
        return u.pow(acb(arb(fmpq(q.numerator, q.denominator))), analytic=analytic)

    def substituted(self, u, analytic, shift):
        # t = exp(u): dt = t du and t^(-3/4) t = exp(u/4)
        return self._power(u, analytic) * (u / 4).exp() * self._theta(u.exp())

    def value(self, t, analytic):
        return self._power(t.log(analytic=analytic), analytic) * t ** arb(-0.75) * self._theta(t)

    def tail_bound(self, T):
        # theta(t) <= e^{-pi t}/(1 - e^{-3 pi}) for t >= 1, and (log t)^z e^{-pi t/2}
        # decreases once t log t >= 2z/pi.
        if not T * T.log() >= from_fraction(2 * Fraction(self.z)) / arb.pi():
            return None
        pi = arb.pi()
        c0 = 1 / (1 - (-3 * pi).exp())
        return c0 * 2 / pi * T ** arb(-0.75) * self._power(acb(T.log()), False).real * (-pi * T).exp()


def _peak(z: float) -> float:
    """Location in u of the maximum of u^z e^{u/4} e^{-pi e^u}."""
    if z <= 0:
        return 0.0
    u = max(0.1, math.log1p(z))
    for _ in range(60):
        g = z / u + 0.25 - math.pi * math.exp(u)
        dg = -z / (u * u) - math.pi * math.exp(u)
        u = max(1e-3, u - g / dg)
    return u


# (z, bits, terms, target) -> exact parts of the enclosure
_F_CACHE: dict[tuple, tuple] = {}


def _eval_F_uncached(z: Fraction, ctx: PrecCtx, terms: Optional[int], target: float) -> tuple:
    bits = ctx.bits
    K = terms if terms is not None else theta_terms(bits)
    spec = QuadratureSpec(
        target_rel_error=target,
        lower_limit=1.0,
        cutoff=_peak(float(z)) + 3.0,
        cutoff_step=1.0,
    )
    return to_parts(integrate_decaying(ThetaMellin(z, K), spec, ctx))


def eval_F(
    z: Union[int, Fraction],
    ctx: PrecCtx,
    terms: Optional[int] = None,
    target_rel_error: Optional[float] = None,
) -> arb:
    """Enclosure of F(z) for real z >= 0.

    ``terms`` overrides the theta truncation (the rigorous tail is still
    included).  The default target relative error is 2^-(bits-24).
    """
    z = Fraction(z)
    if z < 0:
        raise ValueError("F(z) is evaluated for z >= 0 only")
    target = target_rel_error if target_rel_error is not None else 2.0 ** -(ctx.bits - 24)
    key = (z, ctx.bits, terms, target)
    parts = _F_CACHE.get(key)
    if parts is None:
        parts = _F_CACHE[key] = _eval_F_uncached(z, ctx, terms, target)
    with workprec(ctx.bits):
        return from_parts(parts)


def _F_worker(args):
    z, bits, max_bits = args
    return z, to_parts(eval_F(z, PrecCtx(bits=bits, max_bits=max_bits)))


# -- gamma(M) --------------------------------------------------------------------


def _gamma_from_F(M: int, F_lo: arb, F_hi: arb) -> arb:
    ratio = arb(fmpq(factorial(M), factorial(2 * M)))
    return ratio * (32 * comb(2 * M, 2) * F_lo - F_hi) / arb(2) ** (2 * M + 2)


def gamma(M: int, ctx: PrecCtx, table: Optional["GammaTable"] = None) -> arb:
    """gamma(M) for M >= 1 from the theta-Mellin integrals, certified positive."""
    if M < 1:
        raise ValueError("the integral formula applies for M >= 1; use gamma0_direct")

    def compute(c: PrecCtx) -> arb:
        lo = eval_F(2 * M - 2, c)
        hi = eval_F(2 * M, c)
        with workprec(c.bits + 16):
            value = _gamma_from_F(M, lo, hi)
        value = round_to(value, c.bits)
        if not value > 0:
            raise InsufficientPrecision(f"gamma({M}) sign not certified at {c.bits} bits")
        return value, c.bits

    try:
        value, bits = refine_until(compute, lambda r: True, ctx)
    except PrecisionExhausted as exc:
        raise SignUncertified(f"gamma({M}): {exc}") from exc
    if table is not None:
        table.store(M, value, bits, Provenance.INTEGRAL)
    return value


def gamma0_direct(ctx: PrecCtx, table: Optional["GammaTable"] = None) -> arb:
    """gamma(0) = xi(1/2) = -(1/8) pi^(-1/4) Gamma(1/4) zeta(1/2)."""

    def compute(c: PrecCtx) -> arb:
        with workprec(c.bits + 16):
            v = -arb.pi() ** arb(-0.25) * arb(0.25).gamma() * arb(0.5).zeta() / 8
        v = round_to(v, c.bits)
        if not v > 0:
            raise InsufficientPrecision("gamma(0) sign")
        return v, c.bits

    value, bits = refine_until(compute, lambda r: True, ctx)
    if table is not None:
        table.store(0, value, bits, Provenance.DIRECT)
    return value


# -- L_M, K_M and the asymptotic main term ------------------------------------------


@dataclass(frozen=True)
class LKPair:
    L: arb
    K: arb


def _as_arb(M: Number) -> arb:
    if isinstance(M, arb):
        return M
    if isinstance(M, Fraction):
        return arb(fmpq(M.numerator, M.denominator))
    return arb(M)


def solve_L(M: Number, ctx: PrecCtx) -> LKPair:
    """Solve M = L (pi e^L + 3/4) for L > 0 and return (L, K).

    Bisection on [1e-6, log M + 10] to about half precision, Newton polish,
    then a certified bracket [x - eps, x + eps] is turned into the ball.
    """
    bits = ctx.bits
    with workprec(bits + 32):
        Mb = _as_arb(M)
        if not Mb > arb(0.75):
            raise ValueError("solve_L needs M > 3/4")
        pi = arb.pi()

        def h(L: arb) -> arb:
            return L * (pi * L.exp() + arb(0.75)) - Mb

        lo = arb(1e-6)
        hi = arb(math.log(max(float(Mb.mid()), 1.0)) + 10.0)
        if not (h(lo) < 0 and h(hi) > 0):
            raise ConvergenceFailure("initial bracket does not straddle the root")
        for _ in range(bits // 2 + 8):
            mid = ((lo + hi) / 2).mid()
            s = h(mid)
            if s < 0:
                lo = mid
            elif s > 0:
                hi = mid
            else:
                break
        x = ((lo + hi) / 2).mid()
        for _ in range(8):
            step = h(x) / (pi * x.exp() * (1 + x) + arb(0.75))
            x = (x - step).mid()

        # an inexact M (a ball) widens the bracket accordingly
        eps = arb(2) ** (-(bits + 8)) * max(1, abs(float(x.mid())))
        for _ in range(bits // 4 + 8):
            a, b = x - eps, x + eps
            if h(a.mid()) < 0 and h(b.mid()) > 0:
                break
            eps *= 16
        else:
            raise ConvergenceFailure(f"could not bracket L_M at {bits} bits")
        L = arb(x, eps.upper())
        K = (1 / L + 1 / (L * L)) * Mb - arb(0.75)
        residual = abs(Mb - L * (pi * L.exp() + arb(0.75)))
        allowed = arb(2) ** (-(bits // 2)) + 64 * Mb.rad() * (1 + Mb.abs_upper())
        if not residual < allowed:
            raise ConvergenceFailure("residual above 2^(-bits/2)")
    return LKPair(L=L, K=K)


def gamma_asym(M: int, ctx: PrecCtx) -> arb:
    """Main term of the large-M asymptotic for gamma(M) (error factor dropped)."""
    if M < 2:
        raise ValueError("gamma_asym needs M >= 2")
    N = 2 * M - 2
    lk = solve_L(N, ctx)
    with workprec(ctx.bits + 32):
        L, K = lk.L, lk.K
        Ma = arb(M)
        Na = arb(N)
        lead = (
            arb(M - 2).exp()
            * Ma ** (Ma + arb(0.5))
            * L**N
            / (arb(2) ** (2 * M - 5) * Na ** (Na + arb(0.5)))
        )
        value = lead * (2 * arb.pi() / K).sqrt() * (L / 4 - Na / L + arb(0.75)).exp() / 8
    return value


# -- the coefficient table ----------------------------------------------------------


class Provenance(enum.Enum):
    INTEGRAL = "Integral"
    DIRECT = "Direct"
    SYNTHETIC = "Synthetic"


@dataclass(frozen=True)
class GammaEntry:
    value: arb
    bits: int
    provenance: Provenance
    # decimal (mid, rad) as read from a cache file; reused on save so that
    # load/save cycles do not widen the stored radius
    text: Optional[tuple] = field(default=None, compare=False)


@dataclass
class Audit:
    checked: int
    positivity_failures: list
    log_concavity_failures: list
    decay_failures: list

    @property
    def ok(self) -> bool:
        return not (self.positivity_failures or self.log_concavity_failures or self.decay_failures)

    def summary(self) -> str:
        return (
            f"entries={self.checked} positivity_failures={len(self.positivity_failures)} "
            f"log_concavity_failures={len(self.log_concavity_failures)} "
            f"decay_failures={len(self.decay_failures)} -> {'PASS' if self.ok else 'FAIL'}"
        )


class GammaTable:
    """Map M -> gamma(M) enclosure, with per-entry precision and provenance.

    With ``autofill`` (the default) missing or under-precise entries are
    computed on demand.  Synthetic tables (``from_values``) never recompute.
    Reads are lock free; writes go through a lock.
    """

    def __init__(self, autofill: bool = True):
        self.entries: dict[int, GammaEntry] = {}
        self.autofill = autofill
        self._lock = threading.Lock()

    @classmethod
    def from_values(cls, values: Mapping[int, Number]) -> "GammaTable":
        table = cls(autofill=False)
        for M, v in values.items():
            table.store(M, _as_arb(v), 1 << 30, Provenance.SYNTHETIC)
        return table

    def __contains__(self, M: int) -> bool:
        return M in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def indices(self) -> list[int]:
        return sorted(self.entries)

    def store(self, M: int, value: arb, bits: int, provenance: Provenance) -> None:
        with self._lock:
            old = self.entries.get(M)
            if old is None or old.bits <= bits:
                self.entries[M] = GammaEntry(value, bits, provenance)

    def covers(self, lo: int, hi: int, bits: int = 0) -> bool:
        return all(M in self.entries and self.entries[M].bits >= bits for M in range(lo, hi + 1))

    def get(self, M: int, ctx: Optional[PrecCtx] = None) -> arb:
        entry = self.entries.get(M)
        need = ctx.bits if ctx is not None else 0
        if entry is not None and (entry.bits >= need or entry.provenance is Provenance.SYNTHETIC):
            return entry.value
        if not self.autofill:
            if entry is not None:
                return entry.value
            raise MissingCoefficient(f"gamma({M}) not in table")
        if M < 0:
            raise MissingCoefficient(f"gamma({M}) undefined")
        ctx = ctx or PrecCtx()
        return gamma0_direct(ctx, self) if M == 0 else gamma(M, ctx, self)

    def __getitem__(self, M: int) -> arb:
        return self.get(M)

    def fill(self, indices: Iterable[int], ctx: PrecCtx, workers: int = 1) -> None:
        """Compute every missing or under-precise entry in ``indices``."""
        todo = sorted(
            M for M in set(indices)
            if not (M in self.entries and self.entries[M].bits >= ctx.bits)
        )
        if not todo:
            return
        if workers > 1:
            zs = sorted({z for M in todo if M >= 1 for z in (2 * M - 2, 2 * M)})
            jobs = [(z, ctx.bits, ctx.max_bits) for z in zs]
            with ProcessPoolExecutor(max_workers=workers) as pool:
                target = 2.0 ** -(ctx.bits - 24)
                for z, parts in pool.map(_F_worker, jobs, chunksize=4):
                    _F_CACHE[(Fraction(z), ctx.bits, None, target)] = parts
        for M in todo:
            if M == 0:
                gamma0_direct(ctx, self)
            else:
                gamma(M, ctx, self)
            log.debug("gamma(%d) filled at %d bits", M, ctx.bits)

    def audit(self) -> Audit:
        idx = self.indices()
        pos, lc, decay = [], [], []
        for M in idx:
            if not self.entries[M].value > 0:
                pos.append(M)
        for M in idx:
            if M >= 2 and M - 1 in self.entries and M - 2 in self.entries:
                a, b, c = (self.entries[i].value for i in (M - 2, M - 1, M))
                if not b * b - a * c >= 0:
                    lc.append(M)
            if M >= 1 and M + 1 in self.entries:
                if not self.entries[M + 1].value < self.entries[M].value:
                    decay.append(M)
        return Audit(len(idx), pos, lc, decay)

    def snapshot(self) -> list:
        """Picklable copy of the entries (for worker processes).

        Midpoints are exact; a rebuilt radius may be one unit larger in its
        last (30-bit) place, since Arb rounds radii upward on construction.
        """
        return [
            (M, to_parts(e.value), e.bits, e.provenance.value)
            for M, e in sorted(self.entries.items())
        ]

    @classmethod
    def from_snapshot(cls, snap: list, autofill: bool = True) -> "GammaTable":
        table = cls(autofill=autofill)
        for M, parts, bits, prov in snap:
            table.entries[M] = GammaEntry(from_parts(parts), bits, Provenance(prov))
        return table

    # persistence

    def save(self, path: Union[str, os.PathLike]) -> None:
        lines = [_CACHE_HEADER, "# M\tmidpoint\tradius\tbits_used\tprovenance"]
        for M in self.indices():
            e = self.entries[M]
            mid, rad = e.text or to_decimal(e.value, e.bits)
            lines.append(f"{M}\t{mid}\t{rad}\t{e.bits}\t{e.provenance.value}")
        tmp = f"{os.fspath(path)}.tmp"
        with open(tmp, "w", encoding="ascii") as fh:
            fh.write("\n".join(lines) + "\n")
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: Union[str, os.PathLike], autofill: bool = True) -> "GammaTable":
        table = cls(autofill=autofill)
        with open(path, encoding="ascii") as fh:
            header = fh.readline().rstrip("\n")
            if header != _CACHE_HEADER:
                raise ValueError(f"{path}: unsupported cache header {header!r}")
            for line in fh:
                if not line.strip() or line.startswith("#"):
                    continue
                M, mid, rad, bits, prov = line.rstrip("\n").split("\t")
                bits = int(bits)
                table.entries[int(M)] = GammaEntry(
                    from_decimal(mid, rad, bits), bits, Provenance(prov), (mid, rad)
                )
        return table
