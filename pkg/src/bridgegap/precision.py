"""High-precision arithmetic contract shared by the numeric modules.

All multiple-precision work goes through :class:`PrecisionContext`, which
owns a private :class:`mpmath.MPContext` per thread so that no module ever
touches the global ``mpmath.mp`` state.  Exact rationals are plain
:class:`fractions.Fraction` objects.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Union

import mpmath
from mpmath.ctx_mp import MPContext
from mpmath.libmp import euler_fixed, from_man_exp, from_rational, ln2_fixed, pi_fixed, round_nearest, to_rational

from .errors import PrecisionError

__all__ = [
    "DEFAULT_BITS",
    "MIN_BITS",
    "GUARD_BITS",
    "HPReal",
    "ExactRational",
    "PrecisionContext",
    "PrecisionError",
    "make_context",
    "binomial",
    "to_hp",
    "to_rational_exact",
    "fixed_constant",
    "fixed_to_mpf",
]

DEFAULT_BITS = 4000
MIN_BITS = 64
GUARD_BITS = 32

HPReal = mpmath.mpf
ExactRational = Fraction

_local = threading.local()


@dataclass(frozen=True)
class PrecisionContext:
    """Working precision in bits plus the guard-digit rule.

    An operation that anticipates losing ``c`` bits to cancellation runs at
    ``bits + c + guard`` bits and rounds once at the end.
    """

    bits: int = DEFAULT_BITS
    guard: int = GUARD_BITS

    def __post_init__(self):
        if not isinstance(self.bits, int) or isinstance(self.bits, bool):
            raise TypeError("bits must be an integer")
        if self.bits < MIN_BITS:
            raise PrecisionError(f"precision of {self.bits} bits is below the {MIN_BITS}-bit floor")
        if self.guard < 0:
            raise PrecisionError("guard bits must be nonnegative")

    def guard_bits(self, cancellation: float = 0) -> int:
        return max(0, math.ceil(cancellation)) + self.guard

    def working_bits(self, cancellation: float = 0) -> int:
        return self.bits + self.guard_bits(cancellation)

    @property
    def mp(self) -> MPContext:
        """Thread-local mpmath context preset to ``bits``."""
        pool = getattr(_local, "contexts", None)
        if pool is None:
            pool = _local.contexts = {}
        ctx = pool.get(self.bits)
        if ctx is None:
            ctx = pool[self.bits] = MPContext()
            ctx.prec = self.bits
        return ctx

    def mpf(self, value) -> mpmath.mpf:
        return self.mp.mpf(value)


def make_context(bits: Union[int, str] = "default", guard: int = GUARD_BITS) -> PrecisionContext:
    """Build a :class:`PrecisionContext`; ``"default"`` means 4000 bits."""
    if bits == "default":
        bits = DEFAULT_BITS
    return PrecisionContext(bits=bits, guard=guard)


def binomial(n: int, m: int) -> int:
    """Exact binomial coefficient, zero when ``m > n``."""
    if n < 0 or m < 0:
        raise ValueError("binomial arguments must be nonnegative")
    return math.comb(n, m)


def to_hp(q, ctx: PrecisionContext, bits: int | None = None) -> mpmath.mpf:
    """Round an exact rational (or int) once, to nearest, at ``bits``."""
    q = Fraction(q)
    prec = ctx.bits if bits is None else bits
    return ctx.mp.make_mpf(from_rational(q.numerator, q.denominator, prec, round_nearest))


def to_rational_exact(x) -> Fraction:
    """Exact rational value of a binary floating-point number."""
    raw = x._mpf_ if hasattr(x, "_mpf_") else mpmath.mpf(x)._mpf_
    p, q = to_rational(raw)
    return Fraction(p, q)


@lru_cache(maxsize=None)
def _constant_fixed(name: str, prec: int) -> int:
    if name == "euler":
        return euler_fixed(prec)
    if name == "pi":
        return pi_fixed(prec)
    if name == "ln2":
        return ln2_fixed(prec)
    raise KeyError(name)


def fixed_constant(name: str, prec: int) -> int:
    """``euler``, ``pi`` or ``ln2`` as an integer scaled by ``2**prec``.

    Values are cached on a 256-bit precision ladder and shifted down, so the
    cache stays small when callers ask for many nearby precisions.
    """
    rung = -(-prec // 256) * 256 + 256
    return _constant_fixed(name, rung) >> (rung - prec)


def fixed_to_mpf(ctx: PrecisionContext, value: int, prec: int) -> mpmath.mpf:
    return ctx.mp.make_mpf(from_man_exp(value, -prec))
