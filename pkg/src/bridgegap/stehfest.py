"""Gaver-Stehfest numerical Laplace inversion with exact rational weights.

    f(t) ~ ln(2)/t * sum_{k=1}^{2K} xi_k g(k ln(2)/t)

The weights ``xi_k`` are built exactly as :class:`fractions.Fraction` and
rounded only when the inversion sum is formed.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterable

import mpmath

from .errors import DomainError, PrecisionError
from .precision import PrecisionContext, binomial, make_context, to_hp

__all__ = [
    "GSWeights",
    "Transform",
    "MAX_K",
    "gs_weights",
    "gs_invert",
    "min_bits_for",
    "check_precision",
    "save_weights",
    "load_weights",
    "cached_weights",
]

MAX_K = 512


@dataclass(frozen=True)
class GSWeights:
    K: int
    xi: tuple[Fraction, ...]

    def __len__(self):
        return len(self.xi)

    def scaled(self) -> tuple[Fraction, ...]:
        """xi_k / k, the coefficients of the cdf form of the inversion."""
        return tuple(x / k for k, x in enumerate(self.xi, start=1))

    def cancellation_bits(self, scaled: bool = True) -> float:
        """log2 of sum |xi_k| (or sum |xi_k|/k): bits lost when the sum is formed."""
        coeffs = self.scaled() if scaled else self.xi
        total = sum(abs(c) for c in coeffs)
        return max(0.0, math.log2(total.numerator) - math.log2(total.denominator))


@dataclass(frozen=True)
class Transform:
    """A real Laplace transform ``func(s, ctx)`` with per-call absolute error ``tol``."""

    func: Callable
    tol: float = 0.0

    def __call__(self, s, ctx):
        return self.func(s, ctx)


def _xi(K: int, k: int) -> Fraction:
    total = 0
    for j in range((k + 1) // 2, min(k, K) + 1):
        total += j ** (K + 1) * binomial(K, j) * binomial(2 * j, j) * binomial(j, k - j)
    sign = -1 if (k + K) % 2 else 1
    return Fraction(sign * total, math.factorial(K))


@lru_cache(maxsize=64)
def gs_weights(K: int) -> GSWeights:
    """Exact weights xi_1..xi_2K for the given K (1 <= K <= 512)."""
    if not isinstance(K, int) or not 1 <= K <= MAX_K:
        raise DomainError(f"K must be an integer in [1, {MAX_K}], got {K!r}")
    return GSWeights(K, tuple(_xi(K, k) for k in range(1, 2 * K + 1)))


def min_bits_for(K: int) -> int:
    return math.ceil(3.5 * K) + 64


def check_precision(K: int, ctx: PrecisionContext) -> None:
    need = min_bits_for(K)
    if ctx.bits < need:
        raise PrecisionError(f"K={K} needs at least {need} bits of precision, context has {ctx.bits}")


def _identity_holds(w: GSWeights) -> bool:
    return sum(w.scaled()) == 1


def save_weights(w: GSWeights, path) -> None:
    """Write ``K k numerator/denominator`` lines."""
    lines = [f"{w.K} {k} {x.numerator}/{x.denominator}\n" for k, x in enumerate(w.xi, start=1)]
    Path(path).write_text("".join(lines), encoding="ascii", newline="\n")


def load_weights(path) -> GSWeights:
    """Read a weight file, refusing it unless sum xi_k/k == 1 exactly."""
    text = Path(path).read_text(encoding="ascii")
    Ks, xi = set(), []
    for lineno, line in enumerate(text.split("\n"), start=1):
        if not line:
            continue
        parts = line.split(" ")
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected 'K k p/q'")
        K, k = int(parts[0]), int(parts[1])
        num, _, den = parts[2].partition("/")
        if k != len(xi) + 1:
            raise ValueError(f"{path}:{lineno}: weights out of order")
        Ks.add(K)
        xi.append(Fraction(int(num), int(den)))
    if len(Ks) != 1:
        raise ValueError(f"{path}: mixed or missing K")
    K = Ks.pop()
    w = GSWeights(K, tuple(xi))
    if len(xi) != 2 * K or not _identity_holds(w):
        raise ValueError(f"{path}: weights fail the sum xi_k/k = 1 check")
    return w


def cached_weights(K: int, cache_dir=None) -> GSWeights:
    """Weights for K, read from or written to ``cache_dir`` when given."""
    if cache_dir is None:
        return gs_weights(K)
    path = Path(cache_dir) / f"gs_weights_K{K}.txt"
    if path.exists():
        try:
            return load_weights(path)
        except ValueError:
            pass
    w = gs_weights(K)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(f".{os.getpid()}.tmp")
    save_weights(w, tmp)
    os.replace(tmp, path)
    return w


def _evaluate(args):
    # nodes travel as raw tuples: mpf types of a private context do not pickle
    g, s_raw, ctx, wbits = args
    mp = ctx.mp
    with mp.workprec(wbits):
        v = g(mp.make_mpf(s_raw), ctx)
        return mp.mpf(v)._mpf_


def _map(fn, items: Iterable, workers: int | None):
    items = list(items)
    if workers and workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(a) for a in items]


def gs_invert(
    g: Callable,
    t,
    w: GSWeights | int,
    ctx: PrecisionContext | None = None,
    *,
    workers: int | None = None,
    enforce_precision: bool = True,
    guarded: bool = True,
) -> mpmath.mpf:
    """Invert the transform ``g(s, ctx)`` at ``t > 0``.

    Nodes ``k ln2/t`` and the transform values are formed with enough guard
    bits to absorb the cancellation of the weights: ``g`` runs with the
    working precision of ``ctx.mp`` raised accordingly.  ``guarded=False``
    together with ``enforce_precision=False`` runs everything at plain
    ``ctx.bits``; it exists to show what too little precision does.  The sum runs in ascending
    k, so results do not depend on ``workers``.
    """
    ctx = ctx or make_context()
    if isinstance(w, int):
        w = gs_weights(w)
    if enforce_precision:
        check_precision(w.K, ctx)
    mp = ctx.mp
    wbits = ctx.working_bits(w.cancellation_bits(scaled=False)) if guarded else ctx.bits
    with mp.workprec(wbits):
        # t itself is kept at working precision: its rounding is amplified too
        t = mp.mpf(t)
        if not t > 0:
            raise DomainError("inversion point t must be positive")
        base = mp.ln2 / t
        nodes = [k * base for k in range(1, len(w.xi) + 1)]
    values = _map(_evaluate, [(g, s._mpf_, ctx, wbits) for s in nodes], workers)
    with mp.workprec(wbits):
        acc = mp.zero
        for x, v in zip(w.xi, values):
            acc += to_hp(x, ctx, wbits) * mp.make_mpf(v)
        result = base * acc
    return +result
