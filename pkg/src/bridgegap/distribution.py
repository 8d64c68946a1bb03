"""The transform G, the Gaver-Stehfest cdf of M and its upper quantiles.

    G(t)  = exp(-H(t)),   H(t) = 4 sum_n f(n c),   c = 2 sqrt(2) t,
    f(u)  = u K1(u) - K0(u),
    F(x) ~ sum_{k=1}^{2K} xi_k/k G_N(sqrt(k ln 2) x).

Each G evaluation is carried out at a precision chosen from its own error
allowance, which is tiny where |xi_k|/k is huge; the weighted sum itself runs
at the context precision plus the cancellation of the weights.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import mpmath

from .errors import ConvergenceError, DomainError
from .precision import PrecisionContext, make_context, to_hp
from .specfun import bessel_term
from .stehfest import check_precision, gs_weights

__all__ = [
    "GEvaluation",
    "CdfEvaluation",
    "QuantileResult",
    "VALIDATED_MIN_X",
    "MAX_TERMS",
    "g_tail_bound",
    "g_terms_for",
    "g_transform",
    "n0_bound",
    "cdf",
    "cdf_many",
    "quantile",
]

VALIDATED_MIN_X = 0.33
MAX_TERMS = 10**7
QUANTILE_BRACKET = (0.33, 2.54)
QUANTILE_LOWEST = 0.05
MAX_EXPANSIONS = 20

_AUX = make_context(256)


@dataclass(frozen=True)
class GEvaluation:
    t: mpmath.mpf
    value: mpmath.mpf
    n_terms: int
    tail_bound: mpmath.mpf
    n_evaluated: int = 0
    eval_tol: float = 0.0


@dataclass(frozen=True)
class CdfEvaluation:
    x: mpmath.mpf
    K: int
    N_used: int
    value: mpmath.mpf
    eps_budget: float
    clamped: bool
    bits: int
    fixed_n: int | None = None
    n0: int | None = None
    below_validated_range: bool = False
    raw_value: mpmath.mpf | None = None
    truncation_bound: mpmath.mpf | None = None
    point_n: tuple[int, ...] = field(default=(), repr=False)
    point_tail: tuple[mpmath.mpf, ...] = field(default=(), repr=False)


@dataclass(frozen=True)
class QuantileResult:
    p: float
    x: mpmath.mpf
    residual: mpmath.mpf
    iterations: int
    bracket: tuple[float, float] = (0.33, 2.54)


def _positive(v, name):
    if not v > 0:
        raise DomainError(f"{name} must be positive, got {v}")


def g_tail_bound(t, n: int) -> mpmath.mpf:
    """4 sqrt(pi/2) exp(-cN/2)/(1 - exp(-c/2)), c = 2 sqrt(2) t (256-bit)."""
    mp = _AUX.mp
    c = 2 * mp.sqrt(2) * mp.mpf(t)
    return 4 * mp.sqrt(mp.pi / 2) * mp.exp(-c * n / 2) / -mp.expm1(-c / 2)


def g_terms_for(t, eps) -> int:
    """Smallest N whose tail bound is at most ``eps``."""
    mp = _AUX.mp
    t = mp.mpf(t)
    eps = mp.mpf(eps)
    c = 2 * mp.sqrt(2) * t
    guess = (mp.log(4 * mp.sqrt(mp.pi / 2) / (eps * -mp.expm1(-c / 2)))) * 2 / c
    if guess > 2 * MAX_TERMS:
        return int(min(guess, 10**18))
    n = max(1, int(mp.ceil(guess)))
    while n > 1 and g_tail_bound(t, n - 1) <= eps:
        n -= 1
    while g_tail_bound(t, n) > eps:
        n += 1
    return n


def g_transform(
    t,
    eps=1e-60,
    max_n: int | None = None,
    ctx: PrecisionContext | None = None,
    *,
    tol=None,
    min_n: int | None = None,
) -> GEvaluation:
    """G_N(t) with N fixed (``max_n``) or chosen from the tail bound.

    Adaptive mode picks the smallest N with tail bound <= ``eps``, raised
    to ``min_n`` when given.  ``tol`` is the allowed absolute evaluation
    error of the returned value (default ``eps``); terms whose Bessel bound
    is already below their share of it are skipped as exact zeros.
    """
    ctx = ctx or make_context()
    mp = ctx.mp
    eps = _AUX.mpf(eps)
    _positive(eps, "eps")
    tol = eps if tol is None else _AUX.mpf(tol)
    _positive(tol, "tol")
    log2_tol = float(mpmath.log(tol, 2))
    with mp.workprec(max(ctx.bits, math.ceil(-log2_tol) + 64)):
        # t is kept at the evaluation precision, not rounded to ctx.bits
        t = mp.mpf(t)
    _positive(t, "t")
    if max_n is not None:
        if max_n < 1:
            raise DomainError("max_n must be at least 1")
        n = int(max_n)
    else:
        n = g_terms_for(t, eps)
        if min_n:
            n = max(n, int(min_n))
        if n > MAX_TERMS:
            raise ConvergenceError(
                f"G({t}) needs {n} product factors to reach eps={eps}",
                module="distribution",
                bound="product tail bound 4 sqrt(pi/2) exp(-cN/2)/(1 - exp(-c/2)), 1e7 factor cap",
                t=t,
                eps=eps,
            )
    # H carries the error 4 n tol_term <= tol/2; exp(-H) adds the rest
    term_tol = tol / (8 * n)
    prec = max(64, math.ceil(-log2_tol) + 16 + n.bit_length())
    with mp.workprec(prec + 8):
        c = 2 * mp.sqrt(2) * t
        h = mp.zero
        evaluated = 0
        for j in range(1, n + 1):
            v = bessel_term(j * c, ctx, term_tol)
            if not v:
                break  # the bound decreases in j, so every later term is skipped too
            h += v
            evaluated = j
    with mp.workprec(prec):
        value = mp.exp(-4 * h)
    return GEvaluation(
        t=t,
        value=value,
        n_terms=n,
        tail_bound=g_tail_bound(t, n),
        n_evaluated=evaluated,
        eval_tol=float(tol),
    )


def n0_bound(x, K: int, eps) -> int:
    """Number of factors that keeps the truncation error of the cdf below eps.

    floor( (ln(1/(eps (1 - exp(-a)))) + (2K+1) ln K + 3K + 2) / a ) + 1 with
    a = sqrt(2 ln 2) x, evaluated at 256 bits.
    """
    mp = _AUX.mp
    x = mp.mpf(x)
    eps = mp.mpf(eps)
    _positive(x, "x")
    if not 0 < eps < 1:
        raise DomainError("eps must lie in (0, 1)")
    if K < 1:
        raise DomainError("K must be at least 1")
    a = mp.sqrt(2 * mp.ln2) * x
    inner = mp.log(1 / (eps * -mp.expm1(-a))) + (2 * K + 1) * mp.log(K) + 3 * K + 2
    return int(mp.floor(inner / a)) + 1


def _budget_log(w, eps) -> list:
    """Per-point budgets as 256-bit mpf (float underflows for large K)."""
    mp = _AUX.mp
    two_k = 2 * w.K
    eps = mp.mpf(eps)
    out = []
    for coeff in w.scaled():
        size = abs(coeff)
        share = eps / two_k
        if size > 1:
            share /= mp.mpf(size.numerator) / size.denominator
        out.append(share)
    return out


def _eval_point(args):
    # raw mpf tuples cross the process boundary; private contexts do not pickle
    t_raw, eps_raw, fixed_n, n_floor, bits = args
    ctx = make_context(bits)
    mp = ctx.mp
    t, eps_k = mp.make_mpf(t_raw), _AUX.mp.make_mpf(eps_raw)
    if fixed_n is not None:
        g = g_transform(t, eps_k, max_n=fixed_n, ctx=ctx, tol=eps_k)
    else:
        g = g_transform(t, eps_k / 2, ctx=ctx, tol=eps_k / 2, min_n=n_floor)
    return g.value._mpf_, g.n_terms, g.tail_bound._mpf_, g.n_evaluated, g.eval_tol


def _rebuild(ctx, t, raw) -> GEvaluation:
    value, n, tail, evaluated, tol = raw
    return GEvaluation(t, ctx.mp.make_mpf(value), n, _AUX.mp.make_mpf(tail), evaluated, tol)


def _default_workers() -> int:
    env = os.environ.get("BM_THREADS")
    if env:
        return max(1, int(env))
    return 1


def cdf_many(
    xs: Sequence,
    K: int = 100,
    eps=1e-60,
    fixed_n: int | None = None,
    ctx: PrecisionContext | None = None,
    workers: int | None = None,
) -> list[CdfEvaluation]:
    """:func:`cdf` at several points, sharing one worker pool."""
    ctx = ctx or make_context()
    check_precision(K, ctx)
    w = gs_weights(K)
    scaled = w.scaled()
    wbits = ctx.working_bits(w.cancellation_bits())
    budgets = _budget_log(w, eps)
    mp = ctx.mp

    jobs, plan, ts_all = [], [], []
    for x in xs:
        with mp.workprec(wbits):
            x = mp.mpf(x)
            _positive(x, "x")
            s = mp.sqrt(mp.ln2) * x
            ts = [mp.sqrt(k) * s for k in range(1, 2 * K + 1)]
        n0 = n0_bound(x, K, eps) if float(eps) < 1 else None
        n_floor = None if fixed_n is not None else n0
        plan.append((x, n0))
        ts_all.extend(ts)
        jobs.extend((t._mpf_, budgets[k]._mpf_, fixed_n, n_floor, ctx.bits) for k, t in enumerate(ts))

    workers = _default_workers() if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            raws = list(pool.map(_eval_point, jobs, chunksize=max(1, len(jobs) // (8 * workers))))
    else:
        raws = [_eval_point(j) for j in jobs]
    evals = [_rebuild(ctx, t, r) for t, r in zip(ts_all, raws)]

    with mp.workprec(wbits):
        # the decimal 0.33, not the slightly larger double
        min_x = mp.mpf(repr(VALIDATED_MIN_X))
    results = []
    for i, (x, n0) in enumerate(plan):
        point = evals[i * 2 * K:(i + 1) * 2 * K]
        with mp.workprec(wbits):
            acc = mp.zero
            for coeff, g in zip(scaled, point):
                acc += to_hp(coeff, ctx, wbits) * g.value
            trunc = sum(abs(to_hp(coeff, _AUX)) * g.tail_bound for coeff, g in zip(scaled, point))
        raw = mp.mpf(acc)
        value = min(max(raw, mp.zero), mp.one)
        results.append(
            CdfEvaluation(
                x=x,
                K=K,
                N_used=min(g.n_terms for g in point),
                value=value,
                eps_budget=float(eps),
                clamped=value != raw,
                bits=ctx.bits,
                fixed_n=fixed_n,
                n0=n0,
                below_validated_range=bool(x < min_x),
                raw_value=raw,
                truncation_bound=trunc,
                point_n=tuple(g.n_terms for g in point),
                point_tail=tuple(g.tail_bound for g in point),
            )
        )
    return results


def cdf(
    x,
    K: int = 100,
    eps=1e-60,
    fixed_n: int | None = None,
    ctx: PrecisionContext | None = None,
    workers: int | None = None,
) -> CdfEvaluation:
    """Gaver-Stehfest approximation of P(M <= x).

    Adaptive mode (``fixed_n=None``) gives point k the allowance
    eps_k = eps / (2K |xi_k|/k), half for truncating the product and half
    for evaluating it, and never uses fewer than N0 factors.  ``fixed_n``
    uses exactly that many factors everywhere.
    """
    return cdf_many([x], K=K, eps=eps, fixed_n=fixed_n, ctx=ctx, workers=workers)[0]


def quantile(
    p,
    threshold=1e-7,
    K: int = 100,
    eps=1e-60,
    ctx: PrecisionContext | None = None,
    *,
    bracket: tuple[float, float] = QUANTILE_BRACKET,
    workers: int | None = None,
    max_iter: int = 200,
) -> QuantileResult:
    """x with |F(x) - p| < threshold, by bisection.

    When the bracket does not straddle p its upper end is doubled, or its
    lower end moved halfway towards 0.05, at most 20 times.
    """
    if not 0 < p < 1:
        raise DomainError("p must lie in (0, 1)")
    _positive(threshold, "threshold")
    ctx = ctx or make_context()
    mp = ctx.mp

    def F(v):
        return cdf(v, K=K, eps=eps, ctx=ctx, workers=workers).value

    lo, hi = (mp.mpf(b) for b in bracket)
    f_lo, f_hi = F(lo), F(hi)
    expansions = 0
    while not (f_lo <= p <= f_hi):
        if expansions == MAX_EXPANSIONS:
            raise ConvergenceError(
                f"no bracket straddles p={p} after {MAX_EXPANSIONS} expansions",
                module="distribution",
                bound="quantile bracket expansion cap",
                p=p,
            )
        expansions += 1
        if f_hi < p:
            lo, f_lo = hi, f_hi
            hi = 2 * hi
            f_hi = F(hi)
        else:
            hi, f_hi = lo, f_lo
            lo = QUANTILE_LOWEST + (lo - QUANTILE_LOWEST) / 2
            f_lo = F(lo)

    iterations = 0
    for cand, val in ((lo, f_lo), (hi, f_hi)):
        if abs(val - p) < threshold:
            return QuantileResult(float(p), cand, abs(val - p), 1, (float(lo), float(hi)))
    while True:
        iterations += 1
        mid = (lo + hi) / 2
        val = F(mid)
        residual = abs(val - p)
        if residual < threshold:
            return QuantileResult(float(p), mid, residual, iterations, (float(lo), float(hi)))
        if iterations >= max_iter:
            raise ConvergenceError(
                f"bisection for p={p} stalled at residual {mpmath.nstr(residual, 5)}",
                module="distribution",
                bound="bisection iteration cap",
                p=p,
            )
        if val < p:
            lo = mid
        else:
            hi = mid
