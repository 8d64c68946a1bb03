"""Modified Bessel functions K0, K1 and the excursion-maximum cdf F3.

The Bessel kernels work in fixed-point integer arithmetic (values scaled by
``2**wp``) on top of mpmath's big-integer backend.  Two evaluation routes
exist:

* the ascending series, valid for every ``x > 0``; it cancels about
  ``2x/ln 2`` bits, which is paid for with extra fractional bits;
* the large-argument expansion, used only where its remainder (bounded by
  the first neglected term for real positive arguments and orders 0, 1) is
  already below the requested tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from mpmath.libmp import (
    from_man_exp,
    mpf_div,
    mpf_exp,
    mpf_log,
    mpf_mul,
    mpf_neg,
    mpf_pi,
    mpf_shift,
    mpf_sqrt,
    round_nearest,
    to_fixed,
)

from .errors import DomainError, SlowConvergenceError
from .precision import PrecisionContext, fixed_constant, make_context

__all__ = [
    "BesselPair",
    "F3Value",
    "F3_MAX_TERMS",
    "F3_MIN_X",
    "bessel_k01",
    "bessel_term",
    "bessel_term_bound",
    "f3_cdf",
    "f3_cdf_array",
    "f3_terms_needed",
]

LOG2E = 1.0 / math.log(2.0)
HALF_LOG2_PI_OVER_2 = 0.5 * math.log2(math.pi / 2)

F3_MAX_TERMS = 10**6
F3_MIN_X = 0.05


@dataclass(frozen=True)
class BesselPair:
    argument: mpmath.mpf
    k0: mpmath.mpf
    k1: mpmath.mpf


@dataclass(frozen=True)
class F3Value:
    x: mpmath.mpf
    value: mpmath.mpf
    terms_used: int
    tail_bound: mpmath.mpf


def _log2(v) -> float:
    """log2 of a positive mpf (or float) without overflow."""
    if isinstance(v, (int, float)):
        return math.log2(v)
    sign, man, exp, _ = v._mpf_
    if sign or not man:
        raise DomainError("log2 of a nonpositive value")
    shift = max(0, man.bit_length() - 60)
    return math.log2(man >> shift) + shift + exp


def _check_positive(x):
    if not x > 0:
        raise DomainError(f"argument must be positive, got {x}")


# -- ascending series -------------------------------------------------------

def _k01_series_fixed(x: mpmath.mpf, wp: int) -> tuple[int, int, int]:
    """K0(x), K1(x) scaled by 2**wp, plus an error bound in units of 2**-wp.

    K0 = -(ln(x/2) + gamma) I0(x) + sum_m y^m/(m!)^2 H_m
    K1 = 1/x + (ln(x/2) + gamma) I1(x) - x/4 sum_m (H_m + H_{m+1}) y^m/(m!(m+1)!)
    with y = x^2/4 and H_m the harmonic numbers.
    """
    one = 1 << wp
    X = to_fixed(x._mpf_, wp)
    if X <= 0:
        raise DomainError("argument underflows the working precision")
    y = (X * X >> wp) >> 2
    t0 = t1 = one
    i0 = j1 = s1 = one
    s0 = h = 0
    m = 0
    while True:
        m += 1
        h += one // m
        t0 = (t0 * y >> wp) // (m * m)
        t1 = (t1 * y >> wp) // (m * (m + 1))
        if not t0 and not t1:
            break
        i0 += t0
        j1 += t1
        s0 += t0 * h >> wp
        s1 += t1 * (2 * h + one // (m + 1)) >> wp
    lead = to_fixed(mpf_log(x._mpf_, wp + 8), wp) - fixed_constant("ln2", wp) + fixed_constant("euler", wp)
    k0 = s0 - (lead * i0 >> wp)
    i1 = (X * j1 >> wp) >> 1
    inv_x = (one << wp) // X
    k1 = inv_x + (lead * i1 >> wp) - ((X * s1 >> wp) >> 2)

    # rounding of y and of every shifted product grows with the term
    # magnitudes (~I0), the log factor, H_m and the explicit factor x
    scale = (i0 >> wp) + 1
    err = 16 * (m + 4) * scale * (abs(lead >> wp) + (h >> wp) + 4) * ((X >> wp) + 2)
    err += (inv_x >> wp) ** 2 + 16
    return k0, k1, err


def _series_start_bits(target_bits: int, x: float) -> int:
    return target_bits + math.ceil(2 * x * LOG2E) + 2 * max(target_bits, 64).bit_length() + 24 + max(0, math.ceil(-math.log2(x)))


# -- large-argument expansion ----------------------------------------------

def _asymptotic_length(x: float, nu: int, log2_rel: float) -> int | None:
    """Number of terms after which the expansion remainder is below 2**log2_rel.

    Returns None when the terms start to grow before reaching the target.
    The remainder after ``ell`` terms is bounded by the ``ell``-th term for
    real positive argument and ``ell >= nu - 1/2``.
    """
    mu = 4 * nu * nu
    log_term = 0.0
    k = 0
    while True:
        k += 1
        ratio = abs(mu - (2 * k - 1) ** 2) / (8 * k * x)
        if ratio >= 1.0 and k > 1:
            return None
        log_term += math.log2(ratio)
        if log_term <= log2_rel:
            return max(k, 1)


def _asymptotic_sum_fixed(X: int, wp: int, nu: int, ell: int) -> int:
    """sum_{k<ell} a_k(nu)/x^k scaled by 2**wp, x given as fixed point X."""
    mu = 4 * nu * nu
    one = 1 << wp
    term = one
    total = one
    for k in range(1, ell):
        term = term * (mu - (2 * k - 1) ** 2) * one // (8 * k * X)
        total += term
    return total


def _asymptotic_prefactor(x: mpmath.mpf, prec: int):
    """sqrt(pi/(2x)) exp(-x) as a raw mpf tuple at ``prec`` bits."""
    wp = prec + 10
    v = x._mpf_
    root = mpf_sqrt(mpf_div(mpf_pi(wp), mpf_shift(v, 1), wp), wp)
    return mpf_mul(root, mpf_exp(mpf_neg(v), wp), prec)


def bessel_term_bound(x, ctx: PrecisionContext | None = None) -> mpmath.mpf:
    """Upper bound sqrt(pi/2) sqrt(x) exp(-x) on x K1(x) - K0(x)."""
    ctx = ctx or make_context()
    mp = ctx.mp
    x = mp.mpf(x)
    _check_positive(x)
    return mp.sqrt(mp.pi / 2) * mp.sqrt(x) * mp.exp(-x)


def bessel_k01(x, ctx: PrecisionContext | None = None, method: str = "auto") -> BesselPair:
    """K0(x) and K1(x) to relative accuracy 2**-bits.

    ``method`` is ``"series"``, ``"asymptotic"`` or ``"auto"``; ``"auto"``
    takes the expansion only when its bounded remainder already meets the
    target.
    """
    ctx = ctx or make_context()
    mp = ctx.mp
    x = mp.mpf(x)
    _check_positive(x)
    bits = ctx.bits
    xf = float(x)
    rel = -(bits + 6)
    if method not in ("auto", "series", "asymptotic"):
        raise ValueError(f"unknown method {method!r}")
    ell = None
    if method != "series" and math.isfinite(xf):
        ells = [_asymptotic_length(xf, nu, rel) for nu in (0, 1)]
        if None not in ells:
            ell = max(ells)
        elif method == "asymptotic":
            raise DomainError(f"expansion cannot reach 2^{rel} at x={x}")
    if ell is not None:
        wp = bits + ell.bit_length() + 16
        X = to_fixed(x._mpf_, wp)
        pre = _asymptotic_prefactor(x, wp)
        pair = []
        for nu in (0, 1):
            s = _asymptotic_sum_fixed(X, wp, nu, ell)
            pair.append(mp.make_mpf(from_man_exp(s, -wp, bits, round_nearest)) * mp.make_mpf(pre))
        return BesselPair(x, pair[0], pair[1])

    wp = _series_start_bits(bits, xf)
    while True:
        k0, k1, err = _k01_series_fixed(x, wp)
        deficit = (err.bit_length() + bits + 4) - k0.bit_length()
        if k0 > 0 and deficit <= 0:
            break
        wp += max(deficit, 16)
    return BesselPair(
        x,
        mp.make_mpf(from_man_exp(k0, -wp, bits, round_nearest)),
        mp.make_mpf(from_man_exp(k1, -wp, bits, round_nearest)),
    )


def bessel_term(x, ctx: PrecisionContext | None = None, tol=None) -> mpmath.mpf:
    """x K1(x) - K0(x) with absolute error at most ``tol``.

    Returns exactly zero, without touching a Bessel function, once the
    bound sqrt(pi/2) sqrt(x) exp(-x) is already below ``tol``.  The default
    ``tol`` is ``2**-bits``.
    """
    ctx = ctx or make_context()
    mp = ctx.mp
    x = mp.mpf(x)
    _check_positive(x)
    log2_tol = -float(ctx.bits) if tol is None else _log2(mp.mpf(tol))
    xf = float(x)
    log2_bound = HALF_LOG2_PI_OVER_2 + 0.5 * math.log2(xf) - xf * LOG2E
    if log2_bound < log2_tol - 1e-6:
        return mp.zero
    return _term_fixed(x, xf, log2_tol)


def _term_fixed(x: mpmath.mpf, xf: float, log2_tol: float) -> mpmath.mpf:
    log2_pre = HALF_LOG2_PI_OVER_2 - 0.5 * math.log2(xf) - xf * LOG2E
    # remainder pieces: P x |a_l(1)|/x^l and P |a_l(0)|/x^l, each <= tol/4
    ell1 = _asymptotic_length(xf, 1, log2_tol - 2 - log2_pre - math.log2(xf))
    ell0 = _asymptotic_length(xf, 0, log2_tol - 2 - log2_pre)
    if ell0 is not None and ell1 is not None:
        ell = max(ell0, ell1)
        # relative precision that keeps rounding below tol/4
        wp = max(32, math.ceil(log2_pre + math.log2(xf) + 1 - log2_tol)) + ell.bit_length() + 12
        X = to_fixed(x._mpf_, wp)
        s1 = _asymptotic_sum_fixed(X, wp, 1, ell)
        s0 = _asymptotic_sum_fixed(X, wp, 0, ell)
        core = (X * s1 >> wp) - s0
        pre = _asymptotic_prefactor(x, wp)
        return x.context.make_mpf(from_man_exp(core, -wp)) * x.context.make_mpf(pre)

    wp = math.ceil(-log2_tol) + math.ceil(xf * LOG2E) + 2 * max(64, math.ceil(-log2_tol)).bit_length() + 16
    while True:
        k0, k1, err = _k01_series_fixed(x, wp)
        X = to_fixed(x._mpf_, wp)
        total_err = err * ((X >> wp) + 2)
        deficit = total_err.bit_length() - wp - math.floor(log2_tol) + 2
        if deficit <= 0:
            break
        wp += max(deficit, 16)
    term = (X * k1 >> wp) - k0
    return x.context.make_mpf(from_man_exp(term, -wp))


# -- excursion maximum -------------------------------------------------------

def f3_terms_needed(x, tol) -> tuple[int, mpmath.mpf]:
    """Smallest n >= 1 with 2 exp(-(n+1)x^2)/(1 - exp(-x^2)) <= tol, and that bound."""
    ctx = make_context(128)
    mp = ctx.mp
    x = mp.mpf(x)
    tol = mp.mpf(tol)
    x2 = x * x
    denom = -mp.expm1(-x2)

    def tail(n):
        return 2 * mp.exp(-(n + 1) * x2) / denom

    n = max(1, int(mp.ceil(mp.log(2 / (tol * denom)) / x2)) - 1)
    while n > 1 and tail(n - 1) <= tol:
        n -= 1
    while tail(n) > tol:
        n += 1
    return n, tail(n)


def f3_cdf(x, tol=1e-30, ctx: PrecisionContext | None = None) -> F3Value:
    """cdf of the Brownian excursion maximum, 1 - 2 sum (4n^2x^2 - 1) exp(-2n^2x^2).

    The series stops at the first n whose geometric tail bound (from the
    domination (4a^2 t - 1) exp(-2a^2 t) <= exp(-a t)) is below ``tol``.
    Terms already below the working precision are not evaluated.
    """
    ctx = ctx or make_context()
    mp = ctx.mp
    x = mp.mpf(x)
    _check_positive(x)
    tol = mp.mpf(tol)
    if not 0 < tol < 1:
        raise DomainError("tol must lie in (0, 1)")
    if x < F3_MIN_X:
        raise SlowConvergenceError(x, F3_MAX_TERMS, f"F3 series is slow-converging below x={F3_MIN_X} (x={x})")
    n_needed = f3_terms_needed(x, tol)
    n_terms, tail = n_needed
    if n_terms > F3_MAX_TERMS:
        raise SlowConvergenceError(x, F3_MAX_TERMS)
    wbits = ctx.working_bits()
    with mp.workprec(wbits):
        x2 = x * x
        floor = mp.ldexp(1, -wbits)
        acc = mp.zero
        for n in range(1, n_terms + 1):
            a = 2 * n * n * x2
            term = (2 * a - 1) * mp.exp(-a)
            acc += term
            if a > 1.5 and term < floor:
                break
        value = 1 - 2 * acc
    value = mp.mpf(min(max(value, mp.zero), mp.one))
    return F3Value(x=x, value=value, terms_used=n_terms, tail_bound=mp.mpf(tail))


def f3_cdf_array(x, tol: float = 1e-12) -> np.ndarray:
    """Vectorised double-precision F3 for Monte Carlo use.

    Terms whose contribution is below 1e-20 for every requested point are
    dropped; beyond that the truncation follows :func:`f3_cdf`.
    """
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return np.ones_like(x)
    xmin = float(x.min())
    if not xmin > 0:
        raise DomainError("F3 arguments must be positive")
    if xmin < F3_MIN_X:
        raise SlowConvergenceError(xmin, F3_MAX_TERMS)
    n_terms, _ = f3_terms_needed(xmin, max(tol, 1e-300))
    if n_terms > F3_MAX_TERMS:
        raise SlowConvergenceError(xmin, F3_MAX_TERMS)
    # 2(4n^2x^2)exp(-2n^2x^2) < 1e-20 once 2n^2x^2 >= 55
    n_float = math.ceil(math.sqrt(55.0 / (2 * xmin * xmin))) + 1
    x2 = np.minimum(x, 1e6) ** 2
    acc = np.zeros_like(x2)
    for n in range(1, min(n_terms, n_float) + 1):
        a = 2.0 * n * n * x2
        acc += (2.0 * a - 1.0) * np.exp(-a)
    return np.clip(1.0 - 2.0 * acc, 0.0, 1.0)
