from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings, strategies as st

from bridgegap.errors import DomainError, PrecisionError
from bridgegap.precision import make_context
from bridgegap.stehfest import (
    GSWeights,
    cached_weights,
    check_precision,
    gs_invert,
    gs_weights,
    load_weights,
    min_bits_for,
    save_weights,
)


def inv_shift(s, ctx):
    return 1 / (s + 1)


def test_k1_by_hand():
    w = gs_weights(1)
    assert w.xi == (Fraction(2), Fraction(-2))
    assert sum(w.scaled()) == 1


@pytest.mark.parametrize("K", range(1, 61))
def test_unit_identity_exact(K):
    assert sum(gs_weights(K).scaled()) == Fraction(1)


def test_signs_follow_prefactor():
    K = 12
    for k, x in enumerate(gs_weights(K).xi, start=1):
        assert x != 0
        assert (x > 0) == ((k + K) % 2 == 0)


def test_weights_grow():
    w = gs_weights(60)
    assert max(abs(x) for x in w.xi) > Fraction(10) ** 60


def test_k_range():
    with pytest.raises(DomainError):
        gs_weights(0)
    with pytest.raises(DomainError):
        gs_weights(513)
    assert len(gs_weights(512).xi) == 1024


def test_precision_rule():
    assert min_bits_for(100) == 414
    check_precision(100, make_context(414))
    with pytest.raises(PrecisionError):
        check_precision(100, make_context(413))
    with pytest.raises(PrecisionError):
        gs_invert(inv_shift, 1, 60, make_context(256))


def test_reciprocal_inverts_to_one(ctx1024):
    for t in ("0.1", "1", "3", "250"):
        v = gs_invert(lambda s, c: 1 / s, t, 40, ctx1024)
        assert abs(v - 1) <= mpmath.mpf(2) ** (8 - 1024)


@pytest.mark.parametrize("K", [10, 30, 60])
def test_square_reciprocal_equals_second_identity(K, ctx1024):
    # g = 1/s^2 at t = 3 returns 3 (sum xi_k/k^2)/ln 2; the engine adds only rounding
    w = gs_weights(K)
    v = gs_invert(lambda s, c: 1 / s**2, 3, w, ctx1024)
    second = sum(x / (k * k) for k, x in enumerate(w.xi, start=1))
    with mpmath.workprec(1200):
        exact = 3 * (mpmath.mpf(second.numerator) / second.denominator) / mpmath.ln2
        assert abs(v / exact - 1) <= mpmath.mpf(2) ** (16 - 1024)


def test_second_identity_error_law():
    # sum xi_k/k^2 approaches ln 2 like 2^(-3K), never exactly
    with mpmath.workprec(1500):
        for K in (10, 30, 60):
            second = sum(x / (k * k) for k, x in enumerate(gs_weights(K).xi, start=1))
            err = abs(mpmath.mpf(second.numerator) / second.denominator - mpmath.ln2)
            assert 0 < err
            assert -3.3 * K < mpmath.log(err, 2) < -2.8 * K


def test_shifted_pole_law():
    ctx = make_context(512)
    v = gs_invert(inv_shift, 1, 30, ctx)
    assert abs(v / ctx.mp.exp(-1) - 1) <= mpmath.mpf(10) ** (-0.8 * 30 + 2)


def test_consistency_across_k(ctx1024):
    a = gs_invert(inv_shift, 1, 32, ctx1024)
    b = gs_invert(inv_shift, 1, 30, ctx1024)
    assert abs(a - b) <= mpmath.mpf(10) ** -20


def test_guard_bits_rescue_a_short_context():
    # the same 256-bit context with guard bits matches the 4000-bit run closely
    hi = gs_invert(inv_shift, 1, 60, make_context(4000))
    lo = gs_invert(inv_shift, 1, 60, make_context(256), enforce_precision=False)
    with mpmath.workprec(4000):
        assert abs(lo - hi) <= mpmath.mpf(2) ** -250


def test_low_precision_is_corrupted():
    hi = gs_invert(inv_shift, 1, 60, make_context(4000))
    lo = gs_invert(inv_shift, 1, 60, make_context(256), enforce_precision=False, guarded=False)
    with mpmath.workprec(4000):
        exact = mpmath.exp(-1)
        assert abs(lo - exact) >= 10**10 * abs(hi - exact)


@settings(max_examples=25, deadline=None)
@given(st.fractions(-100, 100, max_denominator=1000), st.fractions(-100, 100, max_denominator=1000))
def test_linearity(a, b):
    ctx = make_context(512)
    mp = ctx.mp
    qa, qb = mp.mpf(a.numerator) / a.denominator, mp.mpf(b.numerator) / b.denominator

    def g1(s, c):
        return 1 / (s + 1)

    def g2(s, c):
        return 1 / (s * s + 1)

    both = gs_invert(lambda s, c: qa * g1(s, c) + qb * g2(s, c), "0.7", 20, ctx)
    split = qa * gs_invert(g1, "0.7", 20, ctx) + qb * gs_invert(g2, "0.7", 20, ctx)
    assert abs(both - split) <= mpmath.mpf(2) ** (40 - 512) * (abs(qa) + abs(qb) + 1)


def test_deterministic_and_worker_independent():
    ctx = make_context(512)
    a = gs_invert(inv_shift, "1.5", 20, ctx)
    b = gs_invert(inv_shift, "1.5", 20, ctx)
    c = gs_invert(_picklable, "1.5", 20, ctx, workers=2)
    assert a == b == c


def _picklable(s, ctx):
    return 1 / (s + 1)


def test_bad_point():
    with pytest.raises(DomainError):
        gs_invert(inv_shift, 0, 10, make_context(512))


def test_cache_roundtrip(tmp_path):
    w = gs_weights(25)
    path = tmp_path / "w.txt"
    save_weights(w, path)
    text = path.read_bytes()
    assert text.endswith(b"\n") and b"\r" not in text
    first = text.split(b"\n")[0].decode()
    K, k, q = first.split(" ")
    assert (K, k) == ("25", "1") and "/" in q
    assert load_weights(path) == w


def test_cache_rejects_tampering(tmp_path):
    w = gs_weights(8)
    path = tmp_path / "w.txt"
    save_weights(w, path)
    lines = path.read_text().split("\n")
    K, k, q = lines[3].split(" ")
    num, den = q.split("/")
    lines[3] = f"{K} {k} {int(num) + 1}/{den}"
    path.write_text("\n".join(lines))
    with pytest.raises(ValueError):
        load_weights(path)
    save_weights(GSWeights(8, w.xi[:-1]), path)
    with pytest.raises(ValueError):
        load_weights(path)


def test_cached_weights_directory(tmp_path):
    w = cached_weights(12, tmp_path)
    assert (tmp_path / "gs_weights_K12.txt").exists()
    assert cached_weights(12, tmp_path) == w
    (tmp_path / "gs_weights_K12.txt").write_text("garbage\n")
    assert cached_weights(12, tmp_path) == w
