"""Acceptance checks, each at its stated tolerance.

Every test records one PASS/FAIL line, printed in the "acceptance criteria"
section at the end of the pytest run.  The defaults here are the library's
operating point: K = 100, 4000 bits, adaptive eps = 1e-60.
"""

import math
import time
from decimal import Decimal, getcontext
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from acceptance_log import record
from bridgegap.cli import main
from bridgegap.distribution import cdf_many, g_transform, n0_bound, quantile
from bridgegap.montecarlo import chunk_rng, j0_bound, mc_cdf, mc_sample, sample_vn_batch
from bridgegap.precision import make_context
from bridgegap.reference import compare_tables, reference_cdf, reference_j0, reference_quantiles
from bridgegap.specfun import bessel_k01, f3_cdf_array, bessel_term_bound
from bridgegap.stehfest import gs_invert, gs_weights

pytestmark = pytest.mark.slow

GRID = [x for x, _ in reference_cdf()]
TABLE = {Decimal(x): Decimal(v) for x, v in reference_cdf()}
SPOT = ["0.50", "1.00", "1.50", "2.00", "2.54"]


@pytest.fixture(scope="module")
def table():
    """cdf at all 222 grid points, computed once."""
    start = time.perf_counter()
    evals = cdf_many(GRID)
    return evals, time.perf_counter() - start


def _csv(points, evals):
    return "x,value\n" + "".join(f"{x},{mpmath.nstr(e.value, 20, min_fixed=1, max_fixed=0)}\n" for x, e in zip(points, evals))


def test_criterion_1_table_reproduction(table):
    evals, _ = table
    start = time.perf_counter()
    cdf_many(SPOT)
    spot_seconds = time.perf_counter() - start
    tight = [(x, e) for x, e in zip(GRID, evals) if Decimal(x) >= Decimal("0.40")]
    report = compare_tables(_csv(*zip(*tight)))
    rows = [r for r in report.rows if r.regime == "tight"]
    bad = [r for r in rows if not r.passed]
    worst = max(rows, key=lambda r: r.rel_dev)
    good_from = min((r.x for r in rows if all(s.passed for s in rows if s.x >= r.x)), default=None)
    ok = len(rows) == 215 and not bad and spot_seconds < 1800
    detail = (
        f"{len(rows) - len(bad)}/{len(rows)} points within 5e-12 relative; "
        f"worst {worst.rel_dev:.2e} at x={worst.x}; all pass from x={good_from}; "
        f"spot subset {spot_seconds:.0f} s"
    )
    record("1", ok, detail)
    assert spot_seconds < 1800
    assert not bad, detail


def test_criterion_2_left_tail(table):
    evals, _ = table
    row = compare_tables(_csv(GRID[:1], evals[:1])).rows[0]
    values = [e.value for e in evals]
    monotone = all(a < b for a, b in zip(values, values[1:]))
    nonneg = all(e.raw_value >= 0 and not e.clamped for e in evals)
    ok = row.passed and monotone and nonneg
    detail = (
        f"F(0.33) = {mpmath.nstr(evals[0].value, 6)}, matched {row.matched}; "
        f"rel dev {row.rel_dev:.3g} from 9.24257424322e-12; "
        f"monotone={monotone} nonnegative={nonneg} on x >= 0.33"
    )
    record("2", ok, detail)
    assert monotone and nonneg
    assert row.passed, detail


def test_criterion_3_quantiles():
    results = []
    for p, q in reference_quantiles():
        r = quantile(p)
        results.append((p, Decimal(q), r))
    devs = [(p, abs(float(r.x) - float(q)), float(r.residual)) for p, q, r in results]
    bad = [(p, d) for p, d, res in devs if d > 5e-7 or res >= 1e-7]
    ok = not bad
    worst = max(devs, key=lambda t: t[1])
    detail = f"{10 - len(bad)}/10 within 5e-7 with residual < 1e-7; worst |dx| {worst[1]:.2e} at p={worst[0]}"
    if bad:
        detail += "; failing p: " + ", ".join(f"{p} ({d:.2e})" for p, d in bad)
    record("3", ok, detail)
    assert all(res < 1e-7 for _, _, res in devs)
    assert ok, detail


def test_criterion_4_engine_law():
    ctx = make_context(1024)
    errs = {}
    for K in (20, 30, 40):
        v = gs_invert(lambda s, c: 1 / (s + 1), 1, K, ctx)
        errs[K] = abs(v / ctx.mp.exp(-1) - 1)
    ok = all(errs[K] <= mpmath.mpf(10) ** (-0.8 * K + 2) for K in errs)
    record("4", ok, ", ".join(f"K={K}: {mpmath.nstr(e, 3)} <= 1e{-0.8 * K + 2:g}" for K, e in errs.items()))
    assert ok


def test_criterion_5a_unit_identity():
    ok = all(sum(gs_weights(K).scaled()) == Fraction(1) for K in range(1, 61))
    record("5a", ok, "sum xi_k/k == 1 exactly for K = 1..60")
    assert ok


def test_criterion_5b_second_identity():
    bits = 1024
    with mpmath.workprec(bits + 200):
        tol = mpmath.mpf(2) ** (16 - bits)
        errs = []
        for K in range(1, 61):
            q = sum(x / (k * k) for k, x in enumerate(gs_weights(K).xi, start=1))
            errs.append((K, abs(mpmath.mpf(q.numerator) / q.denominator - mpmath.ln2)))
        bad = [K for K, e in errs if e > tol]
        smallest = min(errs, key=lambda t: t[1])
        detail = (
            f"{60 - len(bad)}/60 K within 2^(16-{bits}); "
            f"closest K={smallest[0]} at 2^{float(mpmath.log(smallest[1], 2)):.1f}; "
            f"the error falls like 2^(-3K), so K >= 333 would be needed"
        )
    record("5b", not bad, detail)
    assert not bad, detail


@settings(max_examples=200, deadline=None, derandomize=True)
@given(st.floats(0.2104 + 1e-3, 3.0), st.integers(1, 40), st.integers(1, 40))
def _tail_bound_property(t, n1, n2):
    ctx = make_context(128)
    lo, hi = sorted((n1, n2))
    if lo == hi:
        return
    a = g_transform(t, 1e-30, max_n=lo, ctx=ctx).value
    b = g_transform(t, 1e-30, max_n=hi, ctx=ctx)
    gap = a - b.value
    bound = g_transform(t, 1e-30, max_n=lo, ctx=ctx).tail_bound
    assert -1e-30 <= gap <= bound + 1e-30


def _j0_decimal(x, eps):
    getcontext().prec = 50
    x, eps = Decimal(repr(x)), Decimal(repr(eps))
    return int((-(x * x * eps * eps / 2).ln() / Decimal(2).ln()).to_integral_value(rounding="ROUND_FLOOR")) + 1


def _n0_decimal(x, K, eps):
    getcontext().prec = 60
    x, eps = Decimal(repr(x)), Decimal(repr(eps))
    a = (2 * Decimal(2).ln()).sqrt() * x
    inner = (1 / (eps * (1 - (-a).exp()))).ln() + (2 * K + 1) * Decimal(K).ln() + 3 * K + 2
    return int((inner / a).to_integral_value(rounding="ROUND_FLOOR")) + 1


def test_criterion_6_bound_suite():
    ctx = make_context(128)
    rng = np.random.default_rng(6)
    xs = np.exp(rng.uniform(math.log(1e-3), math.log(1e2), 10**4))
    a2 = True
    for x in xs:
        x = ctx.mpf(float(x))
        pair = bessel_k01(x, ctx)
        a2 &= bool(x * pair.k1 - pair.k0 <= bessel_term_bound(x, ctx))
    tail = True
    try:
        _tail_bound_property()
    except AssertionError:
        tail = False
    j0_cases = [(x, e) for x in (0.1, 0.33, 1.0, 2.5) for e in (1e-3, 1e-5, 1e-8, 1e-10, 1e-20)]
    j0_ok = all(j0_bound(x, e) == _j0_decimal(x, e) for x, e in j0_cases)
    n0_cases = [(x, K, e) for x in (0.33, 0.5, 1.0, 2.54) for K in (10, 60, 100) for e in (1e-40, 1e-60)]
    n0_ok = all(n0_bound(x, K, e) == _n0_decimal(x, K, e) for x, K, e in n0_cases)
    table1 = {e: j for e, j in reference_j0()}
    ours = {e: j0_bound(0.33, e) for e in table1}
    t1_ok = all(ours[e] == table1[e] for e in (1e-5, 1e-10, 1e-20))
    ok = a2 and tail and j0_ok and n0_ok and t1_ok
    detail = (
        f"term bound on 1e4 args={a2}; product tail property={tail}; J0 formula={j0_ok}; N0 formula={n0_ok}; "
        f"bundled J0 table {[ours[e] for e in table1]} vs printed {list(table1.values())} "
        f"(eps=1e-8 cell: formula {ours[1e-8]}, printed {table1[1e-8]}, known discrepancy)"
    )
    record("6", ok, detail)
    assert ok, detail


def test_criterion_7_monte_carlo():
    start = time.perf_counter()
    inside = {}
    for x in (0.8, 1.0, 1.2):
        r = mc_cdf(x, eps=1e-3, C=10**5, seed=1)
        gs = float(TABLE[Decimal(f"{x:.2f}")])
        inside[x] = (r.ci_low <= gs <= r.ci_high, r.estimate, gs)
    sample = mc_sample(100, 10**4, 10**4, seed=1)
    mean, sd = float(sample.draws.mean()), float(sample.draws.std(ddof=1))
    seconds = time.perf_counter() - start
    ok = all(v[0] for v in inside.values()) and abs(mean - 0.9970) <= 0.01 and abs(sd - 0.2475) <= 0.01 and seconds < 600
    detail = (
        "; ".join(f"x={x}: {v[1]:.5f} vs {v[2]:.6f} in CI={v[0]}" for x, v in inside.items())
        + f"; sample mean {mean:.5f} sd {sd:.5f}; {seconds:.0f} s"
    )
    record("7", ok, detail)
    assert ok, detail


def test_criterion_8_donsker():
    v = np.sort(sample_vn_batch(10**4, 10**5, chunk_rng(8, 0)))
    F = f3_cdf_array(v)
    n = v.size
    i = np.arange(1, n + 1)
    dist = float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))
    ok = dist < 0.01
    record("8", ok, f"Kolmogorov distance {dist:.4f} for 1e5 draws of V_1e4")
    assert ok


def test_criterion_9_determinism(tmp_path):
    commands = [
        ["mc-cdf", "--x", "0.8", "1.0", "1.2", "--C", "20000", "--seed", "9"],
        ["mc-sample", "--J", "100", "--N", "1000", "--C", "5000", "--seed", "9"],
        ["mc-sample", "--J", "50", "--N", "500", "--C", "3000", "--seed", "9", "--format", "json"],
        ["paths", "--mesh", "12", "--C", "200", "--seed", "9"],
        ["paths", "--mesh", "10", "--seed", "9", "--format", "json"],
    ]
    same = []
    for argv in commands:
        blobs = []
        for threads in ("1", "2", "4"):
            out = tmp_path / f"{argv[0]}-{threads}"
            assert main([*argv, "--threads", threads, "--out", str(out)]) == 0
            blobs.append(out.read_bytes())
        same.append(all(b == blobs[0] for b in blobs))
    ok = all(same)
    record("9", ok, f"{sum(same)}/{len(same)} MC commands byte-identical across --threads 1, 2, 4")
    assert ok
