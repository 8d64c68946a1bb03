"""
The cdf of the bridge/majorant gap, step by step
=================================================

Inverts the Bessel-product transform at a few points and shows why the
inversion needs thousands of bits.  Runs in well under a minute; pass
``--full`` to use the library defaults (K = 100, 4000 bits).
"""

import sys

import mpmath

from bridgegap import cdf, g_transform, gs_weights, make_context, n0_bound, quantile

full = "--full" in sys.argv
K, bits, eps = (100, 4000, 1e-60) if full else (40, 256, 1e-30)
ctx = make_context(bits)

# The inversion weights are exact rationals.  They alternate in sign and
# grow quickly, so the weighted sum cancels about this many bits:
w = gs_weights(K)
print(f"K = {K}: sum xi_k/k = {sum(w.scaled())}, cancellation ~ {w.cancellation_bits():.0f} bits")

# One transform value.  Adaptive mode picks the number of factors from the
# tail bound; most Bessel terms are skipped because their bound is tiny.
g = g_transform("0.5", eps, ctx=ctx)
print(f"G(0.5) = {mpmath.nstr(g.value, 20)} with {g.n_terms} factors, {g.n_evaluated} evaluated")

# A few cdf values, with the factor count a worst-case bound would ask for
for x in ("0.5", "1.0", "1.5", "2.0"):
    r = cdf(x, K=K, eps=eps, ctx=ctx)
    print(f"F({x}) = {mpmath.nstr(r.value, 12)}   N_used={r.N_used}  N0={n0_bound(float(x), K, eps)}")

# The left tail is where the inversion is hardest: below 0.33 the values
# are flagged and may even need clamping.
for x in ("0.33", "0.25"):
    r = cdf(x, K=K, eps=eps, ctx=ctx)
    print(f"F({x}) = {mpmath.nstr(r.raw_value, 6)}  flagged={r.below_validated_range} clamped={r.clamped}")

# Upper quantile by bisection
q = quantile(0.95, K=K, eps=eps, ctx=ctx)
print(f"q_0.95 = {mpmath.nstr(q.x, 10)} after {q.iterations} steps (residual {mpmath.nstr(q.residual, 3)})")
