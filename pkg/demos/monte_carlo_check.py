"""
Two Monte Carlo views of the same distribution
==============================================

The stick-breaking estimator averages products of excursion-maximum cdfs;
the Donsker sampler draws M itself.  Both are compared with the
inversion value at x = 1.
"""

import numpy as np

from bridgegap import cdf, make_context, mc_cdf
from bridgegap.montecarlo import mc_sample

# reference value from the inversion, at modest precision
ref = float(cdf("1.0", K=40, eps=1e-30, ctx=make_context(256)).value)

# estimator 1, with its asymmetric confidence interval
est = mc_cdf(1.0, eps=1e-3, C=20000, seed=1)
print(f"stick breaking: {est.estimate:.4f} in [{est.ci_low:.4f}, {est.ci_high:.4f}] (J={est.J}); inversion {ref:.6f}")

# estimator 2: draws of M from J sticks and grid size N
sample = mc_sample(J=60, N=2000, C=5000, seed=1)
draws = sample.draws
print(f"Donsker sampler: mean {draws.mean():.4f}, sd {draws.std(ddof=1):.4f}, P(M <= 1) ~ {np.mean(draws <= 1):.4f}")

# the same plan always gives the same draws, whatever the thread count
again = mc_sample(J=60, N=2000, C=5000, seed=1, threads=1)
print("reproducible:", np.array_equal(draws, again.draws))
