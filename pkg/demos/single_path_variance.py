"""
The variance of a single path
=============================

The rescaled single path X_t is a weighted sum of nearest-mark offsets w_j.
Its variance can be computed exactly and set against the limiting profile
c^2 f(t)^2 g(t) with c^2 = 2 E[w^2].
"""

import numpy as np

from radialweb.convergence import clt_report, lindeberg_variance, sample_paths

n = 10_000
ps = sample_paths(n, [0.25, 0.5], 20_000, seed=4)
print("E[w^2] = %.4f, so c^2 = %.4f" % (ps.omega2_mean, ps.c2_hat))

for i, t in enumerate(ps.t):
    r = clt_report(ps, i)
    exact = lindeberg_variance(n, int(ps.k[i]), ps.omega2_mean)
    print("t = %.2f   sample var %.4f   exact finite-n var %.4f   c^2 f^2 g = %.4f   ratio %.3f"
          % (t, r.empirical_var, exact, r.predicted_var, r.ratio))
    print("           KS p against the profile %.2g, against the exact variance %.2g"
          % (r.ks_p, r.ks_p_lindeberg))

# the sums over disjoint level ranges are independent
raw = ps.raw
inc = raw[:, 1] - raw[:, 0]
print("corr(early sum, later increment) = %.4f" % np.corrcoef(raw[:, 0], inc)[0, 1])
