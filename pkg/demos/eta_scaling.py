"""
Counting distinct paths: the eta statistic
==========================================

Paths through a short interval [0, eps] at one time are followed for a
macroscopic time t; eta counts how many distinct paths remain.  The chance of
two or more survivors shrinks linearly in eps, that of three or more faster.
"""

import numpy as np

from radialweb.convergence import eta_mean_bound, eta_runs

eps = np.array([0.8, 0.4, 0.2, 0.1])
runs = eta_runs(10_000, 0.5, 0.5, eps, 10_000, seed=6)
for th in (2, 3):
    p, se, hits = runs.prob(th)
    for e, q, s, h in zip(eps, p, se, hits):
        print("P[eta >= %d], eps = %.1f:  %.5f (+- %.5f, %d hits)" % (th, e, q, s, h))

m = eta_mean_bound(10_000, 0.5, 0.0, 0.5, 0.0, 0.2, 10_000, seed=8)
print("E[eta] = %.4f +- %.4f, limit 1 + 0.2/sqrt(pi t) = %.4f" % (m.mean, m.stderr, m.limit))
