"""
How long do two paths stay apart?
=================================

Two walkers start one unit apart on the flat-level model.  The chance that
they have not met after level time t decays like 1/sqrt(t).
"""

import numpy as np

from radialweb import fit_tail, sample_tau, separation_scan

t_grid = np.logspace(0, 3, 13)
curve = sample_tau(10_000, 0.5, d=1.0, start_level=0, t_grid=t_grid, trials=20_000, seed=1)
for t, p, se in curve.rows():
    print("t = %7.1f   P[tau > t] = %.4f  (+- %.4f)   sqrt(t) P = %.3f" % (t, p, se, np.sqrt(t) * p))

fit = fit_tail(curve, (10, 1000))
print("log-log slope %.3f, 95%% CI [%.3f, %.3f]" % (fit.slope, *fit.slope_ci))
print("max sqrt(t) P = %.3f, plateau ratio %.2f" % (fit.c_hat, fit.plateau_ratio))

# wider pairs survive longer, but at most linearly in the separation
for row in separation_scan(10_000, 0.5, [1, 2, 4, 8], 400.0, 20_000, seed=2):
    print("d = %g   P[tau > 400] = %.4f" % (row.d, row.survival))
