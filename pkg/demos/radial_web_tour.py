"""
A first look at the radial web
==============================

Sample one realisation of the discrete radial Poissonian web, follow a few
paths inward, and compare the rescaled web with its polar unrolling.
"""

import numpy as np

from radialweb import ModelParams, RngStream, build_drpw, lambda_discrepancy, restrict_family

# model size and exponents; kappa must stay below 1/2 - delta
params = ModelParams(n=400, alpha=0.5, delta=0.3, kappa=0.1)
fam = build_drpw(params, RngStream(2024))
print("start marks:", len(fam.starts()))
print("rule counts over visited steps:", fam.event_counts())

# one path from the outermost circle, in model coordinates
k, i = fam.starts()[0]
path = fam.path(k, i)
print("first path: %d nodes, ends at %s" % (len(path), np.round(path.nodes[-1], 3)))

# restricted to the strip, jumps to the origin are clipped at height -n alpha
short = restrict_family(fam).path(k, i)
print("restricted end point:", np.round(short.nodes[-1], 3))

# the polar unrolling moves the rescaled web very little, and less as n grows
for n in (100, 400, 1600):
    f = build_drpw(ModelParams(n, 0.5, 0.3, 0.1), RngStream(7))
    print("n = %5d   Hausdorff(web, unrolled) = %.2e" % (n, lambda_discrepancy(f)))
