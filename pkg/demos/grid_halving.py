"""
Grid paths converge to the continuum path
=========================================

On a fixed realisation the path on the open-site grid of pitch r agrees
with the continuum path at every level once r is small enough.
"""

from radialweb import LevelSystem, RngStream, halvings_to_agreement

for s in range(5):
    sys_ = LevelSystem(1000, 0.5, RngStream(13, s))
    h, fractions = halvings_to_agreement(sys_, 0.37, r0=1.0, max_halvings=40)
    print("realization %d: %2d halvings; agreement by pitch %s"
          % (s, h, " ".join("%.2f" % f for f in fractions)))
