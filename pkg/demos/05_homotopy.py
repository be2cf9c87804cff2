"""
Geodesic homotopies and majorization along them
===============================================

Join two maps with the same boundary by pointwise geodesics. Along the way the
squared spectrum stays weakly majorized by the linear interpolation of its
endpoint values, and the partial sums F_k are convex in t. Both facts are
checked on a random pair into H^3, and an SVG of one node's spectrum is written
to demos/out/.
"""

from pathlib import Path

import numpy as np

from mgl import homotopy, regions, reporting
from mgl.grid import GridDomain
from mgl.manifolds import Hyperbolic

d = GridDomain.unit_square(17)
f0, f1 = homotopy.random_map_pair(d, Hyperbolic(3), seed=4)
trace = homotopy.build_homotopy(f0, f1, t_samples=33)
print("spectra array:", trace.spectra.shape, " max lambda^2:", trace.spectra.max())

for l in (1, 2):
    rep = homotopy.partial_sum_domination(trace, l)
    print(f"domination l={l}: violations {rep.n_violations}, worst excess {rep.worst_excess:.2e}")
for k in (1, 2):
    rep = homotopy.fk_convexity(trace, k)
    print(f"F_{k} convexity: min second difference {rep.min_second_difference:.2e}")

print("confinement in N-bar:", homotopy.confinement_check(trace, regions.region_by_name("N_bar", 2)).status)

out = Path(__file__).with_name("out") / "homotopy"
for path in reporting.emit_plots(trace, out):
    print("wrote", path)
