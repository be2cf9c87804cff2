"""
Minimal maps from a square
==========================

Solve the Dirichlet problem for the graph area, first with a flat target and
then with a hyperbolic one, and run the uniqueness experiment: two different
initial maps, both solved, compared in the sup norm.
"""

import numpy as np

from mgl import grid, regions, solver
from mgl.grid import GridDomain
from mgl.manifolds import Euclidean, Hyperbolic

d = GridDomain.unit_square(33)

# A codimension-one sine boundary. The minimal surface equation residual
# drops below 1e-8 after a few dozen Picard steps.
out = solver.solve(d, solver.sine_boundary(d, 0.3, 1), target=Euclidean(1))
print(out.message, "| area", out.volume_history[-1])

# A two-component sine boundary keeps the slope below sqrt(3), so the two
# solutions must coincide.
bd = solver.sine_boundary(d, 0.3, 2)
rep = solver.uniqueness_experiment(d, Euclidean(2), bd, regions.region_by_name("slope_sqrt3"))
print("verdict:", rep.conclusion, "| sup distance", rep.max_pair_distance)

# A steep boundary leaves the region. The theorem then says nothing, and the
# report says so instead of claiming non-uniqueness.
d9 = GridDomain.unit_square(9)
steep = solver.sine_boundary(d9, 1.5, 2)
rep = solver.uniqueness_experiment(d9, Euclidean(2), steep, regions.region_by_name("slope_sqrt3"))
print("steep verdict:", rep.conclusion)

# Hyperbolic target: boundary values on the hyperboloid, solved by
# preconditioned Riemannian gradient descent on the discrete area.
H = Hyperbolic(2)
X, Y = d9.coordinates()
vals = H.lift(np.stack([0.6 * X, 0.3 * np.sin(np.pi * Y) * X], -1))
vals[d9.interior] = np.nan
out = solver.solve(d9, vals, target=H)
print("hyperbolic:", out.message)
print("spectrum at the centre:", grid.singular_spectrum(out.map, (4, 4)))
