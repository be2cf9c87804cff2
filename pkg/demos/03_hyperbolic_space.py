"""
Hyperbolic space on the hyperboloid
===================================

Targets of curvature -kappa are modelled as the upper sheet of the hyperboloid
in Minkowski space. Geodesics, logarithms and parallel transport are closed
form, which makes them good test beds for the grid numerics.
"""

import numpy as np

from mgl.manifolds import Hyperbolic, holonomy_curvature

H = Hyperbolic(2)
rng = np.random.default_rng(1)
p, q = H.random_point(rng), H.random_point(rng)

v = H.log_map(p, q)
print("d(p, q) =", H.distance(p, q), " |log_p q| =", H.norm(v))
print("exp_p(log_p q) - q:", np.abs(H.exp_map(p, v) - q).max())

# Transport is an isometry between tangent spaces.
w = H.random_tangent(rng, p)
tw = H.parallel_transport(p, q, w)
print("|w| =", H.norm(w), " |P w| =", H.norm(tw))

# Holonomy around a small square recovers <R(X, V) X, V> = -K = kappa for
# orthonormal X, V. This is the sign that makes the curvature term of the
# second variation non-negative.
x, u = H.orthonormal_frame(p)[:2]
print("holonomy estimate of -K:", holonomy_curvature(H, p, x, u))

H4 = Hyperbolic(2, kappa=4.0)
p = H4.origin()
x, u = H4.orthonormal_frame(p)[:2]
print("with kappa = 4:", holonomy_curvature(H4, p, x, u))
