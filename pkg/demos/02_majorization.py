"""
Weak majorization and the hull W(x)
===================================

W(x) collects the vectors weakly sub-majorized by x. It equals the convex hull
of x's rearrangements with entries pushed down to zero. Two independent
membership tests (partial sums, hull geometry) should agree everywhere except
in a thin boundary band.
"""

import numpy as np

from mgl import majorization as mj
from mgl import regions

x = np.array([1.4, 0.5, 0.2])
y = np.array([0.9, 0.9, 0.1])
print("partial-sum slack", mj.partial_sum_slack(y, x), "-> y in W(x):", mj.w_contains(x, y))
print("hull distance", mj.hull_distance(x, y))

rep = mj.mirsky_agreement(x, mode="grid", step=0.1)
print(f"grid check: {rep.n_samples} points, {rep.n_disagreements} disagreements, {rep.n_in_band} in band")

# G is Schur-convex and increasing on [0, 1)^m, so it can only drop on W(x).
rng = np.random.default_rng(3)
x = np.array([0.8, 0.5, 0.3])
ys = mj.sample_w(x, 2000, rng, boundary_fraction=0.3)
bound = mj.lemma_monotone_bound(regions.g_function, x, ys, domain=lambda v: bool(np.all(v < 1)))
print(f"G(y) <= G(x): violations {bound.n_violations}, equalities {bound.n_equalities} (all rearrangements: {bound.n_bad_equalities == 0})")

# Starting from a point of C_3, every vector in W(x) stays inside N-bar.
# x = (1.5, 0.5, 0.5) already touches the boundary of N, and the swap
# segments between its rearrangements keep touching it at constant sum.
x = np.array([1.5, 0.5, 0.5])
samples = np.concatenate([mj.sample_w(x, 5000, rng), mj.boundary_candidates(x)])
conf = mj.confined_region_check(regions.region_by_name("C_m", 3), x, samples, tol=1e-10, sum_tol=1e-6)
print(f"confinement: outside {conf.n_outside}, boundary hits {conf.n_boundary}, max sum gap {conf.max_sum_gap:.1e}")
