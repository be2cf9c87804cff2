"""
Singular-value regions
======================

A map is judged through the singular values of its differential. This demo
walks through the regions used by the uniqueness criteria and shows where
their inclusions hold.
"""

from fractions import Fraction

import numpy as np

from mgl import regions

# A squared spectrum a = lambda^2 is in N-bar when every pair product is at
# most 1 and the product-sum expression is non-negative. (1, 1) sits exactly
# on the boundary.
v = regions.in_N_closure([1.0, 1.0])
print("(1, 1) in N-bar:", v.member, "margin", v.margin, "boundary", v.on_boundary)

# The same test on singular values: lambda in M-bar iff lambda^2 in N-bar.
lam = np.array([1.3, 0.6, 0.2])
print("M-bar and N-bar agree on", lam, ":", regions.squared_equivalence(lam))

# mu_m bounds the slope prod(1 + a_i)^(1/2) inside V_m. It rises from sqrt(3)
# towards sqrt(6).
for m in (2, 3, 4, 10, 100):
    print(f"mu_{m} = {regions.mu_m(m):.6f}")

# Slope at most sqrt(3) is the simplest sufficient condition. It implies
# a_i + a_j <= 2 for every pair.
slope3 = regions.region_by_name("slope_sqrt3")
for a in (np.array([1.2, 0.3, 0.04]), np.array([1.2, 0.3, 0.05])):
    slope = regions.slope_from_spectrum(np.sqrt(a))
    print(f"a={a}: slope {slope:.5f}, within sqrt3: {slope3.contains(a)[0]}, in V_3: {regions.in_V_m(a).member}")

# The polyhedron C_m sits inside N-bar for m <= 3 but not beyond. Exact
# arithmetic on a vertex of C_4 shows the product-sum going negative.
q = [Fraction(67, 50), Fraction(33, 50), Fraction(33, 50), Fraction(1, 150)]
print("sum", sum(q), "bound", 3 - Fraction(1, 3))
af = np.array([float(x) for x in q])
print("in C_4:", regions.in_C_m(af).member, " in N-bar:", regions.in_N_closure(af).member,
      " product-sum:", float(regions.product_sum(af)))

# V_m, the slope-bounded region, still lies inside N-bar for every m tried.
rng = np.random.default_rng(0)
for m in (3, 4, 6):
    s = rng.uniform(0, 1, size=(200_000, m)) * rng.uniform(0, 2, size=(200_000, 1))
    inside = s[regions.v_margins(s) >= 0]
    print(f"m={m}: {len(inside)} V_m samples, min N-bar margin {regions.n_margins(inside).min():.2e}")
