"""Weak majorization, the extreme set E(x) and the bodies W(x) = H(x).

``W(x)`` is described by partial sums, ``H(x)`` by the convex hull of the
deleted permutations of ``x``. The two descriptions are computed along
independent routes so they can be checked against each other.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError

from mgl import regions

MAJORIZATION_TOL = 1e-12
HULL_TOL = 1e-9
REARRANGEMENT_TOL = 1e-10
MAX_EXTREME_DIM = 8


def _nonneg(x, name="x") -> np.ndarray:
    arr = np.asarray(x, dtype=float).ravel()
    if np.any(arr < 0):
        raise ValueError(f"{name} must be entrywise non-negative")
    return arr


def _check_lengths(x, y):
    if x.shape[-1] != y.shape[-1]:
        raise ValueError(f"length mismatch: {x.shape[-1]} vs {y.shape[-1]}")


def partial_sum_slack(y, x) -> np.ndarray:
    """min_k (sum_{i<=k} x~_i - sum_{i<=k} y~_i) per row, over k = 1..m."""
    x = -np.sort(-np.atleast_2d(np.asarray(x, dtype=float)), axis=-1)
    y = -np.sort(-np.atleast_2d(np.asarray(y, dtype=float)), axis=-1)
    _check_lengths(x, y)
    return np.min(np.cumsum(x, axis=-1) - np.cumsum(y, axis=-1), axis=-1)


def weakly_majorized(y, x, l: int | None = None, tol: float = MAJORIZATION_TOL) -> bool:
    """True iff ``y`` is ``l``-weakly majorized by ``x``."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    _check_lengths(x, y)
    m = x.size
    l = m if l is None else int(l)
    if not 1 <= l <= m:
        raise ValueError(f"l must lie in [1, {m}], got {l}")
    xs = np.cumsum(np.sort(x)[::-1])[:l]
    ys = np.cumsum(np.sort(y)[::-1])[:l]
    return bool(np.all(ys <= xs + tol))


def w_contains(x, y, tol: float = MAJORIZATION_TOL) -> bool:
    x = _nonneg(x)
    y = np.asarray(y, dtype=float).ravel()
    _check_lengths(x, y)
    return bool(np.all(y >= -tol)) and weakly_majorized(y, x, x.size, tol)


def w_contains_batch(x, ys, tol: float = MAJORIZATION_TOL) -> np.ndarray:
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    return (partial_sum_slack(ys, x) >= -tol) & np.all(ys >= -tol, axis=-1)


@dataclass(frozen=True)
class ExtremeSet:
    points: np.ndarray
    source: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.points)


def extreme_points(x) -> ExtremeSet:
    """Deduplicated images (delta_1 x_s(1), ..., delta_m x_s(m)), delta in {0,1}."""
    x = _nonneg(x)
    m = x.size
    if m > MAX_EXTREME_DIM:
        raise ValueError(f"extreme set enumeration is limited to m <= {MAX_EXTREME_DIM}")
    masks = np.array(list(itertools.product((0.0, 1.0), repeat=m)))
    # permuting the deletion mask as well is redundant, so only permute x
    perms = np.array(sorted(set(itertools.permutations(x.tolist()))))
    pts = (perms[:, None, :] * masks[None, :, :]).reshape(-1, m)
    pts = np.unique(pts, axis=0)
    return ExtremeSet(points=pts, source=x.copy())


def hull_distance(x, y) -> float:
    """Smallest max-norm distance from ``y`` to H(x), by linear programming.

    Variables are vertex weights w >= 0 with sum 1 and a bound s on the
    coordinate-wise residual |V^T w - y| <= s; the optimum s is the distance.
    """
    pts = extreme_points(x).points
    y = np.asarray(y, dtype=float).ravel()
    _check_lengths(pts, y)
    p, m = pts.shape
    c = np.zeros(p + 1)
    c[-1] = 1.0
    ones = np.ones((m, 1))
    a_ub = np.block([[pts.T, -ones], [-pts.T, -ones]])
    b_ub = np.concatenate([y, -y])
    a_eq = np.concatenate([np.ones(p), [0.0]])[None, :]
    res = linprog(
        c,
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=a_eq,
        b_eq=[1.0],
        bounds=[(0, None)] * (p + 1),
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        raise RuntimeError(f"hull LP failed: {res.message}")
    w = np.clip(res.x[:p], 0.0, None)
    w /= w.sum()
    # recompute the residual from the returned weights rather than trusting s
    return float(np.max(np.abs(pts.T @ w - y)))


def hull_contains(x, y, tol: float = HULL_TOL) -> bool:
    return hull_distance(x, y) <= tol


class HullFacets:
    """Half-space description of H(x) for fast batched membership.

    Facets come from Qhull on E(x); this is an alternative route to the LP in
    :func:`hull_distance`, useful on dense grids.
    """

    def __init__(self, x):
        self.x = _nonneg(x)
        pts = extreme_points(self.x).points
        self.degenerate = bool(np.all(self.x == 0))
        if self.degenerate:
            self.equations = None
            return
        try:
            hull = ConvexHull(pts)
        except QhullError:
            # lower-dimensional hull (m = 1); fall back to an interval
            self.equations = None
            self.degenerate = True
            return
        eq = hull.equations
        self.equations = eq / np.linalg.norm(eq[:, :-1], axis=1, keepdims=True)

    def signed_distance(self, ys) -> np.ndarray:
        ys = np.atleast_2d(np.asarray(ys, dtype=float))
        if self.degenerate:
            if np.all(self.x == 0):
                return np.linalg.norm(ys, axis=-1)
            hi = float(self.x.max())
            return np.maximum(-ys[:, 0], ys[:, 0] - hi)
        return np.max(ys @ self.equations[:, :-1].T + self.equations[:, -1], axis=-1)

    def contains(self, ys, tol: float = HULL_TOL) -> np.ndarray:
        return self.signed_distance(ys) <= tol


@dataclass
class AgreementReport:
    n_samples: int
    n_disagreements: int
    n_in_band: int
    disagreements: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.n_disagreements == 0


def _grid(lo, hi, step, m):
    axis = np.arange(lo, hi + step / 2, step)
    mesh = np.meshgrid(*([axis] * m), indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=-1)


def mirsky_agreement(
    x,
    mode: str = "grid",
    step: float = 0.1,
    upper: float | None = None,
    n_random: int = 10_000,
    seed: int = 0,
    method: str = "facets",
    band: float = HULL_TOL,
) -> AgreementReport:
    """Compare partial-sum membership of W(x) with hull membership of H(x).

    Samples whose hull signed distance falls inside ``band`` are counted but
    not scored, since either verdict is acceptable there.
    """
    x = _nonneg(x)
    m = x.size
    if mode == "grid":
        if m > 3:
            raise ValueError("grid mode supports m <= 3")
        hi = float(x.max()) + 0.2 if upper is None else upper
        ys = _grid(0.0, hi, step, m)
    elif mode == "random":
        if m > 6:
            raise ValueError("random mode supports m <= 6")
        rng = np.random.default_rng(seed)
        hi = float(x.max()) * 1.1 + 0.1 if upper is None else upper
        ys = rng.uniform(0.0, hi, size=(n_random, m))
    else:
        raise ValueError(f"unknown mode {mode!r}")

    in_w = w_contains_batch(x, ys)
    if method == "facets":
        dist = HullFacets(x).signed_distance(ys)
        in_h = dist <= band
        in_band = np.abs(dist) <= band
    elif method == "lp":
        dist = np.array([hull_distance(x, y) for y in ys])
        in_h = dist <= band
        # the LP distance is zero inside, so the band is read off the partial sums
        w_margin = np.minimum(partial_sum_slack(ys, x), ys.min(axis=-1))
        in_band = np.abs(w_margin) <= band
    else:
        raise ValueError(f"unknown method {method!r}")
    bad = (in_w != in_h) & ~in_band
    return AgreementReport(
        n_samples=len(ys),
        n_disagreements=int(bad.sum()),
        n_in_band=int(in_band.sum()),
        disagreements=ys[bad][:20].tolist(),
    )


# ---------------------------------------------------------------------------
# sampling W(x)


def sample_w(x, n: int, rng: np.random.Generator, boundary_fraction: float = 0.2) -> np.ndarray:
    """Samples of W(x): rejection samples from the box plus boundary samples.

    Boundary samples are scaled vertices of H(x) (including the exact
    rearrangements of ``x``) and points on the segments between ``x`` and its
    transpositions, which sweep the constant-sum face.
    """
    x = _nonneg(x)
    m = x.size
    hi = float(x.max())
    if hi == 0.0:
        return np.zeros((n, m))
    n_bd = int(round(n * boundary_fraction))
    n_in = n - n_bd

    out = []
    total = 0
    while total < n_in:
        cand = rng.uniform(0.0, hi, size=(max(4 * n_in, 64), m))
        keep = cand[w_contains_batch(x, cand)]
        out.append(keep)
        total += len(keep)
    interior = np.concatenate(out)[:n_in]

    verts = extreme_points(x).points
    bd = []
    for k in range(n_bd):
        kind = k % 3
        if kind == 0:
            bd.append(verts[rng.integers(len(verts))])
        elif kind == 1:
            bd.append(rng.uniform() * verts[rng.integers(len(verts))])
        else:
            # z(s) = (s, x_1 + x_2 - s, x_3, ...), permuted
            xs = np.sort(x)[::-1]
            s = rng.uniform(xs[1], xs[0]) if m > 1 else xs[0]
            z = xs.copy()
            if m > 1:
                z[0], z[1] = s, xs[0] + xs[1] - s
            bd.append(rng.permutation(z))
    pts = np.concatenate([interior, np.array(bd).reshape(-1, m)])
    return pts


def is_rearrangement(y, x, tol: float = REARRANGEMENT_TOL) -> bool:
    return bool(np.all(np.abs(np.sort(np.ravel(y)) - np.sort(np.ravel(x))) <= tol))


@dataclass
class BoundReport:
    n_samples: int
    max_excess: float
    n_violations: int
    n_equalities: int
    n_bad_equalities: int

    @property
    def ok(self) -> bool:
        return self.n_violations == 0 and self.n_bad_equalities == 0


def lemma_monotone_bound(
    func: Callable[[np.ndarray], float],
    x,
    samples,
    domain: Callable[[np.ndarray], bool] | None = None,
    tol: float = MAJORIZATION_TOL,
    eq_tol: float = REARRANGEMENT_TOL,
) -> BoundReport:
    """Check F(y) <= F(x) on samples of W(x), equality only at rearrangements.

    ``func`` must be symmetric, strictly convex and monotone on a domain
    containing W(x); the caller certifies the containment, ``domain`` only
    rejects samples that fall outside it.
    """
    x = _nonneg(x)
    ys = np.atleast_2d(np.asarray(samples, dtype=float))
    fx = func(x)
    excess = []
    n_eq = n_bad = 0
    for y in ys:
        if domain is not None and not domain(y):
            raise ValueError(f"sample {y.tolist()} lies outside the function's domain")
        e = func(y) - fx
        excess.append(e)
        if abs(e) <= tol:
            n_eq += 1
            if not is_rearrangement(y, x, eq_tol):
                n_bad += 1
    excess = np.array(excess)
    return BoundReport(
        n_samples=len(ys),
        max_excess=float(excess.max()) if len(excess) else -np.inf,
        n_violations=int(np.sum(excess > tol)),
        n_equalities=n_eq,
        n_bad_equalities=n_bad,
    )


@dataclass
class ConfinementReport:
    n_samples: int
    n_outside: int
    n_boundary: int
    max_sum_gap: float
    n_sum_violations: int

    @property
    def ok(self) -> bool:
        return self.n_outside == 0 and self.n_sum_violations == 0


def boundary_candidates(x, per_pair: int = 64) -> np.ndarray:
    """Points of W(x) at or near the boundary of the closed region.

    Along each segment between ``x`` and a transposition of two of its entries
    the region margin is minimised; rearrangements of ``x`` are included.
    """
    from scipy.optimize import minimize_scalar

    x = np.sort(_nonneg(x))[::-1]
    m = x.size
    pts = [x.copy()]
    for i, j in itertools.combinations(range(m), 2):
        lo, hi = sorted((x[i], x[j]))
        if hi - lo <= 0:
            continue

        def seg(s, i=i, j=j):
            z = x.copy()
            z[i], z[j] = s, x[i] + x[j] - s
            return z

        res = minimize_scalar(
            lambda s: float(regions.n_margins(seg(s))[0]),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-14},
        )
        pts.append(seg(res.x))
        for s in np.linspace(lo, hi, per_pair):
            pts.append(seg(s))
    return np.array(pts)


def confined_region_check(
    region: regions.Region,
    x,
    samples,
    tol: float = regions.BOUNDARY_TOL,
    sum_tol: float = 1e-9,
) -> ConfinementReport:
    """W(x) stays in the closed region whenever x lies in a symmetric convex C.

    Boundary samples with largest entry above 1 must keep the entry sum of x.
    """
    x = _nonneg(x)
    if not region.verdict(x, tol).member:
        raise ValueError(f"x = {x.tolist()} is not in region {region.name}")
    ys = np.atleast_2d(np.asarray(samples, dtype=float))
    ys = ys[w_contains_batch(x, ys)]
    margins = regions.n_margins(ys) if len(ys) else np.zeros(0)
    outside = margins < -tol
    boundary = (np.abs(margins) <= tol) & (ys.max(axis=-1) > 1.0) if len(ys) else margins > 0
    gaps = np.abs(ys[boundary].sum(axis=-1) - x.sum())
    return ConfinementReport(
        n_samples=len(ys),
        n_outside=int(outside.sum()),
        n_boundary=int(boundary.sum()),
        max_sum_gap=float(gaps.max()) if len(gaps) else 0.0,
        n_sum_violations=int(np.sum(gaps > sum_tol)),
    )
