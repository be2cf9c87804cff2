"""Geodesic homotopies between grid maps and their squared spectra.

For two maps with equal boundary values, f_t(x) runs along the geodesic from
f_0(x) to f_1(x) at constant speed. Along such a family in a non-positively
curved target the squared singular values are dominated, in the partial-sum
sense, by the linear interpolant of their endpoint values; the checks here
measure that on sampled traces.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from mgl import grid, regions, tables
from mgl.grid import GridDomain, GridMap
from mgl.manifolds import Manifold

BOUNDARY_MATCH_TOL = 1e-10

CONFINED = "confined"
HYPOTHESIS_UNMET = "hypothesis unmet"
VIOLATED = "violated"


@dataclass(frozen=True, eq=False)
class HomotopyTrace:
    """Sampled geodesic homotopy; arrays are indexed [t, j, i, ...]."""

    f0: GridMap
    f1: GridMap
    t_samples: np.ndarray
    values: np.ndarray  # (T, ny, nx, D)
    velocity: np.ndarray  # (T, ny, nx, D) ambient tangent vectors
    jacobians: np.ndarray  # (T, ny, nx, n, 2) frame coordinates
    spectra: np.ndarray  # (T, ny, nx, m) squared, descending

    @property
    def domain(self) -> GridDomain:
        return self.f0.domain

    @property
    def target(self) -> Manifold:
        return self.f0.target

    @property
    def m(self) -> int:
        return self.spectra.shape[-1]

    def __len__(self) -> int:
        return len(self.t_samples)

    def map_at(self, k: int) -> GridMap:
        return self.f0.with_values(self.values[k])

    def index_of(self, t: float, tol: float = 1e-12) -> int:
        k = int(np.argmin(np.abs(self.t_samples - t)))
        if abs(self.t_samples[k] - t) > tol:
            raise ValueError(f"t={t} is not one of the trace samples")
        return k


def _t_grid(t_samples) -> np.ndarray:
    if np.isscalar(t_samples):
        n = int(t_samples)
        if n < 2:
            raise ValueError("need at least two t-samples")
        return np.linspace(0.0, 1.0, n)
    ts = np.asarray(t_samples, dtype=float)
    if ts.ndim != 1 or ts.size < 2 or np.any(np.diff(ts) <= 0):
        raise ValueError("t-samples must be strictly increasing")
    if ts[0] != 0.0 or ts[-1] != 1.0 or ts[0] < 0 or ts[-1] > 1:
        raise ValueError("t-samples must start at 0 and end at 1")
    return ts


def build_homotopy(f0: GridMap, f1: GridMap, t_samples=33) -> HomotopyTrace:
    """Sample f_t(x) = geodesic_point(f0(x), f1(x), t) with closed-form velocity."""
    if not f0.domain.same_as(f1.domain):
        raise ValueError("endpoint maps live on different grids")
    if f0.target != f1.target:
        raise ValueError("endpoint maps have different targets")
    target, domain = f0.target, f0.domain
    bd = domain.boundary
    gap = float(np.max(target.distance(f0.values[bd], f1.values[bd]), initial=0.0))
    if gap >= BOUNDARY_MATCH_TOL:
        raise ValueError(f"boundary values differ by {gap:.3e}")
    ts = _t_grid(t_samples)

    vals, vels, jacs = [], [], []
    for t in ts:
        if t == 0.0:
            v = np.array(f0.values)
        elif t == 1.0:
            v = np.array(f1.values)
        else:
            v = target.geodesic_point(f0.values, f1.values, t)
            v[bd] = f0.values[bd]
        vel = target.geodesic_velocity(f0.values, f1.values, t)
        vel[bd] = 0.0
        vel[~domain.active] = 0.0
        fmap = f0.with_values(v)
        vals.append(fmap.values)
        vels.append(vel)
        jacs.append(grid.jacobian_field(fmap))
    jacs = np.stack(jacs)
    spectra = grid.spectra_from_jacobians(jacs) ** 2
    for arr in (spectra,):
        arr[:, ~domain.active] = 0.0
    trace = HomotopyTrace(f0, f1, ts, np.stack(vals), np.stack(vels), jacs, spectra)
    for arr in (trace.values, trace.velocity, trace.jacobians, trace.spectra, trace.t_samples):
        arr.setflags(write=False)
    return trace


@dataclass(frozen=True)
class InterpolantMu:
    """mu(t) = ((t2 - t) a1 + (t - t1) a2) / (t2 - t1), entrywise."""

    t1: float
    t2: float
    a1: np.ndarray
    a2: np.ndarray

    def __post_init__(self):
        if not self.t2 > self.t1:
            raise ValueError("need t1 < t2")
        if np.any(np.asarray(self.a1) < 0) or np.any(np.asarray(self.a2) < 0):
            raise ValueError("endpoint spectra must be non-negative")

    def __call__(self, t):
        s = (t - self.t1) / (self.t2 - self.t1)
        return (1.0 - s) * np.asarray(self.a1) + s * np.asarray(self.a2)


def partial_sums(a) -> np.ndarray:
    return np.cumsum(a, axis=-1)


@dataclass
class DominationReport:
    l: int
    t1: float
    t2: float
    tol: float
    n_checks: int
    n_violations: int
    worst_excess: float
    worst_location: tuple | None = None

    @property
    def ok(self) -> bool:
        return self.n_violations == 0


def partial_sum_domination(
    trace: HomotopyTrace, l: int, t1: float = 0.0, t2: float = 1.0, tol: float | None = None
) -> DominationReport:
    """Check sum_{i<=k} lambda_i^2(t) <= sum_{i<=k} mu_i(t) + tol for k <= l.

    Interior samples of [t1, t2] at every active node are tested. The default
    tolerance is 1e-6 times the largest squared singular value in the trace.
    """
    if not 1 <= l <= trace.m:
        raise ValueError(f"l must lie in 1..{trace.m}")
    k1, k2 = trace.index_of(t1), trace.index_of(t2)
    if k2 <= k1:
        raise ValueError("need t1 < t2")
    if tol is None:
        tol = 1e-6 * max(float(trace.spectra.max()), np.finfo(float).tiny)
    act = trace.domain.active
    mu = InterpolantMu(t1, t2, trace.spectra[k1], trace.spectra[k2])
    worst, where, n_viol, n_checks = -np.inf, None, 0, 0
    for k in range(k1 + 1, k2):
        t = trace.t_samples[k]
        excess = partial_sums(trace.spectra[k])[..., :l] - partial_sums(mu(t))[..., :l]
        excess = excess[act]
        n_checks += excess.size
        n_viol += int(np.sum(excess > tol))
        if excess.size and excess.max() > worst:
            worst = float(excess.max())
            flat = int(np.argmax(excess))
            node = np.argwhere(act)[flat // l]
            where = (float(t), int(node[0]), int(node[1]), flat % l + 1)
    return DominationReport(l, t1, t2, float(tol), n_checks, n_viol, worst, where)


def frozen_frame(jac) -> np.ndarray:
    """Right singular vectors (columns, descending) of each Jacobian."""
    _, _, vt = np.linalg.svd(jac)
    return np.swapaxes(vt, -1, -2)


def fk_values(trace: HomotopyTrace, k: int, t0: float | None = None) -> np.ndarray:
    """F_k(t) = sum_{i<=k} |df_t(a_i)|^2 with {a_i} frozen at t0; shape (T, ny, nx)."""
    if not 1 <= k <= trace.m:
        raise ValueError(f"k must lie in 1..{trace.m}")
    if t0 is None:
        k0 = int(np.argmin(np.abs(trace.t_samples - 0.5 * (trace.t_samples[0] + trace.t_samples[-1]))))
    else:
        k0 = trace.index_of(t0)
    frame = frozen_frame(trace.jacobians[k0])[..., :k]  # (ny, nx, 2, k)
    images = trace.jacobians @ frame[None]  # (T, ny, nx, n, k)
    return np.sum(images**2, axis=(-2, -1))


@dataclass
class ConvexityReport:
    k: int
    min_second_difference: float
    scale: float
    tol: float
    worst_location: tuple | None = None

    @property
    def ok(self) -> bool:
        return self.min_second_difference >= -self.tol


def second_differences(values, ts) -> np.ndarray:
    """Second differences along axis 0, in units of the mean spacing squared."""
    h = np.diff(ts)
    hm, hp = h[:-1], h[1:]
    shape = (-1,) + (1,) * (np.ndim(values) - 1)
    hm, hp = hm.reshape(shape), hp.reshape(shape)
    v = np.asarray(values)
    dd = 2.0 * ((v[2:] - v[1:-1]) / hp - (v[1:-1] - v[:-2]) / hm) / (hm + hp)
    return dd * np.mean(h) ** 2


def fk_convexity(trace: HomotopyTrace, k: int, t0: float | None = None, rel_tol: float = 1e-5) -> ConvexityReport:
    """Minimum second difference of F_k over t-samples and active nodes."""
    if len(trace) < 3:
        raise ValueError("need at least three t-samples")
    fk = fk_values(trace, k, t0)
    act = trace.domain.active
    dd = second_differences(fk, trace.t_samples)[:, act]
    scale = float(fk[:, act].max(initial=0.0))
    flat = int(np.argmin(dd))
    kt, kn = np.unravel_index(flat, dd.shape)
    node = np.argwhere(act)[kn]
    loc = (float(trace.t_samples[kt + 1]), int(node[0]), int(node[1]))
    return ConvexityReport(k, float(dd.min()), scale, rel_tol * scale, loc)


@dataclass
class ConfinementReport:
    region: str
    status: str
    n_hypothesis_nodes: int
    n_unmet_nodes: int
    n_violations: int
    min_margin: float
    degenerate_nodes: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status != VIOLATED


def confinement_check(
    trace: HomotopyTrace, region: regions.Region, tol: float = regions.BOUNDARY_TOL
) -> ConfinementReport:
    """Endpoint spectra in ``region`` should keep every sampled spectrum in N-bar.

    The caller certifies that ``region`` is symmetric, convex and inside N-bar.
    Nodes whose endpoints miss the region carry no claim; if any exist the
    status is ``hypothesis unmet`` unless a hypothesis node is violated.
    Degenerate nodes are those touching the boundary of N with a_1 > 1.
    """
    act = trace.domain.active
    spec = trace.spectra
    hyp = region.contains(spec[0][act], tol) & region.contains(spec[-1][act], tol)
    margins = np.stack([regions.n_margins(spec[k][act]) for k in range(len(trace))])
    inside = margins >= -tol
    violations = int(np.sum(~inside[:, hyp]))
    min_margin = float(margins[:, hyp].min()) if hyp.any() else np.inf

    nodes = np.argwhere(act)
    degenerate = []
    touch = (np.abs(margins) <= tol) & (np.stack([spec[k][act][:, 0] for k in range(len(trace))]) > 1.0)
    for kt, kn in zip(*np.nonzero(touch)):
        degenerate.append((float(trace.t_samples[kt]), int(nodes[kn][0]), int(nodes[kn][1])))

    if violations:
        status = VIOLATED
    elif not hyp.all():
        status = HYPOTHESIS_UNMET
    else:
        status = CONFINED
    return ConfinementReport(
        region=region.name,
        status=status,
        n_hypothesis_nodes=int(hyp.sum()),
        n_unmet_nodes=int((~hyp).sum()),
        n_violations=violations,
        min_margin=min_margin,
        degenerate_nodes=degenerate,
    )


def euclidean_oracle_spectra(trace: HomotopyTrace) -> np.ndarray:
    """Squared spectra from SVDs of (1 - t) J_0 + t J_1; flat targets only."""
    if trace.target.kind != "euclidean":
        raise ValueError("the interpolated-Jacobian oracle needs a flat target")
    j0, j1 = trace.jacobians[0], trace.jacobians[-1]
    ts = trace.t_samples[:, None, None, None, None]
    jac = (1.0 - ts) * j0 + ts * j1
    return grid.spectra_from_jacobians(jac, trace.m) ** 2


# ---------------------------------------------------------------------------
# export


def trace_rows(trace: HomotopyTrace):
    m = trace.m
    mu = InterpolantMu(0.0, 1.0, trace.spectra[0], trace.spectra[-1])
    header = (
        ["node_i", "node_j", "t"]
        + [f"lambda2_{i + 1}" for i in range(m)]
        + [f"S_{i + 1}" for i in range(m)]
        + [f"mu_S_{i + 1}" for i in range(m)]
    )
    rows = []
    nodes = np.argwhere(trace.domain.active)
    for k, t in enumerate(trace.t_samples):
        sums = partial_sums(trace.spectra[k])
        musums = partial_sums(mu(t))
        for j, i in nodes:
            rows.append(
                [int(i), int(j), float(t)]
                + list(trace.spectra[k, j, i])
                + list(sums[j, i])
                + list(musums[j, i])
            )
    return header, rows


def export_trace_csv(trace: HomotopyTrace, path):
    header, rows = trace_rows(trace)
    return tables.write_csv(path, header, rows)


# ---------------------------------------------------------------------------
# smooth random test maps


def smooth_field(rng: np.random.Generator, dim: int, n_modes: int = 3, scale: float = 1.0):
    """Random trigonometric field on [0, 1]^2 with decaying mode amplitudes.

    Returns a callable of normalised coordinates (X, Y) so the same field can
    be sampled on grids of any resolution.
    """
    k = np.arange(n_modes)
    amp = rng.normal(size=(n_modes, n_modes, dim)) / (1.0 + k[:, None, None] + k[None, :, None]) ** 2
    phx = rng.uniform(0, 2 * np.pi, size=(n_modes, n_modes))
    phy = rng.uniform(0, 2 * np.pi, size=(n_modes, n_modes))

    def f(X, Y):
        out = np.zeros(np.shape(X) + (dim,))
        for a in range(n_modes):
            for b in range(n_modes):
                wave = np.cos(a * np.pi * X + phx[a, b]) * np.cos(b * np.pi * Y + phy[a, b])
                out += scale * wave[..., None] * amp[a, b]
        return out

    return f


def map_pair_from_fields(domain: GridDomain, target: Manifold, base, push):
    """Endpoint pair f0 = base, f1 = exp_{f0}(bump * push) with a boundary-vanishing bump."""
    X, Y = domain.coordinates()
    X = X / ((domain.nx - 1) * domain.hx)
    Y = Y / ((domain.ny - 1) * domain.hy)
    spatial = base(X, Y)
    v0 = target.lift(spatial) if target.kind == "hyperbolic" else spatial
    bump = (np.sin(np.pi * X) * np.sin(np.pi * Y))[..., None] * push(X, Y)
    v1 = target.exp_map(v0, target.from_frame_coords(v0, bump), check=False)
    v1[domain.boundary] = v0[domain.boundary]
    return GridMap(domain, target, v0), GridMap(domain, target, v1)


def random_map_pair(domain: GridDomain, target: Manifold, seed: int, scale: float = 0.6, amplitude: float = 1.0):
    rng = np.random.default_rng(seed)
    base = smooth_field(rng, target.dim, scale=scale)
    push = smooth_field(rng, target.dim, scale=amplitude)
    return map_pair_from_fields(domain, target, base, push)
