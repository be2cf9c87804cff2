"""Dirichlet problem for minimal maps on a grid.

Flat targets are handled by Picard iteration on the minimal surface system:
the coefficients sqrt(g) g^{ij} are frozen from the current iterate and each
component's linear divergence-form equation is relaxed by SOR. Hyperbolic
targets minimise the discrete graph volume directly by Riemannian gradient
descent with a backtracking line search.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from mgl import grid, regions
from mgl.grid import GridDomain, GridMap
from mgl.manifolds import Manifold

logger = logging.getLogger(__name__)

UNIQUE = "unique"
SILENT = "out of region — theorem silent"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class SolverOptions:
    max_outer: int = 200
    inner_sweeps: int = 50
    sor_omega: float = 1.5
    tol_residual: float = 1e-8
    damping: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not self.tol_residual > 0:
            raise ValueError("tol_residual must be positive")
        if not 0 < self.sor_omega < 2:
            raise ValueError("sor_omega must lie in (0, 2)")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")


@dataclass
class SolveOutcome:
    map: GridMap
    converged: bool
    iterations: int
    final_residual: float
    volume_history: list = field(default_factory=list)
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "volume_history": [float(v) for v in self.volume_history],
            "message": self.message,
            "map": grid.map_to_dict(self.map),
        }


def worker_count() -> int:
    """Worker cap from MGL_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("MGL_THREADS", "1")))
    except ValueError:
        return 1


def _check_boundary(domain: GridDomain, target: Manifold, boundary) -> np.ndarray:
    vals = np.asarray(boundary, dtype=float)
    if vals.shape != domain.shape + (target.ambient_dim,):
        raise ValueError("boundary data has the wrong shape")
    if not np.all(np.isfinite(vals[domain.boundary])):
        raise ValueError("boundary data is missing on some boundary nodes")
    target.check_point(vals[domain.boundary])
    return vals


# ---------------------------------------------------------------------------
# harmonic initialisation


def _laplacian(domain: GridDomain):
    """Five-point -Laplacian on interior nodes and the coupling to the rest."""
    idx = -np.ones(domain.shape, dtype=int)
    inner = np.argwhere(domain.interior)
    idx[domain.interior] = np.arange(len(inner))
    wx, wy = 1.0 / domain.hx**2, 1.0 / domain.hy**2
    rows, cols, data = [], [], []
    couple = []  # (row, j, i, weight) entries touching non-interior nodes
    for r, (j, i) in enumerate(inner):
        rows.append(r)
        cols.append(r)
        data.append(2 * wx + 2 * wy)
        for dj, di, w in ((0, 1, wx), (0, -1, wx), (1, 0, wy), (-1, 0, wy)):
            jj, ii = j + dj, i + di
            if idx[jj, ii] >= 0:
                rows.append(r)
                cols.append(idx[jj, ii])
                data.append(-w)
            else:
                couple.append((r, jj, ii, w))
    mat = sp.csc_matrix((data, (rows, cols)), shape=(len(inner), len(inner)))
    return mat, inner, couple


def harmonic_extension(
    domain: GridDomain,
    target: Manifold,
    boundary,
    tol: float = 1e-10,
    max_iter: int = 50_000,
    omega: float = 1.5,
) -> GridMap:
    """Discrete harmonic interior matching the boundary data.

    Flat targets get an exact sparse solve. Hyperbolic targets start from the
    projected flat extension of the ambient coordinates and then iterate the
    geodesic-mean update p <- exp_p(omega * mean_k log_p q_k) on a red-black
    ordering until no node moves by more than ``tol``.
    """
    vals = _check_boundary(domain, target, boundary).copy()
    mat, inner, couple = _laplacian(domain)
    if len(inner):
        rhs = np.zeros((len(inner), vals.shape[-1]))
        for r, jj, ii, w in couple:
            rhs[r] += w * vals[jj, ii]
        sol = splu(mat).solve(rhs)
        vals[inner[:, 0], inner[:, 1]] = sol
    vals[~domain.active] = target.origin()
    if target.kind == "euclidean":
        return GridMap(domain, target, vals)

    vals = target.project_point(vals)
    wx, wy = 1.0 / domain.hx**2, 1.0 / domain.hy**2
    jj, ii = np.nonzero(domain.interior)
    colours = [(jj + ii) % 2 == c for c in (0, 1)]
    for it in range(max_iter):
        moved = 0.0
        for sel in colours:
            j, i = jj[sel], ii[sel]
            p = vals[j, i]
            step = (
                wx * (target.log_map(p, vals[j, i + 1]) + target.log_map(p, vals[j, i - 1]))
                + wy * (target.log_map(p, vals[j + 1, i]) + target.log_map(p, vals[j - 1, i]))
            ) / (2 * wx + 2 * wy)
            new = target.exp_map(p, omega * step, check=False)
            moved = max(moved, float(np.max(target.distance(p, new), initial=0.0)))
            vals[j, i] = new
        if moved < tol:
            break
    else:
        logger.warning("geodesic-mean iteration stopped after %d sweeps", max_iter)
    return GridMap(domain, target, vals)


def smooth_bump(domain: GridDomain, dim: int, seed: int) -> np.ndarray:
    """Seeded combination of low sine modes, max-abs 1 per component, zero on the boundary."""
    rng = np.random.default_rng(seed)
    X, Y = domain.coordinates()
    lx = (domain.nx - 1) * domain.hx
    ly = (domain.ny - 1) * domain.hy
    out = np.zeros(domain.shape + (dim,))
    for k in range(1, 3):
        for l in range(1, 3):
            mode = np.sin(k * np.pi * X / lx) * np.sin(l * np.pi * Y / ly)
            out += rng.normal(size=dim) * mode[..., None] / (k * l)
    out[~domain.interior] = 0.0
    peak = np.abs(out).max(axis=(0, 1))
    return out / np.where(peak > 0, peak, 1.0)


def sine_boundary(domain: GridDomain, amplitude: float = 0.3, dim: int = 1) -> np.ndarray:
    """Flat boundary data (A sin(pi x) cos(pi y), (A/2) cos(pi x) sin(pi y))[:dim], NaN inside.

    The halved second component keeps slope^2 <= 1 + 1.25 k + k^2 / 4 with
    k = (pi A)^2, so A = 0.3 stays inside the slope-sqrt(3) region.
    """
    if dim not in (1, 2):
        raise ValueError("sine boundary data has 1 or 2 components")
    X, Y = domain.coordinates()
    lx = (domain.nx - 1) * domain.hx
    ly = (domain.ny - 1) * domain.hy
    u = amplitude * np.sin(np.pi * X / lx) * np.cos(np.pi * Y / ly)
    v = 0.5 * amplitude * np.cos(np.pi * X / lx) * np.sin(np.pi * Y / ly)
    out = np.stack([u, v][:dim], axis=-1)
    out[~domain.boundary] = np.nan
    return out


def data_scale(domain: GridDomain, target: Manifold, boundary) -> float:
    pts = np.asarray(boundary)[domain.boundary]
    if target.kind == "euclidean":
        return float(np.max(np.abs(pts - pts.mean(axis=0)), initial=0.0)) or 1.0
    d = target.distance(pts[:, None, :], pts[None, :, :])
    return float(d.max()) / 2.0 or 1.0


def perturbed_init(domain, target, boundary, seed: int, amplitude: float = 0.1) -> GridMap:
    """Harmonic extension plus a smooth interior bump of size amplitude * data scale."""
    base = harmonic_extension(domain, target, boundary)
    bump = amplitude * data_scale(domain, target, boundary) * smooth_bump(domain, target.dim, seed)
    vals = target.exp_map(
        base.values, target.from_frame_coords(base.values, bump), check=False
    )
    vals[domain.boundary] = base.values[domain.boundary]
    return base.with_values(vals)


# ---------------------------------------------------------------------------
# flat targets


def _diag(domain: GridDomain, coef) -> np.ndarray:
    cxx, cyy = coef[..., 0, 0], coef[..., 1, 1]
    d = np.zeros(domain.shape)
    c = (slice(1, -1), slice(1, -1))
    d[c] = -(
        (cxx[1:-1, 1:-1] + 0.5 * (cxx[1:-1, 2:] + cxx[1:-1, :-2])) / domain.hx**2
        + (cyy[1:-1, 1:-1] + 0.5 * (cyy[2:, 1:-1] + cyy[:-2, 1:-1])) / domain.hy**2
    )
    return d


def _colour_classes(domain: GridDomain):
    # diagonal neighbours share a red-black colour, so four colours decouple
    # the nine-point stencil
    J, I = np.indices(domain.shape)
    return [domain.interior & (J % 2 == a) & (I % 2 == b) for a in (0, 1) for b in (0, 1)]


def sor_sweeps(domain: GridDomain, coef, u, sweeps: int, omega: float) -> np.ndarray:
    """In-place SOR on sum_ij d_i(C^{ij} d_j u) = 0 with Dirichlet values fixed."""
    diag = _diag(domain, coef)[..., None]
    classes = _colour_classes(domain)
    for _ in range(sweeps):
        for sel in classes:
            r = grid.divergence_operator(domain, coef, u)
            u[sel] -= omega * r[sel] / diag[sel]
    return u


def _max_residual(fmap: GridMap) -> float:
    return float(grid.ms_residual(fmap)[fmap.domain.interior].max(initial=0.0))


def solve_euclidean(
    domain: GridDomain,
    boundary,
    init: GridMap,
    opts: SolverOptions = SolverOptions(),
) -> SolveOutcome:
    target = init.target
    if target.kind != "euclidean":
        raise ValueError("solve_euclidean needs a flat target")
    bvals = _check_boundary(domain, target, boundary)
    bd = domain.boundary
    if not np.array_equal(init.values[bd], bvals[bd]):
        raise ValueError("initial map does not match the boundary data")

    u = np.array(init.values, dtype=float, copy=True)
    fmap = init
    coef = grid.ms_coefficients(grid.jacobian_field(fmap))
    residual = _max_residual(fmap)
    history = [grid.graph_volume(fmap)]
    residuals = [residual]
    it = 0
    converged = residual <= opts.tol_residual
    message = "converged" if converged else ""
    while not converged and it < opts.max_outer:
        it += 1
        u = sor_sweeps(domain, coef, u, opts.inner_sweeps, opts.sor_omega)
        u[bd] = bvals[bd]
        fmap = init.with_values(u)
        new_coef = grid.ms_coefficients(grid.jacobian_field(fmap))
        coef = opts.damping * new_coef + (1.0 - opts.damping) * coef
        residual = _max_residual(fmap)
        residuals.append(residual)
        history.append(grid.graph_volume(fmap))
        if not np.isfinite(residual):
            message = "non-finite residual"
            break
        if residual <= opts.tol_residual:
            converged = True
            message = "converged"
            break
        if len(residuals) > 20 and residual > 10.0 * residuals[-21]:
            message = "diverging: residual grew tenfold over 20 outer iterations"
            break
    if not converged and not message:
        message = f"max_outer={opts.max_outer} reached"
    logger.debug("euclidean solve: %s after %d outer iterations, residual %.3e", message, it, residual)
    return SolveOutcome(fmap, bool(converged), it, float(residual), history, message)


# ---------------------------------------------------------------------------
# hyperbolic targets

_STENCIL = [(0, 0), (0, 1), (0, -1), (1, 0), (-1, 0), (0, 2), (0, -2), (2, 0), (-2, 0)]


def _shift2(arr, dj, di):
    return grid._shift(grid._shift(arr, dj, 0, fill=0.0), di, 1, fill=0.0)


def volume_gradient(fmap: GridMap, eps: float | None = None) -> np.ndarray:
    """Gradient of the discrete volume in frame coordinates, shape (ny, nx, n).

    Central differences along exp_p(+-eps e_k). Nodes congruent mod 5 in both
    grid directions never share a stencil, so each such class is perturbed at
    once and volume changes are attributed back through the stencil window.
    Non-interior nodes get zero.
    """
    domain, target = fmap.domain, fmap.target
    if eps is None:
        eps = 1e-5 * min(domain.hx, domain.hy)
    w = domain.quadrature_weights()
    base = fmap.values
    frames = target.orthonormal_frame(base)
    dens0 = w * grid.density_field(fmap)
    J, I = np.indices(domain.shape)
    grad = np.zeros(domain.shape + (target.dim,))
    for a in range(5):
        for b in range(5):
            sel = domain.interior & (J % 5 == a) & (I % 5 == b)
            if not sel.any():
                continue
            for k in range(target.dim):
                diffs = []
                for sgn in (1.0, -1.0):
                    vals = np.array(base, copy=True)
                    vals[sel] = target.exp_map(base[sel], sgn * eps * frames[sel][:, k], check=False)
                    dens = w * grid.density_field(fmap.with_values(vals))
                    diffs.append(dens - dens0)
                delta = diffs[0] - diffs[1]
                local = sum(_shift2(delta, dj, di) for dj, di in _STENCIL)
                grad[sel, k] = local[sel] / (2 * eps)
    return grad


def dirichlet_hessian(domain: GridDomain) -> sp.csc_matrix:
    """Hessian of (1/2) sum_q w_q |D u(q)|^2 over interior unknowns.

    D is the same node stencil used for Jacobians, so this is the small-slope
    Hessian of the discrete volume. Unlike the five-point Laplacian it sees
    the weak coupling of odd and even nodes under central differencing.
    """
    idx = -np.ones(domain.shape, dtype=int)
    n_inner = int(domain.interior.sum())
    idx[domain.interior] = np.arange(n_inner)
    w = domain.quadrature_weights()
    blocks = []
    for axis in (0, 1):
        rows, cols, data = [], [], []
        for sel, weights in grid.stencil_cases(domain, axis):
            q = np.argwhere(sel)
            if not len(q):
                continue
            rid = np.ravel_multi_index(q.T, domain.shape)
            for k, wt in weights.items():
                nb = q.copy()
                nb[:, axis] += k
                col = idx[nb[:, 0], nb[:, 1]]
                keep = col >= 0
                rows.append(rid[keep])
                cols.append(col[keep])
                data.append(np.full(keep.sum(), wt))
        mat = sp.csr_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(domain.nx * domain.ny, n_inner),
        )
        blocks.append(mat)
    wdiag = sp.diags(w.ravel())
    return sp.csc_matrix(sum(b.T @ wdiag @ b for b in blocks))


class _Preconditioner:
    """Solve with the small-slope volume Hessian on interior nodes."""

    def __init__(self, domain: GridDomain):
        self.interior = domain.interior
        n = int(self.interior.sum())
        self.lu = splu(dirichlet_hessian(domain)) if n else None

    def __call__(self, field_values):
        out = np.zeros(field_values.shape)
        if self.lu is not None:
            out[self.interior] = self.lu.solve(np.ascontiguousarray(field_values[self.interior]))
        return out


def solve_hyperbolic(
    domain: GridDomain,
    boundary,
    init: GridMap,
    opts: SolverOptions = SolverOptions(),
) -> SolveOutcome:
    """Minimise the discrete graph volume by preconditioned Riemannian descent.

    The search direction is the volume gradient preconditioned by the
    small-slope Hessian (:func:`dirichlet_hessian`), a Newton step for nearly
    flat data that keeps step sizes independent of the grid spacing. Steps move each node along exp and are accepted by an
    Armijo backtracking test, so the volume history never increases.
    """
    target = init.target
    if target.kind != "hyperbolic":
        raise ValueError("solve_hyperbolic needs a hyperbolic target")
    bvals = _check_boundary(domain, target, boundary)
    bd = domain.boundary
    if not np.allclose(init.values[bd], bvals[bd], rtol=0, atol=1e-12):
        raise ValueError("initial map does not match the boundary data")

    w = domain.quadrature_weights()
    winv = np.where(w > 0, 1.0 / np.where(w > 0, w, 1.0), 0.0)[..., None]
    precond = _Preconditioner(domain)
    fmap = init
    vol = grid.graph_volume(fmap)
    history = [vol]
    step = 1.0
    converged = False
    message = ""
    it = 0
    grad_norm = np.inf
    while it < opts.max_outer:
        grad = volume_gradient(fmap)
        scaled = grad * winv
        grad_norm = float(np.abs(scaled[domain.interior]).max(initial=0.0))
        if grad_norm <= opts.tol_residual:
            converged = True
            message = "converged"
            break
        it += 1
        direction = -precond(grad)
        slope = float(np.sum(grad * direction))
        if slope >= 0:
            direction, slope = -scaled, -float(np.sum(grad * scaled))
        tangent = target.from_frame_coords(fmap.values, direction)
        step = min(1.0, 2.0 * step)
        while True:
            vals = target.exp_map(fmap.values, step * tangent, check=False)
            vals[bd] = fmap.values[bd]
            trial = fmap.with_values(vals)
            new_vol = grid.graph_volume(trial)
            if new_vol <= vol + 1e-4 * step * slope:
                break
            step *= 0.5
            if step < 1e-14:
                break
        if step < 1e-14:
            # round-off floor: no representable descent left
            message = "line search failed"
            break
        fmap, vol = trial, new_vol
        history.append(vol)
    if not converged and not message:
        message = f"max_outer={opts.max_outer} reached"
    return SolveOutcome(fmap, converged, it, grad_norm, history, message)


def solve(domain, boundary, init: GridMap | None = None, opts: SolverOptions = SolverOptions(), target=None):
    """Dispatch on the target kind; defaults to the harmonic initialiser."""
    if init is None:
        if target is None:
            raise ValueError("need either an initial map or a target")
        init = harmonic_extension(domain, target, boundary)
    if init.target.kind == "euclidean":
        return solve_euclidean(domain, boundary, init, opts)
    return solve_hyperbolic(domain, boundary, init, opts)


# ---------------------------------------------------------------------------
# uniqueness experiment


@dataclass
class UniquenessReport:
    region: str
    runs: list
    in_region: bool
    max_pair_distance: float
    conclusion: str
    out_of_scope: bool = False
    maps: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "region": self.region,
            "in_region": self.in_region,
            "max_pair_distance": self.max_pair_distance,
            "conclusion": self.conclusion,
            "out_of_scope": self.out_of_scope,
            "runs": self.runs,
        }


def uniqueness_experiment(
    domain: GridDomain,
    target: Manifold,
    boundary,
    region: regions.Region,
    opts: SolverOptions = SolverOptions(),
    n_inits: int = 2,
    distance_tol: float = 1e-6,
) -> UniquenessReport:
    """Solve from several initialisations and compare against the region hypothesis.

    The first run starts from the harmonic extension, later ones from seeded
    perturbations of it. The verdict is three-valued: ``unique`` when every
    run converged inside the region and the maps agree, ``out of region``
    when the hypothesis fails (the theorem then says nothing), and
    ``inconclusive`` otherwise.
    """
    if n_inits < 2:
        raise ValueError("need at least two initialisations")
    boundary = _check_boundary(domain, target, boundary)
    inits = [harmonic_extension(domain, target, boundary)]
    for k in range(1, n_inits):
        inits.append(perturbed_init(domain, target, boundary, seed=opts.seed + k))

    def run(init):
        return solve(domain, boundary, init, opts)

    with ThreadPoolExecutor(max_workers=min(worker_count(), n_inits)) as pool:
        outcomes = list(pool.map(run, inits))

    runs = []
    in_region = True
    for k, out in enumerate(outcomes):
        rf = grid.region_field(out.map, region)
        in_region &= rf.all_member
        runs.append(
            {
                "init": "harmonic" if k == 0 else f"perturbed(seed={opts.seed + k})",
                "converged": out.converged,
                "iterations": out.iterations,
                "final_residual": out.final_residual,
                "in_region": rf.all_member,
                "min_margin": rf.min_margin,
                "volume": out.volume_history[-1],
            }
        )
    dist = 0.0
    act = domain.active
    for a in range(n_inits):
        for b in range(a + 1, n_inits):
            d = target.distance(outcomes[a].map.values[act], outcomes[b].map.values[act])
            dist = max(dist, float(d.max()))

    if not all(o.converged for o in outcomes):
        conclusion = INCONCLUSIVE
    elif not in_region:
        conclusion = SILENT
    elif dist <= distance_tol:
        conclusion = UNIQUE
    else:
        conclusion = INCONCLUSIVE
    return UniquenessReport(
        region=region.name,
        runs=runs,
        in_region=bool(in_region),
        max_pair_distance=dist,
        conclusion=conclusion,
        out_of_scope=region.out_of_scope,
        maps=[o.map for o in outcomes],
    )
