"""Maps from a planar grid into a model manifold.

Values are stored as an array of shape ``(ny, nx, D)``: row ``j`` holds the
nodes with y = j*hy, column ``i`` those with x = i*hx, and ``D`` is the
ambient dimension of the target. Jacobians are expressed in the source's
coordinate axes and in ``target.orthonormal_frame`` at the image point, so
they have shape ``(..., n, 2)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from mgl import regions
from mgl.manifolds import Manifold, manifold_from_spec

RANK_TOL = 1e-8

_NEIGHBOURS8 = [(dj, di) for dj in (-1, 0, 1) for di in (-1, 0, 1) if (dj, di) != (0, 0)]


@dataclass(frozen=True, eq=False)
class GridDomain:
    """Rectangular node grid, optionally restricted by a boolean mask.

    A node is interior when it and all eight neighbours are active (the
    minimal-surface stencil has cross terms), otherwise an active node is a
    boundary node.
    """

    nx: int
    ny: int
    hx: float
    hy: float
    mask: np.ndarray | None = None
    active: np.ndarray = field(init=False, repr=False)
    interior: np.ndarray = field(init=False, repr=False)
    boundary: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValueError("grid needs at least 3 nodes per axis")
        if not (self.hx > 0 and self.hy > 0):
            raise ValueError("grid spacings must be positive")
        if self.mask is None:
            active = np.ones((self.ny, self.nx), dtype=bool)
        else:
            active = np.asarray(self.mask, dtype=bool)
            if active.shape != (self.ny, self.nx):
                raise ValueError(f"mask shape {active.shape} != {(self.ny, self.nx)}")
        padded = np.pad(active, 1, constant_values=False)
        interior = active.copy()
        for dj, di in _NEIGHBOURS8:
            interior &= padded[1 + dj : 1 + dj + self.ny, 1 + di : 1 + di + self.nx]
        for name, arr in (("active", active), ("interior", interior), ("boundary", active & ~interior)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def unit_square(cls, n: int) -> "GridDomain":
        return cls(n, n, 1.0 / (n - 1), 1.0 / (n - 1))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinates X, Y of shape (ny, nx)."""
        x = np.arange(self.nx) * self.hx
        y = np.arange(self.ny) * self.hy
        return np.meshgrid(x, y)

    def quadrature_weights(self) -> np.ndarray:
        """Trapezoidal weights: each fully active cell spreads hx*hy/4 to its corners."""
        a = self.active.astype(float)
        cell = a[:-1, :-1] * a[1:, :-1] * a[:-1, 1:] * a[1:, 1:]
        w = np.zeros(self.shape)
        q = 0.25 * self.hx * self.hy * cell
        w[:-1, :-1] += q
        w[1:, :-1] += q
        w[:-1, 1:] += q
        w[1:, 1:] += q
        return w

    def same_as(self, other: "GridDomain") -> bool:
        return (
            (self.nx, self.ny) == (other.nx, other.ny)
            and np.isclose(self.hx, other.hx, rtol=0, atol=1e-15)
            and np.isclose(self.hy, other.hy, rtol=0, atol=1e-15)
            and np.array_equal(self.active, other.active)
        )

    def to_dict(self) -> dict:
        d = {"nx": self.nx, "ny": self.ny, "hx": self.hx, "hy": self.hy}
        if self.mask is not None:
            d["mask"] = np.asarray(self.mask, dtype=int).tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GridDomain":
        mask = d.get("mask")
        return cls(
            int(d["nx"]),
            int(d["ny"]),
            float(d["hx"]),
            float(d["hy"]),
            None if mask is None else np.asarray(mask, dtype=bool),
        )


@dataclass(frozen=True, eq=False)
class GridMap:
    domain: GridDomain
    target: Manifold
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, copy=True)
        expected = self.domain.shape + (self.target.ambient_dim,)
        if vals.shape != expected:
            raise ValueError(f"values have shape {vals.shape}, expected {expected}")
        act = self.domain.active
        if not np.all(np.isfinite(vals[act])):
            raise ValueError("active nodes must carry finite values")
        # inactive nodes carry a harmless placeholder so stencils stay finite
        vals[~act] = self.target.origin()
        self.target.check_point(vals[act])
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def with_values(self, values) -> "GridMap":
        return GridMap(self.domain, self.target, values)

    def boundary_values(self) -> np.ndarray:
        out = np.full(self.values.shape, np.nan)
        out[self.domain.boundary] = self.values[self.domain.boundary]
        return out


# ---------------------------------------------------------------------------
# stencils


def _shift(arr, offset, axis, fill=np.nan):
    """out[q] = arr[q + offset * e_axis], ``fill`` where that index is off-grid."""
    out = np.full(arr.shape, fill, dtype=arr.dtype)
    n = arr.shape[axis]
    src = [slice(None)] * arr.ndim
    dst = [slice(None)] * arr.ndim
    if offset >= 0:
        src[axis] = slice(offset, n)
        dst[axis] = slice(0, n - offset)
    else:
        src[axis] = slice(0, n + offset)
        dst[axis] = slice(-offset, n)
    out[tuple(dst)] = arr[tuple(src)]
    return out


def stencil_cases(domain: GridDomain, axis: int) -> list[tuple[np.ndarray, dict[int, float]]]:
    """Derivative stencils along a grid axis as (node mask, {offset: weight}).

    Central differences where both neighbours are active, second-order
    one-sided ones otherwise, first order as a last resort. Weights already
    include the 1/h factor.
    """
    h = domain.hx if axis == 1 else domain.hy
    act = domain.active
    ok = {k: _shift(act, k, axis, fill=False) & act for k in (-2, -1, 1, 2)}
    central = ok[1] & ok[-1]
    fwd2 = ~central & ok[1] & ok[2]
    bwd2 = ~central & ~fwd2 & ok[-1] & ok[-2]
    fwd1 = ~central & ~fwd2 & ~bwd2 & ok[1]
    bwd1 = ~central & ~fwd2 & ~bwd2 & ~fwd1 & ok[-1]
    return [
        (central, {1: 0.5 / h, -1: -0.5 / h}),
        (fwd2, {0: -1.5 / h, 1: 2.0 / h, 2: -0.5 / h}),
        (bwd2, {0: 1.5 / h, -1: -2.0 / h, -2: 0.5 / h}),
        (fwd1, {0: -1.0 / h, 1: 1.0 / h}),
        (bwd1, {0: 1.0 / h, -1: -1.0 / h}),
    ]


def axis_derivative(domain: GridDomain, axis: int, zero_term, neighbour_term) -> np.ndarray:
    """Second-order derivative of a quantity along a grid axis.

    ``zero_term`` is the quantity at each node and ``neighbour_term(k)`` the
    quantity at node q + k e_axis brought into the tangent space at q (a log
    map for positions, a parallel transport for vector fields). The stencil
    choice follows :func:`stencil_cases`.
    """
    terms = {0: np.asarray(zero_term, dtype=float)}
    terms.update({k: neighbour_term(k) for k in (-2, -1, 1, 2)})
    out = np.zeros(np.shape(zero_term))
    with np.errstate(invalid="ignore"):
        for sel, weights in stencil_cases(domain, axis):
            if sel.any():
                out[sel] = sum(w * terms[k][sel] for k, w in weights.items())
    return out


def ambient_jacobian(fmap: GridMap) -> np.ndarray:
    """Columns d f / dx, d f / dy as ambient tangent vectors, shape (ny, nx, 2, D)."""
    target, vals = fmap.target, fmap.values
    cols = []
    for axis in (1, 0):

        def nb(k, axis=axis):
            shifted = _shift(vals, k, axis)
            with np.errstate(invalid="ignore"):
                return target.log_map(vals, shifted)

        cols.append(axis_derivative(fmap.domain, axis, np.zeros(vals.shape), nb))
    return np.stack(cols, axis=-2)


def covariant_axis_derivatives(fmap: GridMap, field_values) -> np.ndarray:
    """Covariant derivatives of a vector field along the grid axes.

    Neighbouring vectors are parallel transported to the centre node before
    differencing. Returns ambient vectors of shape (ny, nx, 2, D).
    """
    target, vals = fmap.target, fmap.values
    field_values = np.asarray(field_values, dtype=float)
    cols = []
    for axis in (1, 0):

        def nb(k, axis=axis):
            with np.errstate(invalid="ignore"):
                return target.parallel_transport(
                    _shift(vals, k, axis), vals, _shift(field_values, k, axis)
                )

        d = axis_derivative(fmap.domain, axis, field_values, nb)
        cols.append(target.project_tangent(vals, d))
    return np.stack(cols, axis=-2)


def jacobian_field(fmap: GridMap) -> np.ndarray:
    """Jacobian in orthonormal frames at every node, shape (ny, nx, n, 2)."""
    amb = ambient_jacobian(fmap)
    coords = fmap.target.frame_coords(fmap.values[..., None, :], amb)
    out = np.swapaxes(coords, -1, -2)
    out[~fmap.domain.active] = 0.0
    return out


def jacobian(fmap: GridMap, node) -> np.ndarray:
    j, i = node
    if not fmap.domain.active[j, i]:
        raise ValueError(f"node {node} is inactive")
    return jacobian_field(fmap)[j, i]


def spectra_from_jacobians(jac, m: int = 2) -> np.ndarray:
    """Descending singular values padded with zeros to length ``m``."""
    sv = np.linalg.svd(jac, compute_uv=False)
    k = sv.shape[-1]
    if k < m:
        sv = np.concatenate([sv, np.zeros(sv.shape[:-1] + (m - k,))], axis=-1)
    return sv


def spectrum_field(fmap: GridMap) -> np.ndarray:
    return spectra_from_jacobians(jacobian_field(fmap))


def singular_spectrum(fmap: GridMap, node) -> np.ndarray:
    return spectra_from_jacobians(jacobian(fmap, node))


def rank(spectrum) -> int:
    s = np.asarray(spectrum, dtype=float)
    return int(np.sum(s > RANK_TOL * max(1.0, float(s.max(initial=0.0)))))


def metric_from_jacobians(jac) -> np.ndarray:
    m = jac.shape[-1]
    return np.eye(m) + np.swapaxes(jac, -1, -2) @ jac


def induced_metric(fmap: GridMap, node) -> np.ndarray:
    return metric_from_jacobians(jacobian(fmap, node))


def density_field(fmap: GridMap) -> np.ndarray:
    """sqrt(det g) at every node (zero on inactive nodes)."""
    dens = np.sqrt(np.linalg.det(metric_from_jacobians(jacobian_field(fmap))))
    return np.where(fmap.domain.active, dens, 0.0)


def graph_volume(fmap: GridMap) -> float:
    return float(np.sum(fmap.domain.quadrature_weights() * density_field(fmap)))


@dataclass
class RegionField:
    region: str
    margins: np.ndarray
    member: np.ndarray
    on_boundary: np.ndarray
    all_member: bool
    min_margin: float
    out_of_scope: bool = False


def region_field(fmap: GridMap, region: regions.Region, tol: float = regions.BOUNDARY_TOL) -> RegionField:
    """Apply a region predicate to the squared spectrum at every active node."""
    act = fmap.domain.active
    sq = spectrum_field(fmap) ** 2
    margins = np.full(act.shape, np.inf)
    margins[act] = region.margins(sq[act])
    member = margins >= -tol
    return RegionField(
        region=region.name,
        margins=margins,
        member=member,
        on_boundary=member & (margins <= tol) & act,
        all_member=bool(np.all(member[act])),
        min_margin=float(margins[act].min()),
        out_of_scope=region.out_of_scope,
    )


# ---------------------------------------------------------------------------
# minimal surface operator (flat targets)


def ms_coefficients(jac) -> np.ndarray:
    """sqrt(g) g^{ij} from Jacobians, shape (..., 2, 2)."""
    g = metric_from_jacobians(jac)
    return np.sqrt(np.linalg.det(g))[..., None, None] * np.linalg.inv(g)


def divergence_operator(domain: GridDomain, coef, u) -> np.ndarray:
    """sum_ij d_i (C^{ij} d_j u) with a compact nine-point stencil.

    ``coef`` has shape (ny, nx, 2, 2) indexed [.., i, j] with axis 0 = x and
    axis 1 = y; ``u`` has shape (ny, nx) or (ny, nx, k). Values are only
    meaningful at interior nodes; other nodes are set to zero.
    """
    u = np.asarray(u, dtype=float)
    squeeze = u.ndim == 2
    if squeeze:
        u = u[..., None]
    hx, hy = domain.hx, domain.hy
    cxx = coef[..., 0, 0][..., None]
    cyy = coef[..., 1, 1][..., None]
    cxy = coef[..., 0, 1][..., None]
    cyx = coef[..., 1, 0][..., None]
    out = np.zeros(u.shape)
    c = (slice(1, -1), slice(1, -1))
    e, w = (slice(1, -1), slice(2, None)), (slice(1, -1), slice(None, -2))
    n, s = (slice(2, None), slice(1, -1)), (slice(None, -2), slice(1, -1))
    ne, nw = (slice(2, None), slice(2, None)), (slice(2, None), slice(None, -2))
    se, sw = (slice(None, -2), slice(2, None)), (slice(None, -2), slice(None, -2))
    xx = (
        0.5 * (cxx[c] + cxx[e]) * (u[e] - u[c]) - 0.5 * (cxx[c] + cxx[w]) * (u[c] - u[w])
    ) / hx**2
    yy = (
        0.5 * (cyy[c] + cyy[n]) * (u[n] - u[c]) - 0.5 * (cyy[c] + cyy[s]) * (u[c] - u[s])
    ) / hy**2
    xy = (cxy[e] * (u[ne] - u[se]) - cxy[w] * (u[nw] - u[sw])) / (4 * hx * hy)
    yx = (cyx[n] * (u[ne] - u[nw]) - cyx[s] * (u[se] - u[sw])) / (4 * hx * hy)
    out[c] = xx + yy + xy + yx
    out[~domain.interior] = 0.0
    return out[..., 0] if squeeze else out


def ms_residual(fmap: GridMap) -> np.ndarray:
    """Per-node Euclidean norm over components of the minimal surface operator."""
    if fmap.target.kind != "euclidean":
        raise ValueError("ms_residual needs a flat target; use the area gradient instead")
    coef = ms_coefficients(jacobian_field(fmap))
    res = divergence_operator(fmap.domain, coef, fmap.values)
    return np.linalg.norm(res, axis=-1)


# ---------------------------------------------------------------------------
# map files


def map_to_dict(fmap: GridMap, boundary_only: bool = False) -> dict:
    act = fmap.domain.active
    keep = fmap.domain.boundary if boundary_only else act
    rows = []
    for j in range(fmap.domain.ny):
        for i in range(fmap.domain.nx):
            rows.append([float(v) for v in fmap.values[j, i]] if keep[j, i] else None)
    return {"grid": fmap.domain.to_dict(), "target": fmap.target.spec, "values": rows}


def parse_map_dict(d: dict):
    """Return (domain, target, values) with NaN for null entries."""
    domain = GridDomain.from_dict(d["grid"])
    target = manifold_from_spec(d["target"])
    raw = d["values"]
    if len(raw) != domain.nx * domain.ny:
        raise ValueError(f"expected {domain.nx * domain.ny} values, got {len(raw)}")
    vals = np.full((domain.ny * domain.nx, target.ambient_dim), np.nan)
    for k, v in enumerate(raw):
        if v is None:
            continue
        if len(v) != target.ambient_dim:
            raise ValueError(f"value {k} has {len(v)} coordinates, expected {target.ambient_dim}")
        vals[k] = v
    return domain, target, vals.reshape(domain.ny, domain.nx, -1)


def map_from_dict(d: dict) -> GridMap:
    domain, target, vals = parse_map_dict(d)
    return GridMap(domain, target, vals)


def save_map(fmap: GridMap, path, boundary_only: bool = False) -> None:
    Path(path).write_text(json.dumps(map_to_dict(fmap, boundary_only)) + "\n")


def load_map(path) -> GridMap:
    return map_from_dict(json.loads(Path(path).read_text()))


def load_boundary(path):
    """Read a boundary file; returns (domain, target, values with NaN interior)."""
    domain, target, vals = parse_map_dict(json.loads(Path(path).read_text()))
    if not np.all(np.isfinite(vals[domain.boundary])):
        raise ValueError("boundary file is missing values on boundary nodes")
    return domain, target, vals
