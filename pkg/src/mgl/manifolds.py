"""Closed-form Riemannian primitives for flat and hyperbolic targets.

Hyperbolic space of curvature -kappa is realised as the upper sheet of the
hyperboloid <x, x>_L = -1/kappa in Minkowski space R^{1,n}; points and
tangent vectors carry n+1 ambient coordinates with the time-like coordinate
first. All methods broadcast over leading axes, so a whole grid of points can
be pushed through a single call.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

POINT_TOL = 1e-10
SMALL = 1e-8


class ExtrapolationWarning(UserWarning):
    """Raised when a geodesic is evaluated outside t in [0, 1]."""


def _sinhc(x):
    """sinh(x)/x with a series guard near zero."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < SMALL
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 + x * x / 6.0, np.sinh(safe) / safe)


class Manifold:
    """Common interface; see :class:`Euclidean` and :class:`Hyperbolic`."""

    kind: str
    dim: int
    curvature: float
    ambient_dim: int

    @property
    def spec(self) -> dict:
        return {"kind": self.kind, "dim": self.dim, "curvature": self.curvature}

    def __eq__(self, other):
        return isinstance(other, Manifold) and self.spec == other.spec

    def __hash__(self):
        return hash(tuple(self.spec.items()))

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim}, curvature={self.curvature})"

    def norm(self, v):
        return np.sqrt(np.maximum(self.inner(v, v), 0.0))

    def geodesic_point(self, p, q, t):
        """exp_p(t log_p q); values of t outside [0, 1] extrapolate with a warning."""
        v = self.log_map(p, q)
        t = np.asarray(t, dtype=float)
        if np.any((t < 0.0) | (t > 1.0)):
            warnings.warn("geodesic evaluated outside [0, 1]", ExtrapolationWarning, stacklevel=2)
        if t.ndim:
            t = t[..., None]
        return self.exp_map(p, t * v, check=False)

    def frame_coords(self, p, v):
        """Components of tangent vectors ``v`` in ``orthonormal_frame(p)``."""
        frame = self.orthonormal_frame(p)
        return self.inner(v[..., None, :], frame)

    def from_frame_coords(self, p, c):
        frame = self.orthonormal_frame(p)
        return np.einsum("...k,...kd->...d", c, frame)

    def curvature_quadratic(self, p, x, v):
        """<R(X, V) X, V> for constant sectional curvature K = self.curvature.

        With R(X, Y) = nabla_X nabla_Y - nabla_Y nabla_X - nabla_[X,Y] this
        equals -K (|X|^2 |V|^2 - <X, V>^2), non-negative when K <= 0.
        """
        xx = self.inner(x, x)
        vv = self.inner(v, v)
        xv = self.inner(x, v)
        return -self.curvature * (xx * vv - xv * xv)


class Euclidean(Manifold):
    kind = "euclidean"

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("dimension must be >= 1")
        self.dim = int(dim)
        self.curvature = 0.0
        self.ambient_dim = self.dim

    def inner(self, u, v):
        return np.sum(np.asarray(u) * np.asarray(v), axis=-1)

    def check_point(self, p):
        p = np.asarray(p, dtype=float)
        if p.shape[-1] != self.dim:
            raise ValueError(f"expected {self.dim} coordinates, got {p.shape[-1]}")
        return p

    def check_tangent(self, p, v):
        self.check_point(p)
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.dim:
            raise ValueError("tangent vector has the wrong number of components")
        return v

    def project_point(self, p):
        return np.asarray(p, dtype=float)

    def project_tangent(self, p, v):
        return np.asarray(v, dtype=float)

    def exp_map(self, p, v, check=True):
        if check:
            self.check_tangent(p, v)
        return np.asarray(p, dtype=float) + v

    def log_map(self, p, q):
        return np.asarray(q, dtype=float) - np.asarray(p, dtype=float)

    def distance(self, p, q):
        return np.linalg.norm(np.asarray(q) - np.asarray(p), axis=-1)

    def geodesic_velocity(self, p, q, t):
        return self.log_map(p, q)

    def parallel_transport(self, p, q, v):
        return np.array(v, dtype=float, copy=True)

    def orthonormal_frame(self, p):
        p = np.asarray(p, dtype=float)
        return np.broadcast_to(np.eye(self.dim), p.shape[:-1] + (self.dim, self.dim)).copy()

    def frame_coords(self, p, v):
        return np.asarray(v, dtype=float)

    def from_frame_coords(self, p, c):
        return np.asarray(c, dtype=float)

    def origin(self):
        return np.zeros(self.dim)

    def random_point(self, rng, scale=1.0, size=()):
        shape = (tuple(np.atleast_1d(size)) if size != () else ()) + (self.dim,)
        return rng.normal(scale=scale, size=shape)

    def random_tangent(self, rng, p, scale=1.0):
        p = np.asarray(p, dtype=float)
        return rng.normal(scale=scale, size=p.shape)


class Hyperbolic(Manifold):
    kind = "hyperbolic"

    def __init__(self, dim: int, kappa: float = 1.0):
        if dim < 1:
            raise ValueError("dimension must be >= 1")
        if not kappa > 0:
            raise ValueError("hyperbolic space needs kappa > 0 (curvature -kappa < 0)")
        self.dim = int(dim)
        self.kappa = float(kappa)
        self.curvature = -self.kappa
        self.ambient_dim = self.dim + 1
        self._sk = math.sqrt(self.kappa)

    # Minkowski geometry -----------------------------------------------------

    def inner(self, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        return np.sum(u[..., 1:] * v[..., 1:], axis=-1) - u[..., 0] * v[..., 0]

    def check_point(self, p):
        p = np.asarray(p, dtype=float)
        if p.shape[-1] != self.ambient_dim:
            raise ValueError(f"expected {self.ambient_dim} ambient coordinates, got {p.shape[-1]}")
        err = np.abs(self.inner(p, p) + 1.0 / self.kappa)
        if np.any(err > POINT_TOL * np.maximum(1.0, p[..., 0] ** 2)) or np.any(p[..., 0] <= 0):
            raise ValueError("point is not on the upper hyperboloid sheet")
        return p

    def check_tangent(self, p, v):
        p = self.check_point(p)
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.ambient_dim:
            raise ValueError("tangent vector has the wrong number of components")
        scale = np.maximum(1.0, np.abs(p).max(axis=-1) * np.abs(v).max(axis=-1))
        if np.any(np.abs(self.inner(p, v)) > POINT_TOL * scale):
            raise ValueError("vector is not tangent at the given base point")
        return v

    def project_point(self, p):
        """Lift the spatial coordinates back onto the hyperboloid."""
        p = np.array(p, dtype=float, copy=True)
        p[..., 0] = np.sqrt(1.0 / self.kappa + np.sum(p[..., 1:] ** 2, axis=-1))
        return p

    def project_tangent(self, p, v):
        return v + self.kappa * self.inner(p, v)[..., None] * p

    def origin(self):
        o = np.zeros(self.ambient_dim)
        o[0] = 1.0 / self._sk
        return o

    def lift(self, spatial):
        """Point with the given spatial coordinates x_1..x_n."""
        spatial = np.asarray(spatial, dtype=float)
        p = np.concatenate([np.zeros(spatial.shape[:-1] + (1,)), spatial], axis=-1)
        return self.project_point(p)

    def random_point(self, rng, scale=1.0, size=()):
        shape = (tuple(np.atleast_1d(size)) if size != () else ()) + (self.dim,)
        return self.lift(rng.normal(scale=scale, size=shape))

    def random_tangent(self, rng, p, scale=1.0):
        p = np.asarray(p, dtype=float)
        return self.project_tangent(p, rng.normal(scale=scale, size=p.shape))

    # geodesics --------------------------------------------------------------

    def _chord2(self, p, q):
        d = np.asarray(q, dtype=float) - np.asarray(p, dtype=float)
        return np.maximum(self.inner(d, d), 0.0)

    def distance(self, p, q):
        chord = np.sqrt(self._chord2(p, q))
        return 2.0 / self._sk * np.arcsinh(self._sk * chord / 2.0)

    def exp_map(self, p, v, check=True):
        if check:
            self.check_tangent(p, v)
        p = np.asarray(p, dtype=float)
        theta = self._sk * self.norm(v)
        out = np.cosh(theta)[..., None] * p + _sinhc(theta)[..., None] * v
        return self.project_point(out)

    def log_map(self, p, q):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        # q + kappa <p,q> p, written so that nearby points do not cancel
        u = (q - p) - (0.5 * self.kappa * self._chord2(p, q))[..., None] * p
        theta = self._sk * self.distance(p, q)
        return u / _sinhc(theta)[..., None]

    def geodesic_velocity(self, p, q, t):
        """Closed-form derivative of t -> geodesic_point(p, q, t)."""
        p = np.asarray(p, dtype=float)
        v = self.log_map(p, q)
        theta = self._sk * self.norm(v)
        t = np.asarray(t, dtype=float)
        return (theta * np.sinh(t * theta))[..., None] * p + np.cosh(t * theta)[..., None] * v

    def parallel_transport(self, p, q, v):
        """Transport ``v`` from T_p to T_q along the connecting geodesic."""
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        denom = 1.0 - self.kappa * self.inner(p, q)
        coef = self.kappa * self.inner(q, v) / denom
        return self.project_tangent(q, v + coef[..., None] * (p + q))

    def orthonormal_frame(self, p):
        """Gram-Schmidt of the projected spatial axes; shape (..., n, n+1)."""
        p = np.asarray(p, dtype=float)
        basis = []
        for k in range(self.dim):
            e = np.zeros(p.shape)
            e[..., k + 1] = 1.0
            w = self.project_tangent(p, e)
            for b in basis:
                w = w - self.inner(w, b)[..., None] * b
            w = w / self.norm(w)[..., None]
            basis.append(w)
        return np.stack(basis, axis=-2)


def manifold_from_spec(spec: dict) -> Manifold:
    kind = spec["kind"]
    dim = int(spec["dim"])
    curvature = float(spec.get("curvature", 0.0))
    if kind == "euclidean":
        if curvature != 0.0:
            raise ValueError("euclidean targets have curvature 0")
        return Euclidean(dim)
    if kind == "hyperbolic":
        if not curvature < 0:
            raise ValueError("hyperbolic targets need curvature < 0")
        return Hyperbolic(dim, -curvature)
    raise ValueError(f"unknown manifold kind {kind!r}")


def parse_target(text: str) -> Manifold:
    """Parse ``euclidean:n`` or ``hyperbolic:n:kappa``."""
    parts = text.split(":")
    if parts[0] == "euclidean" and len(parts) == 2:
        return Euclidean(int(parts[1]))
    if parts[0] == "hyperbolic" and len(parts) in (2, 3):
        kappa = float(parts[2]) if len(parts) == 3 else 1.0
        return Hyperbolic(int(parts[1]), kappa)
    raise ValueError(f"cannot parse target {text!r}; use euclidean:n or hyperbolic:n:kappa")


def holonomy_curvature(manifold: Manifold, p, x, v, eps: float = 1e-3) -> float:
    """Finite-loop estimate of <R(X, V) X, V> from parallel transport.

    X is carried around the small geodesic quadrilateral with corners
    exp_p(eps (+-X +-V) / 2), centred on p so that odd error terms cancel.
    """
    corners = [
        manifold.exp_map(p, eps * (sx * x + sv * v) / 2.0, check=False)
        for sx, sv in ((-1, -1), (1, -1), (1, 1), (-1, 1))
    ]
    w = manifold.parallel_transport(p, corners[0], x)
    for a, b in zip(corners, corners[1:] + corners[:1]):
        w = manifold.parallel_transport(a, b, w)
    w = manifold.parallel_transport(corners[0], p, w)
    return float(-manifold.inner(w - x, v) / eps**2)
