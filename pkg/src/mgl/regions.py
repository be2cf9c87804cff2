"""Singular-value regions and slope functions.

Every region here is a symmetric subset of the non-negative orthant, so inputs
are sorted descending before evaluation. Two input conventions are used:

* ``lam`` -- a singular value vector (lambda_1, ..., lambda_m);
* ``a``   -- a squared singular value vector (lambda_1^2, ..., lambda_m^2).

Membership is reported through :class:`RegionVerdict`, whose ``margin`` is the
smallest slack over the defining inequalities written as ``expr >= 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

BOUNDARY_TOL = 1e-12


@dataclass(frozen=True)
class RegionVerdict:
    member: bool
    on_boundary: bool
    margin: float
    out_of_scope: bool = False


def as_spectrum(values) -> np.ndarray:
    """Validate a (squared) singular value vector and sort it descending."""
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError("spectrum must have at least one entry")
    if not np.all(np.isfinite(arr)):
        raise ValueError("spectrum entries must be finite")
    if np.any(arr < 0):
        raise ValueError(f"spectrum entries must be non-negative, got {arr.tolist()}")
    return np.sort(arr)[::-1]


def _sorted_batch(a) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    return -np.sort(-arr, axis=-1)


def _verdict(margin: float, tol: float, out_of_scope: bool = False) -> RegionVerdict:
    member = bool(margin >= -tol)
    return RegionVerdict(
        member=member,
        on_boundary=bool(member and margin <= tol),
        margin=float(margin),
        out_of_scope=out_of_scope,
    )


# ---------------------------------------------------------------------------
# scalar functions


def slope_from_spectrum(lam) -> float:
    """Volume density of the graph, prod (1 + lambda_i^2)^(1/2)."""
    lam = as_spectrum(lam)
    return float(np.sqrt(np.prod(1.0 + lam**2)))


def slope_values(x) -> np.ndarray:
    """Vectorised slope over the last axis (no sorting or validation)."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(np.prod(1.0 + x**2, axis=-1))


def product_sum(a) -> np.ndarray:
    """prod(1 - a_i) + sum_i (1 - a_1) ... a_i ... (1 - a_m), over the last axis.

    Prefix/suffix products avoid dividing by (1 - a_i), which may vanish.
    """
    a = np.asarray(a, dtype=float)
    one_minus = 1.0 - a
    ones = np.ones(a.shape[:-1] + (1,))
    prefix = np.concatenate([ones, np.cumprod(one_minus, axis=-1)[..., :-1]], axis=-1)
    suffix = np.concatenate(
        [np.cumprod(one_minus[..., ::-1], axis=-1)[..., :-1][..., ::-1], ones], axis=-1
    )
    full = np.prod(one_minus, axis=-1)
    return full + np.sum(prefix * a * suffix, axis=-1)


def g_function(y) -> float:
    """G(y) = sum 1 / (1 - y_i) on [0, 1)^k."""
    y = np.asarray(y, dtype=float).ravel()
    if np.any(y >= 1.0):
        raise ValueError(f"G is defined only for entries < 1, got {y.tolist()}")
    if np.any(y < 0):
        raise ValueError("G is defined only for non-negative entries")
    return float(np.sum(1.0 / (1.0 - y)))


def mu_m(m: int) -> float:
    """Slope threshold sqrt(3) * (2 - 1/(m-1))^(1/2)."""
    if int(m) != m or m < 2:
        raise ValueError(f"mu_m needs an integer m >= 2, got {m}")
    return math.sqrt(3.0) * math.sqrt(2.0 - 1.0 / (m - 1))


# ---------------------------------------------------------------------------
# batch margins (rows are vectors, sorted internally)


def m_margins(lam) -> np.ndarray:
    """Margins of the closed stability region for singular value vectors."""
    x = _sorted_batch(lam)
    if x.shape[-1] == 1:
        return np.full(x.shape[0], np.inf)
    pair = 1.0 - x[:, 0] * x[:, 1]
    return np.minimum(pair, product_sum(x**2))


def n_margins(a) -> np.ndarray:
    """Margins of the closed region for squared singular value vectors."""
    a = _sorted_batch(a)
    if a.shape[-1] == 1:
        return np.full(a.shape[0], np.inf)
    pair = 1.0 - a[:, 0] * a[:, 1]
    return np.minimum(pair, product_sum(a))


def c_margins(a) -> np.ndarray:
    """Margins of the polyhedron {sum a <= 3 - 1/(m-1), a_i + a_j <= 2}."""
    a = _sorted_batch(a)
    m = a.shape[-1]
    if m == 1:
        return np.full(a.shape[0], np.inf)
    total = 3.0 - 1.0 / (m - 1) - a.sum(axis=-1)
    return np.minimum(total, 2.0 - a[:, 0] - a[:, 1])


def v_margins(a) -> np.ndarray:
    """Margins of {prod(1 + a_i)^(1/2) <= mu_m, a_i + a_j <= 2}."""
    a = _sorted_batch(a)
    m = a.shape[-1]
    if m == 1:
        return np.full(a.shape[0], np.inf)
    slope = np.sqrt(np.prod(1.0 + a, axis=-1))
    return np.minimum(mu_m(m) - slope, 2.0 - a[:, 0] - a[:, 1])


def slope_sqrt3_margins(a) -> np.ndarray:
    a = _sorted_batch(a)
    return math.sqrt(3.0) - np.sqrt(np.prod(1.0 + a, axis=-1))


# ---------------------------------------------------------------------------
# verdict operations


def in_M(lam, closed: bool = True, tol: float = BOUNDARY_TOL) -> RegionVerdict:
    """Membership of a singular value vector in the stability region.

    With ``closed=False`` both inequalities are strict: a vector with zero
    margin is not a member of the open region.
    """
    lam = as_spectrum(lam)
    margin = float(m_margins(lam)[0])
    if closed:
        return _verdict(margin, tol)
    member = bool(margin > tol) or lam.size == 1
    return RegionVerdict(member=member, on_boundary=False, margin=margin)


def in_N_closure(a, tol: float = BOUNDARY_TOL) -> RegionVerdict:
    a = as_spectrum(a)
    return _verdict(float(n_margins(a)[0]), tol)


def on_N_boundary(a, tol: float = BOUNDARY_TOL) -> bool:
    verdict = in_N_closure(a, tol)
    if not verdict.member:
        raise ValueError(f"{as_spectrum(a).tolist()} is not in the closed region")
    return verdict.on_boundary


def in_N_via_G(a, tol: float = BOUNDARY_TOL) -> bool:
    """Membership through the G reformulation, valid when a_1 > 1 > a_2."""
    a = as_spectrum(a)
    m = a.size
    if m < 2 or not (a[0] > 1.0 and np.all(a[1:] < 1.0)):
        raise ValueError("reformulation needs a_1 > 1 and a_i < 1 for i >= 2")
    value = 1.0 / (1.0 - a[0]) + g_function(a[1:])
    return bool(a[0] * a[1] <= 1.0 + tol and value <= m - 1 + tol)


def in_C_m(a, tol: float = BOUNDARY_TOL) -> RegionVerdict:
    """Membership in the polyhedron of :func:`c_margins`.

    The polyhedron lies inside the closed N region only for m <= 3. For m >= 4
    it is not contained: ``(67/50, 33/50, 33/50, 1/150)`` is a member whose
    product-sum is -1/27 + O(1e-4). Callers relying on ``C_m`` as a subset of
    N-bar must keep m <= 3 (grid maps from a surface always have m <= 2).
    """
    a = as_spectrum(a)
    return _verdict(float(c_margins(a)[0]), tol)


def in_V_m(a, tol: float = BOUNDARY_TOL) -> RegionVerdict:
    """Membership in the slope-bounded region; m = 2 is flagged out of scope."""
    a = as_spectrum(a)
    return _verdict(float(v_margins(a)[0]), tol, out_of_scope=a.size == 2)


def squared_equivalence(lam, tol: float = BOUNDARY_TOL) -> bool:
    lam = as_spectrum(lam)
    return in_N_closure(lam**2, tol).member == in_M(lam, True, tol).member


# ---------------------------------------------------------------------------
# named region predicates used by field and homotopy checks


@dataclass(frozen=True)
class Region:
    """A symmetric region of squared singular value vectors."""

    name: str
    margins: Callable[[np.ndarray], np.ndarray]
    out_of_scope: bool = False

    def contains(self, a, tol: float = BOUNDARY_TOL) -> np.ndarray:
        return self.margins(a) >= -tol

    def verdict(self, a, tol: float = BOUNDARY_TOL) -> RegionVerdict:
        a = as_spectrum(a)
        return _verdict(float(self.margins(a)[0]), tol, self.out_of_scope)


def _m_from_squared(a):
    return m_margins(np.sqrt(np.maximum(np.asarray(a, dtype=float), 0.0)))


REGION_NAMES = ("N_bar", "M_bar", "C_m", "V_m", "slope_sqrt3")


def region_by_name(name: str, m: int = 2) -> Region:
    """Look up a region predicate; ``m`` only matters for the V_m scope flag."""
    key = name.replace("-", "_")
    if key in ("N", "N_bar"):
        return Region("N_bar", n_margins)
    if key in ("M", "M_bar"):
        return Region("M_bar", _m_from_squared)
    if key in ("C", "C_m"):
        return Region("C_m", c_margins)
    if key in ("V", "V_m"):
        return Region("V_m", v_margins, out_of_scope=m == 2)
    if key in ("slope_sqrt3", "sqrt3"):
        return Region("slope_sqrt3", slope_sqrt3_margins)
    raise ValueError(f"unknown region {name!r}; choose from {REGION_NAMES}")
