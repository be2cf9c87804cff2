"""Volume of a geodesic homotopy and its first and second t-derivatives.

At each node the source is split by the singular directions a_i of df_t and
the target by b_alpha (b_i = df_t(a_i) / lambda_i, completed by Gram-Schmidt
of the target frame). With p_{i alpha} = <nabla_{a_i} V, b_alpha> the second
derivative of A(t) splits into five integrals (i)-(v). Indices run over all
m source directions; directions with lambda_i = 0 contribute exactly the
extra squares that keep the identity valid at rank-deficient nodes.

Term (iv) involves nabla_{a_i} nabla_V V. Since [V, df(a_i)] = 0 it is
evaluated as nabla_V (nabla_{a_i} V) + R(df(a_i), V) V, differencing the
discrete covariant derivative in t; for a geodesic homotopy it vanishes up to
the O(h^2 + dt^2) consistency error of the spatial stencils.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from mgl import grid, regions, tables
from mgl.homotopy import HomotopyTrace

TERM_NAMES = ("term_i", "term_ii", "term_iii", "term_iv", "term_v")


def covariant_derivative_field(trace: HomotopyTrace, k: int) -> np.ndarray:
    """nabla_x V and nabla_y V at sample ``k`` as ambient vectors, shape (ny, nx, 2, D)."""
    return grid.covariant_axis_derivatives(trace.map_at(k), trace.velocity[k])


def singular_frames(jac, rank_tol: float = grid.RANK_TOL):
    """Singular data of Jacobians (..., n, 2) in a fixed convention.

    Returns ``lam`` (..., 2) descending, ``a`` (..., 2, 2) with the source
    directions as columns (numpy SVD order and signs) and ``b`` (..., n, n)
    with columns b_i = J a_i / lambda_i for lambda_i > rank_tol * max(1, lambda_1),
    completed by Gram-Schmidt of the standard target frame in order.
    """
    jac = np.asarray(jac, dtype=float)
    if jac.ndim == 2:
        lam, a, b = singular_frames(jac[None], rank_tol)
        return lam[0], a[0], b[0]
    n = jac.shape[-2]
    _, sv, vt = np.linalg.svd(jac)
    a = np.swapaxes(vt, -1, -2)
    lam = np.zeros(jac.shape[:-2] + (2,))
    lam[..., : sv.shape[-1]] = sv
    lead = jac.shape[:-2]
    b = np.zeros(lead + (n, n))
    count = np.zeros(lead, dtype=int)
    images = jac @ a  # (..., n, 2)
    cutoff = rank_tol * np.maximum(1.0, lam[..., 0])
    cands = []
    for i in range(min(2, n)):
        ok = lam[..., i] > cutoff
        safe = np.where(ok, lam[..., i], 1.0)[..., None]
        cands.append((images[..., i] / safe, ok))
    for alpha in range(n):
        e = np.zeros(lead + (n,))
        e[..., alpha] = 1.0
        cands.append((e, np.ones(lead, dtype=bool)))
    cols = np.arange(n)
    for vec, ok in cands:
        filled = (cols < count[..., None])[..., None, :]  # (..., 1, n)
        coef = np.sum(b * vec[..., :, None], axis=-2)  # <b_col, vec>
        w = vec - np.sum(b * (coef[..., None, :] * filled), axis=-1)
        norm = np.linalg.norm(w, axis=-1)
        take = ok & (count < n) & (norm > 1e-8)
        idx = np.nonzero(take)
        slot = count[idx]
        b[idx + (slice(None), slot)] = w[idx] / norm[idx][..., None]
        count[idx] += 1
    return lam, a, b


@dataclass
class PMatrix:
    """p_{i alpha} per node, shape (ny, nx, m, n), plus the frames used."""

    p: np.ndarray
    lam: np.ndarray
    a: np.ndarray
    b: np.ndarray


def _frame_derivs(trace: HomotopyTrace, k: int) -> np.ndarray:
    # frame coordinates of nabla_x V, nabla_y V: (ny, nx, 2, n)
    dv = covariant_derivative_field(trace, k)
    vals = trace.values[k]
    return trace.target.frame_coords(vals[..., None, :], dv)


def p_matrix(trace: HomotopyTrace, k: int) -> PMatrix:
    lam, a, b = singular_frames(trace.jacobians[k])
    dvf = _frame_derivs(trace, k)
    d = np.swapaxes(a, -1, -2) @ dvf  # rows: nabla_{a_i} V in frame coords
    p = d @ b
    p[~trace.domain.active] = 0.0
    return PMatrix(p, lam, a, b)


def _fd_weights(ts: np.ndarray, t0: float) -> np.ndarray:
    """First-derivative weights at t0 from the given sample points (Lagrange)."""
    n = len(ts)
    vander = np.vander(ts - t0, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[1] = 1.0
    return np.linalg.solve(vander, rhs)


def _stencil(n_t: int, k: int) -> list[int]:
    if k == 0:
        return [0, 1, 2]
    if k == n_t - 1:
        return [n_t - 3, n_t - 2, n_t - 1]
    return [k - 1, k, k + 1]


@dataclass
class NodeTerms:
    """Per-node integrands (before quadrature) and density at one t-sample."""

    integrands: dict
    density: np.ndarray
    first: np.ndarray


def node_terms(trace: HomotopyTrace, k: int) -> NodeTerms:
    if len(trace) < 3:
        raise ValueError("need at least three t-samples")
    target = trace.target
    pm = p_matrix(trace, k)
    lam, a, p = pm.lam, pm.a, pm.p
    m = 2
    n = target.dim
    q = min(m, n)
    G = 1.0 + lam**2
    dens = np.sqrt(np.prod(G, axis=-1))

    sq = np.zeros(p.shape[:-2] + (m, m))
    sq[..., :, :q] = p[..., :, :q]
    diag = np.diagonal(sq, axis1=-2, axis2=-1)

    t_i = np.sum(diag**2 / G**2, axis=-1)
    t_ii = np.zeros_like(t_i)
    for i in range(m):
        for j in range(m):
            if i == j:
                continue
            t_i += lam[..., i] * lam[..., j] * diag[..., i] * diag[..., j] / (G[..., i] * G[..., j])
            if i < j:
                pij, pji = sq[..., i, j], sq[..., j, i]
                t_ii += (pij**2 + pji**2 - 2 * lam[..., i] * lam[..., j] * pij * pji) / (G[..., i] * G[..., j])
    t_iii = np.sum(np.sum(p[..., :, m:] ** 2, axis=-1) / G, axis=-1)

    # nabla_V (nabla_{a_i} V) by transporting neighbouring t-samples along each geodesic
    idx = _stencil(len(trace), k)
    w = _fd_weights(trace.t_samples[idx], trace.t_samples[k])
    here = trace.values[k]
    ddt = np.zeros(here.shape[:-1] + (2, here.shape[-1]))
    for kk, wk in zip(idx, w):
        dv = covariant_derivative_field(trace, kk)
        if kk != k:
            src = trace.values[kk][..., None, :]
            dv = target.parallel_transport(np.broadcast_to(src, dv.shape), np.broadcast_to(here[..., None, :], dv.shape), dv)
        ddt += wk * dv
    amb = grid.ambient_jacobian(trace.map_at(k))  # (ny, nx, 2, D)
    a_t = np.swapaxes(a, -1, -2)
    x_i = a_t @ amb  # df(a_i), ambient rows
    dd_i = a_t @ ddt  # nabla_V nabla_{a_i} V
    vel = trace.velocity[k][..., None, :]
    curv = target.curvature_quadratic(here[..., None, :], x_i, np.broadcast_to(vel, x_i.shape))
    t_iv = np.sum((target.inner(dd_i, x_i) - curv) / G, axis=-1)
    t_v = np.sum(curv / G, axis=-1)

    first = np.sum(lam * diag / G, axis=-1)
    act = trace.domain.active
    out = {}
    for name, arr in zip(TERM_NAMES, (t_i, t_ii, t_iii, t_iv, t_v)):
        out[name] = np.where(act, arr, 0.0)
    return NodeTerms(out, np.where(act, dens, 0.0), np.where(act, first, 0.0))


def _integrate(weights, dens, integrand) -> float:
    return float(np.sum((weights * dens * integrand).ravel()))


@dataclass
class VariationReport:
    t: float
    term_i: float
    term_ii: float
    term_iii: float
    term_iv: float
    term_v: float
    total: float
    fd_total: float
    area: float
    first_derivative: float
    budget: float
    spectra_summary: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _fd_second(areas, ts, k, step: int = 1) -> float:
    if k - step < 0 or k + step >= len(ts):
        return float("nan")
    hm = ts[k] - ts[k - step]
    hp = ts[k + step] - ts[k]
    return float(2.0 * ((areas[k + step] - areas[k]) / hp - (areas[k] - areas[k - step]) / hm) / (hm + hp))


def area_values(trace: HomotopyTrace) -> np.ndarray:
    w = trace.domain.quadrature_weights()
    G = 1.0 + trace.spectra
    dens = np.sqrt(np.prod(G, axis=-1))
    act = trace.domain.active
    return np.array([float(np.sum((w * np.where(act, dens[k], 0.0)).ravel())) for k in range(len(trace))])


def spectra_summary(trace: HomotopyTrace, k: int) -> dict:
    act = trace.domain.active
    a = trace.spectra[k][act]
    lam = np.sqrt(a)
    n_m = regions.n_margins(a)
    m_m = regions.m_margins(lam)
    pair = 1.0 - lam[:, 0] * lam[:, 1]
    tol = regions.BOUNDARY_TOL
    return {
        "all_in_N_bar": bool(np.all(n_m >= -tol)),
        "all_in_M_bar": bool(np.all(m_m >= -tol)),
        "all_pairs_le_1": bool(np.all(pair >= -tol)),
        "min_N_margin": float(n_m.min()),
        "min_M_margin": float(m_m.min()),
    }


def second_variation_terms(trace: HomotopyTrace, t: float, areas: np.ndarray | None = None) -> VariationReport:
    k = trace.index_of(t)
    if areas is None:
        areas = area_values(trace)
    nt = node_terms(trace, k)
    w = trace.domain.quadrature_weights()
    vals = {name: _integrate(w, nt.density, nt.integrands[name]) for name in TERM_NAMES}
    total = sum(vals[name] for name in TERM_NAMES)
    ts = trace.t_samples
    fd = _fd_second(areas, ts, k)
    fd2 = _fd_second(areas, ts, k, step=2)
    budget = abs(vals["term_iv"]) + (abs(fd2 - fd) / 3.0 if np.isfinite(fd2) else float("nan"))
    return VariationReport(
        t=float(ts[k]),
        total=total,
        fd_total=fd,
        area=float(areas[k]),
        first_derivative=_integrate(w, nt.density, nt.first),
        budget=budget,
        spectra_summary=spectra_summary(trace, k),
        **vals,
    )


@dataclass
class AreaDerivatives:
    t: np.ndarray
    area: np.ndarray
    first: np.ndarray
    second: np.ndarray
    second_fd: np.ndarray
    reports: list = field(default_factory=list, repr=False)


def area_derivatives(trace: HomotopyTrace) -> AreaDerivatives:
    """A(t), analytic dA/dt and d2A/dt2, and centred differences of A, per sample."""
    if len(trace) < 5:
        raise ValueError("area_derivatives needs at least five t-samples")
    areas = area_values(trace)
    reports = [second_variation_terms(trace, t, areas) for t in trace.t_samples]
    return AreaDerivatives(
        t=np.array(trace.t_samples),
        area=areas,
        first=np.array([r.first_derivative for r in reports]),
        second=np.array([r.total for r in reports]),
        second_fd=np.array([r.fd_total for r in reports]),
        reports=reports,
    )


PASS, FAIL, UNMET = "pass", "fail", "hypothesis unmet"


def sign_report(report: VariationReport, tol: float | None = None) -> dict:
    """Sign conditions at one t, asserted only where their hypotheses hold."""
    if tol is None:
        tol = 1e-8 * max(abs(report.area), 1.0)
    s = report.spectra_summary

    def check(value, hypothesis):
        if not hypothesis:
            return {"status": UNMET, "value": value}
        return {"status": PASS if value >= -tol else FAIL, "value": value}

    return {
        "tol": tol,
        "term_i": check(report.term_i, s.get("all_in_M_bar", False)),
        "term_ii": check(report.term_ii, s.get("all_pairs_le_1", False)),
        "term_iii": check(report.term_iii, True),
        "total": check(report.total, s.get("all_in_N_bar", False)),
    }


# ---------------------------------------------------------------------------
# export

CSV_HEADER = ["t", "A", "dA", "d2A_analytic", "d2A_fd"] + list(TERM_NAMES)


def variation_rows(deriv: AreaDerivatives):
    rows = []
    for r in deriv.reports:
        rows.append([r.t, r.area, r.first_derivative, r.total, r.fd_total] + [getattr(r, n) for n in TERM_NAMES])
    return CSV_HEADER, rows


def export_variation_csv(deriv: AreaDerivatives, path):
    header, rows = variation_rows(deriv)
    return tables.write_csv(path, header, rows)


def export_variation_json(deriv: AreaDerivatives, path):
    payload = [dict(r.to_dict(), signs=sign_report(r)) for r in deriv.reports]
    text = json.dumps(payload, indent=2, sort_keys=True, allow_nan=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text + "\n")
    return path
