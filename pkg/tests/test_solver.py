"""Dirichlet solver: flat Picard/SOR, hyperbolic descent, uniqueness verdicts."""

import numpy as np
import pytest

from mgl import grid, regions, solver
from mgl.grid import GridDomain, GridMap
from mgl.manifolds import Euclidean, Hyperbolic
from mgl.solver import SolverOptions


def affine_values(domain, A, b):
    X, Y = domain.coordinates()
    return np.einsum("ij,jyx->yxi", A, np.stack([X, Y])) + b


def boundary_of(domain, values):
    out = np.array(values, dtype=float, copy=True)
    out[~domain.boundary] = np.nan
    return out


def geodesic_boundary(domain, H, s):
    o = H.origin()
    e1 = H.orthonormal_frame(o)[0]
    vals = H.exp_map(o[None, None], s[..., None] * e1, check=False)
    return boundary_of(domain, vals)


# --- options and boundary checks ---------------------------------------------


def test_options_defaults_and_validation():
    o = SolverOptions()
    assert (o.max_outer, o.inner_sweeps, o.sor_omega, o.tol_residual, o.damping) == (200, 50, 1.5, 1e-8, 1.0)
    for bad in (dict(tol_residual=0), dict(sor_omega=2.0), dict(damping=0.0), dict(damping=1.5)):
        with pytest.raises(ValueError):
            SolverOptions(**bad)


def test_incomplete_boundary_rejected():
    d = GridDomain.unit_square(7)
    b = solver.sine_boundary(d)
    b[0, 3] = np.nan
    with pytest.raises(ValueError):
        solver.harmonic_extension(d, Euclidean(1), b)


def test_worker_count(monkeypatch):
    monkeypatch.setenv("MGL_THREADS", "3")
    assert solver.worker_count() == 3
    monkeypatch.setenv("MGL_THREADS", "zero")
    assert solver.worker_count() == 1
    monkeypatch.delenv("MGL_THREADS")
    assert solver.worker_count() == 1


# --- harmonic extension ------------------------------------------------------


def test_harmonic_extension_affine_and_constant(rng):
    d = GridDomain(9, 7, 0.125, 1 / 6)
    A, b = rng.normal(size=(2, 2)), rng.normal(size=2)
    exact = affine_values(d, A, b)
    h = solver.harmonic_extension(d, Euclidean(2), boundary_of(d, exact))
    assert np.allclose(h.values, exact, atol=1e-12)
    c = solver.harmonic_extension(d, Euclidean(2), boundary_of(d, np.broadcast_to(b, exact.shape)))
    assert np.allclose(c.values, b, atol=1e-13)


def test_harmonic_extension_hyperbolic_is_geodesic_mean_fixed_point(rng):
    H = Hyperbolic(2)
    d = GridDomain.unit_square(9)
    X, Y = d.coordinates()
    b = boundary_of(d, H.lift(np.stack([np.sin(2 * X) * Y, X - Y**2], -1)))
    h = solver.harmonic_extension(d, H, b, tol=1e-12)
    v = h.values
    jj, ii = np.nonzero(d.interior)
    p = v[jj, ii]
    mean = sum(H.log_map(p, v[jj + dj, ii + di]) for dj, di in ((0, 1), (0, -1), (1, 0), (-1, 0)))
    assert np.abs(mean).max() < 1e-9
    assert np.array_equal(h.values[d.boundary], b[d.boundary])


def test_smooth_bump_and_perturbed_init():
    d = GridDomain.unit_square(11)
    bump = solver.smooth_bump(d, 2, seed=4)
    assert np.all(bump[~d.interior] == 0) and np.isclose(np.abs(bump).max(axis=(0, 1)), 1).all()
    assert np.array_equal(bump, solver.smooth_bump(d, 2, seed=4))
    b = solver.sine_boundary(d, 0.3, 2)
    init = solver.perturbed_init(d, Euclidean(2), b, seed=1)
    base = solver.harmonic_extension(d, Euclidean(2), b)
    gap = np.abs(init.values - base.values).max()
    assert 0 < gap <= 0.1 * solver.data_scale(d, Euclidean(2), b) + 1e-15
    assert np.array_equal(init.values[d.boundary], b[d.boundary])


# --- flat solver -------------------------------------------------------------


def test_affine_boundary_any_init(rng):
    d = GridDomain.unit_square(13)
    A, b = rng.normal(size=(2, 2)) * 0.5, rng.normal(size=2)
    exact = affine_values(d, A, b)
    bd = boundary_of(d, exact)
    init = solver.perturbed_init(d, Euclidean(2), bd, seed=7, amplitude=0.3)
    out = solver.solve(d, bd, init, SolverOptions(tol_residual=1e-11))
    assert out.converged and out.final_residual <= 1e-10
    assert np.abs(out.map.values - exact).max() <= 1e-10


def test_sine_boundary_codim_one():
    d = GridDomain.unit_square(33)
    b = solver.sine_boundary(d, 0.3, 1)
    out = solver.solve(d, b, target=Euclidean(1))
    assert out.converged and out.final_residual <= 1e-8
    assert grid.ms_residual(out.map)[d.interior].max() <= 1e-8
    assert np.array_equal(out.map.values[d.boundary], b[d.boundary])
    # discrete least-area property against the harmonic initializer
    init = solver.harmonic_extension(d, Euclidean(1), b)
    assert grid.graph_volume(out.map) <= grid.graph_volume(init) + 1e-10


def test_refinement_consistency():
    sols = {}
    for n in (17, 33, 65):
        d = GridDomain.unit_square(n)
        sols[n] = solver.solve(d, solver.sine_boundary(d, 0.3, 1), target=Euclidean(1)).map.values
    coarse = np.abs(sols[17] - sols[33][::2, ::2]).max()
    fine = np.abs(sols[33] - sols[65][::2, ::2]).max()
    assert fine < coarse and coarse / fine > 3.0


def test_non_convergence_is_reported():
    d = GridDomain.unit_square(17)
    out = solver.solve(d, solver.sine_boundary(d, 0.3, 1), target=Euclidean(1), opts=SolverOptions(max_outer=2))
    assert not out.converged and out.iterations == 2 and out.message


def test_outcome_serializes():
    d = GridDomain.unit_square(5)
    out = solver.solve(d, solver.sine_boundary(d, 0.1, 1), target=Euclidean(1))
    payload = out.to_dict()
    assert payload["converged"] and payload["map"]["grid"]["nx"] == 5
    assert len(payload["volume_history"]) >= 1


# --- hyperbolic solver -------------------------------------------------------


def test_hyperbolic_constant_boundary():
    H = Hyperbolic(3)
    d = GridDomain.unit_square(7)
    p = H.lift(np.array([0.2, 0.1, -0.3]))
    out = solver.solve(d, boundary_of(d, np.broadcast_to(p, (7, 7, 4))), target=H)
    assert out.converged and out.final_residual == 0.0
    assert np.allclose(out.map.values, p, atol=1e-12)


def test_hyperbolic_geodesic_boundary_stays_geodesic():
    H = Hyperbolic(3)
    d = GridDomain.unit_square(9)
    X, Y = d.coordinates()
    b = geodesic_boundary(d, H, 0.8 * X + 0.5 * Y * Y)
    init = solver.perturbed_init(d, H, b, seed=3, amplitude=0.05)
    out = solver.solve(d, b, init)
    assert out.converged and out.final_residual < 1e-8
    # the bump pushes off the geodesic; the minimizer returns to it
    assert np.abs(init.values[..., 2:]).max() > 1e-3
    assert np.abs(out.map.values[..., 2:]).max() < 1e-7
    hist = np.array(out.volume_history)
    assert np.all(np.diff(hist) <= 1e-12 * hist[0])
    assert np.array_equal(out.map.values[d.boundary], b[d.boundary])


def test_volume_gradient_matches_directional_fd(rng):
    H = Hyperbolic(2)
    d = GridDomain.unit_square(7)
    X, Y = d.coordinates()
    f = GridMap(d, H, H.lift(np.stack([np.sin(X + Y), X * Y], -1)))
    g = solver.volume_gradient(f)
    direction = rng.normal(size=g.shape)
    direction[~d.interior] = 0
    eps = 1e-6

    def vol(s):
        vals = H.exp_map(f.values, H.from_frame_coords(f.values, s * direction), check=False)
        return grid.graph_volume(f.with_values(vals))

    fd = (vol(eps) - vol(-eps)) / (2 * eps)
    assert np.sum(g * direction) == pytest.approx(fd, rel=1e-5)


def test_dirichlet_hessian_is_spd():
    d = GridDomain.unit_square(7)
    sub = solver.dirichlet_hessian(d).toarray()
    assert sub.shape == (d.interior.sum(),) * 2
    assert np.allclose(sub, sub.T)
    assert np.linalg.eigvalsh(sub).min() > 0


# --- uniqueness --------------------------------------------------------------


def test_uniqueness_affine_C2():
    d = GridDomain.unit_square(9)
    exact = affine_values(d, np.array([[0.6, 0.1], [0.0, 0.5]]), np.zeros(2))
    rep = solver.uniqueness_experiment(
        d, Euclidean(2), boundary_of(d, exact), regions.region_by_name("C_m", 2), SolverOptions(tol_residual=1e-10)
    )
    assert rep.conclusion == solver.UNIQUE and rep.in_region
    assert rep.max_pair_distance < 1e-9


def test_uniqueness_small_sine_slope_sqrt3():
    d = GridDomain.unit_square(17)
    rep = solver.uniqueness_experiment(
        d, Euclidean(2), solver.sine_boundary(d, 0.3, 2), regions.region_by_name("slope_sqrt3")
    )
    assert rep.conclusion == solver.UNIQUE and rep.max_pair_distance < 1e-6
    assert len(rep.runs) == 2 and rep.runs[1]["init"].startswith("perturbed")


def test_uniqueness_steep_boundary_is_silent():
    d = GridDomain.unit_square(9)
    exact = affine_values(d, 1.5 * np.eye(2), np.zeros(2))
    rep = solver.uniqueness_experiment(d, Euclidean(2), boundary_of(d, exact), regions.region_by_name("N_bar"))
    assert rep.conclusion == solver.SILENT and not rep.in_region


def test_uniqueness_nonconverged_is_inconclusive():
    d = GridDomain.unit_square(9)
    rep = solver.uniqueness_experiment(
        d, Euclidean(1), solver.sine_boundary(d, 0.3, 1), regions.region_by_name("N_bar"), SolverOptions(max_outer=1)
    )
    assert rep.conclusion == solver.INCONCLUSIVE


def test_uniqueness_threads_agree(monkeypatch):
    d = GridDomain.unit_square(9)
    b = solver.sine_boundary(d, 0.15, 2)
    region = regions.region_by_name("slope_sqrt3")
    monkeypatch.setenv("MGL_THREADS", "1")
    one = solver.uniqueness_experiment(d, Euclidean(2), b, region)
    monkeypatch.setenv("MGL_THREADS", "2")
    two = solver.uniqueness_experiment(d, Euclidean(2), b, region)
    assert one.to_dict() == two.to_dict()


def test_uniqueness_needs_two_inits():
    d = GridDomain.unit_square(5)
    with pytest.raises(ValueError):
        solver.uniqueness_experiment(
            d, Euclidean(1), solver.sine_boundary(d, 0.1), regions.region_by_name("N_bar"), n_inits=1
        )
