"""Grid maps: Jacobians, spectra, metrics, volume, regions and map files."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from mgl import grid, regions
from mgl.grid import GridDomain, GridMap
from mgl.manifolds import Euclidean, Hyperbolic


def affine_map(domain, A, b):
    X, Y = domain.coordinates()
    vals = np.einsum("ij,jyx->yxi", A, np.stack([X, Y])) + b
    return GridMap(domain, Euclidean(len(b)), vals)


def field_map(domain, fn, dim):
    X, Y = domain.coordinates()
    return GridMap(domain, Euclidean(dim), np.stack(fn(X, Y), axis=-1))


# --- domain ------------------------------------------------------------------


def test_domain_validation():
    with pytest.raises(ValueError):
        GridDomain(2, 5, 0.1, 0.1)
    with pytest.raises(ValueError):
        GridDomain(5, 5, 0.0, 0.1)
    with pytest.raises(ValueError):
        GridDomain(5, 5, 0.1, 0.1, mask=np.ones((4, 5)))


def test_domain_partition_and_weights():
    d = GridDomain.unit_square(9)
    assert d.interior.sum() == 49 and d.boundary.sum() == 32
    assert d.quadrature_weights().sum() == pytest.approx(1.0, abs=1e-14)
    mask = np.ones((9, 9), bool)
    mask[:3, :3] = False
    dm = GridDomain(9, 9, 1 / 8, 1 / 8, mask)
    assert dm.quadrature_weights().sum() == pytest.approx(1.0 - 9 / 64, abs=1e-14)
    assert not np.any(dm.interior & ~dm.active)
    # every interior node has its eight neighbours active
    for j, i in zip(*np.nonzero(dm.interior)):
        assert dm.active[j - 1 : j + 2, i - 1 : i + 2].all()


def test_domain_dict_round_trip():
    mask = np.ones((5, 6), bool)
    mask[0, 0] = False
    d = GridDomain(6, 5, 0.2, 0.25, mask)
    assert GridDomain.from_dict(json.loads(json.dumps(d.to_dict()))).same_as(d)


def test_gridmap_rejects_bad_values():
    d = GridDomain.unit_square(5)
    with pytest.raises(ValueError):
        GridMap(d, Euclidean(2), np.zeros((5, 5, 3)))
    bad = np.zeros((5, 5, 3))
    with pytest.raises(ValueError):
        GridMap(d, Hyperbolic(2), bad)


def test_gridmap_values_are_immutable():
    d = GridDomain.unit_square(5)
    f = GridMap(d, Euclidean(1), np.zeros((5, 5, 1)))
    with pytest.raises(ValueError):
        f.values[0, 0, 0] = 1.0


# --- Jacobians and spectra ---------------------------------------------------


def test_constant_map_jacobian_zero():
    d = GridDomain.unit_square(7)
    H = Hyperbolic(3)
    p = H.lift(np.array([0.3, -0.2, 0.1]))
    f = GridMap(d, H, np.broadcast_to(p, (7, 7, 4)))
    assert np.abs(grid.jacobian_field(f)).max() < 1e-12
    assert np.array_equal(grid.singular_spectrum(f, (3, 3)), [0.0, 0.0]) or np.allclose(
        grid.singular_spectrum(f, (3, 3)), 0, atol=1e-12
    )


@given(st.integers(0, 10_000))
def test_affine_jacobian_exact(seed):
    rng = np.random.default_rng(seed)
    d = GridDomain(7, 6, 0.13, 0.21)
    A = rng.normal(size=(3, 2))
    f = affine_map(d, A, rng.normal(size=3))
    assert np.allclose(grid.jacobian_field(f), A, atol=1e-11)


def test_unit_speed_geodesic_column_norm():
    H = Hyperbolic(2)
    d = GridDomain.unit_square(17)
    X, Y = d.coordinates()
    o = H.origin()
    e1 = H.orthonormal_frame(o)[0]
    e2 = H.orthonormal_frame(o)[1]
    base = H.exp_map(o[None, None], (0.3 * Y)[..., None] * e2, check=False)
    # x -> exp along the transported e1 direction with unit speed
    dirs = H.parallel_transport(o[None, None], base, np.broadcast_to(e1, base.shape))
    vals = H.exp_map(base, X[..., None] * dirs, check=False)
    jac = grid.jacobian_field(GridMap(d, H, vals))
    assert np.abs(np.linalg.norm(jac[..., 0], axis=-1) - 1.0).max() < 1e-4


def test_jacobian_inactive_node():
    mask = np.ones((5, 5), bool)
    mask[0, 0] = False
    d = GridDomain(5, 5, 0.25, 0.25, mask)
    f = GridMap(d, Euclidean(1), np.zeros((5, 5, 1)))
    with pytest.raises(ValueError):
        grid.jacobian(f, (0, 0))


def test_second_order_convergence_of_jacobian():
    def err(n):
        d = GridDomain.unit_square(n)
        f = field_map(d, lambda X, Y: (np.sin(2 * X) * Y, np.exp(X - Y)), 2)
        X, Y = d.coordinates()
        exact = np.stack(
            [
                np.stack([2 * np.cos(2 * X) * Y, np.sin(2 * X)], -1),
                np.stack([np.exp(X - Y), -np.exp(X - Y)], -1),
            ],
            -2,
        )
        return np.abs(grid.jacobian_field(f) - exact).max()

    order = math.log2(err(17) / err(33))
    assert order > 1.8


def test_spectrum_examples():
    jac = np.array([[2.0, 0.0], [0.0, 1.0]])
    assert np.allclose(grid.spectra_from_jacobians(jac), [2, 1])
    assert np.allclose(grid.spectra_from_jacobians(np.zeros((3, 2))), [0, 0])
    assert np.allclose(grid.spectra_from_jacobians(np.array([[3.0, 4.0]])), [5, 0])
    assert grid.rank([2.0, 1e-9]) == 1
    assert grid.rank([1e-9, 0.0]) == 0
    assert grid.rank([1e3, 2e-6]) == 1
    assert grid.rank([0.0, 0.0]) == 0


def test_spectrum_matches_gram_eigen_oracle(rng):
    jac = rng.normal(size=(5000, 3, 2))
    sv = grid.spectra_from_jacobians(jac)
    ev = np.linalg.eigvalsh(np.swapaxes(jac, -1, -2) @ jac)[:, ::-1]
    assert np.allclose(sv, np.sqrt(np.clip(ev, 0, None)), atol=1e-10)


def test_spectrum_invariant_under_axis_swap(rng):
    d = GridDomain.unit_square(13)
    f = field_map(d, lambda X, Y: (np.sin(X + 2 * Y), X * Y, np.cos(X) * Y**2), 3)
    ft = GridMap(d, f.target, np.swapaxes(f.values, 0, 1))
    s = grid.spectrum_field(f)
    st_ = grid.spectrum_field(ft)
    assert np.allclose(np.swapaxes(st_, 0, 1), s, atol=1e-10)


# --- metric and volume -------------------------------------------------------


def test_induced_metric_examples():
    d = GridDomain.unit_square(5)
    f = affine_map(d, np.eye(2), np.zeros(2))
    g = grid.induced_metric(f, (2, 2))
    assert np.allclose(g, 2 * np.eye(2))
    assert np.linalg.det(g) == pytest.approx(4.0)
    z = affine_map(d, np.zeros((2, 2)), np.ones(2))
    assert np.allclose(grid.induced_metric(z, (1, 1)), np.eye(2))


def test_det_metric_equals_slope_squared(rng):
    H = Hyperbolic(3)
    d = GridDomain.unit_square(11)
    X, Y = d.coordinates()
    vals = H.lift(np.stack([np.sin(X + Y), X * Y, np.cos(2 * X) - Y], -1))
    jac = grid.jacobian_field(GridMap(d, H, vals))
    det = np.linalg.det(grid.metric_from_jacobians(jac))
    slope = regions.slope_values(grid.spectra_from_jacobians(jac))
    assert np.allclose(det, slope**2, rtol=1e-10)


def test_volume_examples():
    d = GridDomain.unit_square(9)
    assert grid.graph_volume(affine_map(d, np.zeros((2, 2)), np.ones(2))) == pytest.approx(1.0)
    c = 0.7
    f = field_map(d, lambda X, Y: ((X + Y) * c,), 1)
    assert grid.graph_volume(f) == pytest.approx(math.sqrt(1 + 2 * c * c), rel=1e-13)


def test_volume_second_order():
    fn = lambda X, Y: (np.sin(2 * X) * Y, X**2 - Y)  # noqa: E731

    def density(y, x):
        j = np.array([[2 * math.cos(2 * x) * y, math.sin(2 * x)], [2 * x, -1.0]])
        return math.sqrt(np.linalg.det(np.eye(2) + j.T @ j))

    exact, _ = integrate.dblquad(density, 0, 1, 0, 1, epsabs=1e-12, epsrel=1e-12)
    errs = [abs(grid.graph_volume(field_map(GridDomain.unit_square(n), fn, 2)) - exact) for n in (33, 65, 129)]
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    assert all(3.3 < r < 4.8 for r in ratios)


def test_volume_at_least_domain_area(rng):
    d = GridDomain.unit_square(9)
    vals = rng.normal(size=(9, 9, 2))
    assert grid.graph_volume(GridMap(d, Euclidean(2), vals)) >= 1.0


# --- regions -----------------------------------------------------------------


def test_region_field_examples():
    d = GridDomain.unit_square(9)
    const = affine_map(d, np.zeros((2, 2)), np.zeros(2))
    for name in regions.REGION_NAMES:
        assert grid.region_field(const, regions.region_by_name(name)).all_member
    iso = affine_map(d, np.eye(2), np.zeros(2))
    rf = grid.region_field(iso, regions.region_by_name("N_bar"), tol=1e-10)
    assert rf.all_member and rf.on_boundary[d.active].all()
    X, Y = d.coordinates()
    spike = np.where((np.abs(X - 0.5) < 1e-9) & (np.abs(Y - 0.5) < 1e-9), 2.0, 0.0)
    f = GridMap(d, Euclidean(2), np.stack([spike, 0 * spike], -1))
    rf = grid.region_field(f, regions.region_by_name("slope_sqrt3"))
    # central differences see the spike at its four neighbours
    assert not rf.all_member and not rf.member[4, 3] and not rf.member[3, 4] and rf.member[0, 0]


# --- minimal surface residual ------------------------------------------------


def test_affine_residual_zero(rng):
    d = GridDomain(9, 11, 0.1, 0.08)
    f = affine_map(d, rng.normal(size=(2, 2)), rng.normal(size=2))
    assert grid.ms_residual(f).max() <= 1e-10


def test_harmonic_residual_cubic_in_slope():
    d = GridDomain.unit_square(17)

    def res(c):
        return grid.ms_residual(field_map(d, lambda X, Y: (c * (X**2 - Y**2),), 1)).max()

    assert res(0.05) > 0
    assert res(0.1) / res(0.05) == pytest.approx(8.0, rel=0.05)


def test_ms_residual_rejects_curved_target():
    d = GridDomain.unit_square(5)
    H = Hyperbolic(2)
    f = GridMap(d, H, np.broadcast_to(H.origin(), (5, 5, 3)))
    with pytest.raises(ValueError):
        grid.ms_residual(f)


def test_divergence_operator_matches_laplacian_for_identity_coef(rng):
    d = GridDomain.unit_square(9)
    X, Y = d.coordinates()
    u = X**3 + X * Y**2
    coef = np.broadcast_to(np.eye(2), (9, 9, 2, 2))
    lap = grid.divergence_operator(d, coef, u)
    assert np.allclose(lap[d.interior], (6 * X + 2 * X)[d.interior], atol=1e-10)


# --- map files ---------------------------------------------------------------


def test_map_file_round_trip(tmp_path, rng):
    H = Hyperbolic(2, 0.5)
    mask = np.ones((6, 7), bool)
    mask[0, :2] = False
    d = GridDomain(7, 6, 0.1, 0.2, mask)
    vals = H.lift(rng.normal(size=(6, 7, 2)))
    f = GridMap(d, H, vals)
    path = tmp_path / "m.json"
    grid.save_map(f, path)
    g = grid.load_map(path)
    assert g.target == H and g.domain.same_as(d)
    assert np.array_equal(g.values[d.active], f.values[d.active])
    grid.save_map(f, tmp_path / "b.json", boundary_only=True)
    dom, tgt, bvals = grid.load_boundary(tmp_path / "b.json")
    assert np.isnan(bvals[d.interior]).all()
    assert np.array_equal(bvals[d.boundary], f.values[d.boundary])


def test_map_file_errors(tmp_path):
    d = {"grid": {"nx": 3, "ny": 3, "hx": 0.5, "hy": 0.5}, "target": {"kind": "euclidean", "dim": 1, "curvature": 0}}
    with pytest.raises(ValueError):
        grid.parse_map_dict({**d, "values": [[0.0]] * 8})
    with pytest.raises(ValueError):
        grid.parse_map_dict({**d, "values": [[0.0, 1.0]] * 9})
    path = tmp_path / "b.json"
    path.write_text(json.dumps({**d, "values": [None] * 9}))
    with pytest.raises(ValueError):
        grid.load_boundary(path)
