"""Region algebra against independent oracles.

The product-sum expression is cross-checked through elementary symmetric
polynomials: prod(1 - a_i) + sum_i a_i prod_{j != i}(1 - a_j) equals
sum_k (-1)^k (1 - k) e_k(a), with e_k read off numpy.poly.
"""

import itertools
from fractions import Fraction
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mgl import regions
from mgl.regions import (
    in_C_m,
    in_M,
    in_N_closure,
    in_N_via_G,
    in_V_m,
    mu_m,
    on_N_boundary,
    slope_from_spectrum,
)


def product_sum_oracle(a):
    a = np.asarray(a, dtype=float)
    coeffs = np.poly(a)  # prod (z - a_i) = sum_k (-1)^k e_k z^{m-k}
    e = [(-1) ** k * coeffs[k] for k in range(a.size + 1)]
    return sum((-1) ** k * (1 - k) * e[k] for k in range(a.size + 1))


def n_oracle(a):
    pairs = max((a[i] * a[j] for i, j in itertools.combinations(range(len(a)), 2)), default=0.0)
    return min(1.0 - pairs, product_sum_oracle(a)) if len(a) > 1 else math.inf


def m_oracle(lam):
    lam = list(lam)
    if len(lam) < 2:
        return math.inf
    pair = 1.0 - max(x * y for x, y in itertools.combinations(lam, 2))
    sq = [x * x for x in lam]
    ps = 1.0
    for v in sq:
        ps *= 1.0 - v
    for i in range(len(sq)):
        term = sq[i]
        for j in range(len(sq)):
            if j != i:
                term *= 1.0 - sq[j]
        ps += term
    return min(pair, ps)


spectra = st.lists(st.floats(0.0, 3.0, allow_nan=False), min_size=2, max_size=6)


# --- worked examples ---------------------------------------------------------


@pytest.mark.parametrize(
    "lam, expected",
    [((0, 0, 0), 1.0), ((1, 1), 2.0), ((math.sqrt(2), 0), math.sqrt(3))],
)
def test_slope_examples(lam, expected):
    assert slope_from_spectrum(lam) == pytest.approx(expected, abs=1e-12)


def test_in_M_examples():
    assert in_M((0, 0), closed=False).member
    v = in_M((1, 1), closed=True)
    assert v.member and v.on_boundary
    assert not in_M((1, 1), closed=False).member
    assert not in_M((2, 1)).member


def test_in_N_closure_examples():
    v = in_N_closure((1, 1, 1))
    assert v.member and v.on_boundary
    v = in_N_closure((3, 1 / 3))
    assert v.member and v.on_boundary and abs(v.margin) < 1e-12
    v = in_N_closure((2, 0.4, 0))
    assert v.member and not v.on_boundary and v.margin == pytest.approx(0.2, abs=1e-12)
    v = in_N_closure((2, 0.6, 0))
    assert not v.member and v.margin == pytest.approx(-0.2, abs=1e-12)


def test_on_N_boundary():
    assert on_N_boundary((1, 1))
    assert not on_N_boundary((0, 0))
    assert on_N_boundary((3, 1 / 3))
    with pytest.raises(ValueError):
        on_N_boundary((2, 0.6, 0))


def test_g_function():
    assert regions.g_function((0, 0)) == 2
    assert regions.g_function((0.4, 0)) == pytest.approx(1 / 0.6 + 1)
    assert regions.g_function((0.5, 0.5, 0.5)) == pytest.approx(6)
    with pytest.raises(ValueError):
        regions.g_function((1.0, 0.2))


def test_in_N_via_G_examples():
    assert in_N_via_G((2, 0.4, 0))
    assert not in_N_via_G((2, 0.6, 0))
    assert in_N_via_G((3, 1 / 3))
    with pytest.raises(ValueError):
        in_N_via_G((0.5, 0.4))


def test_in_C_m_examples():
    assert in_C_m((1, 1)).member
    v = in_C_m((1, 1, 0.5))
    assert v.member and v.on_boundary
    assert not in_C_m((1.5, 0.6, 0.6)).member


def test_mu_m_examples():
    assert mu_m(2) == pytest.approx(math.sqrt(3), abs=1e-12)
    assert mu_m(3) == pytest.approx(math.sqrt(4.5), abs=1e-12)
    assert mu_m(10_000) < math.sqrt(6)
    assert math.sqrt(6) - mu_m(10_000) < 1e-3
    with pytest.raises(ValueError):
        mu_m(1)


def test_in_V_m_examples():
    assert in_V_m((0, 0, 0)).member
    v = in_V_m((1, 1, 0.125))
    assert v.member and v.on_boundary
    v = in_V_m((2, 0.5, 0))
    assert not v.member and v.margin == pytest.approx(-0.5)
    assert in_V_m((0.1, 0.1)).out_of_scope
    assert not in_V_m((0.1, 0.1, 0.1)).out_of_scope


def test_m_equals_one_convention():
    for fn in (in_N_closure, in_C_m, in_V_m):
        v = fn((5.0,))
        assert v.member and v.margin == math.inf
    assert in_M((7.0,), closed=False).member


def test_invalid_spectra():
    with pytest.raises(ValueError):
        in_N_closure((-0.1, 0.2))
    with pytest.raises(ValueError):
        in_N_closure(())
    with pytest.raises(ValueError):
        in_N_closure((np.nan, 0.2))


def test_region_by_name():
    assert regions.region_by_name("N").name == "N_bar"
    assert regions.region_by_name("V_m", m=2).out_of_scope
    assert not regions.region_by_name("V_m", m=3).out_of_scope
    with pytest.raises(ValueError):
        regions.region_by_name("Q")


# --- oracles -----------------------------------------------------------------


@given(spectra)
def test_product_sum_matches_symmetric_polynomials(a):
    assert regions.product_sum(np.array(a)) == pytest.approx(product_sum_oracle(a), abs=1e-9 * (1 + max(a)) ** len(a))


def test_two_dimensional_product_sum_is_one_minus_product(rng):
    a = rng.uniform(0, 3, size=(1000, 2))
    assert np.allclose(regions.product_sum(a), 1 - a[:, 0] * a[:, 1], atol=1e-13)


@given(spectra)
def test_n_margin_matches_oracle(a):
    got = float(regions.n_margins(np.array(a))[0])
    assert got == pytest.approx(n_oracle(a), abs=1e-9 * (1 + max(a)) ** len(a))


@given(spectra)
def test_m_margin_matches_loop_oracle(lam):
    got = float(regions.m_margins(np.array(lam))[0])
    want = m_oracle(lam)
    assert got == pytest.approx(want, abs=1e-9 * (1 + max(lam)) ** (2 * len(lam)))


@given(spectra, st.randoms(use_true_random=False))
def test_permutation_invariance(a, rnd):
    b = list(a)
    rnd.shuffle(b)
    for fn in (in_N_closure, in_C_m, in_V_m):
        assert fn(a).member == fn(b).member
        assert fn(a).margin == fn(b).margin


@given(spectra)
def test_squared_equivalence_outside_band(lam):
    margin = float(regions.m_margins(np.array(lam))[0])
    if abs(margin) > 1e-10:
        assert regions.squared_equivalence(lam)


def test_G_reformulation_agrees(rng):
    n = 0
    for m in (2, 3, 4, 5):
        a = np.empty((20_000, m))
        a[:, 0] = rng.uniform(1, 4, size=len(a))
        a[:, 1:] = rng.uniform(0, 1, size=(len(a), m - 1))
        margins = regions.n_margins(a)
        for row, margin in zip(a, margins):
            if abs(margin) < 1e-9:
                continue
            assert in_N_via_G(row) == (margin >= 0)
            n += 1
    assert n > 70_000


def test_C_m_is_convex_and_symmetric(rng):
    for m in (2, 3, 4):
        a = rng.uniform(0, 2, size=(20_000, m))
        inside = a[regions.c_margins(a) >= 0]
        pairs = inside[rng.integers(0, len(inside), size=(5000, 2))]
        mid = pairs.mean(axis=1)
        assert np.all(regions.c_margins(mid) >= -1e-12)
        assert np.all(regions.c_margins(inside[:, ::-1]) >= -1e-12)


def test_C_m_members_have_pair_products_at_most_one(rng):
    for m in (3, 4, 5):
        a = rng.uniform(0, 2, size=(50_000, m))
        inside = a[regions.c_margins(a) >= 0]
        s = -np.sort(-inside, axis=1)
        assert np.all(s[:, 0] * s[:, 1] <= 1 + 1e-12)


def _product_sum_exact(a):
    total = Fraction(0)
    for i in range(-1, len(a)):
        term = Fraction(1)
        for j, x in enumerate(a):
            term *= x if j == i else 1 - x
        total += term
    return total


@pytest.mark.parametrize(
    "a",
    [
        (Fraction(67, 50), Fraction(33, 50), Fraction(33, 50), Fraction(1, 150)),
        (Fraction(34, 25), Fraction(16, 25), Fraction(16, 25), Fraction(11, 100), Fraction(0)),
        (Fraction(8, 5), Fraction(2, 5), Fraction(2, 5), Fraction(2, 5), Fraction(0), Fraction(0)),
    ],
)
def test_C_m_leaves_N_bar_for_m_at_least_4(a):
    m = len(a)
    assert sum(a) <= 3 - Fraction(1, m - 1)
    assert all(x + y <= 2 for x, y in itertools.combinations(a, 2))
    exact = _product_sum_exact(a)
    assert exact < 0
    af = np.array([float(x) for x in a])
    assert in_C_m(af).member
    assert not in_N_closure(af).member
    assert regions.n_margins(af)[0] == pytest.approx(float(exact), rel=1e-9)


def test_C_3_inside_N_bar(rng):
    a = rng.uniform(0, 2, size=(200_000, 3))
    inside = a[regions.c_margins(a) >= 0]
    assert np.all(regions.n_margins(inside) >= -1e-12)


def test_slope_is_convex_on_M(rng):
    def slope(x):
        return np.sqrt(np.prod(1 + x**2))

    h = 1e-4
    checked = 0
    while checked < 1000:
        m = int(rng.integers(2, 5))
        x = rng.uniform(0, 1.2, size=m)
        if float(regions.m_margins(x)[0]) <= 1e-3:
            continue
        hess = np.empty((m, m))
        eye = np.eye(m) * h
        for i in range(m):
            for j in range(m):
                hess[i, j] = (
                    slope(x + eye[i] + eye[j]) - slope(x + eye[i] - eye[j])
                    - slope(x - eye[i] + eye[j]) + slope(x - eye[i] - eye[j])
                ) / (4 * h * h)
        assert np.linalg.eigvalsh(0.5 * (hess + hess.T)).min() >= -1e-6
        checked += 1
