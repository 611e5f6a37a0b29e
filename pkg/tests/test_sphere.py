import math

import numpy as np
import pytest
from scipy.special import sph_harm_y

from psc.errors import DomainViolation, ResolutionError
from psc.sphere import (GridField, SpectralField, analyze, build_grid, gauss_legendre,
                        index_lm, laplacian_apply, laplacian_eigenvalues, lm_index, pointwise_map,
                        positive_floor, real_ylm, synthesize, transform)


def random_field(l_max, rng):
    return SpectralField(l_max, rng.standard_normal((l_max + 1) ** 2))


def test_layout():
    assert lm_index(0, 0) == 0
    assert lm_index(2, -2) == 4
    ls, ms = index_lm(3)
    assert ls.size == 16 and ms[lm_index(3, 1)] == 1
    with pytest.raises(IndexError):
        lm_index(1, 2)


def test_spectral_field_rejects_bad_input():
    with pytest.raises(ValueError):
        SpectralField(2, np.zeros(8))
    with pytest.raises(ValueError):
        SpectralField(1, np.array([0.0, np.nan, 0.0, 0.0]))


def test_gauss_legendre_integrates_polynomials():
    x, w = gauss_legendre(12)
    for k in range(0, 24):
        exact = 0.0 if k % 2 else 2.0 / (k + 1)
        assert abs(np.sum(w * x ** k) - exact) < 1e-14


def test_grid_area():
    g = build_grid(10)
    assert abs(g.weights.sum() - 4 * math.pi) < 1e-12


def test_real_basis_matches_scipy():
    # real Y_lm without Condon-Shortley phase against scipy's complex harmonics
    rng = np.random.default_rng(1)
    th, ph = rng.uniform(0, np.pi, 7), rng.uniform(0, 2 * np.pi, 7)
    Y = real_ylm(5, th, ph)
    for l in range(6):
        for m in range(-l, l + 1):
            ref = sph_harm_y(l, abs(m), th, ph)
            if m == 0:
                r = ref.real
            elif m > 0:
                r = math.sqrt(2) * (-1) ** m * ref.real
            else:
                r = math.sqrt(2) * (-1) ** m * ref.imag
            assert np.allclose(Y[lm_index(l, m)], r, atol=1e-13)


@pytest.mark.parametrize("l_max", [4, 16, 32])
def test_round_trip_and_parseval(l_max):
    rng = np.random.default_rng(l_max)
    u = random_field(l_max, rng)
    g = build_grid(l_max)
    f = synthesize(u, g)
    back = analyze(f, l_max)
    assert np.max(np.abs(back.coeffs - u.coeffs)) < 1e-12 * max(1.0, np.max(np.abs(u.coeffs)))
    assert abs(f.grid.integrate(f.values ** 2) - u.norm() ** 2) < 1e-12 * u.norm() ** 2


def test_resolution_guard():
    with pytest.raises(ResolutionError):
        transform(10, build_grid(4))


def test_laplacian_eigenvalues():
    u = SpectralField.basis(4, 3, -2)
    assert laplacian_apply(u)[(3, -2)] == -12.0
    assert laplacian_eigenvalues(2)[lm_index(2, 1)] == -6.0


def test_field_algebra():
    a = SpectralField.basis(2, 1, 0, 2.0)
    b = SpectralField.basis(2, 2, 1)
    assert (a + b).dot(a) == 4.0
    assert (a - a).norm() == 0.0
    assert (a * 0.5)[(1, 0)] == 1.0
    assert a.truncate(1).l_max == 1 and a.truncate(3)[(1, 0)] == 2.0


def test_pointwise_map_domain():
    g = build_grid(2)
    f = GridField(np.full(g.shape, -0.99), g)
    with pytest.raises(DomainViolation):
        pointwise_map(f, lambda x: 1 / (1 + x), positive_floor())
    ok = pointwise_map(GridField(np.zeros(g.shape), g), lambda x: 1 / (1 + x), positive_floor())
    assert np.all(ok.values == 1.0)
