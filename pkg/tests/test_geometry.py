import math

import numpy as np
import pytest

from psc.equilibrium import branch_equilibrium
from psc.errors import DomainViolation, OnResonance
from psc.geometry import (admissible_across_center, area_index_expected, center_cusp_check,
                          center_cusp_coefficient, geodesic_coordinate, isotropic_datum,
                          lambda_interval, mean_curvature_profile, metric_profile,
                          minimal_surface_exponent, minimal_surface_index, radial_residual,
                          radius_of_s, sigma_closed_form, simulate_original, trivial_residual)
from psc.sphere import SpectralField
from psc.symmetry import IsotropyDescriptor


def test_trivial_solution_residual():
    r = np.linspace(0.01, 0.99, 99)
    assert trivial_residual(r) < 1e-12


def test_self_similar_solution_of_an_equilibrium():
    eq = branch_equilibrium("O2m", 1, 0.3, l_max=12)
    for r in (0.2, 0.5, 0.8):
        assert radial_residual(eq.v, eq.lam, r) < 1e-8
    # a non-equilibrium profile leaves a visible residual
    assert radial_residual(eq.v * 1.5, eq.lam, 0.5) > 1e-3


def test_sigma_quadrature_matches_closed_form():
    for r in (1e-6, 0.1, 0.5, 0.9, 1.0):
        assert abs(geodesic_coordinate(0.0, r) - float(sigma_closed_form(r))) < 1e-12
    assert abs(geodesic_coordinate(0.0, 1.0) - math.pi / 2) < 1e-12
    assert abs(geodesic_coordinate(0.0, 0.5, lam=8.0) - 2 * geodesic_coordinate(0.0, 0.5)) < 1e-12
    s = geodesic_coordinate(0.0, 0.3)
    assert abs(radius_of_s(s) - 0.3) < 1e-12
    with pytest.raises(DomainViolation):
        geodesic_coordinate(0.5, 0.2)


def test_center_cusp():
    assert abs(center_cusp_check() - 4.0 / 3.0) < 1e-3
    assert abs(center_cusp_coefficient(2.0) - 2.0 / 3.0) < 1e-5
    assert abs(center_cusp_coefficient(8.0) - 4.0 / 3.0) < 1e-5


def test_minimal_surface_exponent():
    assert abs(minimal_surface_exponent(SpectralField.zeros(4), 2.0) - 0.5) < 0.025
    eq = branch_equilibrium("Om", 3, 0.1, l_max=12)
    assert abs(minimal_surface_exponent(eq.v, eq.lam) - 0.5) < 0.025
    H = mean_curvature_profile(SpectralField.zeros(4), 2.0, 1.0 - 1e-10)
    assert np.max(H.values) < 1e-4


def test_area_index_counts():
    for ell in range(0, 5):
        lo, hi = lambda_interval(ell)
        for lam in np.linspace(lo, hi, 9)[1:-1]:
            assert minimal_surface_index(lam) == area_index_expected(ell) == (ell + 1) ** 2
    with pytest.raises(OnResonance):
        minimal_surface_index(4.0)


def test_admissibility_across_center():
    assert admissible_across_center(IsotropyDescriptor.get("O2xZ2c"))
    assert admissible_across_center(IsotropyDescriptor.get("OxZ2c"))
    assert not admissible_across_center(IsotropyDescriptor.get("O2m"))
    assert not admissible_across_center(IsotropyDescriptor.get("Om"))


def test_isotropic_blowup_radius():
    rec = simulate_original(isotropic_datum(2.0, 0.5), 2.0, 0.5)
    assert rec.kind == "BlowUp"
    assert abs(rec.diagnostics["r_blowup"] - 1.0) < 1e-3


def test_subcritical_datum_reaches_end_without_blowup():
    rec = simulate_original(isotropic_datum(2.0, 0.5) * 0.5, 2.0, 0.5, r_end=0.6)
    assert rec.kind == "MaxTimeReached"


def test_metric_profile_csv(tmp_path):
    eq = branch_equilibrium("O2m", 1, 0.2, l_max=8)
    prof = metric_profile(eq.v, eq.lam, r_grid=[0.25, 0.5])
    assert prof.u.shape[0] == 2 and prof.g_rr.shape == prof.u.shape[1:]
    assert np.allclose(prof.H, 2.0 / (prof.r[:, None, None] * prof.u))
    prof.to_csv(tmp_path / "m.csv")
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0] == "s,r,theta,phi,u,g_rr,H"
    assert len(lines) == 1 + 2 * prof.theta.size * prof.phi.size
