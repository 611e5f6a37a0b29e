import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from psc.equilibrium import (F, compact_lambda_derivative, continue_branch, equilibrium_residual,
                             f, f_prime, jacobian, lambda_ell, newton_solve, transversality_value)
from psc.errors import DomainViolation, SingularJacobian
from psc.sphere import SpectralField, index_lm
from psc.symmetry import IsotropyDescriptor, act


def test_nonlinearity_derivatives():
    x = np.linspace(-0.8, 3.0, 41)
    h = 1e-6
    assert np.allclose((f(x + h) - f(x - h)) / (2 * h), f_prime(x), atol=1e-8)
    assert np.allclose((F(x + h) - F(x - h)) / (2 * h), f(x), atol=1e-8)
    assert F(0.0) == 0.0 and f(0.0) == 0.0 and f_prime(0.0) == 1.0


def test_trivial_and_constant_equilibria():
    v = SpectralField.zeros(6)
    assert equilibrium_residual(2.0, v).norm() == 0.0
    # constant c solves f(c) = 0 only at c = 0 or c = -2 (outside the domain)
    c = SpectralField.basis(4, 0, 0, 0.3)
    assert equilibrium_residual(1.0, c).norm() > 0.1


def test_domain_violation():
    with pytest.raises(DomainViolation):
        equilibrium_residual(1.0, SpectralField.basis(4, 0, 0, -4.0))


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(0)
    v = SpectralField(6, 0.05 * rng.standard_normal(49))
    d = SpectralField(6, rng.standard_normal(49))
    J = jacobian(3.0, v)
    h = 1e-6
    fd = (equilibrium_residual(3.0, v + d * h).coeffs - equilibrium_residual(3.0, v - d * h).coeffs) / (2 * h)
    assert np.max(np.abs(J @ d.coeffs - fd)) < 1e-8


def test_residual_equivariance():
    # content up to degree l_max/2: the nonlinear grid then resolves f(v) to rounding
    rng = np.random.default_rng(1)
    ls, _ = index_lm(8)
    v = SpectralField(8, 0.05 * rng.standard_normal(81) * (ls <= 4))
    g = Rotation.random(random_state=3).as_matrix()
    lhs = equilibrium_residual(4.0, act(g, v))
    rhs = act(g, equilibrium_residual(4.0, v))
    assert (lhs - rhs).norm() < 1e-10


def test_compact_form_derivatives():
    for ell in range(1, 5):
        assert compact_lambda_derivative(ell) == -1.0 / (1 + lambda_ell(ell))
        assert transversality_value(ell) > 0


def test_newton_singular_at_bifurcation():
    K = IsotropyDescriptor.get("O2m", 1)
    with pytest.raises(SingularJacobian):
        newton_solve(2.0, K.generator(8) * 1e-3, K)


def test_branch_point_is_equilibrium():
    K = IsotropyDescriptor.get("O2xZ2c", 2)
    br = continue_branch(K, 2, 0.2, 0.05, l_max=12, s_min=-0.2)
    assert br.failed_at is None
    for s, lam, v in br.points:
        assert equilibrium_residual(lam, v).norm() < 1e-10
        assert abs(v.dot(K.generator(12)) - s) < 1e-12
    # Newton at fixed λ reproduces the continuation point
    s, lam, v = br.point(0.2)
    eq = newton_solve(lam, v + K.generator(12) * 1e-4, K)
    assert (eq.v - v).norm() < 1e-9


def test_branch_csv(tmp_path):
    br = continue_branch("O2m", 1, 0.1, 0.05, l_max=8)
    br.to_csv(tmp_path / "b.csv")
    head = (tmp_path / "b.csv").read_text().splitlines()[0]
    assert head.startswith("s,lambda,coeff_0_0")


def test_lambda_ell():
    assert [lambda_ell(l) for l in range(5)] == [0, 2, 6, 12, 20]
    assert math.isclose(lambda_ell(3), 12)
