"""Equilibria of the rescaled flow: residual, Jacobian, Newton and branch continuation.

Equilibria solve  0 = Δv + λ f(v)  with  f(v) = v - v²/(2(1+v)).  Nonlinear
terms are evaluated on a grid twice as fine as the coefficient degree, which
keeps aliasing (and with it the loss of rotation equivariance) at rounding level
for the small fields met near bifurcation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DomainViolation, NoConvergence, SingularJacobian
from .sphere import (DELTA_MIN, QuadratureGrid, SpectralField, build_grid, index_lm,
                     laplacian_eigenvalues, transform)
from .symmetry import IsotropyDescriptor, isotropy_residual

MAX_NEWTON = 50
COND_LIMIT = 1e13


# --- nonlinearity ------------------------------------------------------------

def f(x):
    return x - 0.5 * x * x / (1.0 + x)


def f_prime(x):
    return 0.5 + 0.5 / (1.0 + x) ** 2


def F(x):
    """Antiderivative of f with F(0) = 0."""
    return 0.25 * x * x + 0.5 * x - 0.5 * np.log1p(x)


def lambda_ell(ell: int) -> int:
    return ell * (ell + 1)


# --- grid evaluation ---------------------------------------------------------

def nonlinear_grid(l_max: int) -> QuadratureGrid:
    return build_grid(2 * l_max)


def grid_values(v: SpectralField, delta: float = DELTA_MIN) -> np.ndarray:
    """Values of v on the nonlinear grid, checked against the floor 1 + v >= delta."""
    vals = transform(v.l_max, nonlinear_grid(v.l_max)).synth(v.coeffs)
    lo = vals.min()
    if not np.isfinite(lo) or 1.0 + lo < delta:
        raise DomainViolation(f"min(1+v) = {1.0 + lo:.6g} below floor {delta}")
    return vals


def project(values: np.ndarray, l_max: int) -> np.ndarray:
    return transform(l_max, nonlinear_grid(l_max)).anal(values)


def equilibrium_residual(lam: float, v: SpectralField) -> SpectralField:
    """Coefficients of Δv + λ f(v)."""
    vals = grid_values(v)
    r = laplacian_eigenvalues(v.l_max) * v.coeffs + lam * project(f(vals), v.l_max)
    return SpectralField(v.l_max, r)


@lru_cache(maxsize=8)
def _grid_basis(l_max: int) -> np.ndarray:
    T = transform(l_max, nonlinear_grid(l_max))
    # basis values (n_coeffs, n_theta * n_phi) from the separable factors
    B = T.leg[:, :, None] * T.trig[T.col][:, None, :]
    B = B.reshape(B.shape[0], -1)
    B.setflags(write=False)
    return B


def multiplication_matrix(weight: np.ndarray, l_max: int) -> np.ndarray:
    """Galerkin matrix M_ij = ∫ weight Y_i Y_j on the nonlinear grid."""
    B = _grid_basis(l_max)
    Bw = B * (weight * nonlinear_grid(l_max).weights).ravel()[None, :]
    M = Bw @ B.T
    return 0.5 * (M + M.T)


def jacobian(lam: float, v: SpectralField) -> np.ndarray:
    """Dense matrix of Δ + λ f′(v) in the coefficient basis."""
    vals = grid_values(v)
    J = lam * multiplication_matrix(f_prime(vals), v.l_max)
    J[np.diag_indices_from(J)] += laplacian_eigenvalues(v.l_max)
    return J


def compact_residual(lam: float, v: SpectralField) -> SpectralField:
    """G(λ, v) = v + (Δ - 1)^{-1}(v + λ f(v)), the compact-perturbation form."""
    vals = grid_values(v)
    rhs = v.coeffs + lam * project(f(vals), v.l_max)
    return SpectralField(v.l_max, v.coeffs + rhs / (laplacian_eigenvalues(v.l_max) - 1.0))


def compact_lambda_derivative(ell: int) -> float:
    """Signed factor c with D_λ L(λ) e = c e for e in V_ell; equals -1/(1+ℓ(ℓ+1))."""
    return 1.0 / (-lambda_ell(ell) - 1.0)


def transversality_value(ell: int) -> float:
    """Magnitude 1/(1+ℓ(ℓ+1)) of the transversality factor."""
    if ell < 0:
        raise ValueError("ell must be nonnegative")
    return 1.0 / (1.0 + lambda_ell(ell))


# --- Newton ------------------------------------------------------------------

@dataclass(frozen=True)
class Equilibrium:
    lam: float
    v: SpectralField
    group: IsotropyDescriptor | None
    residual_norm: float

    @property
    def l_max(self) -> int:
        return self.v.l_max


def _basis(K: IsotropyDescriptor | None, l_max: int) -> np.ndarray:
    if K is None:
        return np.eye((l_max + 1) ** 2)
    return K.fix_basis(l_max)


def _solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    if A.size == 0:
        return np.zeros(0)
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularJacobian(f"Jacobian condition number {cond:.3g}")
    return np.linalg.solve(A, b)


def newton_solve(lam: float, v0: SpectralField, K: IsotropyDescriptor | None = None,
                 tol: float = 1e-12, max_iter: int = MAX_NEWTON) -> Equilibrium:
    """Newton iteration for Δv + λf(v) = 0 restricted to Fix(K).

    Iterates are kept in Fix(K) by working in the coordinates of an
    orthonormal fix-space basis.  SingularJacobian near a bifurcation point
    means continuation should be used instead.
    """
    Q = _basis(K, v0.l_max)
    a = Q.T @ v0.coeffs
    for _ in range(max_iter + 1):
        v = SpectralField(v0.l_max, Q @ a)
        R = equilibrium_residual(lam, v)
        rn = R.norm()
        if rn <= tol:
            return Equilibrium(lam, v, K, rn)
        J = Q.T @ jacobian(lam, v) @ Q
        a = a - _solve(J, Q.T @ R.coeffs)
    raise NoConvergence(f"Newton did not reach {tol:g} in {max_iter} iterations (residual {rn:.3g})")


# --- continuation ------------------------------------------------------------

@dataclass
class Branch:
    group: IsotropyDescriptor
    ell: int
    points: list[tuple[float, float, SpectralField]] = field(default_factory=list)
    classification: str | None = None
    lambda_prime: float | None = None
    lambda_second: float | None = None
    failed_at: float | None = None

    @property
    def s(self) -> np.ndarray:
        return np.array([p[0] for p in self.points])

    @property
    def lam(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])

    def point(self, s: float) -> tuple[float, float, SpectralField]:
        i = int(np.argmin(np.abs(self.s - s)))
        return self.points[i]

    def fit(self, s_window: float = 0.1, degree: int = 2) -> tuple[float, float]:
        """(λ′(0), λ″(0)) from a polynomial least-squares fit of λ(s) on |s| ≤ s_window."""
        s, lam = self.s, self.lam
        sel = np.abs(s) <= s_window + 1e-12
        if sel.sum() <= degree:
            raise ValueError("not enough branch points in the fit window")
        p = np.polynomial.Polynomial.fit(s[sel], lam[sel], degree, domain=[-1, 1])
        c = p.convert().coef
        c = np.pad(c, (0, 3))
        self.lambda_prime, self.lambda_second = float(c[1]), float(2.0 * c[2])
        return self.lambda_prime, self.lambda_second

    def to_csv(self, path) -> None:
        l_max = self.points[0][2].l_max if self.points else 0
        ls, ms = index_lm(l_max)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "lambda"] + [f"coeff_{l}_{m}" for l, m in zip(ls, ms)])
            for s, lam, v in self.points:
                w.writerow([f"{s:.17g}", f"{lam:.17g}"] + [f"{c:.17g}" for c in v.coeffs])


def _augmented_newton(lam: float, a: np.ndarray, s: float, e_red: np.ndarray, Q: np.ndarray,
                      l_max: int, tol: float) -> tuple[float, np.ndarray, float]:
    for _ in range(MAX_NEWTON):
        v = SpectralField(l_max, Q @ a)
        vals = grid_values(v)
        R = laplacian_eigenvalues(l_max) * v.coeffs + lam * project(f(vals), l_max)
        g = e_red @ a - s
        rn = float(np.linalg.norm(R))
        if rn <= tol and abs(g) <= 1e-14:
            return lam, a, rn
        J = Q.T @ jacobian(lam, v) @ Q
        d = len(a)
        A = np.zeros((d + 1, d + 1))
        A[:d, :d] = J
        A[:d, d] = Q.T @ project(f(vals), l_max)
        A[d, :d] = e_red
        step = _solve(A, np.concatenate([Q.T @ R, [g]]))
        a = a - step[:d]
        lam = lam - step[d]
    raise NoConvergence(f"augmented Newton failed at s={s:g} (residual {rn:.3g})")


def continue_branch(K: IsotropyDescriptor | str, ell: int, s_max: float, ds: float,
                    l_max: int = 16, s_min: float = 0.0, tol: float = 1e-11) -> Branch:
    """Follow the K-branch bifurcating from (λ_ℓ, 0), parametrized by s = ⟨e_K, v⟩.

    Points run over [s_min, s_max] on a uniform grid of spacing ds through s = 0,
    where the point is (λ_ℓ, 0) exactly.  Each sweep away from zero uses a secant
    predictor.  On failure the branch keeps its last good point and records
    ``failed_at``.
    """
    if isinstance(K, str):
        K = IsotropyDescriptor.get(K, ell)
    e = K.generator(l_max) if K.ell == ell else IsotropyDescriptor.get(K.name, ell).generator(l_max)
    Q = K.fix_basis(l_max)
    e_red = Q.T @ e.coeffs
    lam0 = float(lambda_ell(ell))
    br = Branch(K, ell)
    sweeps = {}
    for sign, bound in ((1.0, s_max), (-1.0, s_min)):
        n = int(round(abs(bound) / ds))
        pts = []
        hist = [(0.0, lam0, np.zeros(Q.shape[1]))]
        for k in range(1, n + 1):
            s = sign * k * ds
            if len(hist) >= 2:
                (s1, l1, a1), (s2, l2, a2) = hist[-2], hist[-1]
                t = (s - s2) / (s2 - s1)
                lam_p, a_p = l2 + t * (l2 - l1), a2 + t * (a2 - a1)
            else:
                lam_p, a_p = lam0, s * e_red
            try:
                lam, a, _ = _augmented_newton(lam_p, a_p, s, e_red, Q, l_max, tol)
            except (NoConvergence, SingularJacobian, DomainViolation):
                br.failed_at = s
                break
            hist.append((s, lam, a))
            pts.append((s, lam, SpectralField(l_max, Q @ a)))
        sweeps[sign] = pts
    br.points = sweeps[-1.0][::-1] + [(0.0, lam0, SpectralField.zeros(l_max))] + sweeps[1.0]
    return br


def branch_equilibrium(K: IsotropyDescriptor | str, ell: int, s: float, l_max: int = 16,
                       ds: float = 0.02) -> Equilibrium:
    """Equilibrium at parameter s on the K-branch, reached by continuation."""
    if isinstance(K, str):
        K = IsotropyDescriptor.get(K, ell)
    n = max(1, int(math.ceil(abs(s) / ds)))
    step = abs(s) / n
    br = continue_branch(K, ell, s_max=max(s, 0.0), ds=step, l_max=l_max, s_min=min(s, 0.0))
    if br.failed_at is not None:
        raise NoConvergence(f"continuation stopped at s={br.failed_at:g}")
    s_, lam, v = br.point(s)
    r = equilibrium_residual(lam, v).norm()
    return Equilibrium(lam, v, K, r)


def check_equilibrium(eq: Equilibrium, iso_tol: float = 1e-10) -> dict:
    """Invariant report: residual, isotropy residual and min(1+v)."""
    vals = transform(eq.l_max, nonlinear_grid(eq.l_max)).synth(eq.v.coeffs)
    return {
        "residual": equilibrium_residual(eq.lam, eq.v).norm(),
        "isotropy_residual": isotropy_residual(eq.v, eq.group) if eq.group is not None else 0.0,
        "min_one_plus_v": float(1.0 + vals.min()),
    }
