"""Blow-up solutions of the radial scalar curvature equation and their metrics.

For the round sphere metric the radial equation reads

    2 r ∂_r u = u² Δu + u + (λ/2) u³,        λ = r² R - 2,

and every equilibrium v of the rescaled flow gives the self-similar solution
u = ((λ/2)(1/r - 1))^{-1/2} (1 + v).  With u = (2r)^{1/2} w the equation
becomes ∂_r w = w² Δw + (λ/2) w³, which is what :func:`simulate_original`
integrates.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .dynamics import TrajectoryRecord
from .equilibrium import lambda_ell, nonlinear_grid, project
from .errors import DomainViolation, StepFailure
from .sphere import (DELTA_MIN, GridField, SpectralField, build_grid, laplacian_eigenvalues,
                     synthesize, transform)
from .stability import area_stability_index
from .symmetry import IsotropyDescriptor

EPS_BLOW = 1e-6
QUAD_TOL = 1e-10


def _check_r(r: float) -> None:
    if not 0.0 < r < 1.0:
        raise DomainViolation(f"radius {r} outside (0, 1)")


def _profile(v: SpectralField) -> GridField:
    one_plus = synthesize(v, build_grid(v.l_max))
    if np.min(1.0 + one_plus.values) < DELTA_MIN:
        raise DomainViolation(f"1+v drops to {np.min(1.0 + one_plus.values):.3g}")
    return one_plus


def radial_factor(r, lam: float):
    """((λ/2)(1/r - 1))^{-1/2}."""
    r = np.asarray(r, dtype=float)
    return (0.5 * lam * (1.0 / r - 1.0)) ** -0.5


def reconstruct_u(v: SpectralField, lam: float, r: float) -> GridField:
    """u(r, ·) on the standard grid of v's degree for the self-similar solution of v."""
    _check_r(r)
    vals = _profile(v)
    return GridField(float(radial_factor(r, lam)) * (1.0 + vals.values), vals.grid)


def radial_residual(v: SpectralField, lam: float, r: float, h: float = 1e-5) -> float:
    """Max-norm residual of 2r u_r - u²Δu - u - (λ/2)u³ with u_r by central differences.

    Scaled by the size of the largest term so the check is relative.
    """
    _check_r(r)
    g = build_grid(v.l_max)
    T = transform(v.l_max, g)
    one = 1.0 + T.synth(v.coeffs)
    lap = T.synth(laplacian_eigenvalues(v.l_max) * v.coeffs)
    a = float(radial_factor(r, lam))
    ur = (float(radial_factor(r + h, lam)) - float(radial_factor(r - h, lam))) / (2 * h) * one
    u = a * one
    rhs = u * u * (a * lap) + u + 0.5 * lam * u ** 3
    res = 2 * r * ur - rhs
    return float(np.max(np.abs(res)) / np.max(np.abs(rhs)))


def trivial_u(r):
    r = np.asarray(r, dtype=float)
    return (1.0 / r - 1.0) ** -0.5


def trivial_residual(r) -> float:
    """Residual of u = (1/r - 1)^{-1/2} in 2r u_r = u³ + u (Δu = 0), exact derivative."""
    r = np.asarray(r, dtype=float)
    u = trivial_u(r)
    ur = 0.5 / (u * (1.0 - r) ** 2)  # d/dr of (r/(1-r))^{1/2}
    return float(np.max(np.abs(2 * r * ur - u ** 3 - u) / (u ** 3 + u)))


# --- geodesic coordinate and curvature ---------------------------------------

def _sigma(r: float) -> float:
    # ∫_0^r (1/x - 1)^{-1/2} dx with x = sin²θ: integrand 2 sin²θ is smooth up to r = 1
    th = math.asin(math.sqrt(r))
    val, _ = quad(lambda t: 2.0 * math.sin(t) ** 2, 0.0, th, epsabs=QUAD_TOL, epsrel=QUAD_TOL)
    return val


def geodesic_coordinate(r0: float, r: float, lam: float = 2.0) -> float:
    """s = (λ/2)^{1/2} ∫_{r0}^{r} (1/x - 1)^{-1/2} dx, the radial distance for v = 0."""
    if not 0.0 <= r0 <= r <= 1.0:
        raise DomainViolation(f"need 0 <= r0 <= r <= 1, got {r0}, {r}")
    return math.sqrt(0.5 * lam) * (_sigma(r) - _sigma(r0))


def sigma_closed_form(r):
    """Closed form of ∫_0^r (1/x - 1)^{-1/2} dx, used as a quadrature oracle."""
    r = np.asarray(r, dtype=float)
    return np.arcsin(np.sqrt(r)) - np.sqrt(r * (1.0 - r))


def radius_of_s(s: float, lam: float = 2.0) -> float:
    """Inverse of geodesic_coordinate(0, ·, λ) by bracketing."""
    from scipy.optimize import brentq
    smax = geodesic_coordinate(0.0, 1.0, lam)
    if not 0.0 <= s <= smax:
        raise DomainViolation(f"s = {s} outside [0, {smax}]")
    if s == smax:
        return 1.0
    return brentq(lambda r: geodesic_coordinate(0.0, r, lam) - s, 0.0, 1.0, xtol=1e-15)


def mean_curvature_profile(v: SpectralField, lam: float, r: float) -> GridField:
    """H = H̄/(r u) with H̄ = 2 for the round sphere family."""
    u = reconstruct_u(v, lam, r)
    return GridField(2.0 / (r * u.values), u.grid)


def minimal_surface_exponent(v: SpectralField, lam: float,
                             gaps=np.geomspace(1e-8, 1e-4, 9)) -> float:
    """Fitted exponent q in max H ~ (1-r)^q as r → 1."""
    H = [np.max(mean_curvature_profile(v, lam, 1.0 - d).values) for d in gaps]
    return float(np.polyfit(np.log(gaps), np.log(H), 1)[0])


def center_cusp_check(lam: float = 2.0, radii=np.geomspace(1e-9, 1e-6, 7)) -> float:
    """Exponent p in r(s)² ~ s^p at the center of the trivial profile."""
    s = np.array([geodesic_coordinate(0.0, r, lam) for r in radii])
    return float(np.polyfit(np.log(s), np.log(radii ** 2), 1)[0])


def center_cusp_coefficient(lam: float = 2.0, radii=np.geomspace(1e-9, 1e-6, 7)) -> float:
    """Limit of s / r^{3/2} at the center; (2/3)(λ/2)^{1/2}."""
    s = np.array([geodesic_coordinate(0.0, r, lam) for r in radii])
    return float(np.mean(s / radii ** 1.5))


def minimal_surface_index(lam: float) -> int:
    """Unstable count of Δ + λ/2, the stability operator of the boundary minimal surface."""
    return area_stability_index(lam)


def area_index_expected(ell: int) -> int:
    """Index for λ/2 in (λ_ℓ, λ_{ℓ+1}): all degrees up to ℓ, (ℓ+1)²."""
    return (ell + 1) ** 2


def global_existence_operator_nonpositive(lam: float) -> bool:
    """Whether T = Δ - (κ - r²R/2) = Δ + λ/2 is non-positive on the round sphere."""
    return lam <= 0.0


def admissible_across_center(K: IsotropyDescriptor) -> bool:
    """Whether -id lies in K, required to extend through r = 0 by the antipodal map."""
    if K.continuous:
        return K.name == "O2xZ2c" or K.name == "O3"
    return any(np.allclose(g.matrix(), -np.eye(3), atol=1e-12) for g in K.elements)


# --- metric profile ------------------------------------------------------------

@dataclass(frozen=True)
class MetricProfile:
    """Samples of g = g_rr dσ² + r² ω for a self-similar solution.

    σ = ∫(1/x - 1)^{-1/2} dx is the reference radial coordinate (the
    geodesic coordinate at λ = 2, v = 0); g_rr = (λ/2)(1 + v)².
    """
    lam: float
    r: np.ndarray          # (n_r,)
    s: np.ndarray          # (n_r,)
    theta: np.ndarray      # (n_theta,)
    phi: np.ndarray        # (n_phi,)
    u: np.ndarray          # (n_r, n_theta, n_phi)
    g_rr: np.ndarray       # (n_theta, n_phi)
    H: np.ndarray          # (n_r, n_theta, n_phi)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "r", "theta", "phi", "u", "g_rr", "H"])
            for k, (r, s) in enumerate(zip(self.r, self.s)):
                for i, th in enumerate(self.theta):
                    for j, ph in enumerate(self.phi):
                        w.writerow([f"{x:.17g}" for x in (s, r, th, ph, self.u[k, i, j],
                                                          self.g_rr[i, j], self.H[k, i, j])])


def metric_profile(v: SpectralField, lam: float, r_grid=None) -> MetricProfile:
    r_grid = np.linspace(0.05, 0.95, 10) if r_grid is None else np.asarray(r_grid, dtype=float)
    one = 1.0 + _profile(v).values
    g = build_grid(v.l_max)
    u = np.array([reconstruct_u(v, lam, float(r)).values for r in r_grid])
    H = 2.0 / (r_grid[:, None, None] * u)
    s = np.array([_sigma(float(r)) for r in r_grid])
    return MetricProfile(lam, r_grid, s, g.theta, g.phi, u, 0.5 * lam * one ** 2, H)


# --- original equation ------------------------------------------------------------

def simulate_original(w0: SpectralField, lam: float, r_start: float, r_end: float = 1.0,
                      dr0: float = 1e-3, eps: float = 1e-2, eps_blow: float = EPS_BLOW,
                      max_steps: int = 200000) -> TrajectoryRecord:
    """Integrate ∂_r w = w² Δw + (λ/2) w³ in r and detect blow-up.

    Strang splitting: the reaction w' = (λ/2)w³ is solved exactly pointwise,
    the diffusion w' = w²Δw semi-implicitly with a frozen constant
    coefficient.  The step is limited so that the reaction grows w by at most
    a factor ≈ 1 + eps per step.  When max w exceeds 1/eps_blow the blow-up
    radius is estimated from a linear fit of (max w)^{-2} against r over the
    final stretch, which is exact for the spatially constant solution.
    """
    if not 0.0 < r_start < r_end <= 1.0:
        raise DomainViolation(f"need 0 < r_start < r_end <= 1, got {r_start}, {r_end}")
    l_max = w0.l_max
    T = transform(l_max, nonlinear_grid(l_max))
    lap = laplacian_eigenvalues(l_max)
    c = w0.coeffs.copy()
    if np.min(T.synth(c)) <= 0:
        raise DomainViolation("w0 must be positive on the grid")
    rec = TrajectoryRecord(lam, "original")
    r, steps = r_start, 0
    wmax_hist = []

    def react(c, h):
        w = T.synth(c)
        den = 1.0 - lam * w * w * h
        if np.min(den) <= 0:
            raise StepFailure("reaction step crosses the singularity")
        return project(w / np.sqrt(den), l_max)

    def diffuse(c, h):
        w = T.synth(c)
        k = float(np.max(w)) ** 2
        expl = project(w * w * T.synth(lap * c), l_max) - k * lap * c
        return (c + h * expl) / (1.0 - h * k * lap)

    while True:
        w = T.synth(c)
        wmax = float(np.max(w))
        rec.times.append(r)
        rec.energies.append(float("nan"))
        rec.snap_times.append(r)
        rec.snapshots.append(SpectralField(l_max, c.copy()))
        wmax_hist.append(wmax)
        if wmax * eps_blow > 1.0:
            rb = _blowup_radius(np.array(rec.times), np.array(wmax_hist))
            rec.events.append({"t": r, "kind": "BlowUp", "r_blowup": rb})
            rec.diagnostics["r_blowup"] = rb
            break
        if r >= r_end - 1e-15:
            rec.events.append({"t": r, "kind": "MaxTimeReached"})
            break
        if steps >= max_steps:
            raise StepFailure(f"no blow-up or end after {max_steps} steps (r = {r})")
        if np.min(w) <= 0:
            raise StepFailure(f"w lost positivity at r = {r}")
        h = min(dr0, eps / max(0.5 * lam * wmax ** 2, 1e-300), r_end - r)
        c = react(diffuse(react(c, 0.5 * h), h), 0.5 * h)
        r += h
        steps += 1
    rec.diagnostics["w_max"] = wmax_hist
    return rec


def _blowup_radius(r: np.ndarray, wmax: np.ndarray, decades: float = 2.0) -> float:
    """Root of the linear fit of w_max^{-2} on the last ``decades`` of growth."""
    sel = wmax >= wmax[-1] * 10.0 ** -decades
    if sel.sum() < 3:
        sel = np.zeros_like(sel)
        sel[-3:] = True
    z = wmax[sel] ** -2.0
    slope, icpt = np.polyfit(r[sel], z, 1)
    return float(-icpt / slope)


def isotropic_datum(lam: float, r_start: float, l_max: int = 4) -> SpectralField:
    """w(r_start) of the constant self-similar solution, w = (λ(1-r))^{-1/2}."""
    w = (lam * (1.0 - r_start)) ** -0.5
    return SpectralField.basis(l_max, 0, 0, w * 2.0 * math.sqrt(math.pi))


def self_similar_datum(v: SpectralField, lam: float, r_start: float) -> SpectralField:
    """w(r_start) = (2r)^{-1/2} u(r_start) for the self-similar solution of v."""
    return SpectralField(v.l_max, ((lam * (1.0 - r_start)) ** -0.5) * (v.coeffs + SpectralField.basis(
        v.l_max, 0, 0, 2.0 * math.sqrt(math.pi)).coeffs))


def lambda_interval(ell: int) -> tuple[float, float]:
    """λ range (2λ_ℓ, 2λ_{ℓ+1}) on which the boundary index is (ℓ+1)²."""
    return 2.0 * lambda_ell(ell), 2.0 * lambda_ell(ell + 1)
