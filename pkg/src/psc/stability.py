"""Spectra of the linearized flows, Morse indices and the area stability index.

The semilinear linearization is L = Δ + λ f′(v); the quasilinear one is
A = (1+v)² L.  A is not symmetric in L², but A w = μ w is the symmetric
generalized problem L w = μ (1+v)^{-2} w, so its spectrum is computed with a
symmetric-definite solver and is real by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from .equilibrium import (Equilibrium, branch_equilibrium, grid_values, jacobian,
                          lambda_ell, multiplication_matrix)
from .errors import AmbiguousSpectrum, OnResonance
from .sphere import SpectralField
from .symmetry import IsotropyDescriptor

ZERO_TOL = 1e-6
S_DEFAULT = 0.2

# expected strong unstable dimensions: (ell, group, side) -> i
TABLE3 = [
    (1, "O2m", "sub", 2),
    (2, "O2xZ2c", "sub", 6),
    (2, "O2xZ2c", "super", 5),
    (3, "O2m", "sub", 12),
    (3, "Om", "sub", 10),
    (3, "D6d", "sub", 13),
    (4, "O2xZ2c", "sub", 20),
    (4, "O2xZ2c", "super", 20),
    (4, "OxZ2c", "sub", 21),
    (4, "OxZ2c", "super", 18),
]


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    zero_tol: float
    which: str

    @property
    def n_positive(self) -> int:
        return int(np.sum(self.eigenvalues > self.zero_tol))

    @property
    def n_zero(self) -> int:
        return int(np.sum(np.abs(self.eigenvalues) <= self.zero_tol))

    @property
    def n_negative(self) -> int:
        return int(np.sum(self.eigenvalues < -self.zero_tol))

    @property
    def counts(self) -> tuple[int, int, int]:
        return self.n_positive, self.n_zero, self.n_negative

    def ambiguous(self) -> np.ndarray:
        a = np.abs(self.eigenvalues)
        return self.eigenvalues[(a > self.zero_tol) & (a < 10 * self.zero_tol)]


def weight_matrix(v: SpectralField) -> np.ndarray:
    """Galerkin matrix of multiplication by (1+v)^{-2}."""
    vals = grid_values(v)
    return multiplication_matrix((1.0 + vals) ** -2, v.l_max)


def linearized_spectrum(lam: float, v: SpectralField, which: str = "quasilinear",
                        zero_tol: float = ZERO_TOL, return_vectors: bool = False):
    """Sorted (descending) spectrum of L or of A = (1+v)² L at (λ, v)."""
    L = jacobian(lam, v)
    if which == "semilinear":
        w, V = np.linalg.eigh(L)
    elif which == "quasilinear":
        w, V = eigh(L, weight_matrix(v))
    else:
        raise ValueError(f"unknown operator {which!r}")
    order = np.argsort(w)[::-1]
    rep = SpectrumReport(w[order], zero_tol, which)
    return (rep, V[:, order]) if return_vectors else rep


def morse_index(eq: Equilibrium, zero_tol: float = ZERO_TOL,
                which: str = "quasilinear") -> tuple[int, int]:
    """(number of positive eigenvalues, number of zero eigenvalues)."""
    rep = linearized_spectrum(eq.lam, eq.v, which, zero_tol)
    amb = rep.ambiguous()
    if amb.size:
        raise AmbiguousSpectrum(f"eigenvalues {amb} lie within (tol, 10 tol); increase |s|")
    return rep.n_positive, rep.n_zero


def morse_equivalence_check(lam: float, v: SpectralField, zero_tol: float = ZERO_TOL) -> bool:
    a = linearized_spectrum(lam, v, "semilinear", zero_tol)
    b = linearized_spectrum(lam, v, "quasilinear", zero_tol)
    return a.counts == b.counts


def homotopy_zero_counts(lam: float, v: SpectralField, taus=np.linspace(0.0, 1.0, 11),
                         zero_tol: float = ZERO_TOL) -> list[int]:
    """Zero counts of (1+τv)² L along τ in [0, 1]; constant by Sylvester's law of inertia."""
    L = jacobian(lam, v)
    out = []
    for t in taus:
        M = weight_matrix(v * float(t))
        out.append(int(np.sum(np.abs(eigh(L, M, eigvals_only=True)) <= zero_tol)))
    return out


def side_parameter(ell: int, K: str | IsotropyDescriptor, side: str, s: float = S_DEFAULT) -> float:
    """Signed s whose branch point lies on the requested side of λ_ℓ."""
    from .bifurcation import classify_branch
    name = K.name if isinstance(K, IsotropyDescriptor) else K
    rep = classify_branch(ell, name)
    if rep.type == "pitchfork":
        if rep.direction != side:
            raise ValueError(f"the ({name}, {ell}) pitchfork lies on the {rep.direction} side only")
        return s
    # transcritical: λ - λ_ℓ has the sign of λ′ s
    up = rep.lambda_prime > 0
    return s if (side == "super") == up else -s


def table3_row(ell: int, K: str, side: str, s: float = S_DEFAULT, l_max: int = 16,
               zero_tol: float = ZERO_TOL) -> dict:
    """Computed Morse data for one Table 3 row."""
    expected = next(i for (l, g, sd, i) in TABLE3 if (l, g, sd) == (ell, K, side))
    desc = IsotropyDescriptor.get(K, ell)
    sv = side_parameter(ell, K, side, s)
    eq = branch_equilibrium(desc, ell, sv, l_max=l_max)
    i, nz = morse_index(eq, zero_tol)
    return {"ell": ell, "group": K, "side": side, "s": sv, "lambda": eq.lam,
            "expected_i": expected, "computed_i": i, "n_zero": nz,
            "orbit_dim": desc.orbit_dim,
            "morse_equivalent": morse_equivalence_check(eq.lam, eq.v, zero_tol),
            "i_c": i - ell * ell}


def area_stability_index(lam: float, tol: float = 1e-12) -> int:
    """Number of positive eigenvalues of Δ + λ/2: Σ (2ℓ′+1) over ℓ′(ℓ′+1) < λ/2."""
    half = 0.5 * lam
    count, lp = 0, 0
    while lambda_ell(lp) <= half + tol:
        if abs(lambda_ell(lp) - half) <= tol:
            raise OnResonance(f"λ/2 = {half} is the eigenvalue of degree {lp}")
        count += 2 * lp + 1
        lp += 1
    return count


def area_index_paper_formula(ell: int) -> int:
    """Printed closed form 2ℓ(ℓ+1)+1, kept for comparison only."""
    return 2 * ell * (ell + 1) + 1
