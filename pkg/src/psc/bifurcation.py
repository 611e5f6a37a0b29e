"""Bifurcation coefficients of the symmetry-breaking branches from their generators.

The slope follows from the second-order expansion of Δv + λ f(v) = 0 along
v = s e + O(s²), λ = λ_ℓ + λ′ s + O(s²).  Projecting on e gives
λ′ = ½ λ_ℓ ⟨e, e²⟩.  The tabulated slope convention omits the factor λ_ℓ and
is returned by :func:`lambda_prime`; the true slope of the branch λ(s) is
returned by :func:`branch_slope`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .coupling import expand_pointwise_square
from .equilibrium import lambda_ell
from .errors import DataError
from .sphere import index_lm
from .symmetry import BRANCH_PAIRS, IsotropyDescriptor, fix_generator

SQPI = math.sqrt(math.pi)
PI = math.pi
# reference entries: (group, ell) -> (kind, value)
TABLE2 = {
    ("O2m", 1): ("lambda_second", -3 / (5 * PI)),
    ("O2xZ2c", 2): ("lambda_prime", math.sqrt(5) / (14 * SQPI)),
    ("O2m", 3): ("lambda_second", -2954 / (715 * PI)),
    ("Om", 3): ("lambda_second", -1050 / (143 * PI)),
    ("D6d", 3): ("lambda_second", -665 / (286 * PI)),
    ("O2xZ2c", 4): ("lambda_prime", 243 / (2002 * SQPI)),
    ("OxZ2c", 4): ("lambda_prime", 9 * math.sqrt(21) / (286 * SQPI)),
}
ALPHA_REF = 287 / (1430 * PI)
BETA_REF = 812 / (143 * PI)
PITCHFORK_TOL = 1e-12


def _name(K) -> str:
    return K.name if isinstance(K, IsotropyDescriptor) else K


def square_coefficients(ell: int, K) -> np.ndarray:
    """Coefficients of e_K² up to degree 2ℓ."""
    e = fix_generator(_name(K), ell, 2 * ell)
    return expand_pointwise_square(e, 2 * ell).coeffs


def lambda_prime(ell: int, K) -> float:
    """½⟨e, e²⟩, the tabulated slope coefficient."""
    e = fix_generator(_name(K), ell, 2 * ell)
    val = 0.5 * float(e.coeffs @ square_coefficients(ell, K))
    return 0.0 if abs(val) < PITCHFORK_TOL else val


def branch_slope(ell: int, K) -> float:
    """dλ/ds at s = 0 for the branch Δv + λ f(v) = 0, i.e. λ_ℓ · ½⟨e, e²⟩."""
    return lambda_ell(ell) * lambda_prime(ell, K)


def lambda_double_prime(ell: int, K) -> float:
    """λ″(0) = λ_ℓ Σ_{ℓ′≠ℓ} λ_ℓ′ / (λ_ℓ - λ_ℓ′) |c_{ℓ′m′}|² with c the coefficients of e²."""
    if lambda_prime(ell, K) != 0.0:
        raise DataError(f"({_name(K)}, {ell}) is transcritical; λ″(0) is not the first nonvanishing derivative")
    c = square_coefficients(ell, K)
    ls, _ = index_lm(2 * ell)
    lam = lambda_ell(ell)
    lp = ls * (ls + 1.0)
    sel = ls != ell
    return float(lam * np.sum(lp[sel] / (lam - lp[sel]) * c[sel] ** 2))


@dataclass
class BifurcationReport:
    ell: int
    group: str
    type: str
    direction: str
    lambda_prime: float
    lambda_second: float | None
    branch_slope: float
    table_kind: str | None = None
    table_value: float | None = None
    deviation: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def classify_branch(ell: int, K) -> BifurcationReport:
    name = _name(K)
    lp = lambda_prime(ell, K)
    if lp != 0.0:
        kind, lpp = "transcritical", None
        # both sides carry a branch; "direction" is that of the s > 0 half
        direction = "super" if lp > 0 else "sub"
        got = lp
    else:
        lpp = lambda_double_prime(ell, K)
        if abs(lpp) < PITCHFORK_TOL:
            raise DataError(f"degenerate bifurcation for ({name}, {ell})")
        kind = "pitchfork"
        direction = "sub" if lpp < 0 else "super"
        got = lpp
    rep = BifurcationReport(ell, name, kind, direction, lp, lpp, lambda_ell(ell) * lp)
    if (name, ell) in TABLE2:
        tk, tv = TABLE2[(name, ell)]
        rep.table_kind, rep.table_value = tk, tv
        rep.deviation = abs(got - tv) / abs(tv)
    return rep


CUBIC_ROWS = {
    # rows as printed: 2(18α - β), 8(45α - 2β), 16(10α - β)
    "printed": np.array([[36.0, -2.0], [360.0, -16.0], [160.0, -16.0]]),
    # D6d and O⁻ rows divided by 8, the factor λ″ picks up when e is scaled by 2√2
    "rescaled": np.array([[36.0, -2.0], [45.0, -2.0], [20.0, -2.0]]),
}


def fit_cubic_equivariant(curvatures: dict[str, float] | None = None,
                          rows: str = "printed") -> tuple[float, float, float]:
    """Least-squares (α, β) from the three ℓ = 3 curvatures of O(2)⁻, D6d, O⁻.

    Returns (α, β, residual norm).  ``rows`` selects the coefficient rows,
    see CUBIC_ROWS.
    """
    if curvatures is None:
        curvatures = {k: lambda_double_prime(3, k) for k in ("O2m", "D6d", "Om")}
    A = CUBIC_ROWS[rows]
    b = np.array([curvatures["O2m"], curvatures["D6d"], curvatures["Om"]])
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    res = float(np.linalg.norm(A @ sol - b))
    return float(sol[0]), float(sol[1]), res


def all_reports() -> list[BifurcationReport]:
    return [classify_branch(ell, name) for name, ell in BRANCH_PAIRS]
