"""Real spherical harmonics on a Gauss-Legendre x uniform-azimuth grid.

Basis convention (used everywhere in the package)::

    Y_{l0}  = N_{l0} P_l(cos t)
    Y_{lm}  = sqrt(2) N_{lm} P_l^m(cos t) cos(m p)     m > 0
    Y_{l,-m} = sqrt(2) N_{lm} P_l^m(cos t) sin(m p)    m > 0

with N_{lm} = sqrt((2l+1)/(4 pi) (l-m)!/(l+m)!) and no Condon-Shortley phase.
The basis is orthonormal in L2(S^2).  Coefficients are stored in a flat
array at index l*l + l + m.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import mpmath
import numpy as np

from .errors import DomainViolation, ResolutionError

DELTA_MIN = 0.05  # floor for 1 + v in rational maps


def n_coeffs(l_max: int) -> int:
    return (l_max + 1) ** 2


def lm_index(l: int, m: int) -> int:
    if abs(m) > l:
        raise IndexError(f"|m| > l for (l, m) = ({l}, {m})")
    return l * l + l + m


def index_lm(l_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Degree and order arrays for the flat coefficient layout."""
    ls = np.concatenate([np.full(2 * l + 1, l) for l in range(l_max + 1)])
    ms = np.concatenate([np.arange(-l, l + 1) for l in range(l_max + 1)])
    return ls, ms


@dataclass(frozen=True, eq=False)
class SpectralField:
    l_max: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.shape != (n_coeffs(self.l_max),):
            raise ValueError(
                f"expected {n_coeffs(self.l_max)} coefficients for l_max={self.l_max}, got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite coefficient")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, l_max: int) -> "SpectralField":
        return cls(l_max, np.zeros(n_coeffs(l_max)))

    @classmethod
    def basis(cls, l_max: int, l: int, m: int, scale: float = 1.0) -> "SpectralField":
        c = np.zeros(n_coeffs(l_max))
        c[lm_index(l, m)] = scale
        return cls(l_max, c)

    def __getitem__(self, lm: tuple[int, int]) -> float:
        return float(self.coeffs[lm_index(*lm)])

    def __add__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.l_max, self.coeffs + _match(self, other))

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.l_max, self.coeffs - _match(self, other))

    def __mul__(self, a: float) -> "SpectralField":
        return SpectralField(self.l_max, a * self.coeffs)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.l_max, -self.coeffs)

    def dot(self, other: "SpectralField") -> float:
        """L2(S^2) inner product."""
        return float(self.coeffs @ _match(self, other))

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def degree_block(self, l: int) -> np.ndarray:
        return self.coeffs[l * l: (l + 1) ** 2]

    def truncate(self, l_max: int) -> "SpectralField":
        """Truncate or zero-pad to a different degree cutoff."""
        c = np.zeros(n_coeffs(l_max))
        k = min(n_coeffs(l_max), n_coeffs(self.l_max))
        c[:k] = self.coeffs[:k]
        return SpectralField(l_max, c)


def _match(a: SpectralField, b: SpectralField) -> np.ndarray:
    if a.l_max != b.l_max:
        raise ValueError(f"l_max mismatch: {a.l_max} vs {b.l_max}")
    return b.coeffs


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    n_theta: int
    n_phi: int
    theta: np.ndarray
    phi: np.ndarray
    weights: np.ndarray  # shape (n_theta, n_phi), area measure

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_theta, self.n_phi)

    @property
    def size(self) -> int:
        return self.n_theta * self.n_phi

    @property
    def max_degree(self) -> int:
        """Largest l_max satisfying the sizing rule for this grid."""
        return min(self.n_theta // 2, self.n_phi // 4) - 1

    def points(self) -> np.ndarray:
        """Unit vectors of the nodes, shape (n_theta, n_phi, 3)."""
        t, p = np.meshgrid(self.theta, self.phi, indexing="ij")
        return np.stack([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)], axis=-1)

    def integrate(self, values: np.ndarray) -> float:
        return float(np.sum(self.weights * values))


@dataclass(frozen=True, eq=False)
class GridField:
    values: np.ndarray
    grid: QuadratureGrid = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"grid field shape {v.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite grid value")
        object.__setattr__(self, "values", v)

    def integrate(self) -> float:
        return self.grid.integrate(self.values)


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1], polished in extended precision.

    numpy's leggauss weights carry ~1e-13 relative error at n ~ 66, which is
    visible in the transform round trip; one Newton pass per node at 30
    digits fixes that.
    """
    x0, _ = np.polynomial.legendre.leggauss(n)
    with mpmath.workdps(30):
        xs, ws = [], []
        for xi in x0:
            x = mpmath.mpf(float(xi))
            for _ in range(3):
                p, dp = _legendre_and_derivative(n, x)
                x -= p / dp
            _, dp = _legendre_and_derivative(n, x)
            xs.append(float(x))
            ws.append(float(2 / ((1 - x * x) * dp * dp)))
    return np.array(xs), np.array(ws)


def _legendre_and_derivative(n, x):
    p0, p1 = mpmath.mpf(1), x
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    if n == 0:
        return mpmath.mpf(1), mpmath.mpf(0)
    if n == 1:
        return x, mpmath.mpf(1)
    return p1, n * (x * p1 - p0) / (x * x - 1)


@lru_cache(maxsize=None)
def build_grid(l_max: int) -> QuadratureGrid:
    if l_max < 0:
        raise ValueError("l_max must be nonnegative")
    n_theta, n_phi = 2 * (l_max + 1), 4 * (l_max + 1)
    x, w = gauss_legendre(n_theta)
    # nodes ordered north to south
    x, w = x[::-1], w[::-1]
    theta = np.arccos(x)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    weights = np.outer(w, np.full(n_phi, 2.0 * np.pi / n_phi))
    for arr in (theta, phi, weights):
        arr.setflags(write=False)
    return QuadratureGrid(n_theta, n_phi, theta, phi, weights)


def legendre_table(l_max: int, x: np.ndarray) -> np.ndarray:
    """Normalized associated Legendre values N_lm P_l^m(x), no Condon-Shortley phase.

    Returns array of shape (l_max + 1, l_max + 1, len(x)) indexed [l, m, i];
    entries with m > l are zero.  Three-term recurrence in l at fixed m.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    P = np.zeros((l_max + 1, l_max + 1, x.size))
    pmm = np.full(x.size, np.sqrt(1.0 / (4.0 * np.pi)))
    for m in range(l_max + 1):
        if m > 0:
            pmm = pmm * s * np.sqrt((2.0 * m + 1.0) / (2.0 * m))
        P[m, m] = pmm
        if m + 1 <= l_max:
            P[m + 1, m] = np.sqrt(2.0 * m + 3.0) * x * pmm
        for l in range(m + 2, l_max + 1):
            a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            P[l, m] = a * (x * P[l - 1, m] - b * P[l - 2, m])
    return P


def real_ylm(l_max: int, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Real orthonormal harmonics at points (theta[k], phi[k]); shape (n_coeffs, npts)."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float)).ravel()
    phi = np.atleast_1d(np.asarray(phi, dtype=float)).ravel()
    P = legendre_table(l_max, np.cos(theta))
    Y = np.empty((n_coeffs(l_max), theta.size))
    r2 = np.sqrt(2.0)
    for l in range(l_max + 1):
        Y[lm_index(l, 0)] = P[l, 0]
        for m in range(1, l + 1):
            Y[lm_index(l, m)] = r2 * P[l, m] * np.cos(m * phi)
            Y[lm_index(l, -m)] = r2 * P[l, m] * np.sin(m * phi)
    return Y


def real_ylm_xyz(l_max: int, xyz: np.ndarray) -> np.ndarray:
    """Real harmonics at unit vectors xyz of shape (..., 3); returns (n_coeffs, npts)."""
    xyz = np.asarray(xyz, dtype=float).reshape(-1, 3)
    theta = np.arccos(np.clip(xyz[:, 2], -1.0, 1.0))
    phi = np.arctan2(xyz[:, 1], xyz[:, 0])
    return real_ylm(l_max, theta, phi)


@lru_cache(maxsize=64)
def _basis_on_grid(l_max: int, g: QuadratureGrid) -> np.ndarray:
    t, p = np.meshgrid(g.theta, g.phi, indexing="ij")
    Y = real_ylm(l_max, t.ravel(), p.ravel())
    Y.setflags(write=False)
    return Y


@lru_cache(maxsize=64)
def _weighted(l_max: int, g: QuadratureGrid) -> np.ndarray:
    YW = _basis_on_grid(l_max, g) * g.weights.ravel()[None, :]
    YW.setflags(write=False)
    return YW


def basis_matrix(l_max: int, g: QuadratureGrid) -> np.ndarray:
    """Synthesis matrix Y of shape (n_coeffs, grid.size); values = coeffs @ Y."""
    _check_resolution(l_max, g)
    return _basis_on_grid(l_max, g)


def weighted_basis(l_max: int, g: QuadratureGrid) -> np.ndarray:
    """Analysis matrix (Y * W); coeffs = weighted_basis @ values."""
    _check_resolution(l_max, g)
    return _weighted(l_max, g)


def _check_resolution(l_max: int, g: QuadratureGrid) -> None:
    if g.n_theta < 2 * (l_max + 1) or g.n_phi < 4 * (l_max + 1):
        raise ResolutionError(
            f"grid ({g.n_theta} x {g.n_phi}) too coarse for l_max={l_max}")


class Transform:
    """Separable dense transform pair for one (l_max, grid) combination.

    Synthesis runs a Legendre stage in theta and then a trigonometric stage
    in phi; analysis reverses the two stages with the quadrature weights.
    Both stages are plain matrix products.
    """

    def __init__(self, l_max: int, g: QuadratureGrid):
        _check_resolution(l_max, g)
        self.l_max, self.grid = l_max, g
        ls, ms = index_lm(l_max)
        P = legendre_table(l_max, np.cos(g.theta))
        self.leg = P[ls, np.abs(ms)]  # (n_coeffs, n_theta)
        self.col = ms + l_max  # trig row used by each coefficient
        trig = np.empty((2 * l_max + 1, g.n_phi))
        for m in range(-l_max, l_max + 1):
            if m == 0:
                trig[l_max] = 1.0
            elif m > 0:
                trig[m + l_max] = np.sqrt(2.0) * np.cos(m * g.phi)
            else:
                trig[m + l_max] = np.sqrt(2.0) * np.sin(-m * g.phi)
        self.trig = trig
        self.scatter = np.zeros((ls.size, 2 * l_max + 1))
        self.scatter[np.arange(ls.size), self.col] = 1.0
        dphi = 2.0 * np.pi / g.n_phi
        self.trig_w = trig.T * dphi  # (n_phi, 2L+1)
        self.leg_w = self.leg * (g.weights[:, 0] / dphi)[None, :]

    def synth(self, c: np.ndarray) -> np.ndarray:
        A = (self.leg * c[:, None]).T @ self.scatter  # (n_theta, 2L+1)
        return A @ self.trig

    def anal(self, values: np.ndarray) -> np.ndarray:
        B = values @ self.trig_w  # (n_theta, 2L+1)
        return np.einsum("ki,ik->k", self.leg_w, B[:, self.col])


@lru_cache(maxsize=64)
def transform(l_max: int, g: QuadratureGrid) -> Transform:
    return Transform(l_max, g)


def synthesize(u: SpectralField, g: QuadratureGrid) -> GridField:
    return GridField(transform(u.l_max, g).synth(u.coeffs), g)


def analyze(f: GridField, l_max: int) -> SpectralField:
    return SpectralField(l_max, transform(l_max, f.grid).anal(f.values))


def laplacian_eigenvalues(l_max: int) -> np.ndarray:
    """Diagonal of the Laplace-Beltrami operator in the coefficient layout: -l(l+1)."""
    ls, _ = index_lm(l_max)
    return -(ls * (ls + 1)).astype(float)


def laplacian_apply(u: SpectralField) -> SpectralField:
    return SpectralField(u.l_max, laplacian_eigenvalues(u.l_max) * u.coeffs)


def pointwise_map(f: GridField, fn: Callable[[np.ndarray], np.ndarray],
                  domain: Callable[[np.ndarray], np.ndarray] | None = None) -> GridField:
    """Apply fn pointwise.  ``domain`` returns a boolean mask of admissible values."""
    if domain is not None:
        ok = domain(f.values)
        if not np.all(ok):
            bad = f.values[~ok]
            raise DomainViolation(f"{bad.size} grid values outside the domain (e.g. {bad.flat[0]:.6g})")
    with np.errstate(divide="raise", invalid="raise"):
        try:
            out = fn(f.values)
        except FloatingPointError as exc:
            raise DomainViolation(str(exc)) from exc
    return GridField(np.broadcast_to(out, f.values.shape).copy(), f.grid)


def positive_floor(delta: float = DELTA_MIN) -> Callable[[np.ndarray], np.ndarray]:
    """Domain predicate 1 + x >= delta for the rational maps of v."""
    return lambda x: 1.0 + x >= delta
