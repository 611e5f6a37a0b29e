"""Wigner 3j symbols and triple-product integrals of real spherical harmonics."""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from itertools import product
from pathlib import Path

import numpy as np

from .sphere import SpectralField, analyze, build_grid, synthesize

L_GUARD = 64


def _triangle(l1: int, l2: int, l3: int) -> bool:
    return abs(l1 - l2) <= l3 <= l1 + l2


@lru_cache(maxsize=None)
def wigner3j_squared(l1: int, l2: int, l3: int, m1: int, m2: int, m3: int) -> tuple[int, Fraction]:
    """Exact (sign, square) of the 3j symbol from the Racah formula."""
    if max(l1, l2, l3) > L_GUARD:
        raise OverflowError(f"degree above {L_GUARD} is outside the supported range")
    if abs(m1) > l1 or abs(m2) > l2 or abs(m3) > l3:
        raise ValueError("|m| > l")
    if m1 + m2 + m3 != 0 or not _triangle(l1, l2, l3):
        return 0, Fraction(0)
    if m1 == m2 == m3 == 0 and (l1 + l2 + l3) % 2:
        return 0, Fraction(0)
    f = math.factorial
    delta = Fraction(f(l1 + l2 - l3) * f(l1 - l2 + l3) * f(-l1 + l2 + l3), f(l1 + l2 + l3 + 1))
    pref = f(l1 + m1) * f(l1 - m1) * f(l2 + m2) * f(l2 - m2) * f(l3 + m3) * f(l3 - m3)
    kmin = max(0, l2 - l3 - m1, l1 - l3 + m2)
    kmax = min(l1 + l2 - l3, l1 - m1, l2 + m2)
    total = Fraction(0)
    for k in range(kmin, kmax + 1):
        den = (f(k) * f(l3 - l2 + k + m1) * f(l3 - l1 + k - m2)
               * f(l1 + l2 - l3 - k) * f(l1 - k - m1) * f(l2 - k + m2))
        total += Fraction((-1) ** k, den)
    if total == 0:
        return 0, Fraction(0)
    sign = (-1) ** ((l1 - l2 - m3) % 2) * (1 if total > 0 else -1)
    return sign, delta * pref * total * total


def wigner3j(l1: int, l2: int, l3: int, m1: int, m2: int, m3: int) -> float:
    sign, sq = wigner3j_squared(l1, l2, l3, m1, m2, m3)
    if sign == 0:
        return 0.0
    return sign * _sqrt_fraction(sq)


def _sqrt_fraction(q: Fraction) -> float:
    # integer square roots keep full precision for huge numerators/denominators
    scale = 1 << 212
    return math.isqrt(q.numerator * scale * scale // q.denominator) / scale


def wigner3j_000_closed(l: int) -> Fraction:
    """(l l l; 0 0 0)^2 from the alternating binomial-cube sum."""
    s = sum((-1) ** k * math.comb(l, k) ** 3 for k in range(l + 1))
    return Fraction(math.factorial(l) ** 3, math.factorial(3 * l + 1)) * s * s


def complex_gaunt(l1: int, m1: int, l2: int, m2: int, l3: int, m3: int) -> float:
    """Integral of three complex (Condon-Shortley) spherical harmonics."""
    if m1 + m2 + m3 != 0:
        return 0.0
    a = wigner3j(l1, l2, l3, 0, 0, 0)
    if a == 0.0:
        return 0.0
    b = wigner3j(l1, l2, l3, m1, m2, m3)
    return math.sqrt((2 * l1 + 1) * (2 * l2 + 1) * (2 * l3 + 1) / (4 * math.pi)) * a * b


def real_to_complex_row(m: int) -> dict[int, complex]:
    """Coefficients of real Y_{lm} (package convention) in complex Y_{l,mu}."""
    r = 1.0 / math.sqrt(2.0)
    if m == 0:
        return {0: 1.0}
    mu = abs(m)
    s = (-1) ** mu
    if m > 0:
        return {mu: s * r, -mu: r}
    return {mu: s * r / 1j, -mu: -r / 1j}


def unitary_change_of_basis(l: int) -> np.ndarray:
    """U with real_Y = U @ complex_Y within degree l; rows/cols ordered m = -l..l."""
    U = np.zeros((2 * l + 1, 2 * l + 1), dtype=complex)
    for m in range(-l, l + 1):
        for mu, c in real_to_complex_row(m).items():
            U[m + l, mu + l] = c
    return U


@lru_cache(maxsize=None)
def _real_triple_sorted(key: tuple[tuple[int, int], ...]) -> float:
    (l1, m1), (l2, m2), (l3, m3) = key
    if not _triangle(l1, l2, l3) or (l1 + l2 + l3) % 2:
        return 0.0
    total = 0j
    rows = [real_to_complex_row(m) for m in (m1, m2, m3)]
    for (a, ca), (b, cb), (c, cc) in product(*(r.items() for r in rows)):
        if a + b + c:
            continue
        g = complex_gaunt(l1, a, l2, b, l3, c)
        if g:
            total += ca * cb * cc * g
    return float(total.real)


def real_triple_product(l1: int, m1: int, l2: int, m2: int, l3: int, m3: int) -> float:
    """Integral over S^2 of Y_{l1 m1} Y_{l2 m2} Y_{l3 m3} in the real basis."""
    for l, m in ((l1, m1), (l2, m2), (l3, m3)):
        if l < 0 or abs(m) > l:
            raise IndexError(f"invalid index ({l}, {m})")
    key = tuple(sorted(((l1, m1), (l2, m2), (l3, m3))))
    return _real_triple_sorted(key)


def axisym_triple_closed_form(l: int) -> float:
    """Integral of Y_{l0}^3 via the factorial / binomial closed form."""
    if l < 0:
        raise ValueError("l must be nonnegative")
    return math.sqrt((2 * l + 1) ** 3 / (4 * math.pi)) * float(wigner3j_000_closed(l))


def expand_pointwise_square(e: SpectralField, l_max: int | None = None) -> SpectralField:
    """Spectral coefficients of e^2 by grid squaring and analysis.

    The output degree defaults to twice the highest degree carried by ``e``,
    which represents e^2 exactly.
    """
    l_e = _effective_degree(e)
    if l_max is None:
        l_max = max(e.l_max, 2 * l_e)
    if l_max < 2 * l_e:
        from .errors import ResolutionError
        raise ResolutionError(f"l_max={l_max} cannot represent the square of a degree-{l_e} field")
    g = build_grid(l_max)
    f = synthesize(e.truncate(l_max), g)
    f2 = type(f)(f.values ** 2, g)
    return analyze(f2, l_max)


def _effective_degree(u: SpectralField, tol: float = 0.0) -> int:
    nz = np.nonzero(np.abs(u.coeffs) > tol)[0]
    if nz.size == 0:
        return 0
    return int(math.isqrt(int(nz[-1])))


class TripleProductTable:
    """All nonzero real triple products with l1, l2, l3 <= l_max, in canonical order."""

    def __init__(self, l_max: int, entries: dict[tuple[int, ...], float]):
        self.l_max = l_max
        self.entries = entries

    @classmethod
    def build(cls, l_max: int) -> "TripleProductTable":
        idx = [(l, m) for l in range(l_max + 1) for m in range(-l, l + 1)]
        entries = {}
        for i, a in enumerate(idx):
            for j in range(i, len(idx)):
                b = idx[j]
                for k in range(j, len(idx)):
                    c = idx[k]
                    v = _real_triple_sorted((a, b, c))
                    if v != 0.0:
                        entries[(*a, *b, *c)] = v
        return cls(l_max, entries)

    def value(self, l1, m1, l2, m2, l3, m3) -> float:
        key = sorted(((l1, m1), (l2, m2), (l3, m3)))
        return self.entries.get((*key[0], *key[1], *key[2]), 0.0)

    def save(self, path: str | Path) -> None:
        lines = [f"# l_max {self.l_max}"]
        for k, v in self.entries.items():
            lines.append(" ".join(str(x) for x in k) + " " + v.hex())
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "TripleProductTable":
        l_max, entries = 0, {}
        for line in Path(path).read_text().splitlines():
            if line.startswith("#"):
                l_max = int(line.split()[-1])
                continue
            *ints, val = line.split()
            v = float.fromhex(val) if val.startswith(("0x", "-0x")) else float(val)
            entries[tuple(int(x) for x in ints)] = v
        return cls(l_max, entries)
