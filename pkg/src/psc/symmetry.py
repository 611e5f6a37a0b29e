"""O(3) action on real spherical-harmonic coefficients and isotropy subgroups.

The action is (g u)(x) = u(g^{-1} x).  A group element is stored as ZYZ Euler
angles of its rotation part plus an inversion flag: g = R or g = -R.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .coupling import unitary_change_of_basis
from .sphere import SpectralField, lm_index, n_coeffs


# --- rotations --------------------------------------------------------------

def rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_y(b: float) -> np.ndarray:
    c, s = math.cos(b), math.sin(b)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def euler_to_matrix(alpha: float, beta: float, gamma: float) -> np.ndarray:
    return rot_z(alpha) @ rot_y(beta) @ rot_z(gamma)


def matrix_to_euler(R: np.ndarray) -> tuple[float, float, float]:
    """ZYZ Euler angles of a proper rotation matrix."""
    cb = float(np.clip(R[2, 2], -1.0, 1.0))
    beta = math.acos(cb)
    sb = math.sin(beta)
    if sb > 1e-12:
        alpha = math.atan2(R[1, 2], R[0, 2])
        gamma = math.atan2(R[2, 1], -R[2, 0])
    elif cb > 0:
        alpha, gamma = math.atan2(R[1, 0], R[0, 0]), 0.0
    else:
        alpha, gamma = math.atan2(-R[1, 0], -R[0, 0]), 0.0
    return alpha, beta, gamma


@dataclass(frozen=True)
class GroupElement:
    alpha: float
    beta: float
    gamma: float
    invert: bool = False

    @classmethod
    def from_matrix(cls, g: np.ndarray) -> "GroupElement":
        g = np.asarray(g, dtype=float)
        det = np.linalg.det(g)
        R = g if det > 0 else -g
        return cls(*matrix_to_euler(R), invert=bool(det < 0))

    def matrix(self) -> np.ndarray:
        R = euler_to_matrix(self.alpha, self.beta, self.gamma)
        return -R if self.invert else R


@lru_cache(maxsize=None)
def _jy_eig(l: int) -> tuple[np.ndarray, np.ndarray]:
    m = np.arange(-l, l + 1)
    jp = np.sqrt(l * (l + 1) - m[:-1] * (m[:-1] + 1.0))  # <m+1|J+|m>
    Jp = np.diag(jp, -1).astype(complex)
    Jy = (Jp - Jp.conj().T) / 2j
    w, V = np.linalg.eigh(Jy)
    return w, V


def wigner_small_d(l: int, beta: float) -> np.ndarray:
    """d^l_{m'm}(beta) = <l m'| exp(-i beta J_y) |l m>, rows/cols m = -l..l."""
    w, V = _jy_eig(l)
    return ((V * np.exp(-1j * beta * w)) @ V.conj().T).real


def wigner_D(l: int, alpha: float, beta: float, gamma: float) -> np.ndarray:
    """Complex D^l_{m'm} = exp(-i m' alpha) d_{m'm}(beta) exp(-i m gamma)."""
    m = np.arange(-l, l + 1)
    return np.exp(-1j * m * alpha)[:, None] * wigner_small_d(l, beta) * np.exp(-1j * m * gamma)[None, :]


def real_wigner_D(l: int, alpha: float, beta: float, gamma: float) -> np.ndarray:
    """Real matrix mapping degree-l coefficients c to those of the rotated field."""
    U = unitary_change_of_basis(l)
    M = U @ wigner_D(l, alpha, beta, gamma).T @ U.conj().T
    return M.real.T


def element_blocks(el: GroupElement, l_max: int) -> list[np.ndarray]:
    blocks = []
    for l in range(l_max + 1):
        D = real_wigner_D(l, el.alpha, el.beta, el.gamma)
        if el.invert and l % 2:
            D = -D
        blocks.append(D)
    return blocks


def wigner_d_rotate(u: SpectralField, alpha: float, beta: float, gamma: float,
                    invert: bool = False) -> SpectralField:
    out = np.empty_like(u.coeffs)
    for l, D in enumerate(element_blocks(GroupElement(alpha, beta, gamma, invert), u.l_max)):
        sl = slice(l * l, (l + 1) ** 2)
        out[sl] = D @ u.coeffs[sl]
    return SpectralField(u.l_max, out)


def act(g: np.ndarray | GroupElement, u: SpectralField) -> SpectralField:
    el = g if isinstance(g, GroupElement) else GroupElement.from_matrix(g)
    return wigner_d_rotate(u, el.alpha, el.beta, el.gamma, el.invert)


def rotation_matrix_full(el: GroupElement, l_max: int) -> np.ndarray:
    """Block-diagonal action matrix on all (l_max + 1)^2 coefficients."""
    n = n_coeffs(l_max)
    M = np.zeros((n, n))
    for l, D in enumerate(element_blocks(el, l_max)):
        sl = slice(l * l, (l + 1) ** 2)
        M[sl, sl] = D
    return M


# --- finite groups -----------------------------------------------------------

def close_group(generators: list[np.ndarray], max_order: int = 200) -> list[np.ndarray]:
    """All products of the generators (finite matrix group closure)."""
    def key(g):
        return tuple(np.round(g, 8).ravel() + 0.0)

    elems = {key(np.eye(3)): np.eye(3)}
    frontier = [np.eye(3)]
    while frontier:
        nxt = []
        for a in frontier:
            for b in generators:
                c = a @ b
                k = key(c)
                if k not in elems:
                    elems[k] = c
                    nxt.append(c)
        frontier = nxt
        if len(elems) > max_order:
            raise ValueError("group closure exceeded max_order")
    return [elems[k] for k in sorted(elems)]


def _signed_permutations() -> list[np.ndarray]:
    from itertools import permutations, product
    out = []
    for p in permutations(range(3)):
        for signs in product((1.0, -1.0), repeat=3):
            g = np.zeros((3, 3))
            for i, j in enumerate(p):
                g[i, j] = signs[i]
            out.append(g)
    return out


def _octahedral_full() -> list[np.ndarray]:
    return _signed_permutations()


def _tetrahedral_twisted() -> list[np.ndarray]:
    """O^-: stabilizer of (x^2 - y^2) z, i.e. T_d turned by 45 degrees about z."""
    td = [g for g in _signed_permutations() if np.prod(g[np.abs(g) > 0.5]) > 0]
    C = rot_z(math.pi / 4)
    return [C @ g @ C.T for g in td]


def _dihedral_twisted_6() -> list[np.ndarray]:
    """D6d: stabilizer of Re (x + i y)^3 (D3 rotations, sigma_h, sigma_v)."""
    return close_group([rot_z(2 * math.pi / 3), np.diag([1.0, -1.0, -1.0]), np.diag([1.0, 1.0, -1.0])])


def _with_center(gens: list[np.ndarray]) -> list[np.ndarray]:
    return close_group(gens + [-np.eye(3)])


def _finite_groups() -> dict[str, list[np.ndarray]]:
    c2x = np.diag([1.0, -1.0, -1.0])
    sigma_v = np.diag([1.0, -1.0, 1.0])  # y -> -y, i.e. phi -> -phi
    return {
        "Om": _tetrahedral_twisted(),
        "OxZ2c": _octahedral_full(),
        "D6d": _dihedral_twisted_6(),
        "D2z": close_group([rot_z(math.pi), sigma_v]),
        "D3z": close_group([rot_z(2 * math.pi / 3), sigma_v]),
        "Z2m": close_group([np.diag([1.0, 1.0, -1.0])]),
        "id": [np.eye(3)],
        "D3xZ2c": _with_center([rot_z(2 * math.pi / 3), c2x]),
        "D4xZ2c": _with_center([rot_z(math.pi / 2), c2x]),
        "D2xZ2c": _with_center([rot_z(math.pi), c2x]),
        "Z2xZ2c": _with_center([rot_z(math.pi)]),
        "Z2c": [np.eye(3), -np.eye(3)],
    }


@lru_cache(maxsize=None)
def group_elements(name: str) -> tuple[GroupElement, ...]:
    mats = _finite_groups()[name]
    return tuple(GroupElement.from_matrix(g) for g in mats)


# --- isotropy descriptors ----------------------------------------------------

CONTINUOUS = {"O3", "O2m", "O2xZ2c"}
DISPLAY = {
    "O3": "O(3)", "O2m": "O(2)^-", "O2xZ2c": "O(2)+Z2c", "Om": "O^-", "OxZ2c": "O+Z2c",
    "D6d": "D6^d", "Z2c": "Z2c", "D2z": "D2^z", "D3z": "D3^z", "Z2m": "Z2^-", "id": "id",
    "D3xZ2c": "D3+Z2c", "D4xZ2c": "D4+Z2c", "D2xZ2c": "D2+Z2c", "Z2xZ2c": "Z2+Z2c",
}
ORBIT_DIM = {"O3": 0, "O2m": 2, "O2xZ2c": 2, "Om": 3, "OxZ2c": 3, "D6d": 3}
# Table 2 pairs (group, degree) with one-dimensional fix space in V_l
BRANCH_PAIRS = [("O2m", 1), ("O2xZ2c", 2), ("O2m", 3), ("Om", 3), ("D6d", 3), ("O2xZ2c", 4), ("OxZ2c", 4)]
# Fig. 2.1 lattice: degree -> [(group, fix dimension)]
LATTICE = {
    0: [("O3", 1)],
    1: [("O3", 0), ("O2m", 1), ("id", 3)],
    2: [("O3", 0), ("O2xZ2c", 1), ("Z2c", 5)],
    3: [("O3", 0), ("Om", 1), ("O2m", 1), ("D6d", 1), ("D2z", 2), ("D3z", 2), ("Z2m", 4), ("id", 7)],
    4: [("O3", 0), ("O2xZ2c", 1), ("OxZ2c", 1), ("D3xZ2c", 2), ("D4xZ2c", 2), ("D2xZ2c", 3),
        ("Z2xZ2c", 5), ("Z2c", 9)],
}


def fix_generator(name: str, ell: int, l_max: int | None = None) -> SpectralField:
    """Unit-norm generator of the one-dimensional fix space of ``name`` in V_ell."""
    l_max = ell if l_max is None else l_max
    c = np.zeros(n_coeffs(l_max))
    if name == "O2m" and ell % 2 == 1 or name == "O2xZ2c" and ell % 2 == 0 and ell > 0:
        c[lm_index(ell, 0)] = 1.0
    elif name == "Om" and ell == 3:
        c[lm_index(3, 2)] = 1.0  # sqrt(2) Re Y32
    elif name == "D6d" and ell == 3:
        c[lm_index(3, 3)] = 1.0  # sqrt(2) Re Y33
    elif name == "OxZ2c" and ell == 4:
        # (1/2) sqrt(7/3) (Y40 + 2 sqrt(5/14) Re Y44), Re Y44 = Y44_real / sqrt(2)
        a = 0.5 * math.sqrt(7.0 / 3.0)
        c[lm_index(4, 0)] = a
        c[lm_index(4, 4)] = a * math.sqrt(5.0 / 7.0)
    else:
        raise KeyError(f"no one-dimensional fix space generator for ({name}, {ell})")
    return SpectralField(l_max, c)


@dataclass(frozen=True, eq=False)
class IsotropyDescriptor:
    name: str
    ell: int | None = None
    elements: tuple[GroupElement, ...] = field(default=(), repr=False)

    @classmethod
    def get(cls, name: str, ell: int | None = None) -> "IsotropyDescriptor":
        if name in CONTINUOUS:
            return cls(name, ell)
        return cls(name, ell, group_elements(name))

    @property
    def display(self) -> str:
        return DISPLAY.get(self.name, self.name)

    @property
    def continuous(self) -> bool:
        return self.name in CONTINUOUS

    @property
    def orbit_dim(self) -> int:
        if self.name in ORBIT_DIM:
            return ORBIT_DIM[self.name]
        return 3  # every finite subgroup has a three-dimensional orbit

    @property
    def order(self) -> int | None:
        return None if self.continuous else len(self.elements)

    def generator(self, l_max: int | None = None) -> SpectralField:
        if self.ell is None:
            raise ValueError("descriptor has no associated degree")
        return fix_generator(self.name, self.ell, l_max)

    def mask(self, l_max: int) -> np.ndarray:
        """Coefficient mask of the fix space for the continuous groups."""
        from .sphere import index_lm
        ls, ms = index_lm(l_max)
        if self.name == "O3":
            return ls == 0
        if self.name == "O2m":
            return ms == 0
        if self.name == "O2xZ2c":
            return (ms == 0) & (ls % 2 == 0)
        raise ValueError(f"{self.name} is not a continuous group")

    def projector_blocks(self, l_max: int) -> list[np.ndarray]:
        return _projector_blocks(self, l_max)

    def projector(self, l_max: int) -> np.ndarray:
        """Reynolds projector as a dense matrix on all coefficients."""
        return _projector_full(self, l_max)

    def fix_basis(self, l_max: int) -> np.ndarray:
        """Orthonormal basis of Fix(K) in coefficient space, shape (n_coeffs, dim)."""
        return _fix_basis(self, l_max)

    def fix_dim(self, ell: int) -> int:
        return int(round(np.trace(self.projector_blocks(ell)[ell])))

    def to_json(self, l_max: int | None = None) -> dict:
        d = {"name": self.name, "display": self.display, "ell": self.ell, "orbit_dim": self.orbit_dim}
        if self.ell is not None:
            try:
                g = self.generator(l_max)
                d["generator"] = {"l_max": g.l_max, "coeffs": [float(x) for x in g.coeffs]}
            except KeyError:
                pass
        if self.continuous:
            d["projection"] = {"kind": "mask", "rule": {"O3": "l == 0", "O2m": "m == 0",
                                                          "O2xZ2c": "m == 0 and l even"}[self.name]}
        else:
            d["projection"] = {"kind": "elements", "elements": [
                {"alpha": e.alpha, "beta": e.beta, "gamma": e.gamma, "invert": e.invert}
                for e in self.elements]}
        return d

    @classmethod
    def from_json(cls, d: dict | str) -> "IsotropyDescriptor":
        if isinstance(d, str):
            d = json.loads(d)
        proj = d.get("projection", {})
        if proj.get("kind") == "elements":
            els = tuple(GroupElement(e["alpha"], e["beta"], e["gamma"], bool(e["invert"]))
                        for e in proj["elements"])
            return cls(d["name"], d.get("ell"), els)
        return cls(d["name"], d.get("ell"))


@lru_cache(maxsize=128)
def _projector_blocks(K: IsotropyDescriptor, l_max: int) -> list[np.ndarray]:
    if K.continuous:
        mask = K.mask(l_max)
        return [np.diag(mask[l * l:(l + 1) ** 2].astype(float)) for l in range(l_max + 1)]
    acc = [np.zeros((2 * l + 1, 2 * l + 1)) for l in range(l_max + 1)]
    for el in K.elements:
        for l, D in enumerate(element_blocks(el, l_max)):
            acc[l] += D
    return [a / len(K.elements) for a in acc]


@lru_cache(maxsize=128)
def _projector_full(K: IsotropyDescriptor, l_max: int) -> np.ndarray:
    n = n_coeffs(l_max)
    P = np.zeros((n, n))
    for l, B in enumerate(_projector_blocks(K, l_max)):
        sl = slice(l * l, (l + 1) ** 2)
        P[sl, sl] = B
    P.setflags(write=False)
    return P


@lru_cache(maxsize=128)
def _fix_basis(K: IsotropyDescriptor, l_max: int) -> np.ndarray:
    n = n_coeffs(l_max)
    cols = []
    for l, B in enumerate(_projector_blocks(K, l_max)):
        S = 0.5 * (B + B.T)
        w, V = np.linalg.eigh(S)
        for k in np.nonzero(w > 0.5)[0]:
            col = np.zeros(n)
            vec = V[:, k]
            # deterministic sign: largest entry positive
            if vec[np.argmax(np.abs(vec))] < 0:
                vec = -vec
            col[l * l:(l + 1) ** 2] = vec
            cols.append(col)
    Q = np.array(cols).T if cols else np.zeros((n, 0))
    Q.setflags(write=False)
    return Q


def reynolds_project(u: SpectralField, K: IsotropyDescriptor) -> SpectralField:
    out = np.empty_like(u.coeffs)
    for l, B in enumerate(K.projector_blocks(u.l_max)):
        sl = slice(l * l, (l + 1) ** 2)
        out[sl] = B @ u.coeffs[sl]
    return SpectralField(u.l_max, out)


def isotropy_residual(u: SpectralField, K: IsotropyDescriptor) -> float:
    return (u - reynolds_project(u, K)).norm()


def lattice_table(max_ell: int = 4) -> list[dict]:
    """Fix-space dimensions of the Fig. 2.1 lattice, computed as projector traces."""
    rows = []
    for ell in range(max_ell + 1):
        for name, expected in LATTICE[ell]:
            K = IsotropyDescriptor.get(name)
            rows.append({"ell": ell, "group": name, "display": DISPLAY[name],
                         "expected_dim": expected, "computed_dim": K.fix_dim(ell),
                         "order": K.order})
    return rows
