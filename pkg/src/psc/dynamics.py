"""Time integration of the rescaled flow, energy monitoring and connection experiments.

The quasilinear flow is  v_t = (1+v)² (Δv + λ f(v)),  the semilinear variant
v_t = Δv + λ f(v).  Both are stepped semi-implicitly: the Laplacian is treated
implicitly with a constant coefficient c ≥ max (1+v)² and the remainder
explicitly, which is unconditionally stable for the diffusive part.  Steps
that raise the energy are rejected and retried with half the step size.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .equilibrium import (F, Equilibrium, f, grid_values, lambda_ell, newton_solve,
                          nonlinear_grid, project)
from .errors import (DomainViolation, InsufficientData, PositivityViolation, StepFailure,
                     Unclassified)
from .sphere import DELTA_MIN, SpectralField, index_lm, laplacian_eigenvalues, transform
from .symmetry import IsotropyDescriptor, fix_generator

CONVERGE_TOL = 1e-9
CLASSIFY_TOL = 1e-6
DT_MIN = 1e-12
GROW = 1.2


# --- energy and vector fields -----------------------------------------------

def _synth(c: np.ndarray, l_max: int) -> np.ndarray:
    return transform(l_max, nonlinear_grid(l_max)).synth(c)


def energy(v: SpectralField, lam: float) -> float:
    """E(v) = ½ Σ ℓ(ℓ+1) c² - λ ∫ F(v)."""
    vals = grid_values(v)
    return _energy(v.coeffs, vals, lam, v.l_max)


def _energy(c: np.ndarray, vals: np.ndarray, lam: float, l_max: int) -> float:
    g = nonlinear_grid(l_max)
    grad = -0.5 * float(np.dot(laplacian_eigenvalues(l_max) * c, c))
    return grad - lam * float(np.sum(g.weights * F(vals)))


def time_derivative(v: SpectralField, lam: float, variant: str = "quasilinear") -> SpectralField:
    """Coefficients of v_t for either flow."""
    vals = grid_values(v)
    return SpectralField(v.l_max, _vt(v.coeffs, vals, lam, v.l_max, variant))


def _vt(c, vals, lam, l_max, variant):
    lap = laplacian_eigenvalues(l_max)
    if variant == "semilinear":
        return lap * c + lam * project(f(vals), l_max)
    # project the residual first: the zeros of v_t are then exactly the Galerkin equilibria
    r = lap * c + lam * project(f(vals), l_max)
    return project((1.0 + vals) ** 2 * _synth(r, l_max), l_max)


def energy_dissipation(v: SpectralField, lam: float, variant: str = "quasilinear") -> float:
    """-dE/dt = ∫ w v_t² with w = (1+v)^{-2} (quasilinear) or 1 (semilinear)."""
    vals = grid_values(v)
    vt = _synth(_vt(v.coeffs, vals, lam, v.l_max, variant), v.l_max)
    w = (1.0 + vals) ** -2 if variant == "quasilinear" else 1.0
    return float(np.sum(nonlinear_grid(v.l_max).weights * w * vt * vt))


def sup_bound(c: np.ndarray, l_max: int) -> float:
    """Rotation-invariant bound of sup |v| by the addition theorem."""
    ls, _ = index_lm(l_max)
    blk = np.bincount(ls, weights=c * c, minlength=l_max + 1)
    return float(np.sum(np.sqrt(blk * (2 * np.arange(l_max + 1) + 1) / (4 * math.pi))))


def _step(c, vals, lam, l_max, dt, variant):
    lap = laplacian_eigenvalues(l_max)
    if variant == "semilinear":
        return (c + dt * lam * project(f(vals), l_max)) / (1.0 - dt * lap)
    k = (1.0 + sup_bound(c, l_max)) ** 2
    n = _vt(c, vals, lam, l_max, "quasilinear")
    return (c + dt * (n - k * lap * c)) / (1.0 - dt * k * lap)


def flow_step(v: SpectralField, lam: float, dt: float, variant: str = "quasilinear") -> SpectralField:
    """One semi-implicit step (no step-size control)."""
    vals = grid_values(v)
    return SpectralField(v.l_max, _step(v.coeffs, vals, lam, v.l_max, dt, variant))


# --- trajectories ------------------------------------------------------------

@dataclass
class TrajectoryRecord:
    lam: float
    variant: str
    times: list[float] = field(default_factory=list)
    energies: list[float] = field(default_factory=list)
    snap_times: list[float] = field(default_factory=list)
    snapshots: list[SpectralField] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def final(self) -> SpectralField:
        return self.snapshots[-1]

    @property
    def kind(self) -> str | None:
        return self.events[-1]["kind"] if self.events else None

    def energy_increments(self) -> np.ndarray:
        return np.diff(np.asarray(self.energies))

    def to_csv(self, path, target: SpectralField | None = None) -> None:
        l_max = self.snapshots[0].l_max
        ls, ms = index_lm(l_max)
        e_at = dict(zip(self.times, self.energies))
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "energy", "norm", "dist_to_target"] + [f"coeff_{l}_{m}" for l, m in zip(ls, ms)])
            for t, v in zip(self.snap_times, self.snapshots):
                d = (v - target).norm() if target is not None else float("nan")
                w.writerow([f"{t:.17g}", f"{e_at.get(t, float('nan')):.17g}", f"{v.norm():.17g}",
                            f"{d:.17g}"] + [f"{x:.17g}" for x in v.coeffs])

    def events_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for ev in self.events:
                fh.write(json.dumps(ev, sort_keys=True) + "\n")


def integrate_rescaled(v0: SpectralField, lam: float, t_end: float, dt0: float = 1e-2,
                       variant: str = "quasilinear", dt_max: float = 0.1, stride: int = 1,
                       fix: IsotropyDescriptor | None = None, stop=None,
                       energy_tol: float | None = 1e-12, converge_tol: float = CONVERGE_TOL,
                       escape: float = 1e2, raise_on_violation: bool = False) -> TrajectoryRecord:
    """Integrate the rescaled flow from v0 up to t_end.

    Steps are accepted only if the energy does not increase by more than
    energy_tol·max(1, |E|); energy_tol=None disables the check (fixed steps).
    Runs whose sup-norm bound exceeds ``escape`` end with an Escaped event.
    ``fix`` re-projects every state onto Fix(K) to
    remove rounding drift out of the invariant subspace.  ``stop(t, c)`` may
    return an event kind to end the run early.
    """
    l_max = v0.l_max
    Q = fix.fix_basis(l_max) if fix is not None else None
    c = v0.coeffs.copy()
    if Q is not None:
        c = Q @ (Q.T @ c)
    rec = TrajectoryRecord(lam, variant)
    try:
        vals = grid_values(SpectralField(l_max, c))
    except DomainViolation as exc:
        raise PositivityViolation(str(exc)) from exc
    E = _energy(c, vals, lam, l_max)
    t, dt, n = 0.0, dt0, 0
    rec.times.append(t)
    rec.energies.append(E)
    rec.snap_times.append(t)
    rec.snapshots.append(SpectralField(l_max, c))
    while True:
        vt = _vt(c, vals, lam, l_max, variant)
        if float(np.linalg.norm(vt)) < converge_tol:
            res = equilibrium_residual_norm(c, vals, lam, l_max)
            if res < converge_tol:
                rec.events.append({"t": t, "kind": "Converged", "equilibrium": None})
                break
        if t >= t_end - 1e-14:
            rec.events.append({"t": t, "kind": "MaxTimeReached"})
            break
        if sup_bound(c, l_max) > escape:
            rec.events.append({"t": t, "kind": "Escaped"})
            break
        if stop is not None:
            kind = stop(t, c)
            if kind:
                rec.events.append({"t": t, "kind": kind})
                break
        h = min(dt, t_end - t)
        domain_hit = False
        while True:
            if h < DT_MIN:
                if raise_on_violation and not domain_hit:
                    raise StepFailure(f"step size underflow at t={t:g}")
                rec.events.append({"t": t, "kind": "PositivityViolation"})
                break
            cn = _step(c, vals, lam, l_max, h, variant)
            if Q is not None:
                cn = Q @ (Q.T @ cn)
            try:
                vn = grid_values(SpectralField(l_max, cn))
            except (DomainViolation, ValueError):
                domain_hit = True
                h *= 0.5
                continue
            En = _energy(cn, vn, lam, l_max)
            if energy_tol is None or En <= E + energy_tol * max(1.0, abs(E)):
                break
            h *= 0.5
        if rec.events and rec.events[-1]["kind"] == "PositivityViolation":
            if raise_on_violation:
                raise PositivityViolation(f"1+v reached the floor {DELTA_MIN} at t={t:g}")
            break
        c, vals, E = cn, vn, En
        t += h
        n += 1
        dt = min(h * GROW, dt_max)
        rec.times.append(t)
        rec.energies.append(E)
        if n % stride == 0:
            rec.snap_times.append(t)
            rec.snapshots.append(SpectralField(l_max, c.copy()))
    if rec.snap_times[-1] != t:
        rec.snap_times.append(t)
        rec.snapshots.append(SpectralField(l_max, c.copy()))
    return rec


def equilibrium_residual_norm(c, vals, lam, l_max) -> float:
    return float(np.linalg.norm(laplacian_eigenvalues(l_max) * c + lam * project(f(vals), l_max)))


def _flow(c: np.ndarray, lam: float, T: float, dt: float, l_max: int, Q=None,
          variant: str = "quasilinear", blowup: float = 10.0, samples: int = 0):
    """Fixed-step flow for shooting; returns (state, ok) with ok False on escape.

    With ``samples`` > 0 also returns the states at k T / (2 samples),
    k = 1..samples, i.e. evenly spaced over the first half of the horizon.
    """
    n = max(1, int(math.ceil(T / dt)))
    if samples:
        n = samples * 2 * max(1, int(math.ceil(n / (2 * samples))))
    h = T / n
    mids = []
    for i in range(n):
        try:
            vals = grid_values(SpectralField(l_max, c))
        except DomainViolation:
            return (c, False, mids) if samples else (c, False)
        c = _step(c, vals, lam, l_max, h, variant)
        if Q is not None:
            c = Q @ (Q.T @ c)
        if not np.all(np.isfinite(c)) or np.linalg.norm(c) > blowup:
            return (c, False, mids) if samples else (c, False)
        if samples and (i + 1) % (n // (2 * samples)) == 0 and len(mids) < samples:
            mids.append(c.copy())
    try:
        grid_values(SpectralField(l_max, c))
    except DomainViolation:
        return (c, False, mids) if samples else (c, False)
    return (c, True, mids) if samples else (c, True)


# --- stabilized connection orbits ---------------------------------------------

def strong_directions(K: IsotropyDescriptor | None, ell: int, l_max: int) -> np.ndarray:
    """Orthonormal basis of Fix(K) ∩ (V_0 ⊕ ... ⊕ V_{ℓ-1}), the strong unstable modes near λ_ℓ."""
    ls, _ = index_lm(l_max)
    Q = K.fix_basis(l_max) if K is not None else np.eye(ls.size)
    low = ls < ell
    cols = [Q[:, j] for j in range(Q.shape[1]) if np.all(Q[~low, j] == 0.0)]
    return np.array(cols).T if cols else np.zeros((ls.size, 0))


@dataclass
class Connection:
    source: str
    target: str | None
    lam: float
    record: TrajectoryRecord
    distance: float
    realized: bool
    segments: int
    details: dict = field(default_factory=dict)


def _strong_velocity(c, P, lam, l_max, variant):
    # strong part of v_t; vanishes exactly at every equilibrium
    vals = grid_values(SpectralField(l_max, c))
    return P.T @ _vt(c, vals, lam, l_max, variant)


def shadow_orbit(x0: np.ndarray, lam: float, P: np.ndarray, l_max: int,
                 targets: dict[str, np.ndarray], K: IsotropyDescriptor | None = None,
                 seg_T: float | None = None, dt: float = 0.02, max_time: float = 400.0,
                 tol: float = CLASSIFY_TOL, variant: str = "quasilinear",
                 samples: int = 10) -> tuple[TrajectoryRecord, str | None, float, int]:
    """Follow a trajectory that avoids the strong unstable directions P.

    Each segment solves for the correction a along P that makes the strong
    velocity P^T v_t vanish at φ_T(x + P a), then advances by T/2 along the
    corrected orbit.  The solve is a chord iteration: the finite-difference
    Jacobian is kept across segments and rebuilt only when the iteration
    stalls.  Corrections shrink to rounding level once the orbit lies in the
    stable set of its limit, so the result shadows a true trajectory.  Stops
    when the state is within ``tol`` of one of ``targets``.
    """
    Q = K.fix_basis(l_max) if K is not None else None
    k = P.shape[1]
    if seg_T is None:
        # the fastest strong rate is about λ (constant mode); cap its growth at 1e6
        seg_T = math.log(1e6) / max(lam, 1.0)
    rec = TrajectoryRecord(lam, variant)
    x = x0.copy()
    t = 0.0
    rec.times.append(t)
    rec.snap_times.append(t)
    rec.snapshots.append(SpectralField(l_max, x.copy()))
    rec.energies.append(energy(SpectralField(l_max, x), lam))
    hit, dist, seg = None, math.inf, 0
    J = None

    def jac(base, g):
        out = np.empty((k, k))
        for j in range(k):
            eps = 1e-8
            e2, ok2, _ = _flow(base + eps * P[:, j], lam, seg_T, dt, l_max, Q, variant,
                               samples=samples)
            if not ok2:
                return None
            out[:, j] = (_strong_velocity(e2, P, lam, l_max, variant) - g) / eps
        return out

    while t < max_time:
        for name, y in targets.items():
            d = float(np.linalg.norm(x - y))
            if d < tol:
                hit, dist = name, d
                break
        if hit:
            break
        a = np.zeros(k)
        mids, prev = None, math.inf
        for it in range(12):
            end, ok, mids = _flow(x + P @ a, lam, seg_T, dt, l_max, Q, variant, samples=samples)
            if not ok:
                # escaped before T: shorten the horizon for this segment
                seg_T *= 0.5
                J = None
                if seg_T < 10 * dt:
                    rec.events.append({"t": t, "kind": "Escaped"})
                    return rec, None, dist, seg
                continue
            g = _strong_velocity(end, P, lam, l_max, variant) if k else np.zeros(0)
            gn = float(np.linalg.norm(g))
            if gn < 1e-12:
                break
            if J is None or gn > 0.5 * prev:
                J = jac(x + P @ a, g)
                if J is None:
                    seg_T *= 0.5
                    if seg_T < 10 * dt:
                        rec.events.append({"t": t, "kind": "Escaped"})
                        return rec, None, dist, seg
                    continue
            prev = gn
            a = a - np.linalg.lstsq(J, g, rcond=None)[0]
        if mids is None or len(mids) < samples:
            rec.events.append({"t": t, "kind": "Escaped"})
            return rec, None, dist, seg
        h = 0.5 * seg_T / samples
        for c in mids:
            t += h
            rec.times.append(t)
            rec.snap_times.append(t)
            rec.snapshots.append(SpectralField(l_max, c))
            rec.energies.append(energy(SpectralField(l_max, c), lam))
        x = mids[-1]
        seg += 1
    dist = min(float(np.linalg.norm(x - y)) for y in targets.values()) if targets else math.inf
    if hit is None:
        rec.events.append({"t": t, "kind": "MaxTimeReached"})
    else:
        rec.events.append({"t": t, "kind": "Converged", "equilibrium": hit})
    return rec, hit, dist, seg


# --- connection experiments -------------------------------------------------

# (ell, side, source, target) as listed in the connection table; "0" is trivial
TABLE4 = [
    (1, "below", "O2m", "0"),
    (2, "below", "O2xZ2c", "0"),
    (2, "above", "0", "O2xZ2c"),
    (3, "below", "D6d", "O2m"),
    (3, "below", "O2m", "Om"),
    (3, "below", "Om", "0"),
    (4, "below", "OxZ2c", "0"),
    (4, "below", "OxZ2c", "O2xZ2c"),
    (4, "above", "0", "OxZ2c"),
    (4, "above", "O2xZ2c", "OxZ2c"),
]
# common subgroup carrying the connection between two nontrivial equilibria
LINK_GROUP = {frozenset(("D6d", "O2m")): "D3z", frozenset(("O2m", "Om")): "D2z",
              frozenset(("OxZ2c", "O2xZ2c")): "D4xZ2c"}
BRANCH_GROUPS = {1: ["O2m"], 2: ["O2xZ2c"], 3: ["O2m", "Om", "D6d"], 4: ["O2xZ2c", "OxZ2c"]}


def branch_equilibria_at(ell: int, lam: float, l_max: int = 12, ds: float = 0.05,
                         s_limit: float = 2.0) -> dict[str, Equilibrium]:
    """All branch equilibria of degree ℓ at parameter λ, keyed 'K+' / 'K-' by the sign of s."""
    from .equilibrium import continue_branch
    out = {}
    for name in BRANCH_GROUPS[ell]:
        K = IsotropyDescriptor.get(name, ell)
        br = continue_branch(K, ell, s_limit, ds, l_max=l_max, s_min=-s_limit)
        s_arr, l_arr = br.s, br.lam
        for sign in (1.0, -1.0):
            idx = np.nonzero(np.sign(s_arr) == sign)[0]
            idx = idx[np.argsort(np.abs(s_arr[idx]))]
            prev = int(np.argmin(np.abs(s_arr)))
            for i in idx:
                # first crossing of lam when walking away from s = 0
                lo, hi = br.points[prev][1], l_arr[i]
                if (lo - lam) * (hi - lam) <= 0 and lo != hi:
                    w = (lam - lo) / (hi - lo)
                    v0 = br.points[prev][2] * (1 - w) + br.points[i][2] * w
                    try:
                        eq = newton_solve(lam, v0, K, tol=1e-11)
                    except Exception:
                        break
                    if eq.v.norm() > 1e-6:
                        out[f"{name}{'+' if sign > 0 else '-'}"] = eq
                    break
                prev = i
    return out


def _unstable_center_directions(eq_v: SpectralField, lam: float, H: IsotropyDescriptor,
                                ell: int) -> list[np.ndarray]:
    """Unstable eigenvectors of the quasilinear linearization inside Fix(H) that are not strong."""
    from scipy.linalg import eigh
    from .equilibrium import jacobian
    from .stability import weight_matrix
    Q = H.fix_basis(eq_v.l_max)
    L = Q.T @ jacobian(lam, eq_v) @ Q
    M = Q.T @ weight_matrix(eq_v) @ Q
    w, V = eigh(L, M)
    ls, _ = index_lm(eq_v.l_max)
    out = []
    for k in np.argsort(w)[::-1]:
        if w[k] <= 1e-8:
            break
        vec = Q @ V[:, k]
        vec /= np.linalg.norm(vec)
        if np.sum(vec[ls >= ell] ** 2) > 0.5:
            out.append(vec)
    return out


def heteroclinic_experiment(ell: int, side: str, source: str, target: str | None = None,
                            amplitude: float = 1e-3, lam_offset: float = 0.3, l_max: int = 12,
                            dt: float | None = None, max_time: float = 300.0,
                            tol: float = CLASSIFY_TOL, first_only: bool = False) -> list[Connection]:
    """Launch from ``source`` along its unstable center directions and classify the limit.

    λ = λ_ℓ ∓ lam_offset.  The orbit lives in Fix(H), H the isotropy shared by
    source and target, and is kept off the strong unstable modes by
    :func:`shadow_orbit`.  Every launch direction and both signs are tried; one
    Connection is returned per launch.  With ``first_only`` the search stops at
    the first realized launch.  Targets are the trivial equilibrium and all
    branch equilibria of degree ℓ at the same λ.
    """
    lam = lambda_ell(ell) + (lam_offset if side == "above" else -lam_offset)
    dt = min(0.02, 0.2 / lam) if dt is None else dt
    eqs = branch_equilibria_at(ell, lam, l_max)
    fields = {"0": np.zeros((l_max + 1) ** 2)}
    fields.update({k: e.v.coeffs for k, e in eqs.items()})
    if source == "0":
        H = IsotropyDescriptor.get(target, ell)
        x_src = fields["0"]
        dirs = [fix_generator(target, ell, l_max).coeffs]
    else:
        keys = [k for k in eqs if k[:-1] == source]
        if not keys:
            raise Unclassified(f"no {source} equilibrium at λ = {lam:g}")
        src_key = keys[0]
        x_src = fields[src_key]
        if target in (None, "0"):
            H = IsotropyDescriptor.get(source, ell)
        else:
            H = IsotropyDescriptor.get(LINK_GROUP[frozenset((source, target))])
        dirs = _unstable_center_directions(eqs[src_key].v, lam, H, ell)
    P = strong_directions(H, ell, l_max)
    src_name = "0" if source == "0" else src_key
    cands = {k: y for k, y in fields.items() if k != src_name}
    out = []
    for d in dirs:
        for sign in (1.0, -1.0):
            x0 = x_src + sign * amplitude * d
            rec, hit, dist, nseg = shadow_orbit(x0, lam, P, l_max, cands, H, dt=dt,
                                                max_time=max_time, tol=tol)
            reached = hit[:-1] if hit and hit != "0" else hit
            realized = reached == target if target is not None else hit is not None
            out.append(Connection(src_name, hit, lam, rec, dist, realized, nseg,
                                  {"sign": sign, "group": H.name, "strong_modes": int(P.shape[1])}))
            if first_only and realized:
                return out
    return out


# --- decay rate --------------------------------------------------------------

def decay_rate(traj: TrajectoryRecord, target: Equilibrium | SpectralField,
               window: tuple[float, float] = (1e-3, 1e-9)) -> float:
    """Exponential rate of ‖v(t) - v*‖ fitted where the distance lies in ``window``."""
    vs = target.v if isinstance(target, Equilibrium) else target
    t = np.asarray(traj.snap_times)
    d = np.array([(v - vs).norm() for v in traj.snapshots])
    hi, lo = window
    sel = (d < hi) & (d > lo)
    if sel.sum() < 5:
        raise InsufficientData(f"only {int(sel.sum())} samples inside the fit window")
    slope = np.polyfit(t[sel], np.log(d[sel]), 1)[0]
    return float(-slope)


def trivial_decay_experiment(lam: float, l_max: int = 8, amplitude: float = 1e-2,
                             dt: float = 0.01, t_end: float = 30.0) -> tuple[float, float, TrajectoryRecord]:
    """Decay towards v = 0 along the slowest stable mode of the trivial equilibrium.

    The perturbation is the lowest-degree stable axisymmetric mode inside the
    Fix space of O(2)⁻ or O(2)+Z2c (whichever excludes the unstable degrees
    other than 0).  The unstable constant mode is removed by the strong-direction
    shooting of :func:`shadow_orbit`.  Returns (fitted rate, spectral gap, record).
    """
    ell_s = next(l for l in range(1, l_max) if lambda_ell(l) > lam)
    K = IsotropyDescriptor.get("O2m" if ell_s % 2 else "O2xZ2c")
    gap = lambda_ell(ell_s) - lam
    x0 = amplitude * fix_generator(K.name, ell_s, l_max).coeffs
    P = strong_directions(K, ell_s, l_max)
    zero = np.zeros_like(x0)
    rec, hit, dist, _ = shadow_orbit(x0, lam, P, l_max, {"0": zero}, K, dt=dt,
                                     max_time=t_end, tol=1e-10)
    rate = decay_rate(rec, SpectralField(l_max, zero), window=(amplitude * 0.5, 1e-9))
    return rate, float(gap), rec


def spectral_gap_trivial(lam: float) -> float:
    """|largest negative eigenvalue| of Δ + λ at v = 0."""
    ell = 0
    while lambda_ell(ell) <= lam:
        ell += 1
    return float(lambda_ell(ell) - lam)


# --- sphere at infinity ------------------------------------------------------

def _chi_field(chi: SpectralField, lam: float) -> np.ndarray:
    l_max = chi.l_max
    vals = _synth(chi.coeffs, l_max)
    if vals.min() <= 0.0:
        raise PositivityViolation("chi must stay positive")
    lap = _synth(laplacian_eigenvalues(l_max) * chi.coeffs, l_max)
    g = project(vals ** 2 * lap + 0.5 * lam * vals ** 3, l_max)
    return g - float(g @ chi.coeffs) * chi.coeffs


def sphere_at_infinity_step(chi: SpectralField, dtau: float, lam: float = 2.0,
                            method: str = "euler") -> SpectralField:
    """One step of χ_τ = χ²Δχ + (λ/2)χ³ - ⟨χ²Δχ + (λ/2)χ³, χ⟩χ, then renormalized."""
    if abs(chi.norm() - 1.0) > 1e-10:
        raise ValueError("chi must have unit L2 norm")
    k1 = _chi_field(chi, lam)
    if method == "euler":
        c = chi.coeffs + dtau * k1
    elif method == "heun":
        pred = SpectralField(chi.l_max, chi.coeffs + dtau * k1)
        pred = pred * (1.0 / pred.norm())
        c = chi.coeffs + 0.5 * dtau * (k1 + _chi_field(pred, lam))
    else:
        raise ValueError(method)
    out = SpectralField(chi.l_max, c / np.linalg.norm(c))
    if _synth(out.coeffs, out.l_max).min() <= 0.0:
        raise PositivityViolation("chi lost positivity")
    return out
