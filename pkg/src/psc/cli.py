"""Command-line entry point: ``psc <subcommand> [options]``.

Exit codes: 0 success, 1 a verification row or required experiment failed,
2 configuration error.  JSON floats are written in shortest round-trip form and
CSV floats with 17 significant digits.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .errors import PSCError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


@dataclass
class RunConfig:
    l_max: int = 16
    newton_tol: float = 1e-11
    zero_tol: float = 1e-6
    classify_tol: float = 1e-6
    s_max: float = 0.1
    ds: float = 0.01
    lam_offset: float = 0.3
    out: str = "."
    seed: int = 0

    def validate(self, table: bool = False) -> None:
        for name in ("newton_tol", "zero_tol", "classify_tol", "ds", "lam_offset"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if table and self.l_max < 8:
            raise ValueError("l_max must be at least 8 for table commands")

    @classmethod
    def load(cls, path: str | None, overrides: dict) -> "RunConfig":
        data = {}
        if path:
            with open(path) as fh:
                data = json.load(fh)
            unknown = set(data) - {f.name for f in fields(cls)}
            if unknown:
                raise ValueError(f"unknown config keys: {sorted(unknown)}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("PSC_THREADS", "1")))
    except ValueError:
        return 1


def _num(x):
    """JSON-ready value; floats pass through exactly, non-finite ones as strings."""
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return str(x)
        return float(f"{x:.17g}")
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, dict):
        return {k: _num(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_num(v) for v in x]
    return x


def _dump(obj, path: Path | None) -> None:
    text = json.dumps(_num(obj), indent=2, sort_keys=True)
    if path is None:
        print(text)
    else:
        path.write_text(text + "\n")


# --- SVG ------------------------------------------------------------------------

def emit_svg(branches: list[dict], path, width: int = 480, height: int = 360,
             title: str = "") -> None:
    """Plot s = ⟨e_K, v⟩ against λ.  Each branch: {label, lam, s, index (optional)}."""
    pad = 50
    lam_all = [x for b in branches for x in b["lam"]]
    s_all = [x for b in branches for x in b["s"]]
    lo_l, hi_l = (min(lam_all), max(lam_all)) if lam_all else (0.0, 1.0)
    lo_s, hi_s = (min(s_all), max(s_all)) if s_all else (-1.0, 1.0)
    if hi_l - lo_l < 1e-12:
        lo_l, hi_l = lo_l - 0.5, hi_l + 0.5
    if hi_s - lo_s < 1e-12:
        lo_s, hi_s = lo_s - 0.5, hi_s + 0.5

    def X(l):
        return pad + (l - lo_l) / (hi_l - lo_l) * (width - 2 * pad)

    def Y(s):
        return height - pad - (s - lo_s) / (hi_s - lo_s) * (height - 2 * pad)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
           f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
           f'<text x="{width / 2}" y="{height - 12}" text-anchor="middle" font-size="12">λ</text>',
           f'<text x="14" y="{height / 2}" font-size="12">s</text>',
           f'<text x="{pad}" y="{height - pad + 15}" font-size="10">{lo_l:.4g}</text>',
           f'<text x="{width - pad}" y="{height - pad + 15}" text-anchor="end" font-size="10">{hi_l:.4g}</text>',
           f'<text x="{pad - 4}" y="{pad}" text-anchor="end" font-size="10">{hi_s:.3g}</text>',
           f'<text x="{pad - 4}" y="{height - pad}" text-anchor="end" font-size="10">{lo_s:.3g}</text>']
    if title:
        out.append(f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="13">{title}</text>')
    if lo_s <= 0.0 <= hi_s:
        out.append(f'<line x1="{pad}" y1="{Y(0):.2f}" x2="{width - pad}" y2="{Y(0):.2f}" '
                   'stroke="gray" stroke-dasharray="4 3"/>')
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]
    for k, b in enumerate(branches):
        pts = " ".join(f"{X(l):.2f},{Y(s):.2f}" for l, s in zip(b["lam"], b["s"]))
        col = colors[k % len(colors)]
        out.append(f'<polyline points="{pts}" fill="none" stroke="{col}" stroke-width="1.5"/>')
        if len(b["lam"]):
            label = b["label"] + (f" (i={b['index']})" if b.get("index") is not None else "")
            out.append(f'<text x="{X(b["lam"][-1]) + 3:.2f}" y="{Y(b["s"][-1]):.2f}" '
                       f'font-size="11" fill="{col}">{label}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")


# --- subcommands -------------------------------------------------------------------

def _table2_fit_row(args):
    from .bifurcation import TABLE2
    from .equilibrium import continue_branch
    name, ell, l_max, s_max, ds = args
    br = continue_branch(name, ell, s_max, ds, l_max=l_max, s_min=-s_max)
    lp, lpp = br.fit(s_max)
    kind, ref = TABLE2[(name, ell)]
    return {"group": name, "ell": ell, "kind": kind, "reference": ref,
            "numeric": lp if kind == "lambda_prime" else lpp}


def _table3_row(args):
    from .stability import table3_row
    ell, name, side, l_max, zero_tol = args
    return table3_row(ell, name, side, l_max=l_max, zero_tol=zero_tol)


def _map(fn, items):
    n = _threads()
    if n == 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def cmd_verify_tables(cfg: RunConfig, ns) -> int:
    from .bifurcation import TABLE2, classify_branch
    from .stability import TABLE3
    cfg.validate(table=True)
    rows = []
    for (name, ell), (kind, ref) in TABLE2.items():
        rep = classify_branch(ell, name)
        got = rep.lambda_prime if kind == "lambda_prime" else rep.lambda_second
        dev = abs(got - ref) / abs(ref)
        rows.append({"table": 2, "check": "closed_form", "group": name, "ell": ell, "kind": kind,
                     "reference": ref, "computed": got, "deviation": dev, "tolerance": 1e-10,
                     "pass": dev <= 1e-10})
    fits = _map(_table2_fit_row, [(n, l, cfg.l_max, cfg.s_max, cfg.ds) for (n, l) in TABLE2])
    for r in fits:
        dev = abs(r["numeric"] - r["reference"]) / abs(r["reference"])
        rows.append({"table": 2, "check": "branch_fit", "group": r["group"], "ell": r["ell"],
                     "kind": r["kind"], "reference": r["reference"], "computed": r["numeric"],
                     "deviation": dev, "tolerance": 1e-2, "pass": dev <= 1e-2})
    t3 = _map(_table3_row, [(l, g, sd, cfg.l_max, cfg.zero_tol) for (l, g, sd, _) in TABLE3])
    for r in t3:
        ok = r["computed_i"] == r["expected_i"] and r["n_zero"] == r["orbit_dim"]
        rows.append({"table": 3, "check": "morse_index", **r, "pass": ok})
    failed = [r for r in rows if not r["pass"]]
    report = {"l_max": cfg.l_max, "rows": rows, "n_rows": len(rows), "n_failed": len(failed),
              "failed": [{k: r[k] for k in ("table", "check", "group", "ell")} for r in failed]}
    _dump(report, Path(ns.report) if ns.report else None)
    return EXIT_OK if not failed else EXIT_FAIL


def cmd_branch(cfg: RunConfig, ns) -> int:
    from .equilibrium import continue_branch
    from .symmetry import DISPLAY
    cfg.validate()
    br = continue_branch(ns.group, ns.ell, cfg.s_max, cfg.ds, l_max=cfg.l_max, s_min=-cfg.s_max,
                         tol=cfg.newton_tol)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"branch_{ns.group}_{ns.ell}"
    br.to_csv(out / f"{stem}.csv")
    emit_svg([{"label": DISPLAY[ns.group], "lam": list(br.lam), "s": list(br.s)}],
             out / f"{stem}.svg", title=f"ℓ = {ns.ell}")
    lp, lpp = br.fit(min(cfg.s_max, 0.1))
    _dump({"group": ns.group, "ell": ns.ell, "lambda_prime_fit": lp, "lambda_second_fit": lpp,
           "failed_at": br.failed_at, "n_points": len(br.points)}, None)
    return EXIT_OK


def cmd_coeffs(cfg: RunConfig, ns) -> int:
    from .bifurcation import ALPHA_REF, BETA_REF, all_reports, fit_cubic_equivariant
    a, b, res = fit_cubic_equivariant(rows="printed")
    a2, b2, res2 = fit_cubic_equivariant(rows="rescaled")
    _dump({"reports": [r.to_dict() for r in all_reports()],
           "cubic_fit": {"printed_rows": {"alpha": a, "beta": b, "residual": res},
                         "rescaled_rows": {"alpha": a2, "beta": b2, "residual": res2},
                         "reference": {"alpha": ALPHA_REF, "beta": BETA_REF}}}, None)
    return EXIT_OK


def cmd_heteroclinic(cfg: RunConfig, ns) -> int:
    from .dynamics import TABLE4, heteroclinic_experiment
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    results, required_ok = [], True
    l_max = ns.lmax_flow
    for ell, side, src, tgt in TABLE4:
        if ell != ns.ell or side != ns.side:
            continue
        conns = heteroclinic_experiment(ell, side, src, tgt, amplitude=ns.amplitude,
                                        lam_offset=cfg.lam_offset, l_max=l_max,
                                        tol=cfg.classify_tol)
        realized = any(c.realized for c in conns)
        if "0" in (src, tgt) and not realized:
            required_ok = False
        for k, c in enumerate(conns):
            path = out / f"heteroclinic_{ell}_{side}_{src}_{tgt}_{k}.csv"
            c.record.to_csv(path)
            results.append({"ell": ell, "side": side, "source": src, "expected_target": tgt,
                            "reached": c.target, "realized": c.realized, "distance": c.distance,
                            "lambda": c.lam, "status": "Realized" if c.realized else "Unclassified",
                            "csv": path.name, **c.details})
    _dump({"connections": results}, None)
    return EXIT_OK if required_ok else EXIT_FAIL


def cmd_simulate(cfg: RunConfig, ns) -> int:
    from .dynamics import integrate_rescaled
    from .geometry import isotropic_datum, simulate_original
    from .sphere import SpectralField
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    lam = ns.lam
    if ns.mode == "original":
        w0 = isotropic_datum(lam, ns.r_start, ns.lmax_flow)
        if not ns.isotropic:
            rng = np.random.default_rng(cfg.seed)
            c = w0.coeffs + ns.amplitude * w0.coeffs[0] * rng.standard_normal(w0.coeffs.size)
            w0 = SpectralField(w0.l_max, c)
        rec = simulate_original(w0, lam, ns.r_start)
        rec.to_csv(out / "simulate_original.csv")
        _dump({"mode": "original", "lambda": lam, "r_blowup": rec.diagnostics.get("r_blowup"),
               "events": rec.events}, None)
        return EXIT_OK
    rng = np.random.default_rng(cfg.seed)
    c = np.zeros((ns.lmax_flow + 1) ** 2)
    if not ns.isotropic:
        c[: min(c.size, 25)] = rng.standard_normal(min(c.size, 25))
        c *= ns.amplitude / np.linalg.norm(c)
    else:
        c[0] = ns.amplitude
    rec = integrate_rescaled(SpectralField(ns.lmax_flow, c), lam, ns.t_end, variant=ns.variant)
    rec.to_csv(out / "simulate_rescaled.csv")
    rec.events_jsonl(out / "simulate_rescaled_events.jsonl")
    inc = rec.energy_increments()
    _dump({"mode": "rescaled", "lambda": lam, "variant": ns.variant, "events": rec.events,
           "max_energy_increment": float(inc.max()) if inc.size else 0.0}, None)
    return EXIT_OK


def cmd_geometry(cfg: RunConfig, ns) -> int:
    from .equilibrium import branch_equilibrium
    from .geometry import (admissible_across_center, center_cusp_check, metric_profile,
                           minimal_surface_exponent, minimal_surface_index)
    from .symmetry import IsotropyDescriptor
    try:
        name, ell, s = ns.profile.split(":")
        ell, s = int(ell), float(s)
    except ValueError as exc:
        raise ValueError("--profile must be GROUP:ELL:S, e.g. O2m:1:0.2") from exc
    K = IsotropyDescriptor.get(name, ell)
    eq = branch_equilibrium(K, ell, s, l_max=cfg.l_max)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    prof = metric_profile(eq.v, eq.lam)
    prof.to_csv(out / f"metric_{name}_{ell}.csv")
    idx = None
    try:
        idx = minimal_surface_index(eq.lam)
    except PSCError:
        pass
    _dump({"group": name, "ell": ell, "s": s, "lambda": eq.lam,
           "center_cusp_exponent": center_cusp_check(eq.lam),
           "mean_curvature_exponent": minimal_surface_exponent(eq.v, eq.lam),
           "min_g_rr": float(prof.g_rr.min()), "minimal_surface_index": idx,
           "admissible_across_center": admissible_across_center(K)}, None)
    return EXIT_OK


def cmd_lattice(cfg: RunConfig, ns) -> int:
    from .symmetry import lattice_table
    rows = lattice_table(4)
    _dump({"rows": rows, "all_match": all(r["expected_dim"] == r["computed_dim"] for r in rows)}, None)
    return EXIT_OK if all(r["expected_dim"] == r["computed_dim"] for r in rows) else EXIT_FAIL


# --- parser ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    # shared flags, accepted before or after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON RunConfig file; flags override it")
    common.add_argument("--lmax", dest="l_max", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="psc", parents=[common],
                                description="Self-similar blow-up of the parabolic scalar curvature "
                                "equation on the round sphere.")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify-tables", parents=[common],
                       help="regress the bifurcation and Morse index tables")
    v.add_argument("--report", help="write the JSON report here instead of stdout")

    b = sub.add_parser("branch", parents=[common], help="continue one bifurcation branch")
    b.add_argument("--group", required=True)
    b.add_argument("--ell", type=int, required=True)
    b.add_argument("--smax", dest="s_max", type=float)
    b.add_argument("--ds", type=float)

    sub.add_parser("coeffs", parents=[common], help="bifurcation reports and the cubic coefficient fit")

    h = sub.add_parser("heteroclinic", parents=[common], help="connection experiments around λ_ℓ")
    h.add_argument("--ell", type=int, required=True, choices=[1, 2, 3, 4])
    h.add_argument("--side", required=True, choices=["below", "above"])
    h.add_argument("--amplitude", type=float, default=1e-3)
    h.add_argument("--lam-offset", dest="lam_offset", type=float)
    h.add_argument("--flow-lmax", dest="lmax_flow", type=int, default=10)

    s = sub.add_parser("simulate", parents=[common], help="integrate the rescaled or the original equation")
    s.add_argument("--mode", choices=["rescaled", "original"], default="rescaled")
    s.add_argument("--lambda", dest="lam", type=float, default=2.0)
    s.add_argument("--isotropic", action="store_true")
    s.add_argument("--amplitude", type=float, default=1e-2)
    s.add_argument("--variant", choices=["quasilinear", "semilinear"], default="quasilinear")
    s.add_argument("--t-end", dest="t_end", type=float, default=10.0)
    s.add_argument("--r-start", dest="r_start", type=float, default=0.5)
    s.add_argument("--flow-lmax", dest="lmax_flow", type=int, default=8)

    g = sub.add_parser("geometry", parents=[common], help="metric profile of a branch equilibrium")
    g.add_argument("--profile", required=True, help="GROUP:ELL:S, e.g. O2m:1:0.2")

    sub.add_parser("lattice", parents=[common], help="fix-space dimensions of the isotropy lattice")
    return p


COMMANDS = {"verify-tables": cmd_verify_tables, "branch": cmd_branch, "coeffs": cmd_coeffs,
            "heteroclinic": cmd_heteroclinic, "simulate": cmd_simulate, "geometry": cmd_geometry,
            "lattice": cmd_lattice}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    overrides = {"l_max": getattr(ns, "l_max", None), "out": getattr(ns, "out", None),
                 "seed": getattr(ns, "seed", None),
                 "s_max": getattr(ns, "s_max", None), "ds": getattr(ns, "ds", None),
                 "lam_offset": getattr(ns, "lam_offset", None)}
    try:
        cfg = RunConfig.load(getattr(ns, "config", None), overrides)
        cfg.validate()
    except (OSError, ValueError, TypeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[ns.command](cfg, ns)
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PSCError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
