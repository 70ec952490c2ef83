"""Command-line front end: ``spindle {analyze,geodesic,besse-gen,sweep,verify}``.

Exit codes: 0 when every verdict is BelowBound or AtBound (or every check
passes), 1 on a bound violation or a failed check, 2 on a configuration or
numerical error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import annulus, genfun, systole
from .config import CSV_KINDS, RunConfig, build_profile, load, parse, set_path
from .errors import ConfigParse, SpindleError
from .flow import ODE_ATOL, ODE_RTOL, PhasePoint, integrate
from .pipeline import Analysis, analyze
from .profile import BesseProfile, MetricProfile

EXIT_OK, EXIT_VIOLATION, EXIT_ERROR = 0, 1, 2


def _common() -> argparse.ArgumentParser:
    c = argparse.ArgumentParser(add_help=False)
    c.add_argument("--config", type=Path, help="YAML run configuration")
    c.add_argument("--out", type=Path, help="output directory (overrides output.out_dir)")
    c.add_argument("--jobs", type=int, default=None, help="worker processes (default: CPU count)")
    c.add_argument("--cutoff", type=float, default=None, help="length cutoff for closed geodesics")
    c.add_argument("--qmax", type=int, default=None, help="largest number of returns per orbit")
    return c


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = argparse.ArgumentParser(prog="spindle", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="full pipeline on one profile")
    g = sub.add_parser("geodesic", parents=[common], help="trajectory CSV of one geodesic")
    g.add_argument("--eta", type=float, help="annulus coordinate at the reference equator")
    g.add_argument("--t-max", type=float, help="arclength to integrate (default 10 L)")
    g.add_argument("--n-samples", type=int, help="uniform samples instead of solver steps")
    b = sub.add_parser("besse-gen", parents=[common], help="sampled r(s) of a Besse profile")
    b.add_argument("--n-samples", type=int, default=1001)
    s = sub.add_parser("sweep", parents=[common], help="analyze across a one-parameter family")
    s.add_argument("--param", help="dotted config key, e.g. metric.eps")
    s.add_argument("--values", help="comma-separated values")
    s.add_argument("--with-returns", action="store_true", help="also run the return-map route")
    v = sub.add_parser("verify", parents=[common], help="acceptance battery on the built-in corpus")
    v.add_argument("--orbits", type=int, default=100, help="random orbits per profile for Clairaut drift")
    return ap


def _config(args) -> RunConfig:
    if args.command == "verify" and args.config is None:
        cfg = parse({"metric": {"type": "round"}})
    else:
        if args.config is None:
            raise ConfigParse("--config is required")
        cfg = load(args.config)
    if args.out is not None:
        cfg.out_dir = args.out
    if args.cutoff is not None:
        if not args.cutoff > 0:
            raise ConfigParse("--cutoff must be positive")
        cfg.numerics.length_cutoff = args.cutoff
    if args.qmax is not None:
        if args.qmax < 1:
            raise ConfigParse("--qmax must be a positive integer")
        cfg.numerics.q_max = args.qmax
    jobs = args.jobs if args.jobs is not None else (os.cpu_count() or 1)
    if jobs < 1:
        raise ConfigParse("--jobs must be positive")
    cfg.numerics.jobs = jobs
    return cfg


def _fmt(x) -> str:
    return f"{x:.17g}"


# -- analyze -----------------------------------------------------------------------

def tolerance_ladder(a: Analysis) -> list[tuple[str, str]]:
    num, rep = a.numerics, a.report
    return [
        ("eta grid size", str(num.eta_grid_n)),
        ("return map ODE rtol / atol", f"{num.ode_rel_tol:.1e} / {num.ode_abs_tol:.1e}"),
        ("trajectory ODE rtol / atol", f"{ODE_RTOL:.1e} / {ODE_ATOL:.1e}"),
        ("quadrature rtol", f"{num.quad_rel_tol:.1e}"),
        ("return time cap", f"{num.time_cap_factor:g} (m+n) L"),
        ("flat F tolerance (variation / L)", f"{genfun.FLAT_TOL:.1e}"),
        ("winding integrality gate", f"{systole.WINDING_GATE:.1e}"),
        ("closure tolerance", f"{systole.CLOSURE_TOL:.1e}"),
        ("plateau band (times L)", f"{systole.ZERO_BAND:.1e}"),
        ("AtBound relative tolerance", f"{systole.AT_BOUND_TOL:.1e}"),
        ("length cutoff", f"{rep.cutoff:.12g}"),
        ("q_max", str(rep.q_max)),
    ]


def report_text(a: Analysis) -> str:
    p, rep, vol = a.profile, a.report, a.volume
    sig = p.signature
    G = a.G_integral
    lines = ["spindle analysis report", "=======================", ""]
    lines.append(f"profile          {p.describe()}")
    lines.append(f"signature        (m, n) = ({sig.m}, {sig.n}), alpha = {sig.alpha}, order = {sig.order}")
    lines.append(f"M                {p.M:.15g}")
    for e in p.equators:
        mark = "  <- reference" if e == p.reference_equator else ""
        lines.append(f"equator          s = {e.s:.15g}, r = {e.radius:.15g}{mark}")
    lines.append(f"L                {rep.L:.15g}")
    lines += ["", "measure", "-------"]
    lines.append(f"area             {vol.area:.15g}")
    lines.append(f"vol direct       {vol.vol_direct:.15g}")
    lines.append(f"vol decomposed   {vol.vol_decomposed:.15g}  (rel mismatch {vol.rel_mismatch:.3e})")
    lines.append(f"vol 2L int tau   {vol.saturated_part:.15g}")
    lines.append(f"Gamma term       {vol.gamma_part:.15g}")
    lines += ["", "generating function", "-------------------"]
    lines.append(f"min F / L        {np.nanmin(G.F) / G.L:.15g}")
    lines.append(f"max F / L        {np.nanmax(G.F) / G.L:.15g}")
    lines.append(f"spread / L       {G.spread():.3e}")
    lines.append(f"F(1)             {G.endpoint_value:.15g}")
    lines.append(f"F' check (FD)    {G.fd_mismatch:.3e}")
    if a.G_returns is not None:
        n_cens = sum(r.censored for r in a.returns)
        lines.append(f"route mismatch   {a.route_mismatch():.3e} L  ({n_cens} censored returns)")
    if isinstance(a.critical, genfun.AllCritical):
        lines.append(f"critical points  all (F = {a.critical.mu:.15g})")
    else:
        for c in a.critical:
            lines.append(f"critical point   eta = {c.eta0:.12g}, F = {c.mu:.15g}, {c.kind.value}")
    lines += ["", "closed geodesics (shortest 20)", "------------------------------"]
    lines.append(f"{'kind':<20}{'q':>3}{'length':>22}{'winding':>9}{'class':>7}  family")
    for g in rep.geodesics[:20]:
        lines.append(f"{g.label:<20}{g.q:>3}{g.length:>22.15g}{g.total_winding:>9}"
                     f"{g.homotopy.value:>7}  {'yes' if g.family else 'no'}")
    lines.append(f"({len(rep.geodesics)} enumerated up to the cutoff)")
    lines += ["", "lengths and ratios", "------------------"]
    lines.append(f"l_min            {rep.l_min:.15g}")
    lines.append(f"l_min,contr      {rep.l_min_contr:.15g}")
    for k, v in sorted(rep.l_min_k.items()):
        lines.append(f"l_min,k={k:<8} {v:.15g}   rho = {rep.rho_contr_k[k]:.15g}")
    lines.append("tau_k            " + ", ".join(f"{t:.12g}" for t in rep.tau_seq))
    lines.append(f"rho_sys          {rep.rho_sys:.15g}")
    lines.append(f"rho_contr / (2 pi (m+n))  {rep.s3_lift:.15g}")
    lines += ["", "verdicts", "--------"]
    names = {"A": "rho_contr", "B": "rho_contr,2", "C": f"rho_{rep.period_index}"}
    values = {"A": rep.rho_contr, "B": rep.rho_contr_k.get(2, math.nan), "C": rep.rho_periodspec}
    for key in sorted(rep.bounds):
        lines.append(f"{key}  {names[key]:<12} {values[key]:.15g}  bound {rep.bounds[key]:.15g}  "
                     f"margin {rep.margins[key]:+.3e}  {rep.verdicts[key].value}")
    lines += ["", "tolerance ladder", "----------------"]
    lines += [f"{k:<34}{v}" for k, v in tolerance_ladder(a)]
    return "\n".join(lines) + "\n"


def write_profile_csv(path, p: MetricProfile, n: int = 1001) -> None:
    s = np.linspace(0.0, p.M, n)
    r, dr = p.r(s), p.dr(s)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "r", "dr"])
        for row in zip(s, r, dr):
            w.writerow([_fmt(x) for x in row])


def write_outputs(a: Analysis, out: Path, emit) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(report_text(a))
    writers = {
        "returns": lambda f: annulus.write_returns_csv(f, a.returns),
        "genfun": lambda f: genfun.write_genfun_csv(f, a.G_integral),
        "critical": lambda f: genfun.write_critical_csv(f, a.critical),
        "geodesics": lambda f: systole.write_geodesics_csv(f, a.report.geodesics),
        "tau": lambda f: systole.write_tau_csv(f, a.report.tau_seq),
        "ratios": lambda f: systole.write_ratios_csv(f, a.report),
        "profile": lambda f: write_profile_csv(f, a.profile),
    }
    for kind in CSV_KINDS:
        if kind in emit:
            writers[kind](out / f"{kind}.csv")
    if "genfun" in emit and a.G_returns is not None:
        genfun.write_genfun_csv(out / "genfun_returns.csv", a.G_returns)


def cmd_analyze(cfg: RunConfig) -> int:
    a = analyze(cfg.profile(), cfg.numerics)
    write_outputs(a, cfg.out_dir, cfg.emit_csv)
    rep = a.report
    for key in sorted(rep.verdicts):
        print(f"{key}: {rep.verdicts[key].value} (margin {rep.margins[key]:+.3e})")
    print(f"report written to {cfg.out_dir / 'report.txt'}")
    return EXIT_OK if rep.ok else EXIT_VIOLATION


# -- geodesic ----------------------------------------------------------------------

def cmd_geodesic(cfg: RunConfig, eta=None, t_max=None, n_samples=None) -> int:
    p = cfg.profile()
    eq = p.reference_equator
    g = cfg.geodesic
    eta = float(g.get("eta", -0.5)) if eta is None else eta
    if not -1.0 <= eta <= 1.0:
        raise ConfigParse(f"eta must lie in [-1, 1], got {eta}")
    t_max = float(g.get("t_max", 10 * eq.length)) if t_max is None else t_max
    n_samples = g.get("n_samples") if n_samples is None else n_samples
    x0 = PhasePoint(0.0, math.acos(-eta), eq.s)
    tr = integrate(p, x0, t_max, n_samples=n_samples)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.out_dir / "geodesic.csv"
    k = p.r(tr.states[:, 2]) * np.cos(tr.states[:, 1])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "theta", "beta", "s", "K"])
        for t, (th, be, s), kk in zip(tr.times, tr.states, k):
            w.writerow([_fmt(t), _fmt(th), _fmt(be), _fmt(s), _fmt(kk)])
    print(f"{len(tr.times)} samples, Clairaut drift {tr.clairaut_drift:.3e}, written to {path}")
    return EXIT_OK


# -- besse-gen ---------------------------------------------------------------------

def cmd_besse_gen(cfg: RunConfig, n_samples: int = 1001) -> int:
    p = cfg.profile()
    if not isinstance(p, BesseProfile):
        raise ConfigParse("besse-gen needs metric.type = besse")
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.out_dir / "profile.csv"
    write_profile_csv(path, p, n_samples)
    print(f"M = {p.M:.15g}, L = {p.reference_equator.length:.15g}, written to {path}")
    return EXIT_OK


# -- sweep -------------------------------------------------------------------------

SWEEP_COLUMNS = ["param", "area", "l_min_contr", "rho_contr", "rho_contr_2", "rho_periodspec",
                 "margin_A", "margin_B", "margin_C", "ok"]


def _sweep_cell(task):
    doc, numerics, with_returns = task
    a = analyze(build_profile(doc["metric"]), numerics, with_returns=with_returns)
    rep = a.report
    return [rep.area, rep.l_min_contr, rep.rho_contr, rep.rho_contr_k.get(2, math.nan),
            rep.rho_periodspec, rep.margins.get("A", math.nan), rep.margins.get("B", math.nan),
            rep.margins.get("C", math.nan), rep.ok]


def cmd_sweep(cfg: RunConfig, param=None, values=None, with_returns=False) -> int:
    param = param or cfg.sweep.get("param")
    if values is not None:
        try:
            vals = [float(v) for v in values.split(",")]
        except ValueError:
            raise ConfigParse(f"--values must be comma-separated numbers, got {values!r}") from None
    else:
        vals = cfg.sweep.get("values")
    if not param or not vals:
        raise ConfigParse("sweep needs a param and a list of values")
    path = param.split(".")
    if path[0] != "metric":
        raise ConfigParse("sweep param must live under metric")
    tasks = []
    for v in vals:
        doc = copy.deepcopy(cfg.raw)
        set_path(doc, path, v)
        build_profile(doc["metric"])  # fail early on a bad cell
        tasks.append((doc, cfg.numerics, with_returns))
    if cfg.numerics.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.numerics.jobs) as ex:
            rows = list(ex.map(_sweep_cell, tasks))
    else:
        rows = [_sweep_cell(t) for t in tasks]
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    out = cfg.out_dir / "sweep.csv"
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        for v, row in zip(vals, rows):
            w.writerow([_fmt(float(v))] + [_fmt(x) for x in row[:-1]] + [int(row[-1])])
    print(f"{len(rows)} cells written to {out}")
    return EXIT_OK if all(r[-1] for r in rows) else EXIT_VIOLATION


# -- verify ------------------------------------------------------------------------

def cmd_verify(cfg: RunConfig, n_orbits: int = 100) -> int:
    from .checks import Battery, run_all

    rows = run_all(Battery(seed=cfg.seed), n_orbits=n_orbits)
    for r in rows:
        print(r.line())
    failed = sum(not r.passed for r in rows)
    print(f"{len(rows) - failed}/{len(rows)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_VIOLATION


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
        if args.command == "analyze":
            return cmd_analyze(cfg)
        if args.command == "geodesic":
            return cmd_geodesic(cfg, args.eta, args.t_max, args.n_samples)
        if args.command == "besse-gen":
            return cmd_besse_gen(cfg, args.n_samples)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.param, args.values, args.with_returns)
        return cmd_verify(cfg, args.orbits)
    except SpindleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
