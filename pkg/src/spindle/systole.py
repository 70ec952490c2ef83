"""Closed geodesics up to a length cutoff, systolic ratios and bound verdicts.

Besides the equators and their iterates, every closed geodesic meets the
Birkhoff annulus.  A point with coordinate ``eta`` closes after ``q``
returns exactly when ``q (F'(eta) + alpha L / 2)`` is a multiple of ``L``;
its length is then ``q tau(eta)`` and its total winding ``q W(eta)``.
Rotations give each such orbit an S^1 worth of companions.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import CutoffTooSmall, GridTooCoarse
from .flow import EventKind, PhasePoint, integrate
from .genfun import AllCritical, GeneratingFunction, IntegralEvaluator, critical_points
from .measure import VolumeReport
from .profile import MetricProfile, OrbifoldSignature
from .topology import (HomotopyClass, class_of_winding, divisors, in_subgroup_of_order,
                       min_iterate_in_subgroup)

AT_BOUND_TOL = 1e-4
WINDING_GATE = 1e-6
CLOSURE_TOL = 1e-6
MAX_REFINE = 40
ZERO_BAND = 1e-9  # |F' - level| below this (times L) counts as on the level


class GeodesicKind(str, enum.Enum):
    EQUATOR_ITERATE = "EquatorIterate"
    MERIDIAN = "Meridian"
    OSCILLATING = "Oscillating"


class Verdict(str, enum.Enum):
    BELOW_BOUND = "BelowBound"
    AT_BOUND = "AtBound"
    VIOLATION = "Violation"


@dataclass(frozen=True)
class ClosedGeodesic:
    kind: GeodesicKind
    eta: float | None
    q: int
    length: float
    total_winding: int
    homotopy: HomotopyClass
    family: bool
    iterate: int = 1
    equator_s: float | None = None
    closure_residual: float = math.nan
    class_from_limit: bool = False  # meridian: class assigned from the limiting winding

    @property
    def label(self) -> str:
        if self.kind is GeodesicKind.EQUATOR_ITERATE:
            return f"EquatorIterate({self.iterate})"
        return self.kind.value


def default_cutoff(p: MetricProfile) -> float:
    return 3.0 * p.signature.order * p.reference_equator.length


def default_qmax(sig: OrbifoldSignature) -> int:
    return 2 * (2 - sig.alpha)


def closure_residual(p: MetricProfile, eta: float, length: float) -> float:
    """Phase distance between the start on the annulus and the state after ``length``."""
    s0 = p.reference_equator.s
    x0 = PhasePoint(0.0, math.acos(-eta), s0)
    traj = integrate(p, x0, length)
    if any(kind is EventKind.TRUNCATED for _, kind in traj.events):
        return math.inf
    th, be, s = traj.states[-1]
    wrap = lambda a: abs((a + math.pi) % (2 * math.pi) - math.pi)  # noqa: E731
    return max(wrap(th - x0.theta), wrap(be - x0.beta), abs(s - s0))


def _refined_nodes(ev, nodes: list[float], max_jump: float, cutoff: float) -> tuple[np.ndarray, np.ndarray]:
    """Bisect until neighbouring F' values differ by at most ``max_jump``.

    Intervals on which every orbit is longer than ``cutoff`` are left alone,
    which lets F' blow up next to a degenerate (neck) equator.
    """
    xs = sorted(set(nodes))
    fp = {x: ev.Fp(x) for x in xs}
    work = list(zip(xs[:-1], xs[1:], [0] * (len(xs) - 1)))
    while work:
        a, b, depth = work.pop()
        if abs(fp[b] - fp[a]) <= max_jump:
            continue
        if min(ev.tau(a), ev.tau(b)) > cutoff:
            continue
        if depth >= MAX_REFINE:
            raise GridTooCoarse(
                f"F' jumps by {abs(fp[b] - fp[a]):.3g} > {max_jump:.3g} on [{a:.12g}, {b:.12g}] "
                "after refinement"
            )
        c = 0.5 * (a + b)
        fp[c] = ev.Fp(c)
        work += [(a, c, depth + 1), (c, b, depth + 1)]
    keys = sorted(fp)
    return np.array(keys), np.array([fp[k] for k in keys])


def _equator_iterates(p: MetricProfile, cutoff: float) -> list[ClosedGeodesic]:
    sig = p.signature
    out = []
    for eq in p.equators:
        i = 1
        while i * eq.length <= cutoff * (1 + 1e-12):
            out.append(ClosedGeodesic(GeodesicKind.EQUATOR_ITERATE, None, 1, i * eq.length, i,
                                      class_of_winding(i, sig), False, iterate=i, equator_s=eq.s,
                                      closure_residual=0.0))
            i += 1
    return out


def enumerate_closed(p: MetricProfile, G: GeneratingFunction, evaluator=None,
                     cutoff: float | None = None, q_max: int | None = None,
                     verify: bool = True) -> list[ClosedGeodesic]:
    """Closed geodesics of length at most ``cutoff``, sorted by length.

    Orbits are counted once per geometric curve: roots are taken on the
    southward half ``eta <= 0`` of the annulus (positive winding), and each
    ``(p, q)`` is used in lowest terms only.
    """
    sig = p.signature
    ev = evaluator or G.evaluator or IntegralEvaluator(p)
    L, alpha, order = G.L, sig.alpha, sig.order
    cutoff = default_cutoff(p) if cutoff is None else cutoff
    q_max = default_qmax(sig) if q_max is None else q_max
    if q_max < 1 + alpha:
        raise ValueError(f"q_max must be at least {1 + alpha}")
    out = _equator_iterates(p, cutoff)

    meridian_len = (1 + alpha) * 2.0 * p.M
    if meridian_len <= cutoff * (1 + 1e-12):
        w = (1 + alpha) * order // 2
        out.append(ClosedGeodesic(GeodesicKind.MERIDIAN, 0.0, 1 + alpha, meridian_len, w,
                                  class_of_winding(w, sig), True, closure_residual=0.0,
                                  class_from_limit=True))

    crit = critical_points(G, ev)
    if isinstance(crit, AllCritical):
        # every orbit closes after 1 + alpha returns
        length = (1 + alpha) * crit.mu
        w = (1 + alpha) * order // 2
        if length <= cutoff * (1 + 1e-12):
            res = closure_residual(p, -0.5, length) if verify else math.nan
            out.append(ClosedGeodesic(GeodesicKind.OSCILLATING, None, 1 + alpha, length, w,
                                      class_of_winding(w, sig), True, closure_residual=res))
        return sorted(out, key=lambda g: (g.length, g.label))

    nodes = [float(e) for e, f in zip(G.eta_grid, G.Fp) if -1.0 <= e <= 0.0 and np.isfinite(f)]
    xs, fps = _refined_nodes(ev, nodes, L / (2 * q_max), cutoff)
    lo_fp, hi_fp = float(np.min(fps)), float(np.max(fps))
    seen = set()
    for q in range(1, q_max + 1):
        p_lo = math.ceil(q * (lo_fp / L + alpha / 2))
        p_hi = math.floor(q * (hi_fp / L + alpha / 2))
        for pn in range(p_lo, p_hi + 1):
            if math.gcd(pn, q) != 1:
                continue
            level = pn * L / q - alpha * L / 2
            g = fps - level
            # F' sits on a level over whole intervals when orbits there never
            # meet the perturbation; those are families of equal length
            g[np.abs(g) <= ZERO_BAND * L] = 0.0
            roots = [float(x) for x, v in zip(xs, g) if v == 0.0]
            for i in np.nonzero(g[:-1] * g[1:] < 0)[0]:
                roots.append(brentq(lambda e: ev.Fp(e) - level, xs[i], xs[i + 1], xtol=1e-13))
            for eta in roots:
                if eta == 0.0 or abs(eta) >= 1.0 - 1e-12:
                    continue  # meridian and equator, handled above
                length = q * ev.tau(eta)
                if not length <= cutoff * (1 + 1e-12):
                    continue
                w_real = q * ev.winding(eta)
                w = round(w_real)
                if abs(w_real - w) > WINDING_GATE:
                    continue
                key = (q, w, round(length / L, 9))
                if key in seen:
                    continue
                res = closure_residual(p, eta, length) if verify else math.nan
                if verify and res > CLOSURE_TOL:
                    continue
                seen.add(key)
                out.append(ClosedGeodesic(GeodesicKind.OSCILLATING, eta, q, length, w,
                                          class_of_winding(w, sig), True, closure_residual=res))
    return sorted(out, key=lambda g: (g.length, g.label))


def l_min_in_class(geodesics: list[ClosedGeodesic], sig: OrbifoldSignature, k: int,
                   cutoff: float | None = None) -> float:
    """Shortest length (iterates included) whose class lies in the subgroup of order ``k``."""
    best = math.inf
    for g in geodesics:
        j = min_iterate_in_subgroup(g.homotopy, k)
        best = min(best, j * g.length)
    if cutoff is not None and best > cutoff * (1 + 1e-12):
        raise CutoffTooSmall(f"shortest candidate {best:.6g} exceeds the cutoff {cutoff:.6g}")
    if not math.isfinite(best):
        raise CutoffTooSmall("no closed geodesic enumerated")
    return best


def tau_sequence(geodesics: list[ClosedGeodesic], count: int) -> list[float]:
    """``tau_1 <= ... <= tau_count``; an S^1-family fills every later slot at its length."""
    fam = min((g.length for g in geodesics if g.family), default=math.inf)
    isolated = sorted(g.length for g in geodesics if not g.family)
    seq = [x for x in isolated if x < fam][:count]
    if len(seq) < count:
        if not math.isfinite(fam):
            raise CutoffTooSmall(f"only {len(seq)} lengths below the cutoff, {count} requested")
        seq += [fam] * (count - len(seq))
    return seq


def verdict(ratio: float, bound: float, tol: float = AT_BOUND_TOL) -> Verdict:
    if abs(ratio - bound) <= tol * bound:
        return Verdict.AT_BOUND
    return Verdict.BELOW_BOUND if ratio < bound else Verdict.VIOLATION


@dataclass
class SystoleReport:
    signature: OrbifoldSignature
    area: float
    L: float
    volume: VolumeReport | None
    geodesics: list[ClosedGeodesic]
    l_min: float
    l_min_contr: float
    l_min_k: dict[int, float]
    tau_seq: list[float]
    rho_contr: float
    rho_contr_k: dict[int, float]
    rho_periodspec: float
    rho_sys: float
    s3_lift: float
    bounds: dict[str, float]
    verdicts: dict[str, Verdict]
    margins: dict[str, float] = field(default_factory=dict)
    cutoff: float = math.nan
    q_max: int = 0

    @property
    def period_index(self) -> int:
        return self.signature.period_index

    @property
    def rho_sys_k(self) -> dict[int, float]:
        """Same numbers as ``rho_contr_k``: ratios restricted to the subgroup of order k."""
        return self.rho_contr_k

    @property
    def ok(self) -> bool:
        return all(v is not Verdict.VIOLATION for v in self.verdicts.values())


def ratios(p: MetricProfile, area: float, geodesics: list[ClosedGeodesic],
           volume: VolumeReport | None = None, cutoff: float | None = None,
           q_max: int = 0, tol: float = AT_BOUND_TOL) -> SystoleReport:
    """Systolic ratios and verdicts against the three upper bounds."""
    sig = p.signature
    order, alpha = sig.order, sig.alpha
    cutoff = default_cutoff(p) if cutoff is None else cutoff
    l_k = {k: l_min_in_class(geodesics, sig, k, cutoff) for k in divisors(order)}
    N = sig.period_index
    seq = tau_sequence(geodesics, N)
    l_min = min(g.length for g in geodesics)
    rho_k = {k: v * v / area for k, v in l_k.items()}
    rho_contr = rho_k[1]
    rho_period = seq[-1] ** 2 / area
    bounds = {"A": 2.0 * math.pi * order, "C": 2.0 * math.pi * order / (2 - alpha) ** 2}
    values = {"A": rho_contr, "C": rho_period}
    if order % 2 == 0:
        bounds["B"] = order * math.pi / 2.0
        values["B"] = rho_k[2]
    verdicts = {key: verdict(values[key], bounds[key], tol) for key in sorted(bounds)}
    margins = {key: (bounds[key] - values[key]) / bounds[key] for key in sorted(bounds)}
    return SystoleReport(sig, area, p.reference_equator.length, volume, geodesics, l_min, l_k[1], l_k,
                         seq, rho_contr, rho_k, rho_period, l_min * l_min / area,
                         rho_contr / (2.0 * math.pi * order), bounds, verdicts, margins, cutoff, q_max)


def write_geodesics_csv(path, geodesics: list[ClosedGeodesic]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "eta", "q", "length", "total_winding", "class", "family", "closure_residual"])
        for g in geodesics:
            w.writerow([g.label, "" if g.eta is None else f"{g.eta:.17g}", g.q, f"{g.length:.17g}",
                        g.total_winding, g.homotopy.value, int(g.family), f"{g.closure_residual:.17g}"])


def write_tau_csv(path, seq: list[float]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "tau_k"])
        for i, t in enumerate(seq, 1):
            w.writerow([i, f"{t:.17g}"])


def write_ratios_csv(path, rep: SystoleReport) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["quantity", "value", "bound", "verdict"])
        w.writerow(["rho_contr", f"{rep.rho_contr:.17g}", f"{rep.bounds['A']:.17g}", rep.verdicts["A"].value])
        if "B" in rep.bounds:
            w.writerow(["rho_contr_2", f"{rep.rho_contr_k[2]:.17g}", f"{rep.bounds['B']:.17g}",
                        rep.verdicts["B"].value])
        w.writerow([f"rho_{rep.period_index}", f"{rep.rho_periodspec:.17g}", f"{rep.bounds['C']:.17g}",
                    rep.verdicts["C"].value])
        for k, v in sorted(rep.rho_contr_k.items()):
            w.writerow([f"rho_contr_k{k}", f"{v:.17g}", "", ""])
        w.writerow(["rho_sys", f"{rep.rho_sys:.17g}", "", ""])
        w.writerow(["s3_lift", f"{rep.s3_lift:.17g}", "", ""])
