"""Area and contact volume, computed directly and through the generating function."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import brentq

from .genfun import GeneratingFunction, IntegralEvaluator
from .profile import MetricProfile
from .quadrature import gk_integrate

AREA_RTOL = 1e-12
VOL_RTOL = 1e-10


@dataclass(frozen=True)
class VolumeReport:
    area: float
    vol_direct: float
    vol_decomposed: float
    saturated_part: float
    gamma_part: float
    rel_mismatch: float

    def as_dict(self) -> dict:
        return asdict(self)


def area(p: MetricProfile, rtol: float = AREA_RTOL) -> float:
    """``int_0^M 2 pi r(s) ds``."""
    pts = [e.s for e in p.equators] + list(p.breakpoints)
    val, _ = gk_integrate(lambda s: 2.0 * math.pi * p.r(s), 0.0, p.M, pts, rtol, 0.0)
    return val


def contact_volume_direct(p: MetricProfile) -> float:
    """Volume of the unit tangent bundle: ``2 pi area``."""
    return 2.0 * math.pi * area(p)


def gamma_intervals(p: MetricProfile, n_grid: int = 8192) -> list[tuple[float, float]]:
    """Maximal intervals of ``{r(s) >= r(s0)}`` of positive length.

    Tangential touch points at equators of the reference radius (including
    ``s0`` itself) are interior points of an interval or isolated points,
    and isolated points are dropped since they carry no measure.
    """
    r0 = p.reference_equator.radius
    s = np.linspace(0.0, p.M, n_grid + 1)
    g = p.r(s) - r0
    # touch points count as inside
    for e in p.equators:
        if abs(e.radius - r0) <= 1e-12 * max(r0, 1.0):
            g[np.argmin(np.abs(s - e.s))] = 0.0
    inside = g >= 0.0
    out = []
    i = 0
    while i <= n_grid:
        if not inside[i]:
            i += 1
            continue
        j = i
        while j + 1 <= n_grid and inside[j + 1]:
            j += 1
        a = s[i] if i == 0 else _crossing(p, r0, s[i - 1], s[i])
        b = s[j] if j == n_grid else _crossing(p, r0, s[j], s[j + 1])
        if b - a > 1e-9 * p.M:
            out.append((a, b))
        i = j + 1
    return out


def _crossing(p: MetricProfile, r0: float, lo: float, hi: float) -> float:
    flo, fhi = p.r(lo) - r0, p.r(hi) - r0
    if flo * fhi > 0.0:  # touch point forced inside; nothing to refine
        return hi if flo < 0.0 else lo
    return brentq(lambda x: p.r(x) - r0, lo, hi, xtol=1e-15)


def _gamma_integral(p: MetricProfile, fn, rtol: float) -> float:
    total = 0.0
    crit = [e.s for e in p.equators] + list(p.breakpoints)
    for a, b in gamma_intervals(p):
        c, h = 0.5 * (a + b), 0.5 * (b - a)

        def g(phi):
            s = c - h * np.cos(phi)
            return fn(s) * h * np.sin(phi)

        pts = [math.acos((c - x) / h) for x in crit if a < x < b]
        total += gk_integrate(g, 0.0, math.pi, pts, rtol, 1e-14)[0]
    return total


def gamma_cos_integral(p: MetricProfile, rtol: float = VOL_RTOL) -> float:
    """``int_Gamma cos(beta) dbeta ds = int 2 sqrt(1 - r0^2/r^2) ds`` over the Gamma intervals."""
    r0 = p.reference_equator.radius

    def fn(s):
        q = np.minimum(r0 / p.r(s), 1.0)
        return 2.0 * np.sqrt(1.0 - q * q)

    return _gamma_integral(p, fn, rtol)


def gamma_volume_term(p: MetricProfile, rtol: float = VOL_RTOL) -> float:
    """``int_Gamma (4 pi r - 2 L cos(beta)) dbeta ds`` with the beta-integrals done by hand."""
    r0 = p.reference_equator.radius
    L = 2.0 * math.pi * r0

    def fn(s):
        r = p.r(s)
        q = np.minimum(r0 / r, 1.0)
        return 8.0 * math.pi * r * np.arccos(q) - 4.0 * L * np.sqrt(1.0 - q * q)

    return _gamma_integral(p, fn, rtol)


def contact_volume_decomposed(p: MetricProfile, G: GeneratingFunction | None = None,
                              rtol: float = VOL_RTOL) -> VolumeReport:
    """Contact volume as ``4 L int_0^1 F - order L^2 + Gamma term``, next to ``2 pi area``.

    ``G`` must come from the integral route, whose evaluator is reused for
    the eta-quadratures; without it a fresh evaluator is built.
    """
    ev = G.evaluator if G is not None and isinstance(G.evaluator, IntegralEvaluator) else None
    ev = ev or IntegralEvaluator(p)
    L, order = ev.L, p.signature.order
    a = area(p)
    direct = 2.0 * math.pi * a
    vF = np.vectorize(ev.F, otypes=[float])
    vtau = np.vectorize(ev.tau, otypes=[float])
    int_F, _ = gk_integrate(vF, 0.0, 1.0, (), rtol, 1e-13)
    gamma = gamma_volume_term(p, rtol)
    decomposed = 4.0 * L * int_F - order * L * L + gamma
    # F - eta F' = tau, and tau is even
    int_tau, _ = gk_integrate(vtau, 0.0, 1.0, (), max(rtol, 1e-9), 1e-12, max_intervals=20000)
    saturated = 2.0 * L * int_tau
    return VolumeReport(a, direct, decomposed, saturated, gamma, abs(direct - decomposed) / direct)
