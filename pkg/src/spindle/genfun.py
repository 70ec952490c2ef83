"""Generating function of the first return map, by two independent routes.

Route one reads ``F'`` off the winding numbers of integrated returns and
recovers ``F = tau + eta F'``.  Route two reduces the region integral in
``beta`` by hand and integrates in ``s`` only:

    I(kappa)  = int_{r > kappa} 2 sqrt(1 - kappa^2 / r^2) ds
    J(kappa)  = int_{r > kappa} ds / (r sqrt(r^2 - kappa^2))
    T(kappa)  = int_{r > kappa} r ds / sqrt(r^2 - kappa^2)

with ``kappa = r0 |eta|``.  Then ``F = I + order L |eta| / 2``,
``W = -sign(eta) kappa J / pi``, ``tau = 2 T`` and ``dI/dkappa = -2 kappa J``.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .annulus import ReturnData, first_return, meridian_return
from .errors import InconsistentData
from .profile import MetricProfile, OrbifoldSignature
from .quadrature import gk_integrate

QUAD_RTOL = 1e-10
QUAD_ATOL = 1e-13
FLAT_TOL = 1e-6  # total variation of F, in units of L, below which F counts as constant
ODD_TOL = 1e-5  # oddness defect of F' tolerated from return data, in units of L
ROOT_XTOL = 1e-12
NEAR_EQUATOR = 1e-7  # relative distance of kappa to r0 below which expansions replace quadrature


class Route(str, enum.Enum):
    FROM_RETURN_MAP = "FromReturnMap"
    FROM_INTEGRAL = "FromIntegral"


class IntegralEvaluator:
    """Pointwise ``F``, ``F'``, ``W`` and ``tau`` from the reduced quadratures."""

    route = Route.FROM_INTEGRAL

    def __init__(self, p: MetricProfile, rtol: float = QUAD_RTOL, atol: float = QUAD_ATOL):
        self.p = p
        eq = p.reference_equator
        self.r0, self.s0, self.L = eq.radius, eq.s, eq.length
        self.order = p.signature.order
        self.crit = [e.s for e in p.equators]
        self.isolated = len(self.crit) == 1  # s0 is then the global maximum of r
        self.rtol, self.atol = rtol, atol
        self._cache = lru_cache(maxsize=1024)(self._integral)

    def __getstate__(self):
        d = dict(self.__dict__)
        d.pop("_cache")
        return d

    def __setstate__(self, d):
        self.__dict__.update(d)
        self._cache = lru_cache(maxsize=1024)(self._integral)

    # -- band and quadratures -------------------------------------------------
    def band(self, kappa: float) -> tuple[float, float]:
        """Endpoints of ``{r > kappa}``, a single interval for ``kappa <= r0``."""
        p = self.p
        if kappa <= 0.0:
            return 0.0, p.M
        if self.isolated and kappa >= self.r0:
            return self.s0, self.s0
        lo, hi = self.crit[0], self.crit[-1]
        s1 = brentq(lambda x: p.r_dr(x)[0] - kappa, 0.0, lo, xtol=1e-15, rtol=1e-15)
        s2 = brentq(lambda x: p.r_dr(x)[0] - kappa, hi, p.M, xtol=1e-15, rtol=1e-15)
        return s1, s2

    def _integral(self, kappa: float, which: str) -> float:
        p = self.p
        if kappa <= 0.0:
            return {"I": 2.0 * p.M, "J": math.inf, "T": math.nan}[which]
        if self.isolated and kappa >= self.r0 * (1.0 - NEAR_EQUATOR):
            # orbits hugging a nondegenerate maximum: leading-order expansions
            d2 = abs(p.d2r(self.s0))
            r0 = self.r0
            if which == "I":
                return 2.0 * math.pi * max(r0 - kappa, 0.0) / math.sqrt(r0 * d2)
            if which == "J":
                return math.pi / (r0 * math.sqrt(r0 * d2))
            return math.pi * math.sqrt(r0 / d2)
        if kappa >= self.r0 and which != "I":
            return math.inf
        return self._band_integral(kappa, which)

    def _band_integral(self, kappa: float, which: str) -> float:
        p = self.p
        s1, s2 = self.band(kappa)
        c, h = 0.5 * (s1 + s2), 0.5 * (s2 - s1)
        d1, d2 = p.dr(s1), -p.dr(s2)
        c1, c2 = 0.5 * p.d2r(s1), 0.5 * p.d2r(s2)
        x_taylor = 1e-5 * h

        def g(phi):
            left = phi < 0.5 * math.pi
            # distance to the nearer turning point, free of cancellation
            x = 2.0 * h * np.where(left, np.sin(0.5 * phi), np.cos(0.5 * phi)) ** 2
            s = np.where(left, s1 + x, s2 - x)
            r = p.r(s)
            # next to the turning points r - kappa is pure rounding noise, so
            # the gap comes from the local expansion there
            taylor = np.where(left, d1 * x + c1 * x * x, d2 * x + c2 * x * x)
            gap = np.where(x < x_taylor, taylor, r - kappa)
            r = np.where(x < x_taylor, kappa + taylor, r)
            root = np.sqrt(gap * (r + kappa))
            w = h * np.sin(phi)
            if which == "I":
                return 2.0 * w * root / r
            if which == "J":
                return w / (r * root)
            return w * r / root

        pts = []
        for x in (*self.crit, *p.breakpoints):
            if s1 < x < s2:
                pts.append(math.acos(min(1.0, max(-1.0, (c - x) / h))))
        # r - kappa cannot be resolved better than eps * kappa / (r0 - kappa)
        rtol = self.rtol
        if kappa < self.r0:
            rtol = max(rtol, 64 * np.finfo(float).eps * kappa / (self.r0 - kappa))
        val, _ = gk_integrate(g, 0.0, math.pi, pts, rtol, self.atol)
        return val

    def integral(self, kappa: float, which: str) -> float:
        """One of the reduced integrals ``"I"``, ``"J"``, ``"T"`` at ``kappa``."""
        return self._cache(float(kappa), which)

    def integrals(self, kappa: float) -> tuple[float, float, float]:
        return tuple(self.integral(kappa, w) for w in "IJT")

    # -- pointwise quantities --------------------------------------------------
    def F(self, eta: float) -> float:
        I = self.integral(self.r0 * abs(eta), "I")
        return I + 0.5 * self.order * self.L * abs(eta)

    def Fp(self, eta: float) -> float:
        if eta == 0.0:
            return 0.0
        kappa = self.r0 * abs(eta)
        J = self.integral(kappa, "J")
        side = 1.0 if eta > 0 else -1.0
        return side * (0.5 * self.order * self.L - 2.0 * self.r0 * kappa * J)

    def winding(self, eta: float) -> float:
        if eta == 0.0:
            return 0.5 * self.order
        kappa = self.r0 * abs(eta)
        J = self.integral(kappa, "J")
        return -math.copysign(kappa * J / math.pi, eta)

    def tau(self, eta: float) -> float:
        if eta == 0.0:
            return 2.0 * self.p.M
        T = self.integral(self.r0 * abs(eta), "T")
        return 2.0 * T

    def endpoint_value(self) -> float:
        """``F(+-1)`` from the region where ``r >= r(s0)``."""
        return self.F(1.0)


class ReturnEvaluator:
    """Pointwise ``F``, ``F'`` from integrated first returns (one ODE solve per point)."""

    route = Route.FROM_RETURN_MAP

    def __init__(self, p: MetricProfile, cap: float | None = None):
        self.p = p
        self.L = p.reference_equator.length
        self.order = p.signature.order
        self.cap = cap

    @lru_cache(maxsize=256)
    def data(self, eta: float) -> ReturnData:
        if eta == 0.0:
            return meridian_return(self.p)
        return first_return(self.p, eta, self.cap)

    def Fp(self, eta: float) -> float:
        return fp_from_winding(self.data(eta).winding, eta, self.order, self.L)

    def F(self, eta: float) -> float:
        d = self.data(eta)
        return d.tau + eta * self.Fp(eta)

    def winding(self, eta: float) -> float:
        return self.data(eta).winding

    def tau(self, eta: float) -> float:
        return self.data(eta).tau

    def __hash__(self):
        return id(self)


def fp_from_winding(winding: float, eta: float, order: int, L: float) -> float:
    """``F' = L W + sign(eta) order L / 2`` (the two offsets make ``F'`` odd and continuous)."""
    if eta == 0.0:
        return 0.0
    return L * winding + math.copysign(0.5 * order * L, eta)


@dataclass
class GeneratingFunction:
    L: float
    eta_grid: np.ndarray
    F: np.ndarray
    Fp: np.ndarray
    route: Route
    endpoint_value: float
    signature: OrbifoldSignature
    evaluator: object | None = field(default=None, repr=False)
    fd_mismatch: float = math.nan  # central-difference check of F' (integral route)

    def variation(self) -> float:
        """Total variation of F over the grid, in units of L."""
        f = self.F[np.isfinite(self.F)]
        return float(np.sum(np.abs(np.diff(f)))) / self.L

    def spread(self) -> float:
        """``(max F - min F) / L``."""
        f = self.F[np.isfinite(self.F)]
        return float(np.max(f) - np.min(f)) / self.L

    def is_flat(self, tol: float = FLAT_TOL) -> bool:
        return self.variation() < tol

    def lower_bound_gap(self) -> np.ndarray:
        """``F - order L |eta| / 2``; strictly positive on (-1, 1)."""
        return self.F - 0.5 * self.signature.order * self.L * np.abs(self.eta_grid)

    def evenness_defect(self) -> float:
        f = self.F
        d = np.abs(f - f[::-1])
        return float(np.nanmax(d)) / self.L

    def oddness_defect(self) -> float:
        fp = self.Fp
        ok = np.isfinite(fp) & np.isfinite(fp[::-1])
        return float(np.max(np.abs(fp[ok] + fp[::-1][ok]), initial=0.0)) / self.L


def genfun_from_integral(p: MetricProfile, eta_grid, rtol: float = QUAD_RTOL,
                         fd_step: float = 1e-5) -> GeneratingFunction:
    """F and F' on ``eta_grid`` (a subset of [-1, 1]) from the reduced quadratures."""
    grid = np.asarray(eta_grid, dtype=float)
    if np.any(np.abs(grid) > 1.0):
        raise ValueError("eta_grid must lie in [-1, 1]")
    ev = IntegralEvaluator(p, rtol=rtol)
    F = np.array([ev.F(e) for e in grid])
    Fp = np.array([ev.Fp(e) if abs(e) < 1.0 or ev.isolated else math.copysign(math.inf, e)
                   for e in grid])
    # diagnostic: F' against central differences of F at a few interior points
    probes = [e for e in (-0.7, -0.3, 0.3, 0.7)]
    fd = max(abs((ev.F(e + fd_step) - ev.F(e - fd_step)) / (2 * fd_step) - ev.Fp(e)) for e in probes)
    return GeneratingFunction(ev.L, grid, F, Fp, Route.FROM_INTEGRAL, ev.endpoint_value(),
                              p.signature, ev, fd / ev.L)


def genfun_from_returns(returns: list[ReturnData], sig: OrbifoldSignature, L: float,
                        profile: MetricProfile | None = None) -> GeneratingFunction:
    """F' from the winding identity and ``F = tau + eta F'``; censored entries become NaN."""
    rs = sorted(returns, key=lambda r: r.eta)
    grid = np.array([r.eta for r in rs])
    if not np.any(grid == 0.0) or not np.allclose(grid, -grid[::-1], rtol=0, atol=1e-15):
        raise InconsistentData("returns must cover a symmetric grid including eta = 0")
    Fp = np.array([math.nan if r.censored else fp_from_winding(r.winding, r.eta, sig.order, L)
                   for r in rs])
    F = np.array([math.nan if r.censored else r.tau + r.eta * fp for r, fp in zip(rs, Fp)])
    ok = np.isfinite(Fp) & np.isfinite(Fp[::-1])
    defect = np.abs(Fp + Fp[::-1])[ok]
    if defect.size and float(np.max(defect)) > ODD_TOL * L:
        i = int(np.argmax(np.where(ok, np.abs(Fp + Fp[::-1]), -1.0)))
        raise InconsistentData(
            f"F' not odd: F'({grid[i]:.6g}) + F'({-grid[i]:.6g}) = {Fp[i] + Fp[::-1][i]:.3g}"
        )
    ev = ReturnEvaluator(profile) if profile is not None else None
    return GeneratingFunction(L, grid, F, Fp, Route.FROM_RETURN_MAP, math.nan, sig, ev)


# -- critical points -------------------------------------------------------------

class CriticalKind(str, enum.Enum):
    MIN = "Min"
    MAX = "Max"
    INFLECTION = "Inflection"


@dataclass(frozen=True)
class CriticalPoint:
    eta0: float
    mu: float
    kind: CriticalKind


@dataclass(frozen=True)
class AllCritical:
    """F is numerically constant: every eta is critical with value ``mu``."""

    mu: float


def _kind(left: float, right: float) -> CriticalKind:
    if left < 0 < right:
        return CriticalKind.MIN
    if left > 0 > right:
        return CriticalKind.MAX
    return CriticalKind.INFLECTION


def critical_points(G: GeneratingFunction, evaluator=None, flat_tol: float = FLAT_TOL,
                    zero_band: float = 1e-9) -> AllCritical | list[CriticalPoint]:
    """Sign changes of F' on (-1, 1), refined on the evaluator; eta = 0 always included."""
    if G.is_flat(flat_tol):
        return AllCritical(float(np.nanmean(G.F)))
    ev = evaluator if evaluator is not None else G.evaluator
    grid, fp, F = G.eta_grid, G.Fp, G.F
    inner = (np.abs(grid) < 1.0) & np.isfinite(fp)
    eg, fg, Fg = grid[inner], fp[inner].copy(), F[inner]
    # quadrature noise around zero is not a sign change
    fg[np.abs(fg) <= zero_band * G.L] = 0.0
    out: dict[float, CriticalPoint] = {}
    nz = np.nonzero(fg)[0]
    for a_i, b_i in zip(nz[:-1], nz[1:]):
        if fg[a_i] * fg[b_i] > 0:
            continue
        kind = _kind(fg[a_i], fg[b_i])
        a, b = float(eg[a_i]), float(eg[b_i])
        if b_i > a_i + 1:
            # F' vanishes on grid points in between: report the middle one
            i = (a_i + b_i) // 2
            e0 = float(eg[i])
            out[e0] = CriticalPoint(e0, float(Fg[i]), kind)
        elif ev is not None:
            e0 = brentq(ev.Fp, a, b, xtol=ROOT_XTOL)
            out[e0] = CriticalPoint(e0, float(ev.F(e0)), kind)
        else:
            t = fg[a_i] / (fg[a_i] - fg[b_i])
            e0 = a + t * (b - a)
            out[e0] = CriticalPoint(e0, float(Fg[a_i] + t * (Fg[b_i] - Fg[a_i])), kind)
    if 0.0 not in out:
        mu0 = ev.F(0.0) if ev is not None else float(np.interp(0.0, eg, Fg))
        out[0.0] = CriticalPoint(0.0, float(mu0), CriticalKind.INFLECTION)
    return [out[k] for k in sorted(out)]


def write_genfun_csv(path, G: GeneratingFunction) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eta", "F", "Fp", "route"])
        for e, f, fp in zip(G.eta_grid, G.F, G.Fp):
            w.writerow([f"{e:.17g}", f"{f:.17g}", f"{fp:.17g}", G.route.value])


def write_critical_csv(path, crit) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eta0", "mu", "kind"])
        if isinstance(crit, AllCritical):
            w.writerow(["all", f"{crit.mu:.17g}", "AllCritical"])
            return
        for c in crit:
            w.writerow([f"{c.eta0:.17g}", f"{c.mu:.17g}", c.kind.value])
