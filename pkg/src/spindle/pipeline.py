"""End-to-end analysis of one profile: returns, generating function, volumes, systoles."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .annulus import GRID_DELTA, ReturnData, eta_grid, return_grid
from .genfun import (AllCritical, CriticalPoint, GeneratingFunction, critical_points,
                     genfun_from_integral, genfun_from_returns)
from .measure import VolumeReport, contact_volume_decomposed
from .profile import MetricProfile
from .systole import SystoleReport, default_cutoff, default_qmax, enumerate_closed, ratios


@dataclass
class Numerics:
    eta_grid_n: int = 401
    ode_rel_tol: float = 1e-10
    ode_abs_tol: float = 1e-12
    quad_rel_tol: float = 1e-10
    q_max: int | None = None
    length_cutoff: float | None = None
    time_cap_factor: float = 50.0
    jobs: int = 1


@dataclass
class Analysis:
    profile: MetricProfile
    numerics: Numerics
    returns: list[ReturnData]
    G_integral: GeneratingFunction
    G_returns: GeneratingFunction
    critical: AllCritical | list[CriticalPoint]
    volume: VolumeReport
    report: SystoleReport

    def route_mismatch(self) -> float:
        return route_mismatch(self.G_integral, self.G_returns)


def analyze(p: MetricProfile, numerics: Numerics | None = None, with_returns: bool = True) -> Analysis:
    num = numerics or Numerics()
    sig = p.signature
    L = p.reference_equator.length
    cap = num.time_cap_factor * sig.order * L
    q_max = num.q_max or default_qmax(sig)
    cutoff = num.length_cutoff or default_cutoff(p)
    returns = []
    G_ret = None
    if with_returns:
        returns = return_grid(p, num.eta_grid_n, GRID_DELTA, cap, num.ode_rel_tol, num.ode_abs_tol, num.jobs)
        G_ret = genfun_from_returns(returns, sig, L, p)
    G_int = genfun_from_integral(p, eta_grid(num.eta_grid_n), rtol=num.quad_rel_tol)
    crit = critical_points(G_int)
    vol = contact_volume_decomposed(p, G_int, num.quad_rel_tol)
    geos = enumerate_closed(p, G_int, cutoff=cutoff, q_max=q_max)
    rep = ratios(p, vol.area, geos, vol, cutoff, q_max)
    return Analysis(p, num, returns, G_int, G_ret, crit, vol, rep)


def route_mismatch(G_int: GeneratingFunction, G_ret: GeneratingFunction) -> float:
    """``max |F_integral(eta) - F_returns(eta)| / L`` at the return-grid points."""
    ev = G_int.evaluator
    d = [abs(ev.F(e) - f) for e, f in zip(G_ret.eta_grid, G_ret.F) if math.isfinite(f)]
    return max(d) / G_ret.L
