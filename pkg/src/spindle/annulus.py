"""Birkhoff annulus at the minimal equator and its first return data.

The annulus consists of unit vectors based on the reference equator
``s = s0`` pointing strictly northward.  It is coordinatized by
``xi = r(s0) * theta`` (mod ``L = 2 pi r(s0)``) and ``eta = -cos(beta)``.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import NoReturn, SpindleError
from .flow import ODE_ATOL, ODE_RTOL, POLE_GUARD, POLE_GUARD_K, solve
from .profile import MetricProfile

TIME_CAP_FACTOR = 50.0
GRID_DELTA = 1e-3


@dataclass(frozen=True)
class AnnulusPoint:
    xi: float
    eta: float
    L: float

    def __post_init__(self):
        if not -1.0 < self.eta < 1.0:
            raise ValueError(f"eta={self.eta} outside (-1, 1)")
        object.__setattr__(self, "xi", self.xi % self.L)


@dataclass(frozen=True)
class ReturnData:
    eta: float
    tau: float
    delta_xi: float
    winding: float
    ode_drift: float
    censored: bool = False


def winding_offset(p: MetricProfile, eta: float) -> int:
    """Integer ``j`` with ``delta_xi = L*W - j*L`` continuous in eta and equal to alpha*L/2 at 0."""
    sig = p.signature
    side = -1 if eta < 0 else 1
    return (-side * sig.order - sig.alpha) // 2


def time_cap(p: MetricProfile, factor: float = TIME_CAP_FACTOR) -> float:
    return factor * p.signature.order * p.reference_equator.length


def first_return(p: MetricProfile, eta: float, cap: float | None = None,
                 rtol: float = ODE_RTOL, atol: float = ODE_ATOL) -> ReturnData:
    """Return data of the orbit leaving ``(theta=0, beta=arccos(-eta), s0)``.

    Raises :class:`NoReturn` when no northbound crossing of the equator
    happens within the time cap.
    """
    if not -1.0 < eta < 1.0:
        raise ValueError(f"eta={eta} outside (-1, 1)")
    eq = p.reference_equator
    r0, s0, L = eq.radius, eq.s, eq.length
    if abs(eta) * r0 <= POLE_GUARD_K * r0:
        raise ValueError("eta too close to 0; use meridian_return")
    cap = time_cap(p) if cap is None else cap
    beta0 = math.acos(-eta)
    guard = POLE_GUARD * p.M

    def cross(t, y):
        return y[2] - s0

    def north(t, y):
        return y[2] - guard

    def south(t, y):
        return p.M - guard - y[2]

    cross.terminal = north.terminal = south.terminal = True
    north.direction = south.direction = -1

    # southbound crossing first, then the northbound one; the start point
    # itself sits on the section and would otherwise trigger immediately
    y, t_used, drift = np.array([0.0, beta0, s0]), 0.0, 0.0
    k0 = r0 * math.cos(beta0)
    for direction in (-1, 1):
        cross.direction = direction
        sol = solve(p, y, cap - t_used, [cross, north, south], rtol, atol)
        k = p.r(sol.y[2]) * np.cos(sol.y[1])
        drift = max(drift, float(np.max(np.abs(k - k0))))
        if len(sol.t_events[1]) or len(sol.t_events[2]):
            raise NoReturn(f"eta={eta:.17g}: orbit reached the pole guard")
        if not len(sol.t_events[0]):
            raise NoReturn(f"eta={eta:.17g}: no return within time cap {cap:.6g}")
        t_used += float(sol.t_events[0][0])
        y = sol.y_events[0][0].copy()
        y[2] = s0
    winding = float(y[0]) / (2 * math.pi)
    delta_xi = L * winding - winding_offset(p, eta) * L
    return ReturnData(float(eta), t_used, delta_xi, winding, drift)


def meridian_return(p: MetricProfile) -> ReturnData:
    """The eta = 0 entry, assembled from meridional arcs through both cone points."""
    sig = p.signature
    L = p.reference_equator.length
    return ReturnData(0.0, 2 * p.M, sig.alpha * L / 2, sig.order / 2, 0.0)


def eta_grid(n_grid: int, delta: float = 0.0) -> np.ndarray:
    """Symmetric Chebyshev-Lobatto grid on ``[-(1-delta), 1-delta]``; odd sizes contain 0."""
    i = np.arange(n_grid)
    x = -np.cos(np.pi * i / (n_grid - 1))
    x = 0.5 * (x - x[::-1])  # exact antisymmetry
    if n_grid % 2:
        x[n_grid // 2] = 0.0
    return (1.0 - delta) * x


def _censored(eta: float) -> ReturnData:
    return ReturnData(float(eta), math.nan, math.nan, math.nan, math.nan, True)


def _one(args) -> ReturnData:
    p, eta, cap, rtol, atol = args
    if eta == 0.0:
        return meridian_return(p)
    try:
        return first_return(p, eta, cap, rtol, atol)
    except NoReturn:
        return _censored(eta)
    except SpindleError as exc:
        raise type(exc)(f"eta={eta:.17g}: {exc.args[0] if exc.args else ''}") from exc


def return_grid(p: MetricProfile, n_grid: int, delta: float = GRID_DELTA, cap: float | None = None,
                rtol: float = ODE_RTOL, atol: float = ODE_ATOL, jobs: int = 1) -> list[ReturnData]:
    """First return data on :func:`eta_grid`; entries beyond the time cap are censored."""
    if n_grid < 16:
        raise ValueError("n_grid must be at least 16")
    grid = eta_grid(n_grid, delta)
    if n_grid % 2 == 0:
        grid = np.sort(np.append(grid, 0.0))
    tasks = [(p, float(e), cap, rtol, atol) for e in grid]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_one, tasks))
    return [_one(t) for t in tasks]


def write_returns_csv(path, returns: list[ReturnData]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eta", "tau", "delta_xi", "winding", "drift", "censored"])
        for r in returns:
            w.writerow([f"{r.eta:.17g}", f"{r.tau:.17g}", f"{r.delta_xi:.17g}",
                        f"{r.winding:.17g}", f"{r.ode_drift:.17g}", int(r.censored)])
