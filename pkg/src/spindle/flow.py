"""Geodesic flow in the coordinates ``(theta, beta, s)``.

``beta`` is the angle between the velocity and the positively oriented
parallel, so a unit-speed geodesic satisfies

    theta' = cos(beta) / r(s),   beta' = r'(s) cos(beta) / r(s),   s' = sin(beta).

Both angles are kept unwrapped.  Exactly meridional orbits are assembled
from meridional arcs instead of being integrated through the cone points.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import StepFailure, ToleranceAmbiguity
from .profile import MetricProfile

ODE_RTOL = 1e-12
ODE_ATOL = 1e-14
POLE_GUARD = 1e-6  # times M
POLE_GUARD_K = 1e-8  # times r(s0)
ASYMPTOTIC_TOL = 1e-12  # times r(s0): |K| this close to a critical value counts as equal
AMBIGUITY_TOL = 1e-8  # times r(s0): closer than this (but not equal) cannot be classified


@dataclass(frozen=True)
class PhasePoint:
    theta: float
    beta: float
    s: float

    def as_array(self) -> np.ndarray:
        return np.array([self.theta, self.beta, self.s])


class EventKind(str, enum.Enum):
    SECTION_CROSS = "SectionCross"
    POLE_PASSAGE = "PolePassage"
    TRUNCATED = "Truncated"


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # shape (len(times), 3): theta, beta, s
    clairaut_drift: float
    events: list[tuple[float, EventKind]] = field(default_factory=list)

    @property
    def final(self) -> PhasePoint:
        return PhasePoint(*map(float, self.states[-1]))

    def __len__(self):
        return len(self.times)


def clairaut(p: MetricProfile, x: PhasePoint) -> float:
    """Clairaut integral ``K = r(s) cos(beta)``."""
    return p.r(x.s) * math.cos(x.beta)


def _rhs(p: MetricProfile):
    def f(t, y):
        r, dr = p.r_dr(y[2])
        cb = math.cos(y[1])
        return [cb / r, dr * cb / r, math.sin(y[1])]

    return f


def _clairaut_drift(p: MetricProfile, states: np.ndarray, k0: float) -> float:
    k = p.r(states[:, 2]) * np.cos(states[:, 1])
    return float(np.max(np.abs(k - k0), initial=0.0))


@dataclass
class Solution:
    """``solve_ivp``-like result stitched together from smooth legs."""

    t: np.ndarray
    y: np.ndarray
    t_events: list[np.ndarray]
    y_events: list[np.ndarray]
    status: int
    segments: list = field(default_factory=list)  # (t_start, dense interpolant), later ones win

    def sol(self, times):
        times = np.asarray(times, dtype=float)
        starts = np.array([a for a, _ in self.segments])
        idx = np.clip(np.searchsorted(starts, times, side="right") - 1, 0, len(starts) - 1)
        out = np.empty((3, times.size))
        for i in np.unique(idx):
            mask = idx == i
            out[:, mask] = self.segments[i][1](times[mask])
        return out

    def truncated(self, t_cut: float, k: int) -> Solution:
        """Keep samples ``[:k+1]`` and events up to ``t_cut``."""
        keep = [te <= t_cut for te in self.t_events]
        return Solution(self.t[:k + 1], self.y[:, :k + 1], [te[m] for te, m in zip(self.t_events, keep)],
                        [ye[m] for ye, m in zip(self.y_events, keep)], 0, self.segments)

    def extended(self, other: Solution) -> Solution:
        return Solution(np.concatenate([self.t, other.t[1:]]), np.concatenate([self.y, other.y[:, 1:]], axis=1),
                        [np.concatenate([a, b]) for a, b in zip(self.t_events, other.t_events)],
                        [np.concatenate([a, b]) for a, b in zip(self.y_events, other.y_events)],
                        other.status, self.segments + other.segments)


BREAKPOINT_MIN_STEP = 1e-3


def _breakpoint_event(b: float, t_restart: float, side: float):
    # at the restart time the state sits on the breakpoint; report the side
    # the orbit is moving into so the solver does not fire again at once
    def g(t, y):
        if t == t_restart:
            return side
        return y[2] - b

    g.terminal = True
    return g


def _straddles(interp, bps) -> bool:
    s = interp(np.linspace(interp.t_old, interp.t, 9))[2]
    lo, hi = float(np.min(s)), float(np.max(s))
    return any(lo <= b <= hi for b in bps)


def _leg(rhs, t0, y0, t1, events, bps, rtol, atol, max_step) -> Solution:
    sol = solve_ivp(rhs, (t0, t1), y0, method="DOP853", rtol=rtol, atol=atol, events=events,
                    dense_output=True, max_step=max_step)
    if sol.status == -1:
        raise StepFailure(sol.message)
    out = Solution(sol.t, sol.y, [np.asarray(te) for te in sol.t_events],
                   [np.asarray(ye).reshape(-1, 3) for ye in sol.y_events], sol.status, [(t0, sol.sol)])
    if sol.status != 1 or len(sol.t) < 3:
        return out
    last = sol.sol.interpolants[-1]
    t_old, t_new = last.t_old, last.t
    if t_new - t_old <= BREAKPOINT_MIN_STEP or not _straddles(last, bps):
        return out
    # the step that ended in the event crossed a kink of r and its
    # interpolant is unreliable: redo it with smaller steps
    k = len(sol.t) - 2
    head = out.truncated(t_old, k)
    sub = _leg(rhs, t_old, sol.y[:, k], t_new, events, bps, rtol, atol, (t_new - t_old) / 16)
    res = head.extended(sub)
    if sub.status == 0 and t_new < t1:
        res = res.extended(_leg(rhs, t_new, sub.y[:, -1], t1, events, bps, rtol, atol, max_step))
    return res


def solve(p: MetricProfile, y0, t_end: float, events=(), rtol: float = ODE_RTOL,
          atol: float = ODE_ATOL, dense: bool = False) -> Solution:
    """DOP853 over ``[0, t_end]``, restarted at every breakpoint of the profile.

    The error estimator assumes a smooth right-hand side; a step straddling
    a point where a derivative of ``r`` jumps loses accuracy silently, so the
    integration stops there and starts afresh.  A terminal user event ends
    the whole integration.  Raises StepFailure.
    """
    events = list(events)
    nu = len(events)
    bps = [b for b in p.breakpoints if 0.0 < b < p.M]
    rhs = _rhs(p)
    t0, y = 0.0, np.asarray(y0, dtype=float)
    res = None
    last_bp, side = None, 0.0
    while True:
        bp_events = [_breakpoint_event(b, t0, side if i == last_bp else y[2] - b)
                     for i, b in enumerate(bps)]
        leg = _leg(rhs, t0, y, t_end, events + bp_events, bps, rtol, atol, np.inf)
        res = leg if res is None else res.extended(leg)
        if leg.status == 0 or any(len(leg.t_events[i]) and getattr(events[i], "terminal", False)
                                  for i in range(nu)):
            break
        last_bp = next(i for i in range(len(bps)) if len(leg.t_events[nu + i]))
        t0 = float(leg.t_events[nu + last_bp][-1])
        y = np.array(leg.y_events[nu + last_bp][-1], dtype=float)
        side = 1.0 if math.sin(y[1]) > 0 else -1.0
        if t0 >= t_end:
            break
    return Solution(res.t, res.y, res.t_events[:nu], res.y_events[:nu], res.status,
                    res.segments if dense else [])


def _meridian(p: MetricProfile, x0: PhasePoint, t_max: float, n_per_arc: int = 65) -> Trajectory:
    """Meridian assembled from arcs; passing a cone point of order k adds k*pi to theta."""
    m, n = p.signature.m, p.signature.n
    theta, s = x0.theta, x0.s
    up = math.sin(x0.beta) > 0
    t = 0.0
    times, states, events = [], [], []
    while True:
        dist = (p.M - s) if up else s
        t_end = min(t + dist, t_max)
        ts = np.linspace(t, t_end, n_per_arc)
        ss = s + (ts - t) if up else s - (ts - t)
        beta = math.pi / 2 if up else -math.pi / 2
        if times:
            ts, ss = ts[1:], ss[1:]
        times.extend(ts)
        states.extend((theta, beta, si) for si in ss)
        if t_end >= t_max:
            break
        t = t_end
        events.append((t, EventKind.POLE_PASSAGE))
        theta += (n if up else m) * math.pi
        s = p.M if up else 0.0
        up = not up
        times.append(t)
        states.append((theta, math.pi / 2 if up else -math.pi / 2, s))
    return Trajectory(np.asarray(times), np.asarray(states), 0.0, events)


def integrate(p: MetricProfile, x0: PhasePoint, t_max: float, section: float | None = None,
              direction: int = 0, terminal: bool = False, rtol: float = ODE_RTOL,
              atol: float = ODE_ATOL, n_samples: int | None = None) -> Trajectory:
    """Integrate the geodesic through ``x0`` for arclength ``t_max``.

    Parameters
    ----------
    section : float, optional
        Level ``s = section`` whose crossings are recorded as SectionCross
        events (optionally only in ``direction`` and optionally terminal).
    n_samples : int, optional
        Store the dense solution on a uniform time grid instead of the
        integrator's own steps.
    """
    if not 0.0 < x0.s < p.M:
        raise ValueError(f"initial s={x0.s} outside (0, M)")
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    r0 = p.reference_equator.radius
    k0 = clairaut(p, x0)
    if abs(k0) <= POLE_GUARD_K * r0:
        return _meridian(p, PhasePoint(x0.theta, math.copysign(math.pi / 2, math.sin(x0.beta)), x0.s), t_max)

    guard = POLE_GUARD * p.M

    def north(t, y):
        return y[2] - guard

    def south(t, y):
        return p.M - guard - y[2]

    north.terminal = south.terminal = True
    north.direction = south.direction = -1
    evs = [north, south]
    if section is not None:
        def cross(t, y):
            return y[2] - section

        cross.terminal = terminal
        cross.direction = direction
        evs.append(cross)

    sol = solve(p, x0.as_array(), t_max, evs, rtol, atol, dense=n_samples is not None)
    events = []
    if section is not None:
        events += [(float(t), EventKind.SECTION_CROSS) for t in sol.t_events[2]]
    if len(sol.t_events[0]) or len(sol.t_events[1]):
        events.append((float(sol.t[-1]), EventKind.TRUNCATED))
    if n_samples is not None:
        times = np.linspace(0.0, sol.t[-1], n_samples)
        states = sol.sol(times).T
    else:
        times, states = sol.t, sol.y.T
    events.sort(key=lambda e: e[0])
    return Trajectory(times, states, _clairaut_drift(p, states, k0), events)


class OrbitKind(str, enum.Enum):
    MERIDIONAL = "Meridional"
    EQUATORIAL = "Equatorial"
    OSCILLATING = "Oscillating"
    ASYMPTOTIC = "Asymptotic"


@dataclass(frozen=True)
class Classification:
    kind: OrbitKind
    s_lo: float | None = None
    s_hi: float | None = None


def _level_roots(p: MetricProfile, level: float, n_grid: int = 8192) -> list[float]:
    """Transversal solutions of r(s) = level on (0, M)."""
    s = np.linspace(0.0, p.M, n_grid + 1)
    g = p.r(s) - level
    g[0], g[-1] = -level, -level
    out = [float(x) for x in s[1:-1][g[1:-1] == 0.0]]
    for i in np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)[0]:
        out.append(brentq(lambda x: p.r(x) - level, s[i], s[i + 1], xtol=1e-14, rtol=1e-15))
    return sorted(out)


def classify(p: MetricProfile, x0: PhasePoint, ambiguity_tol: float = AMBIGUITY_TOL) -> Classification:
    """Meridional / equatorial / oscillating / asymptotic dichotomy of the orbit through ``x0``."""
    r0 = p.reference_equator.radius
    kappa = abs(clairaut(p, x0))
    if kappa <= POLE_GUARD_K * r0:
        return Classification(OrbitKind.MERIDIONAL)
    eqs = p.equators
    if abs(math.sin(x0.beta)) < 1e-12 and any(abs(e.s - x0.s) < 1e-9 for e in eqs):
        return Classification(OrbitKind.EQUATORIAL, x0.s, x0.s)

    roots = _level_roots(p, kappa)
    lo = max((x for x in roots if x <= x0.s), default=0.0)
    hi = min((x for x in roots if x >= x0.s), default=p.M)
    near = [e for e in eqs if lo <= e.s <= hi and abs(e.radius - kappa) <= ambiguity_tol * r0]
    exact = [e for e in near if abs(e.radius - kappa) <= ASYMPTOTIC_TOL * r0]
    if len(near) > len(exact):
        raise ToleranceAmbiguity(
            f"|K| = {kappa:.15g} within {ambiguity_tol:g} r(s0) of a critical value of r"
        )
    if exact:
        left = [e.s for e in exact if e.s < x0.s]
        right = [e.s for e in exact if e.s > x0.s]
        s_minus = max(left) if left else None
        s_plus = min(right) if right else None
        if s_minus is None:
            s_minus = s_plus
        if s_plus is None:
            s_plus = s_minus
        return Classification(OrbitKind.ASYMPTOTIC, s_minus, s_plus)
    if not (p.dr(lo) > 0 and p.dr(hi) < 0):
        raise ToleranceAmbiguity("band boundary is not a transversal turning point")
    return Classification(OrbitKind.OSCILLATING, lo, hi)
