"""Radial profiles of rotationally symmetric spindle orbifolds.

A profile is the function ``r`` in the metric ``g = r(s)^2 dtheta^2 + ds^2``
on ``(0, M)``, together with the orders ``(m, n)`` of the two cone points.
The cone-angle conditions ``r'(0+) = 1/m`` and ``r'(M-) = -1/n`` hold for
every profile built here.

All evaluators accept scalars or numpy arrays and return the same shape.
Profiles are immutable after construction and picklable, so they can be
shipped to worker processes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np
from numpy.polynomial import chebyshev as cheb
from numpy.polynomial import polynomial as poly
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator
from scipy.optimize import brentq

from .errors import DegenerateCritical, MonotonicityViolation, RangeViolation

#: absolute tolerance for locating zeros of r'
CRIT_XTOL = 1e-10


@dataclass(frozen=True)
class OrbifoldSignature:
    """Cone orders ``(m, n)`` of the spindle ``S^2(m, n)``."""

    m: int
    n: int

    def __post_init__(self):
        if int(self.m) != self.m or int(self.n) != self.n or self.m < 1 or self.n < 1:
            raise ValueError(f"cone orders must be positive integers, got ({self.m}, {self.n})")

    @property
    def alpha(self) -> int:
        return (self.m + self.n) % 2

    @property
    def order(self) -> int:
        """Order of the fundamental group of the unit tangent bundle."""
        return self.m + self.n

    @property
    def k_free(self) -> int:
        return self.order // math.gcd(self.m, self.n)

    @property
    def period_index(self) -> int:
        """Index ``(m+n)/(2-alpha)`` of the higher systolic ratio that is sharp."""
        return self.order // (2 - self.alpha)


class Equator(NamedTuple):
    s: float
    radius: float

    @property
    def length(self) -> float:
        return 2.0 * math.pi * self.radius


class MetricProfile:
    """Base class: subclasses provide ``_r``, ``_dr`` and ``_d2r`` on arrays."""

    signature: OrbifoldSignature
    M: float
    provenance: str = "abstract"

    def r(self, s):
        return self._wrap(self._r, s)

    def dr(self, s):
        return self._wrap(self._dr, s)

    def d2r(self, s):
        return self._wrap(self._d2r, s)

    def r_dr(self, s: float) -> tuple[float, float]:
        """Scalar ``(r(s), r'(s))``; the hot path of the geodesic ODE."""
        a = np.asarray([s], dtype=float)
        return float(self._r(a)[0]), float(self._dr(a)[0])

    @staticmethod
    def _wrap(fn, s):
        if np.ndim(s) == 0:
            return float(fn(np.asarray([s], dtype=float))[0])
        return fn(np.asarray(s, dtype=float))

    @cached_property
    def equators(self) -> list[Equator]:
        return equators(self)

    @cached_property
    def reference_equator(self) -> Equator:
        """Equator of minimal radius (the one carrying the Birkhoff annulus)."""
        eqs = self.equators
        rmin = min(e.radius for e in eqs)
        ties = [e for e in eqs if abs(e.radius - rmin) <= 1e-12 * max(rmin, 1.0)]
        if len(ties) > 1:
            warnings.warn(
                f"{len(ties)} equators tie for minimal radius; using s0={ties[0].s:.12g}",
                stacklevel=2,
            )
        return ties[0]

    @property
    def breakpoints(self) -> tuple[float, ...]:
        """Interior points where ``r`` is less smooth; quadratures split there."""
        return ()

    def describe(self) -> dict:
        return {"type": self.provenance, "m": self.signature.m, "n": self.signature.n}

    def __repr__(self):
        return f"{type(self).__name__}(m={self.signature.m}, n={self.signature.n}, M={self.M:.12g})"


class RoundProfile(MetricProfile):
    provenance = "round"

    def __init__(self):
        self.signature = OrbifoldSignature(1, 1)
        self.M = math.pi

    def r_dr(self, s):
        return math.sin(s), math.cos(s)

    def _r(self, s):
        return np.sin(s)

    def _dr(self, s):
        return np.cos(s)

    def _d2r(self, s):
        return -np.sin(s)


@dataclass(frozen=True)
class BesseSpec:
    """Odd function ``h(v) = (m-n)/2 v + sum_j c_j (v^(2j+1) - v)``.

    The correction terms vanish at ``v = +-1``, so ``h(+-1) = +-(m-n)/2`` holds
    for every coefficient list.
    """

    signature: OrbifoldSignature
    coeffs: tuple[float, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    @cached_property
    def power_coeffs(self) -> np.ndarray:
        m, n = self.signature.m, self.signature.n
        deg = 2 * len(self.coeffs) + 1
        pc = np.zeros(deg + 1)
        pc[1] = (m - n) / 2.0 - sum(self.coeffs)
        for j, c in enumerate(self.coeffs, start=1):
            pc[2 * j + 1] += c
        return pc

    def h(self, v):
        return poly.polyval(v, self.power_coeffs)

    def max_abs_h(self, n_check: int = 20001) -> float:
        v = np.linspace(-1.0, 1.0, n_check)
        return float(np.max(np.abs(self.h(v))))

    def check(self, n_check: int = 20001) -> None:
        bound = self.signature.order / 2.0
        hmax = self.max_abs_h(n_check)
        if hmax >= bound:
            raise RangeViolation(f"max |h| = {hmax:.6g} reaches (m+n)/2 = {bound:.6g}")


class BesseProfile(MetricProfile):
    """Besse metric ``((m+n)/2 + h(cos R))^2 dR^2 + sin^2 R dtheta^2`` in arclength form.

    ``h(cos R)`` is expanded as a cosine series (Chebyshev coefficients of
    ``h``), which makes ``s(R)`` exact and ``R(s)`` a Newton solve.
    """

    provenance = "besse"

    def __init__(self, spec: BesseSpec):
        spec.check()
        self.spec = spec
        self.signature = spec.signature
        self._half = spec.signature.order / 2.0
        b = cheb.poly2cheb(spec.power_coeffs)
        self._k = np.arange(len(b), dtype=float)
        self._b = b
        # the sine terms of s(R) vanish at R = pi
        self.M = self._half * math.pi
        self._terms = [(float(k), float(bk), float(bk / k)) for k, bk in zip(self._k[1:], b[1:]) if bk != 0.0]
        self._last_R = None
        # inverse table for Newton starting values
        self._R_tab = np.linspace(0.0, math.pi, 4097)
        self._s_tab = self.s_of_R(self._R_tab)

    def s_of_R(self, R):
        R = np.asarray(R, dtype=float)
        k, b = self._k[1:], self._b[1:]
        return self._half * R + np.sin(np.multiply.outer(R, k)) @ (b / k)

    def _psi(self, R):
        return self._half + np.cos(np.multiply.outer(R, self._k)) @ self._b

    def _dpsi(self, R):
        return -np.sin(np.multiply.outer(R, self._k)) @ (self._b * self._k)

    def R_of_s(self, s):
        s = np.clip(np.asarray(s, dtype=float), 0.0, self.M)
        R = np.interp(s, self._s_tab, self._R_tab)
        for _ in range(60):
            step = (self.s_of_R(R) - s) / self._psi(R)
            R = np.clip(R - step, 0.0, math.pi)
            if np.max(np.abs(step), initial=0.0) < 1e-15:
                break
        return R

    def r_dr(self, s):
        # scalar Newton warm-started from the previous call; the ODE queries nearby points
        s = min(max(float(s), 0.0), self.M)
        terms = self._terms
        R = self._last_R if self._last_R is not None else math.pi * s / self.M
        for _ in range(60):
            sr, psi = self._half * R, self._half
            for k, bk, bk_k in terms:
                sr += bk_k * math.sin(k * R)
                psi += bk * math.cos(k * R)
            step = (sr - s) / psi
            R = min(max(R - step, 0.0), math.pi)
            if abs(step) < 1e-15:
                break
        self._last_R = R
        psi = self._half + sum(bk * math.cos(k * R) for k, bk, _ in terms)
        return math.sin(R), math.cos(R) / psi

    def _r(self, s):
        return np.sin(self.R_of_s(s))

    def _dr(self, s):
        R = self.R_of_s(s)
        return np.cos(R) / self._psi(R)

    def _d2r(self, s):
        R = self.R_of_s(s)
        psi = self._psi(R)
        return (-np.sin(R) / psi - np.cos(R) * self._dpsi(R) / psi**2) / psi

    def describe(self):
        d = super().describe()
        d["h_coeffs"] = list(self.spec.coeffs)
        return d


def _horner(c, x: float) -> float:
    acc = 0.0
    for ck in reversed(c):
        acc = acc * x + ck
    return float(acc)


def _quintic_cap(slope0: float, e: float, v: float, dv: float, d2v: float) -> np.ndarray:
    """Power coefficients of p on [0, e] with p(0)=0, p'(0)=slope0, p''(0)=0 and C^2 match at e."""
    a = np.zeros(6)
    a[1] = slope0
    A = np.array(
        [
            [e**3, e**4, e**5],
            [3 * e**2, 4 * e**3, 5 * e**4],
            [6 * e, 12 * e**2, 20 * e**3],
        ]
    )
    rhs = np.array([v - slope0 * e, dv - slope0, d2v])
    a[3:] = np.linalg.solve(A, rhs)
    return a


def _cubic_cap(slope0: float, e: float, v: float, dv: float) -> np.ndarray:
    a = np.zeros(4)
    a[1] = slope0
    A = np.array([[e**2, e**3], [2 * e, 3 * e**2]])
    a[2:] = np.linalg.solve(A, np.array([v - slope0 * e, dv - slope0]))
    return a


class PolePerturbedProfile(MetricProfile):
    """``base`` with its polar caps ``[0, eps]`` and ``[M-eps, M]`` replaced.

    The caps are polynomial Hermite patches that start with the cone slopes
    ``1/m`` and ``-1/n`` and join ``base`` at ``eps`` and ``M - eps``
    (C^2 for ``shape="quintic"``, C^1 for ``shape="cubic"``).
    """

    provenance = "perturbed"

    def __init__(self, base: MetricProfile, eps: float, m: int, n: int, shape: str = "quintic"):
        M = base.M
        if not 0.0 < eps < M / 4.0:
            raise ValueError(f"eps must lie in (0, M/4) = (0, {M / 4:.6g}), got {eps}")
        self.base = base
        self.eps = float(eps)
        self.shape = shape
        self.signature = OrbifoldSignature(m, n)
        self.M = M
        a, b = self.eps, M - self.eps
        if shape == "quintic":
            self._north = _quintic_cap(1.0 / m, a, base.r(a), base.dr(a), base.d2r(a))
            self._south = _quintic_cap(1.0 / n, a, base.r(b), -base.dr(b), base.d2r(b))
        elif shape == "cubic":
            self._north = _cubic_cap(1.0 / m, a, base.r(a), base.dr(a))
            self._south = _cubic_cap(1.0 / n, a, base.r(b), -base.dr(b))
        else:
            raise ValueError(f"unknown cap shape {shape!r}")
        self._north_d = poly.polyder(self._north)
        self._south_d = poly.polyder(self._south)
        x = np.linspace(0.0, a, 4001)
        if np.min(poly.polyval(x, poly.polyder(self._north))) <= 0.0:
            raise MonotonicityViolation(f"north cap not strictly increasing for eps={eps}, m={m}")
        if np.min(poly.polyval(x, poly.polyder(self._south))) <= 0.0:
            raise MonotonicityViolation(f"south cap not strictly decreasing for eps={eps}, n={n}")

    @property
    def breakpoints(self):
        return tuple(sorted({self.eps, self.M - self.eps, *self.base.breakpoints}))

    def r_dr(self, s: float) -> tuple[float, float]:
        s = float(s)
        if s < self.eps:
            return _horner(self._north, s), _horner(self._north_d, s)
        if s > self.M - self.eps:
            x = self.M - s
            return _horner(self._south, x), -_horner(self._south_d, x)
        return self.base.r_dr(s)

    def _eval(self, s, order):
        base_fn = (self.base._r, self.base._dr, self.base._d2r)[order]
        out = np.array(base_fn(s), dtype=float, copy=True)
        north = s < self.eps
        south = s > self.M - self.eps
        cn = poly.polyder(self._north, order) if order else self._north
        cs = poly.polyder(self._south, order) if order else self._south
        out[north] = poly.polyval(s[north], cn)
        out[south] = poly.polyval(self.M - s[south], cs) * (-1) ** order
        return out

    def _r(self, s):
        return self._eval(s, 0)

    def _dr(self, s):
        return self._eval(s, 1)

    def _d2r(self, s):
        return self._eval(s, 2)

    def describe(self):
        d = super().describe()
        d.update(eps=self.eps, shape=self.shape, base=self.base.describe())
        return d


def _bump(x):
    """Polynomial bump (1 - x^2)^4 on |x| < 1 and its first two derivatives.

    It is C^3 across |x| = 1, which are breakpoints of the profile, and a
    plain polynomial inside, which the step-size control handles well.
    """
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < 1.0
    xi = x[inside]
    u = 1.0 - xi**2
    out = np.zeros((3,) + x.shape)
    out[0][inside] = u**4
    out[1][inside] = -8.0 * xi * u**3
    out[2][inside] = -8.0 * u**3 + 48.0 * xi**2 * u**2
    return out


class BumpProfile(MetricProfile):
    """``r(s) (1 + amplitude * phi((s - center)/width))`` with the compact bump ``phi = (1 - x^2)^4``."""

    provenance = "perturbed"

    def __init__(self, base: MetricProfile, center: float, width: float, amplitude: float):
        if width <= 0 or center - width <= 0 or center + width >= base.M:
            raise ValueError("bump support must lie strictly inside (0, M)")
        if amplitude <= -1.0:
            raise ValueError("amplitude must exceed -1 to keep r positive")
        self.base = base
        self.center, self.width, self.amplitude = float(center), float(width), float(amplitude)
        self.signature = base.signature
        self.M = base.M

    @property
    def breakpoints(self):
        return tuple(sorted({self.center - self.width, self.center + self.width, *self.base.breakpoints}))

    def r_dr(self, s: float) -> tuple[float, float]:
        rb, drb = self.base.r_dr(s)
        x = (float(s) - self.center) / self.width
        if abs(x) >= 1.0:
            return rb, drb
        u = 1.0 - x * x
        f = u**4
        d1 = -8.0 * x * u**3
        a = self.amplitude
        return rb * (1.0 + a * f), drb * (1.0 + a * f) + rb * a * d1 / self.width

    def _parts(self, s):
        return _bump((s - self.center) / self.width)

    def _r(self, s):
        f = self._parts(s)[0]
        return self.base._r(s) * (1.0 + self.amplitude * f)

    def _dr(self, s):
        f, d1, _ = self._parts(s)
        a, w = self.amplitude, self.width
        return self.base._dr(s) * (1.0 + a * f) + self.base._r(s) * a * d1 / w

    def _d2r(self, s):
        f, d1, d2 = self._parts(s)
        a, w = self.amplitude, self.width
        return (
            self.base._d2r(s) * (1.0 + a * f)
            + 2.0 * self.base._dr(s) * a * d1 / w
            + self.base._r(s) * a * d2 / w**2
        )

    def describe(self):
        d = super().describe()
        d.update(center=self.center, width=self.width, amplitude=self.amplitude, base=self.base.describe())
        return d


class SampledProfile(MetricProfile):
    """Monotone (PCHIP) cubic through knots, with the cone slopes imposed at both ends."""

    provenance = "sampled"

    def __init__(self, knots: Sequence[tuple[float, float]], m: int, n: int):
        k = np.asarray(knots, dtype=float)
        if k.ndim != 2 or k.shape[1] != 2 or len(k) < 3:
            raise ValueError("knots must be a list of at least three (s, r) pairs")
        s, r = k[:, 0], k[:, 1]
        if s[0] != 0.0 or r[0] != 0.0 or r[-1] != 0.0 or np.any(np.diff(s) <= 0):
            raise ValueError("knots must start at (0, 0), end at (M, 0) with increasing s")
        if np.any(r[1:-1] <= 0):
            raise ValueError("interior knot radii must be positive")
        self.knots = k
        self.signature = OrbifoldSignature(m, n)
        self.M = float(s[-1])
        d = PchipInterpolator(s, r).derivative()(s)
        d[0], d[-1] = 1.0 / m, -1.0 / n
        self._spl = CubicHermiteSpline(s, r, d)
        self._d1 = self._spl.derivative()
        self._d2 = self._spl.derivative(2)

    @property
    def breakpoints(self):
        return tuple(float(x) for x in self.knots[1:-1, 0])

    def _r(self, s):
        return self._spl(s)

    def _dr(self, s):
        return self._d1(s)

    def _d2r(self, s):
        return self._d2(s)

    def describe(self):
        d = super().describe()
        d["knots"] = self.knots.tolist()
        return d


def make_round() -> RoundProfile:
    return RoundProfile()


def make_besse(spec: BesseSpec) -> BesseProfile:
    return BesseProfile(spec)


def perturb_poles(base: MetricProfile, eps: float, m: int | None = None, n: int | None = None,
                  shape: str = "quintic") -> PolePerturbedProfile:
    m = base.signature.m if m is None else m
    n = base.signature.n if n is None else n
    return PolePerturbedProfile(base, eps, m, n, shape=shape)


def perturb_bump(base: MetricProfile, center: float, width: float, amplitude: float) -> BumpProfile:
    return BumpProfile(base, center, width, amplitude)


def equators(p: MetricProfile, n_grid: int = 8192, xtol: float = CRIT_XTOL) -> list[Equator]:
    """Interior critical points of ``r``, sorted by ``s``.

    Raises :class:`DegenerateCritical` when ``r'`` is numerically zero over a
    stretch of the grid, i.e. when the critical set is not isolated.
    """
    s = np.linspace(0.0, p.M, n_grid + 1)[1:-1]
    d = p.dr(s)
    scale = max(float(np.max(np.abs(d))), 1e-300)
    flat = np.abs(d) <= 1e-12 * scale
    if np.any(flat[:-1] & flat[1:]):
        raise DegenerateCritical("r' vanishes on an interval")
    out = []
    for i in np.nonzero(np.sign(d[:-1]) * np.sign(d[1:]) <= 0)[0]:
        a, b = s[i], s[i + 1]
        if d[i] == 0.0:
            c = a
        elif d[i + 1] == 0.0:
            continue
        else:
            c = brentq(p.dr, a, b, xtol=xtol, rtol=4 * np.finfo(float).eps)
        if out and abs(out[-1].s - c) < xtol:
            continue
        out.append(Equator(float(c), float(p.r(c))))
    if not out:
        raise DegenerateCritical("r has no interior critical point")
    return out
