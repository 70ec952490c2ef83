"""Homotopy classes of lifted closed geodesics in the unit tangent bundle.

The unit tangent bundle of S^2(m, n) is a lens space with fundamental
group Z_{m+n}.  A closed geodesic of total winding ``w`` about the axis
lifts to the class ``w mod (m+n)``, the positively oriented equator being
the generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import NotADivisor
from .profile import OrbifoldSignature


@dataclass(frozen=True)
class HomotopyClass:
    value: int
    order: int

    def __post_init__(self):
        if not 0 <= self.value < self.order:
            raise ValueError(f"class {self.value} outside Z_{self.order}")

    @property
    def contractible(self) -> bool:
        return self.value == 0

    def __add__(self, other: HomotopyClass) -> HomotopyClass:
        if other.order != self.order:
            raise ValueError("classes live in different groups")
        return HomotopyClass((self.value + other.value) % self.order, self.order)

    def __mul__(self, k: int) -> HomotopyClass:
        return HomotopyClass((self.value * k) % self.order, self.order)

    __rmul__ = __mul__


def class_of_winding(w: int, sig: OrbifoldSignature) -> HomotopyClass:
    if int(w) != w:
        raise ValueError(f"winding {w} is not an integer")
    return HomotopyClass(int(w) % sig.order, sig.order)


def divisors(n: int) -> list[int]:
    return [k for k in range(1, n + 1) if n % k == 0]


def in_subgroup_of_order(c: HomotopyClass, k: int) -> bool:
    """True iff ``c`` lies in the (unique) subgroup of order ``k`` of Z_{m+n}."""
    if k < 1 or c.order % k:
        raise NotADivisor(f"{k} does not divide {c.order}")
    return c.value % (c.order // k) == 0


def min_iterate_in_subgroup(c: HomotopyClass, k: int) -> int:
    """Smallest ``j >= 1`` with ``j * c`` in the subgroup of order ``k``."""
    if k < 1 or c.order % k:
        raise NotADivisor(f"{k} does not divide {c.order}")
    step = c.order // k
    return step // math.gcd(step, c.value) if c.value else 1


def min_contractible_iterate_nonenclosing(sig: OrbifoldSignature) -> int:
    """Iterations after which a simple loop missing both cone points lifts trivially."""
    return sig.order // math.gcd(sig.m, sig.n)
