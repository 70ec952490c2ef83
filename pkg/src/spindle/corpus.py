"""Built-in test profiles: seeded Besse metrics and non-Besse perturbations."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import RangeViolation
from .profile import (BesseSpec, MetricProfile, OrbifoldSignature, make_besse, make_round,
                      perturb_bump, perturb_poles)

SIGNATURES = ((1, 1), (2, 1), (2, 3), (3, 3), (5, 2))
# keep |h| comfortably below (m+n)/2
H_MARGIN = 0.8


def random_besse_spec(m: int, n: int, rng: np.random.Generator, n_coeffs: int = 2,
                      scale: float = 0.4) -> BesseSpec:
    """Admissible Besse spec with ``n_coeffs`` random odd corrections, by rejection."""
    sig = OrbifoldSignature(m, n)
    for _ in range(1000):
        c = tuple(float(x) for x in rng.uniform(-scale, scale, n_coeffs) * sig.order / 2)
        spec = BesseSpec(sig, c)
        if spec.max_abs_h() < H_MARGIN * sig.order / 2:
            return spec
    raise RangeViolation(f"no admissible h found for ({m},{n})")


@dataclass(frozen=True)
class Entry:
    name: str
    profile: MetricProfile
    besse: bool
    amplitude: float = 0.0


def besse_suite(seed: int = 0, per_signature: int = 3) -> list[Entry]:
    rng = np.random.default_rng(seed)
    out = []
    for m, n in SIGNATURES:
        for i in range(per_signature):
            spec = random_besse_spec(m, n, rng)
            out.append(Entry(f"besse_{m}_{n}_{i}", make_besse(spec), True))
    return out


def _besse(m, n, c=()):
    return make_besse(BesseSpec(OrbifoldSignature(m, n), c))


def dumbbell() -> MetricProfile:
    """Round sphere pinched at the middle: two bulges and a minimal neck."""
    return perturb_bump(make_round(), math.pi / 2, 0.5, -0.3)


def perturbed_suite() -> list[Entry]:
    """Non-Besse profiles with perturbation amplitude at least 0.05."""
    out = []
    # the round sphere already has the (1,1) cone slopes, so its pole
    # deformation is almost trivial; (1,1) is covered by bumps instead
    for m, n in SIGNATURES[1:]:
        out.append(Entry(f"poles_round_{m}_{n}", perturb_poles(make_round(), 0.3, m, n), False, 0.3))
    bumps = [
        ("bump_round_1_1", make_round(), 0.8, 0.4, -0.1),
        ("bump_round_1_1_b", make_round(), 2.0, 0.5, 0.12),
        ("bump_besse_2_1", _besse(2, 1), 1.0, 0.5, 0.1),
        ("bump_besse_2_3", _besse(2, 3, (0.3,)), 1.2, 0.6, -0.08),
        ("bump_besse_3_3", _besse(3, 3), 1.5, 0.6, 0.08),
        ("bump_besse_5_2", _besse(5, 2, (-0.4,)), 2.0, 0.8, -0.06),
        ("bump_besse_1_3", _besse(1, 3), 0.8, 0.4, -0.2),
    ]
    for name, base, c, w, a in bumps:
        out.append(Entry(name, perturb_bump(base, c, w, a), False, abs(a)))
    return out


def corpus(seed: int = 0, per_signature: int = 3) -> list[Entry]:
    return [Entry("round", make_round(), True)] + besse_suite(seed, per_signature) + perturbed_suite() + [
        Entry("dumbbell", dumbbell(), False, 0.3)]
