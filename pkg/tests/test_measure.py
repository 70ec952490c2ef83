import math

import numpy as np
import pytest

from spindle.corpus import dumbbell
from spindle.genfun import genfun_from_integral
from spindle.measure import (area, contact_volume_decomposed, contact_volume_direct, gamma_cos_integral,
                             gamma_intervals, gamma_volume_term)
from spindle.annulus import eta_grid
from spindle.profile import (BesseSpec, OrbifoldSignature, SampledProfile, make_besse, make_round,
                             perturb_bump, perturb_poles)


def besse(m, n, c=()):
    return make_besse(BesseSpec(OrbifoldSignature(m, n), c))


def test_round_area_and_volume():
    p = make_round()
    assert area(p) == pytest.approx(4 * math.pi, rel=1e-13)
    assert contact_volume_direct(p) == pytest.approx(8 * math.pi ** 2, rel=1e-13)
    v = contact_volume_decomposed(p)
    assert v.vol_decomposed == pytest.approx(8 * math.pi ** 2, rel=1e-9)
    assert v.gamma_part == 0.0


def test_besse_two_three():
    p = besse(2, 3, (0.3,))
    v = contact_volume_decomposed(p)
    assert v.area == pytest.approx(10 * math.pi, rel=1e-12)
    assert v.vol_direct == pytest.approx(20 * math.pi ** 2, rel=1e-12)
    assert v.vol_decomposed == pytest.approx(20 * math.pi ** 2, rel=1e-9)
    assert v.rel_mismatch < 1e-9


def test_area_against_trapezoid():
    # independent oracle: composite trapezoid on a fine grid
    p = perturb_poles(make_round(), 0.3, 5, 2)
    s = np.linspace(0.0, p.M, 400001)
    assert area(p) == pytest.approx(float(np.trapezoid(2 * math.pi * p.r(s), s)), rel=1e-9)


def test_sampled_area():
    knots = [(0.0, 0.0), (0.5, 0.4), (1.0, 0.7), (1.5, 0.8), (2.0, 0.6), (2.6, 0.0)]
    p = SampledProfile(knots, 2, 3)
    s = np.linspace(0.0, p.M, 200001)
    assert area(p) == pytest.approx(float(np.trapezoid(2 * math.pi * p.r(s), s)), rel=1e-8)


@pytest.mark.parametrize("make", [dumbbell, lambda: perturb_bump(make_round(), 1.6, 0.7, -0.12),
                                  lambda: perturb_bump(besse(3, 3), 1.5, 0.6, 0.08)])
def test_decomposition_matches_direct(make):
    p = make()
    G = genfun_from_integral(p, eta_grid(17))
    v = contact_volume_decomposed(p, G)
    assert v.rel_mismatch < 1e-8
    assert v.vol_decomposed == pytest.approx(v.vol_direct, rel=1e-8)


def test_dumbbell_gamma():
    p = dumbbell()
    ivs = gamma_intervals(p)
    # the neck itself is a touch point inside one interval spanning both bulges
    assert len(ivs) == 1
    (a, b), r0 = ivs[0], p.reference_equator.radius
    assert a < 1.2086 and b > 1.9330
    assert p.r(a) == pytest.approx(r0, abs=1e-12) and p.r(b) == pytest.approx(r0, abs=1e-12)
    assert gamma_cos_integral(p) > 0
    v = contact_volume_decomposed(p)
    assert v.gamma_part > 0
    assert v.gamma_part == pytest.approx(gamma_volume_term(p), rel=1e-12)


def test_saturated_part_of_besse():
    # F = tau + eta F' with tau = (m+n) pi constant: saturated part 2 L int tau = 2 L (m+n) pi
    p = besse(2, 1)
    v = contact_volume_decomposed(p)
    assert v.saturated_part == pytest.approx(2 * 2 * math.pi * 3 * math.pi, rel=1e-8)
