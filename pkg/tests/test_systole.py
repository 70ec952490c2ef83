import math

import pytest

from spindle.annulus import eta_grid
from spindle.errors import CutoffTooSmall
from spindle.genfun import genfun_from_integral
from spindle.measure import area
from spindle.pipeline import Numerics, analyze
from spindle.profile import BesseSpec, OrbifoldSignature, make_besse, make_round, perturb_bump
from spindle.systole import (ClosedGeodesic, GeodesicKind, Verdict, closure_residual, enumerate_closed,
                             l_min_in_class, ratios, tau_sequence, verdict)
from spindle.topology import class_of_winding


def besse(m, n, c=()):
    return make_besse(BesseSpec(OrbifoldSignature(m, n), c))


def run(p):
    return analyze(p, Numerics(eta_grid_n=17), with_returns=False).report


PI = math.pi


class TestZoll:
    def test_round(self):
        r = run(make_round())
        assert r.l_min == pytest.approx(2 * PI)
        assert r.l_min_contr == pytest.approx(4 * PI)
        assert r.l_min_k[2] == pytest.approx(2 * PI)
        assert r.rho_contr == pytest.approx(4 * PI, rel=1e-10)
        assert r.s3_lift == pytest.approx(1.0, rel=1e-10)
        assert all(v is Verdict.AT_BOUND for v in r.verdicts.values())
        assert set(r.verdicts) == {"A", "B", "C"}

    def test_besse_two_one(self):
        r = run(besse(2, 1))
        assert r.l_min_contr == pytest.approx(6 * PI, rel=1e-10)
        assert r.tau_seq == pytest.approx([2 * PI, 4 * PI, 6 * PI], rel=1e-10)
        assert r.rho_periodspec == pytest.approx(6 * PI, rel=1e-10)
        assert set(r.verdicts) == {"A", "C"}
        assert r.bounds["C"] == pytest.approx(6 * PI)
        assert all(v is Verdict.AT_BOUND for v in r.verdicts.values())

    def test_besse_two_three(self):
        r = run(besse(2, 3, (0.3,)))
        assert r.area == pytest.approx(10 * PI, rel=1e-12)
        assert r.l_min_contr == pytest.approx(10 * PI, rel=1e-10)
        assert r.l_min_k[5] == pytest.approx(2 * PI, rel=1e-10)
        assert r.tau_seq == pytest.approx([2 * PI * i for i in range(1, 6)], rel=1e-10)
        assert all(v is Verdict.AT_BOUND for v in r.verdicts.values())

    def test_besse_one_three(self):
        r = run(besse(1, 3))
        assert r.l_min_k == pytest.approx({1: 8 * PI, 2: 4 * PI, 4: 2 * PI}, rel=1e-10)
        assert r.rho_contr_k[2] == pytest.approx(2 * PI, rel=1e-10)
        assert r.bounds["B"] == pytest.approx(2 * PI)
        assert r.rho_sys_k == r.rho_contr_k

    def test_meridian_class_from_limit(self):
        r = run(besse(2, 1))
        mer = [g for g in r.geodesics if g.kind is GeodesicKind.MERIDIAN]
        assert len(mer) == 1 and mer[0].class_from_limit
        assert mer[0].length == pytest.approx(2 * 2 * besse(2, 1).M)
        assert mer[0].homotopy.contractible


@pytest.fixture(scope="module")
def bumped():
    return perturb_bump(make_round(), 0.8, 0.4, -0.1)


class TestPerturbed:
    def test_strictly_below(self, bumped):
        r = run(bumped)
        assert r.verdicts["A"] is Verdict.BELOW_BOUND
        assert r.margins["A"] > 1e-3
        assert r.ok

    def test_enumerated_orbits_close(self, bumped):
        G = genfun_from_integral(bumped, eta_grid(17))
        geos = enumerate_closed(bumped, G)
        osc = [g for g in geos if g.kind is GeodesicKind.OSCILLATING]
        assert osc
        for g in osc:
            assert g.eta <= 0
            assert g.closure_residual < 1e-6
            # independent re-integration
            assert closure_residual(bumped, g.eta, g.length) < 1e-6
        assert [g.length for g in geos] == sorted(g.length for g in geos)

    def test_unverified_matches_verified(self, bumped):
        G = genfun_from_integral(bumped, eta_grid(17))
        a = enumerate_closed(bumped, G)
        b = enumerate_closed(bumped, G, verify=False)
        assert [g.length for g in a] == [g.length for g in b]

    def test_q_max_floor(self, bumped):
        G = genfun_from_integral(bumped, eta_grid(17))
        with pytest.raises(ValueError):
            enumerate_closed(bumped, G, q_max=0)


class TestHelpers:
    def geo(self, length, w, family, order=3):
        sig = OrbifoldSignature(2, order - 2) if order > 2 else OrbifoldSignature(1, 1)
        return ClosedGeodesic(GeodesicKind.OSCILLATING, -0.5, 1, length, w, class_of_winding(w, sig), family)

    def test_verdict(self):
        assert verdict(1.0, 1.0) is Verdict.AT_BOUND
        assert verdict(1.0 - 5e-5, 1.0) is Verdict.AT_BOUND
        assert verdict(0.99, 1.0) is Verdict.BELOW_BOUND
        assert verdict(1.001, 1.0) is Verdict.VIOLATION

    def test_tau_sequence_family_fills(self):
        geos = [self.geo(1.0, 1, False), self.geo(2.0, 2, True), self.geo(3.0, 1, False)]
        assert tau_sequence(geos, 4) == [1.0, 2.0, 2.0, 2.0]

    def test_tau_sequence_too_short(self):
        with pytest.raises(CutoffTooSmall):
            tau_sequence([self.geo(1.0, 1, False)], 2)

    def test_l_min_uses_iterates(self):
        geos = [self.geo(1.0, 1, False), self.geo(2.5, 0, False)]
        sig = OrbifoldSignature(2, 1)
        assert l_min_in_class(geos, sig, 1) == 2.5
        assert l_min_in_class(geos, sig, 3) == 1.0

    def test_cutoff_too_small(self):
        geos = [self.geo(1.0, 1, False)]
        with pytest.raises(CutoffTooSmall):
            l_min_in_class(geos, OrbifoldSignature(2, 1), 1, cutoff=2.0)

    def test_ratios_with_small_cutoff(self):
        p = besse(2, 1)
        G = genfun_from_integral(p, eta_grid(17))
        geos = enumerate_closed(p, G, cutoff=5 * PI)
        with pytest.raises(CutoffTooSmall):
            ratios(p, area(p), geos, cutoff=5 * PI)
