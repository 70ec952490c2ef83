import math

import numpy as np
import pytest

from spindle.annulus import (AnnulusPoint, eta_grid, first_return, meridian_return, return_grid,
                             winding_offset)
from spindle.errors import NoReturn
from spindle.flow import PhasePoint, integrate
from spindle.genfun import IntegralEvaluator
from spindle.profile import BesseSpec, OrbifoldSignature, make_besse, make_round, perturb_bump


def besse(m, n, c=()):
    return make_besse(BesseSpec(OrbifoldSignature(m, n), c))


@pytest.fixture(scope="module")
def bumped():
    return perturb_bump(besse(2, 3, (0.3,)), 1.2, 0.6, -0.08)


class TestFirstReturn:
    @pytest.mark.parametrize("eta", [-0.9, -0.5, 0.2, 0.5])
    def test_round(self, eta):
        d = first_return(make_round(), eta)
        assert d.tau == pytest.approx(2 * math.pi, abs=1e-9)
        assert d.winding == pytest.approx(-math.copysign(1.0, eta), abs=1e-9)
        assert d.delta_xi == pytest.approx(0.0, abs=1e-9)
        assert d.ode_drift < 1e-10

    @pytest.mark.parametrize("m,n,c", [(2, 1, ()), (2, 3, (0.3,)), (5, 2, (-0.4,))])
    @pytest.mark.parametrize("eta", [-0.5, 0.5, 0.9])
    def test_besse_is_rigid(self, m, n, c, eta):
        # oracle: every orbit closes with period (m+n) pi and shift alpha L / 2
        p = besse(m, n, c)
        d = first_return(p, eta)
        sig = p.signature
        assert d.tau == pytest.approx(sig.order * math.pi, abs=1e-8)
        assert d.winding == pytest.approx(-math.copysign(sig.order / 2, eta), abs=1e-8)
        assert d.delta_xi == pytest.approx(sig.alpha * math.pi, abs=1e-8)

    def test_winding_odd_on_perturbed(self, bumped):
        for eta in (0.15, 0.45, 0.8):
            assert first_return(bumped, eta).winding == pytest.approx(
                -first_return(bumped, -eta).winding, abs=1e-8)

    def test_matches_direct_integration(self, bumped):
        # independent oracle: integrate past the section and read off the second northbound crossing
        eq = bumped.reference_equator
        d = first_return(bumped, 0.35)
        x0 = PhasePoint(0.0, math.acos(-0.35), eq.s)
        tr = integrate(bumped, x0, d.tau + 1.0, section=eq.s, direction=1)
        t_north = [t for t, _ in tr.events if t > 1e-9]
        assert t_north[0] == pytest.approx(d.tau, abs=1e-8)

    def test_tau_matches_reduced_integral(self, bumped):
        ev = IntegralEvaluator(bumped)
        for eta in (-0.6, 0.3):
            assert first_return(bumped, eta).tau == pytest.approx(ev.tau(eta), abs=1e-8)

    def test_contact_identity(self, bumped):
        # F = tau + eta F' from returns against F from the reduced integrals
        ev = IntegralEvaluator(bumped)
        L, order = ev.L, bumped.signature.order
        for eta in (-0.7, 0.25, 0.6):
            d = first_return(bumped, eta)
            fp = L * d.winding + math.copysign(order * L / 2, eta)
            assert d.tau + eta * fp == pytest.approx(ev.F(eta), abs=1e-7 * L)

    def test_eta_range(self):
        with pytest.raises(ValueError):
            first_return(make_round(), 1.0)
        with pytest.raises(ValueError):
            first_return(make_round(), 0.0)

    def test_time_cap_censors(self):
        with pytest.raises(NoReturn):
            first_return(make_round(), 0.5, cap=1.0)


class TestMeridian:
    def test_round(self):
        d = meridian_return(make_round())
        assert d.tau == pytest.approx(2 * math.pi)
        assert d.winding == 1.0 and d.delta_xi == 0.0

    def test_odd_signature(self):
        d = meridian_return(besse(2, 1))
        assert d.delta_xi == pytest.approx(math.pi)
        assert d.winding == 1.5

    def test_limit_of_small_eta(self):
        p = besse(2, 3, (0.3,))
        near = first_return(p, -1e-4)
        d = meridian_return(p)
        assert near.tau == pytest.approx(d.tau, abs=1e-6)
        assert near.delta_xi == pytest.approx(d.delta_xi, abs=1e-3)


class TestGrid:
    def test_chebyshev_lobatto(self):
        g = eta_grid(17)
        assert g[0] == -1.0 and g[-1] == 1.0 and g[8] == 0.0
        assert np.array_equal(g, -g[::-1])
        np.testing.assert_allclose(g, -np.cos(np.pi * np.arange(17) / 16), atol=1e-15)

    def test_shrunk(self):
        g = eta_grid(33, 1e-3)
        assert g[-1] == pytest.approx(0.999)

    def test_even_grid_gets_zero(self):
        rs = return_grid(make_round(), 16)
        assert len(rs) == 17 and any(r.eta == 0.0 for r in rs)

    def test_too_small(self):
        with pytest.raises(ValueError):
            return_grid(make_round(), 9)

    def test_censoring_flags(self):
        rs = return_grid(make_round(), 17, cap=3.0)
        cens = [r for r in rs if r.censored]
        assert len(cens) == 16
        assert all(math.isnan(r.tau) for r in cens)

    def test_jobs_independent(self, bumped):
        a = return_grid(bumped, 17, jobs=1)
        b = return_grid(bumped, 17, jobs=2)
        assert a == b


class TestMisc:
    def test_annulus_point(self):
        x = AnnulusPoint(7.0, 0.3, 2 * math.pi)
        assert x.xi == pytest.approx(7.0 - 2 * math.pi)
        with pytest.raises(ValueError):
            AnnulusPoint(0.0, 1.0, 1.0)

    @pytest.mark.parametrize("m,n", [(1, 1), (2, 1), (2, 3), (5, 2)])
    def test_winding_offset_continuity(self, m, n):
        # delta_xi(0+) = delta_xi(0-) = alpha L / 2 with W -> -+ (m+n)/2
        p = besse(m, n)
        sig = p.signature
        for side in (-1, 1):
            w = -side * sig.order / 2
            assert w - winding_offset(p, side * 0.5) == pytest.approx(sig.alpha / 2)
