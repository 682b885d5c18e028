"""Closed-form rate constant and recovery curve.

The rate oracle is the hand-evaluated expression k D R* pi (R* + L tan a) /
(V_NE L), written out independently of the geometry module.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from erneflux.analytic import (
    CellParams,
    junction_flux,
    rate_constant,
    recovery_curve,
)
from erneflux.geometry import Cone, Reporter

CELL = CellParams(k=40, V_ER_um3=200.0, V_NE_um3=30.0)
ALPHA = math.radians(25.0)
L = 0.01


def hand_kappa(k, d, r_star, alpha, length, v_ne):
    a_star = r_star * math.pi * (r_star + length * math.tan(alpha))
    return k * d * a_star / (v_ne * length)


class TestRateConstant:
    def test_small_reporter(self):
        geom = Cone(R_um=9.25e-3, alpha_rad=ALPHA, L_um=L)
        reporter = Reporter("small", 3.3, 1.75e-3)
        rate = rate_constant(CELL, geom, reporter)
        assert rate.kappa_per_s == pytest.approx(
            hand_kappa(40, 3.3, 9.25e-3, ALPHA, L, 30.0), rel=1e-12
        )
        assert rate.kappa_per_s == pytest.approx(0.1779, rel=1e-3)
        assert rate.half_time_s == pytest.approx(math.log(2) / rate.kappa_per_s)
        assert rate.A_star_um2 == pytest.approx(4.0432e-4, rel=1e-3)

    def test_large_reporter(self):
        geom = Cone(R_um=8.5e-3, alpha_rad=ALPHA, L_um=L)
        reporter = Reporter("large", 0.52, 2.5e-3)
        rate = rate_constant(CELL, geom, reporter)
        assert rate.kappa_per_s == pytest.approx(
            hand_kappa(40, 0.52, 8.5e-3, ALPHA, L, 30.0), rel=1e-12
        )
        assert rate.kappa_per_s == pytest.approx(0.02437, rel=1e-3)

    def test_linear_in_diffusivity(self):
        geom = Cone(R_um=9.25e-3, alpha_rad=ALPHA, L_um=L)
        eps = 1e-9
        kappa_eps = rate_constant(CELL, geom, Reporter("tiny", eps, 0.0)).kappa_per_s
        kappa_one = rate_constant(CELL, geom, Reporter("unit", 1.0, 0.0)).kappa_per_s
        assert kappa_eps == pytest.approx(eps * kappa_one, rel=1e-12)

    @settings(max_examples=40, derandomize=True)
    @given(factor=st.floats(1.01, 5.0))
    def test_monotonicities(self, factor):
        geom = Cone(R_um=9.25e-3, alpha_rad=ALPHA, L_um=L)
        reporter = Reporter("small", 3.3, 0.0)
        base = rate_constant(CELL, geom, reporter).kappa_per_s
        assert rate_constant(
            CELL, geom, Reporter("fast", 3.3 * factor, 0.0)
        ).kappa_per_s > base
        more_junctions = CellParams(k=40 * int(math.ceil(factor)), V_ER_um3=200.0,
                                    V_NE_um3=30.0)
        assert rate_constant(more_junctions, geom, reporter).kappa_per_s > base
        bigger_ne = CellParams(k=40, V_ER_um3=200.0, V_NE_um3=30.0 * factor)
        assert rate_constant(bigger_ne, geom, reporter).kappa_per_s < base
        wider = Cone(R_um=9.25e-3 * factor, alpha_rad=ALPHA, L_um=L)
        assert rate_constant(CELL, wider, reporter).kappa_per_s > base
        steeper = Cone(R_um=9.25e-3, alpha_rad=min(ALPHA * factor, 1.5), L_um=L)
        assert rate_constant(CELL, steeper, reporter).kappa_per_s > base
        longer = Cone(R_um=9.25e-3, alpha_rad=ALPHA, L_um=L * factor)
        assert rate_constant(CELL, longer, reporter).kappa_per_s < base

    def test_cell_params_invariants(self):
        with pytest.raises(ValueError):
            CellParams(k=0, V_ER_um3=200.0, V_NE_um3=30.0)
        with pytest.raises(ValueError):
            CellParams(k=40, V_ER_um3=30.0, V_NE_um3=30.0)
        with pytest.raises(ValueError):
            CellParams(k=40, V_ER_um3=200.0, V_NE_um3=0.0)


class TestRecoveryCurve:
    KAPPA = 0.1779

    def test_bleach_endpoint_is_zero(self):
        curve = recovery_curve(self.KAPPA, 1.0, [0.0, 1.0, 2.0])
        assert curve.y[0] == 0.0

    def test_half_time_identity(self):
        t_half = math.log(2) / self.KAPPA
        curve = recovery_curve(self.KAPPA, 1.0, [0.0, t_half, 100.0])
        assert curve.y[1] == pytest.approx(0.5, rel=1e-12)
        assert t_half == pytest.approx(3.896, rel=1e-3)

    def test_plateau(self):
        curve = recovery_curve(self.KAPPA, 2.5, [0.0, 1.0, 1e4])
        assert curve.y[-1] == pytest.approx(2.5, rel=1e-10)

    def test_monotone_concave_bounded(self):
        t = np.linspace(0.0, 30.0, 300)
        curve = recovery_curve(self.KAPPA, 1.0, t)
        assert np.all(np.diff(curve.y) > 0)
        assert np.all(np.diff(curve.y, 2) < 0)
        assert np.all(curve.y < 1.0)

    def test_scale_invariance(self):
        t = np.linspace(0.0, 30.0, 50)
        unit = recovery_curve(self.KAPPA, 1.0, t)
        scaled = recovery_curve(self.KAPPA, 3.7, t)
        assert np.allclose(scaled.y, 3.7 * unit.y, rtol=1e-14)

    def test_unsorted_times_rejected(self):
        with pytest.raises(ValueError):
            recovery_curve(self.KAPPA, 1.0, [0.0, 2.0, 1.0])
        with pytest.raises(ValueError):
            recovery_curve(self.KAPPA, 1.0, [-1.0, 0.0, 1.0])


class TestJunctionFlux:
    GEOM = Cone(R_um=9.25e-3, alpha_rad=ALPHA, L_um=L)

    def test_equilibrium_gives_zero(self):
        assert junction_flux(self.GEOM, 3.3, 0.7, 0.7) == 0.0

    def test_unit_gradient_value(self):
        a_star = 9.25e-3 * math.pi * (9.25e-3 + L * math.tan(ALPHA))
        expected = 3.3 * a_star / L
        flux = junction_flux(self.GEOM, 3.3, 1.0, 0.0)
        assert flux == pytest.approx(expected, rel=1e-12)
        assert flux == pytest.approx(0.13343, rel=1e-3)

    def test_linear_in_gradient(self):
        one = junction_flux(self.GEOM, 3.3, 1.0, 0.0)
        two = junction_flux(self.GEOM, 3.3, 2.0, 0.0)
        assert two == pytest.approx(2.0 * one, rel=1e-14)

    def test_sign_convention_toward_ne(self):
        assert junction_flux(self.GEOM, 3.3, 1.0, 0.0) > 0
        assert junction_flux(self.GEOM, 3.3, 0.0, 1.0) < 0
