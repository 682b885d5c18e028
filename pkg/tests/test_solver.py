"""Finite-volume solver: grid construction, conservation, mode agreement.

Oracles: exact frustum volumes, the closed-form single-exponential recovery
(frozen-ER limit), and the exact two-compartment solution

    rho_NE(t) = rho_inf - (rho_inf - rho_NE0) exp(-kappa (1 + V_NE/V_ER) t)

that the full model must approach when the junction volume is negligible.
"""

import math

import numpy as np
import pytest

from erneflux.analytic import CellParams, rate_constant, recovery_curve
from erneflux.geometry import Cone, Reporter, effective_geometry
from erneflux.solver import (
    SimConfig,
    SimState,
    build_grid,
    convergence_study,
    dimensionless_numbers,
    equilibrium_density,
    observed_order,
    parse_mode,
    simulate,
    step,
)

CELL = CellParams(k=40, V_ER_um3=200.0, V_NE_um3=30.0)
SMALL = Reporter("small", 3.3, 1.75e-3)
ALPHA = math.radians(25.0)
GEOM = effective_geometry(Cone(R_um=11e-3, alpha_rad=ALPHA, L_um=0.01), SMALL)
KAPPA = rate_constant(CELL, GEOM, SMALL).kappa_per_s


def two_compartment_ne(t, kappa, v_ne, v_er, rho_er0=1.0, rho_ne0=0.0):
    rho_inf = (v_er * rho_er0 + v_ne * rho_ne0) / (v_er + v_ne)
    rate = kappa * (1.0 + v_ne / v_er)
    return rho_inf - (rho_inf - rho_ne0) * np.exp(-rate * np.asarray(t))


def make_cfg(**kwargs):
    base = dict(cell=CELL, geom=GEOM, reporter=SMALL)
    base.update(kwargs)
    return SimConfig(**base)


class TestBuildGrid:
    def test_cylinder_uniform(self):
        geom = Cone(R_um=9.25e-3, alpha_rad=0.0, L_um=0.01)
        grid = build_grid(geom, 10)
        area = math.pi * 9.25e-3**2
        assert np.allclose(grid.face_areas_um2, area, rtol=1e-14)
        assert np.allclose(grid.cell_volumes_um3, area * 0.001, rtol=1e-12)

    def test_cone_volume_sums_to_frustum(self):
        grid = build_grid(GEOM, 100)
        r0, r1 = GEOM.R_um, GEOM.R_um + GEOM.L_um * math.tan(ALPHA)
        frustum = math.pi * GEOM.L_um * (r0 * r0 + r0 * r1 + r1 * r1) / 3.0
        assert grid.cell_volumes_um3.sum() == pytest.approx(frustum, rel=1e-12)

    def test_too_few_cells_rejected(self):
        with pytest.raises(ValueError):
            build_grid(GEOM, 3)

    def test_layout(self):
        grid = build_grid(GEOM, 8)
        assert grid.z_faces[0] == 0.0
        assert grid.z_faces[-1] == pytest.approx(GEOM.L_um)
        assert np.all(np.diff(grid.z_faces) > 0)
        assert grid.n_cells == 8


class TestStep:
    def test_equilibrium_fixed_point(self):
        grid = build_grid(GEOM, 16)
        cfg = make_cfg(n_cells=16)
        state = SimState(0.0, np.full(16, 0.37), 0.37, 0.37)
        new = step(state, cfg, grid, 1.0)
        assert new.rho_ne == pytest.approx(0.37, rel=1e-13)
        assert new.rho_er == pytest.approx(0.37, rel=1e-13)
        assert np.allclose(new.rho_j, 0.37, rtol=1e-13)

    def test_per_step_mass_conservation(self):
        grid = build_grid(GEOM, 64)
        cfg = make_cfg()
        w_j = CELL.k * grid.cell_volumes_um3

        def mass(s):
            return (CELL.V_NE_um3 * s.rho_ne + CELL.V_ER_um3 * s.rho_er
                    + float(w_j @ s.rho_j))

        state = cfg.initial_state(grid)
        for _ in range(10):
            before = mass(state)
            state = step(state, cfg, grid, 1e-3)
            assert mass(state) == pytest.approx(before, rel=1e-12)

    def test_matches_exponential_at_5s(self):
        # dt = 0.01, t = 5 s; the reservoir-depletion correction is O(delta2),
        # so the frozen-ER exponential is matched at the delta2-aware
        # tolerance while the two-compartment closed form is matched tightly
        cfg = make_cfg(dt_s=0.01, t_end_s=5.0)
        result = simulate(cfg)
        rho_end = result.rho_ne[-1]
        exact_two = two_compartment_ne(5.0, KAPPA, CELL.V_NE_um3, CELL.V_ER_um3)
        assert rho_end == pytest.approx(exact_two, rel=2e-3)
        exponential = 1.0 - math.exp(-KAPPA * 5.0)
        delta2 = CELL.V_NE_um3 / CELL.V_ER_um3
        assert abs(rho_end - exponential) <= max(0.02, 0.55 * delta2)


class TestSimulate:
    def test_reduced_mode_equals_recovery_curve(self):
        cfg = make_cfg(mode="frozen_er+quasistationary", t_end_s=3.0 / KAPPA)
        result = simulate(cfg)
        exact = recovery_curve(KAPPA, 1.0, result.t_s)
        rel = np.abs(result.rho_ne[1:] - exact.y[1:]) / exact.y[1:]
        assert np.max(rel) < 1e-10
        assert np.allclose(result.rho_er, 1.0, rtol=0, atol=0)

    def test_quasistationary_tracks_two_compartment(self):
        cfg = make_cfg(mode="quasistationary", t_end_s=20.0)
        result = simulate(cfg)
        exact = two_compartment_ne(result.t_s, KAPPA, CELL.V_NE_um3, CELL.V_ER_um3)
        assert np.max(np.abs(result.rho_ne[1:] - exact[1:]) / exact[1:]) < 1e-10

    def test_frozen_er_pde_matches_exponential_closely(self):
        cfg = make_cfg(mode="frozen_er", t_end_s=3.0 / KAPPA)
        result = simulate(cfg)
        exact = recovery_curve(KAPPA, 1.0, result.t_s)
        rmse = float(np.sqrt(np.mean((result.rho_ne - exact.y) ** 2)))
        assert rmse < 0.005

    def test_full_mode_plateau_is_mass_equilibrium(self):
        cfg = make_cfg(t_end_s=14.0 / (KAPPA * 1.15), sample_every=1000)
        result = simulate(cfg)
        eq = equilibrium_density(cfg)
        assert result.rho_ne[-1] == pytest.approx(eq, rel=1e-5)
        assert result.rho_er[-1] == pytest.approx(eq, rel=1e-5)
        # junction volume is negligible: V_ER / (V_ER + V_NE) = 0.8696
        assert eq == pytest.approx(200.0 / 230.0, abs=1e-3)
        gap = 1.0 - eq
        delta2 = 0.15
        assert gap == pytest.approx(delta2 / (1 + delta2), rel=1e-2)

    def test_zero_t_end_returns_initial_state(self):
        cfg = make_cfg(t_end_s=0.0)
        result = simulate(cfg)
        assert result.t_s.tolist() == [0.0]
        assert result.rho_ne[0] == 0.0
        assert result.rho_er[0] == 1.0

    def test_partial_final_step_lands_on_t_end(self):
        cfg = make_cfg(t_end_s=0.0105, dt_s=1e-3)
        result = simulate(cfg)
        assert result.t_s[-1] == pytest.approx(0.0105, rel=1e-12)

    def test_ne_density_nondecreasing_from_bleach(self):
        cfg = make_cfg(t_end_s=10.0)
        result = simulate(cfg)
        assert np.all(np.diff(result.rho_ne) > -1e-14)

    def test_junction_snapshots(self):
        cfg = make_cfg(t_end_s=0.1, sample_every=10)
        result = simulate(cfg, record_junction=True)
        assert result.junction is not None
        assert result.junction.shape == (result.t_s.size, 64)
        assert np.all(result.junction >= -1e-12)

    def test_mass_conservation_long_run(self):
        cfg = make_cfg(t_end_s=10.0, sample_every=100)
        result = simulate(cfg)
        drift = np.abs(result.mass - result.mass[0]) / result.mass[0]
        assert drift.max() < 1e-10

    def test_maximum_principle_large_steps(self):
        rng = np.random.default_rng(3)
        grid = build_grid(GEOM, 16)
        cfg = make_cfg(n_cells=16)
        state = SimState(0.0, rng.uniform(0.0, 1.0, 16), 1.0, 0.0)
        for dt in (1e-3, 1.0, 1e3):
            new = step(state, cfg, grid, dt)
            values = np.concatenate([[new.rho_ne, new.rho_er], new.rho_j])
            assert values.min() >= -1e-12
            assert values.max() <= 1.0 + 1e-12
            state = new

    def test_mode_parsing(self):
        assert parse_mode("full") == (False, False)
        assert parse_mode("quasistationary") == (True, False)
        assert parse_mode("frozen_er") == (False, True)
        assert parse_mode("frozen_er+quasistationary") == (True, True)
        assert parse_mode("quasistationary + frozen_er") == (True, True)
        with pytest.raises(ValueError):
            parse_mode("full+frozen_er")
        with pytest.raises(ValueError):
            parse_mode("bogus")


class TestDimensionlessNumbers:
    def test_table_values(self):
        nums = dimensionless_numbers(make_cfg())
        a_star = rate_constant(CELL, GEOM, SMALL).A_star_um2
        assert nums.delta1 == pytest.approx(40 * 0.01 * a_star / 30.0, rel=1e-12)
        assert nums.delta1 == pytest.approx(5.39e-6, rel=1e-3)
        assert nums.delta2 == pytest.approx(0.15, rel=1e-12)
        assert not nums.warn

    def test_warning_for_comparable_volumes(self):
        cell = CellParams(k=40, V_ER_um3=30.0 * 1.0001, V_NE_um3=30.0)
        nums = dimensionless_numbers(make_cfg(cell=cell))
        assert nums.delta2 == pytest.approx(1.0, rel=1e-3)
        assert nums.warn


class TestConvergence:
    def test_halving_dt_halves_time_error(self):
        cfg = make_cfg(t_end_s=5.0)
        values = {}
        for dt in (8e-3, 4e-3, 2e-3):
            rows = convergence_study(cfg, [64], [dt, 1e-3])
            values[dt] = rows[0].rho_ne_end
        diff_coarse = abs(values[8e-3] - values[4e-3])
        diff_fine = abs(values[4e-3] - values[2e-3])
        assert diff_coarse / diff_fine == pytest.approx(2.0, rel=0.2)

    def test_cylinder_spatial_discretization_exact(self):
        geom = Cone(R_um=9.25e-3, alpha_rad=0.0, L_um=0.01)
        # the discrete steady conductance (series of face conductances with
        # half-cell end gaps) equals D A / L exactly at any resolution
        for n in (4, 8, 64):
            grid = build_grid(geom, n)
            dz = grid.dz_um
            resistance = (
                dz / 2.0 / grid.face_areas_um2[0]
                + np.sum(dz / grid.face_areas_um2[1:-1])
                + dz / 2.0 / grid.face_areas_um2[-1]
            )
            exact = geom.L_um / (math.pi * 9.25e-3**2)
            assert resistance == pytest.approx(exact, rel=1e-14)
        # consequently the trajectory is resolution-independent apart from
        # the junction's internal transient, an O(delta1) effect
        cfg = SimConfig(cell=CELL, geom=geom, reporter=SMALL, t_end_s=5.0)
        rows = convergence_study(cfg, [8, 64], [1e-2])
        coarse = next(r for r in rows if r.n_cells == 8)
        assert coarse.error < 1e-8

    def test_error_table_monotone_and_orders(self):
        cfg = make_cfg(t_end_s=5.0)
        n_list = [8, 16, 32, 64]
        dt_list = [8e-3, 4e-3, 2e-3, 1e-3]
        rows = convergence_study(cfg, n_list, dt_list)
        table = {(r.n_cells, r.dt_s): r.error for r in rows}
        spatial = [table[(n, 1e-3)] for n in n_list[:-1]]
        temporal = [table[(64, dt)] for dt in dt_list[:-1]]
        assert all(np.diff(spatial) < 0), spatial
        assert all(np.diff(temporal) < 0), temporal
        order_dz = observed_order([0.01 / n for n in n_list[:-1]], spatial)
        assert order_dz >= 1.9
        order_dt = observed_order(dt_list[:-1], temporal)
        assert order_dt >= 1.0

    def test_crank_nicolson_second_order(self):
        # cylinder: the linear initial profile is the exact steady junction
        # state, so no stiff transient pollutes the time-accuracy measurement
        geom = Cone(R_um=9.25e-3, alpha_rad=0.0, L_um=0.01)
        cfg = SimConfig(cell=CELL, geom=geom, reporter=SMALL, t_end_s=5.0,
                        time_scheme="crank_nicolson")
        values = {}
        for dt in (0.1, 0.05, 0.025):
            run = SimConfig(cell=CELL, geom=geom, reporter=SMALL, t_end_s=5.0,
                            dt_s=dt, time_scheme="crank_nicolson",
                            sample_every=10**9)
            values[dt] = simulate(run).rho_ne[-1]
        ratio = abs(values[0.1] - values[0.05]) / abs(values[0.05] - values[0.025])
        assert ratio == pytest.approx(4.0, rel=0.3)

    def test_requires_two_levels(self):
        with pytest.raises(ValueError):
            convergence_study(make_cfg(t_end_s=1.0), [64], [1e-3])


class TestConfigValidation:
    def test_bad_dt(self):
        with pytest.raises(ValueError):
            make_cfg(dt_s=0.0)

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            make_cfg(mode="warp")

    def test_state_invariants(self):
        with pytest.raises(ValueError):
            SimState(0.0, np.array([1.0, np.nan]), 1.0, 0.0)
        with pytest.raises(ValueError):
            SimState(0.0, np.array([1.0, -0.5]), 1.0, 0.0)

    def test_default_t_end_is_five_efolds(self):
        assert make_cfg().resolved_t_end_s() == pytest.approx(5.0 / KAPPA, rel=1e-12)
