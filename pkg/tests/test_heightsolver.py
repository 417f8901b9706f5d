import math

import numpy as np
import pytest

import oracles
from conftest import DESK_UNB, TARGET, unb_pair, wb_pair
from dopplerinsar import heightsolver as hs
from dopplerinsar.exceptions import AmbiguityError
from dopplerinsar.interferometry import PhaseMeasurement, wrap_phase

W0 = DESK_UNB.omega0
T_PHI = DESK_UNB.t_phi
HALF_WAVE = 3e8 / (2 * W0)
COARSE = hs.SearchGrid(x_interval=(-40.0, 5.0), x_step=5.0, h_interval=(5.0, 95.0), h_step=10.0,
                       fixed_y=-31.0)


def wb_truth(x=TARGET):
    t1, t2 = wb_pair()
    return t1, t2, hs.measure_wb_from_truth(x, t1, t2, W0)


def unb_truth(x=TARGET):
    t1, t2 = unb_pair()
    return t1, t2, hs.measure_unb_from_truth(x, t1, t2, W0, T_PHI)


def wb_oracle_fns(meas, t1, t2):
    g1 = tuple(t1.position(meas.s01))
    g2 = tuple(t2.position(meas.s02))
    v1 = tuple(t1.velocity_at(meas.s01))

    def rng(p):
        return abs(math.dist(p, g1) - meas.R1)

    def dop(p):
        r = math.dist(p, g1)
        return abs(sum((p[i] - g1[i]) * v1[i] for i in range(3)) / r - meas.doppler1)

    def phase(p):
        return abs(math.dist(p, g1) - math.dist(p, g2) - HALF_WAVE * meas.phi.unwrapped_phase)

    return [rng, dop, phase]


def unb_oracle_fns(meas, t1, t2):
    g1, g2 = tuple(t1.position(meas.s_d1)), tuple(t2.position(meas.s_d2))
    v1, v2 = tuple(t1.velocity_at(meas.s_d1)), tuple(t2.velocity_at(meas.s_d2))
    to_speed = 3e8 / W0

    def ldv(p, g, v):
        return sum((p[i] - g[i]) * v[i] for i in range(3)) / math.dist(p, g)

    def dop(p):
        return abs(ldv(p, g1, v1) + to_speed * meas.f1)

    def rate(p):
        # straight pass: rate bracket = -(|v|^2 - (L.v)^2) / R
        speed2 = sum(c * c for c in v1)
        return abs(-(speed2 - ldv(p, g1, v1) ** 2) / math.dist(p, g1) + to_speed * meas.f1_rate)

    def phase(p):
        model = ldv(p, g1, v1) - ldv(p, g2, v2)
        return abs(model + to_speed / (2 * meas.s_d1 * T_PHI) * meas.phi.unwrapped_phase)

    return [dop, rate, phase]


def grid_rows(grid):
    pts = grid.points()
    return [[tuple(p) for p in row] for row in pts]


class TestSearchGrid:
    def test_axes(self):
        g = hs.SearchGrid(x_interval=(-2, 2), h_interval=(1, 2), fixed_y=3.0)
        assert g.x.tolist() == [-2, -1, 0, 1, 2]
        assert g.h.tolist() == [1.0, 1.5, 2.0]
        assert g.points().shape == (3, 5, 3)
        assert g.points()[0, 0].tolist() == [-2, 3, 1]

    def test_default_height_axis(self):
        h = hs.SearchGrid().h
        assert h[0] == 1.0 and h[-1] == 100.0 and h.size == 199

    def test_3d_layout(self):
        g = hs.SearchGrid(x_interval=(0, 1), h_interval=(0, 1), h_step=1, y_interval=(5, 7))
        assert g.points().shape == (2, 3, 2, 3)

    def test_missing_y(self):
        with pytest.raises(ValueError):
            hs.SearchGrid().points()

    @pytest.mark.parametrize("kw", [{"h_interval": (5.0, 1.0)}, {"x_step": 0.0}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            hs.SearchGrid(fixed_y=0.0, **kw).points()


class TestMeasurementsFromTruth:
    def test_wideband_values(self):
        _, _, m = wb_truth()
        assert m.R1 == pytest.approx(7670.0, rel=1e-14)
        assert m.phi.unwrapped_phase == pytest.approx(-146552.76189085122, rel=1e-12)
        assert m.doppler1 == pytest.approx(0.0, abs=1e-9)

    def test_unb_values(self):
        _, _, m = unb_truth()
        assert m.f1 == pytest.approx(1208.370096383049, rel=1e-12)
        assert m.phi.unwrapped_phase == pytest.approx(-317.1844764817562, rel=1e-12)
        assert (m.s_d1, m.s_d2) == (5.0, 1.25)

    def test_invalid_range(self):
        phi = PhaseMeasurement(0.0, 0.0, 0)
        with pytest.raises(ValueError):
            hs.WBMeasurement(-1.0, 0.0, phi, 0.0, 0.0, W0)


class TestResiduals:
    def test_wideband_vanish_at_truth(self):
        t1, t2, m = wb_truth()
        res = hs.wb_residuals_at(m, t1, t2, TARGET[None])
        for name in ("range", "doppler", "phase"):
            assert res[name][0] <= 1e-9

    def test_unb_vanish_at_truth(self):
        t1, t2, m = unb_truth()
        res = hs.unb_residuals_at(m, t1, t2, TARGET[None])
        assert res["doppler"][0] <= 1e-9
        assert res["rate"][0] <= 1e-9
        assert res["phase"][0] <= 1e-9

    def test_non_negative(self):
        t1, t2, m = wb_truth()
        maps = hs.residuals_wb(m, t1, t2, COARSE)
        assert all((mp.values >= 0).all() for mp in maps.maps.values())
        assert (maps.combined >= 0).all()

    def test_layover_point_on_range_sphere(self):
        t1, t2, m = wb_truth()
        z = np.array([[-41.0411533, -31.0, 0.0]])
        assert hs.wb_residuals_at(m, t1, t2, z)["range"][0] <= 1e-6

    def test_cone_surface_misses_truth(self):
        t1, t2, m = wb_truth()
        exact = hs.wb_residuals_at(m, t1, t2, TARGET[None])["phase"][0]
        cone = hs.wb_residuals_at(m, t1, t2, TARGET[None], phase_surface="cone")["phase"][0]
        assert exact < 1e-9 < cone

    def test_unknown_surface(self):
        t1, t2, m = wb_truth()
        with pytest.raises(ValueError):
            hs.wb_residuals_at(m, t1, t2, TARGET[None], phase_surface="plane")
        t1, t2, m = unb_truth()
        with pytest.raises(ValueError):
            hs.unb_residuals_at(m, t1, t2, TARGET[None], phase_surface="plane")

    def test_median_normalisation(self):
        vals = np.array([[0.0, 2.0, 4.0]])
        m = hs.ResidualMap("a", vals, "m", 1.0)
        assert m.normaliser == 2.0
        assert hs.ResidualMap("b", np.array([0.0, 0.0, 3.0]), "m", 1.0).normaliser == 1.0


class TestSolve:
    def test_wideband_truth(self):
        t1, t2, m = wb_truth()
        sol = hs.solve_wb(m, t1, t2, hs.SearchGrid(fixed_y=-31.0))
        np.testing.assert_allclose(sol.position, TARGET)
        assert not sol.degenerate

    def test_unb_truth(self):
        t1, t2, m = unb_truth()
        sol = hs.solve_unb(m, t1, t2)
        np.testing.assert_allclose(sol.position, TARGET)
        assert sol.uninformative == []

    def test_ground_target(self):
        x = np.array([10.0, 4.0, 0.0])
        t1, t2, m = wb_truth(x)
        grid = hs.SearchGrid(x_interval=(-20, 30), h_interval=(0, 20), fixed_y=4.0)
        np.testing.assert_allclose(hs.solve_wb(m, t1, t2, grid).position, x)

    @pytest.mark.parametrize("dr", [0.0, 3.0, -7.5])
    def test_wideband_equals_brute_force(self, dr):
        t1, t2, m = wb_truth()
        m = hs.WBMeasurement(m.R1 + dr, m.doppler1, m.phi, m.s01, m.s02, m.omega0)
        sol = hs.solve_wb(m, t1, t2, COARSE)
        want = oracles.brute_force_argmin(grid_rows(COARSE), wb_oracle_fns(m, t1, t2))
        assert tuple(sol.position) == want

    @pytest.mark.parametrize("df", [0.0, 5.0])
    def test_unb_equals_brute_force(self, df):
        t1, t2, m = unb_truth()
        m = hs.UNBMeasurement(m.f1 + df, m.f1_rate, m.phi, m.s_d1, m.s_d2, m.t_phi, m.omega0,
                              m.reference_point)
        sol = hs.solve_unb(m, t1, t2, COARSE)
        want = oracles.brute_force_argmin(grid_rows(COARSE), unb_oracle_fns(m, t1, t2))
        assert tuple(sol.position) == want

    def test_scaling_maps_does_not_move_argmin(self):
        t1, t2, m = wb_truth()
        grid = hs.SearchGrid(fixed_y=-31.0)
        maps = hs.residuals_wb(m, t1, t2, grid)
        scaled = hs.combine(grid, [hs.ResidualMap(mp.name, k * mp.values, mp.units, k * mp.natural_scale)
                                   for mp, k in zip(maps.maps.values(), (3.0, 0.01, 250.0))])
        assert np.argmin(scaled.combined) == np.argmin(maps.combined)
        np.testing.assert_allclose(scaled.combined, maps.combined, rtol=1e-12)

    def test_identical_platforms_are_degenerate(self):
        t1, _ = wb_pair()
        m = hs.measure_wb_from_truth(TARGET, t1, t1, W0)
        sol = hs.solve_wb(m, t1, t1, COARSE)
        assert sol.degenerate
        assert "phase" in sol.uninformative

    def test_3d_search(self):
        t1, t2, m = unb_truth()
        grid = hs.SearchGrid(x_interval=(-25, -15), h_interval=(45, 55), h_step=1,
                             y_interval=(-33, -29))
        np.testing.assert_allclose(hs.solve_unb(m, t1, t2, grid).position, TARGET)

    def test_wrapped_fallback(self):
        t1, t2, m = wb_truth()
        phi = PhaseMeasurement(m.phi.wrapped_phase, m.phi.unwrapped_phase, m.phi.ambiguity_index,
                               "WB", m.phi.predicted_phase, 5.0)
        m = hs.WBMeasurement(m.R1, m.doppler1, phi, m.s01, m.s02, m.omega0)
        sol = hs.solve_wb(m, t1, t2, hs.SearchGrid(fixed_y=-31.0))
        assert sol.wrapped_fallback
        assert sol.candidates
        assert any(np.allclose(c, TARGET) for c in sol.candidates)
        assert hs.wb_residuals_at(m, t1, t2, TARGET[None])["phase"][0] <= 1e-6

    def test_unb_needs_a_row(self):
        t1, t2, m = unb_truth()
        m = hs.UNBMeasurement(m.f1, m.f1_rate, m.phi, m.s_d1, m.s_d2, m.t_phi, m.omega0)
        with pytest.raises(ValueError):
            hs.solve_unb(m, t1, t2)

    def test_solution_serialises(self):
        t1, t2, m = unb_truth()
        d = hs.solve_unb(m, t1, t2, COARSE).to_dict()
        assert set(d) >= {"position_m", "residuals", "degenerate", "candidates_m"}


class TestMeasureFromImages:
    def test_wideband(self, paper_wb):
        t1, t2 = paper_wb["traj"]
        m = hs.measure_wb(*paper_wb["images"], *paper_wb["data"], t1, t2)
        assert m.R1 == pytest.approx(7670.0, abs=1e-3)
        assert m.phi.unwrapped_phase == pytest.approx(-146552.76189085122, abs=0.1)
        assert m.phi.resolved
        assert m.peaks["registration_offset_px"] == [7, 0]

    def test_unb(self, paper_unb):
        t1, t2 = paper_unb["traj"]
        m = hs.measure_unb(*paper_unb["images"], *paper_unb["data"], t1, t2)
        assert abs(wrap_phase(m.phi.unwrapped_phase + 317.1844764817562)) <= 0.1
        assert m.phi.unwrapped_phase == pytest.approx(-317.1844764817562, abs=0.1)
        assert m.peaks["phase_scale"] == 4.0

    def test_unresolved_raises(self, paper_wb):
        t1, t2 = paper_wb["traj"]
        with pytest.raises(AmbiguityError):
            hs.measure_wb(*paper_wb["images"], *paper_wb["data"], t1, t2, refine=False)

    def test_unresolved_allowed(self, paper_wb):
        t1, t2 = paper_wb["traj"]
        m = hs.measure_wb(*paper_wb["images"], *paper_wb["data"], t1, t2, refine=False,
                          allow_unresolved=True)
        assert not m.phi.resolved
