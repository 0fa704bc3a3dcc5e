import math

import numpy as np
import pytest

from mnomarket.energy import (ConvergenceError, InfeasibleLoadError, NetworkModel,
                              PowerParams, activity, activity_fixed_point, build_cost_curve,
                              feasible_load, pa_input_power, total_energy,
                              total_energy_per_location)
from mnomarket.radio import RadioParams

PP = PowerParams()


class TestPaInputPower:
    def test_max_efficiency_point(self):
        params = PowerParams(p_max_avg=PP.p_max_pa)
        assert params.p_max_pa == pytest.approx(199.52623149688787, rel=1e-12)
        assert pa_input_power(params.p_max_pa, params) == pytest.approx(249.40778937110983,
                                                                        rel=1e-12)

    def test_reference_transmit_power(self):
        assert PP.p_max_avg == pytest.approx(39.810717055349734, rel=1e-12)
        assert pa_input_power(PP.p_max_avg, PP) == pytest.approx(111.40636726671818, rel=1e-12)
        assert round(pa_input_power(PP.p_max_avg, PP), 1) == 111.4

    def test_square_root_law(self):
        assert pa_input_power(8.0, PP) == pytest.approx(2 * pa_input_power(2.0, PP), rel=1e-12)

    @pytest.mark.parametrize("p", np.geomspace(1e-3, 39.8, 25))
    def test_round_trip(self, p):
        back = (pa_input_power(p, PP) * PP.eta_max) ** 2
        assert back == pytest.approx(p * PP.p_max_pa, rel=1e-12)

    def test_above_average_limit(self):
        with pytest.raises(ValueError):
            pa_input_power(PP.p_max_avg * 1.01, PP)

    @pytest.mark.parametrize("kw", [dict(eta_max=0.0), dict(eta_max=1.3),
                                    dict(P_sleep=70.0), dict(p_max_avg=300.0)])
    def test_params_invalid(self, kw):
        with pytest.raises(ValueError):
            PowerParams(**kw)


class TestFixedPoint:
    def test_zero_load(self, model):
        assert activity_fixed_point(0.0, model).activity == 0.0

    def test_negative_load(self, model):
        with pytest.raises(ValueError):
            activity_fixed_point(-1.0, model)

    @pytest.mark.parametrize("load", [0.05, 0.3, 0.6, 0.9, 1.0])
    def test_iterates_non_increasing(self, model, load):
        res = activity(load, model)
        h = np.array(res.history)
        assert h[0] == 1.0
        assert np.all(np.diff(h) <= 1e-12)

    @pytest.mark.parametrize("load", [0.1, 0.5, 0.95])
    def test_self_consistent(self, model, load):
        res = activity(load, model)
        bits = load * model.capacity_bits
        assert model.busy_time(bits, res.activity) == pytest.approx(res.activity, abs=1e-4)

    def test_matches_damped_iteration(self, model):
        bits = 0.5 * model.capacity_bits
        rho = 1.0
        for _ in range(10_000):
            new = rho + 0.5 * (model.busy_time(bits, rho) - rho)
            if abs(new - rho) < 1e-12:
                break
            rho = new
        res = activity_fixed_point(bits, model, tol=1e-8)
        assert res.activity == pytest.approx(rho, abs=1e-7)

    def test_small_load_between_decoupled_bounds(self, model):
        bits = 1e-6 * model.capacity_bits
        res = activity_fixed_point(bits, model, tol=1e-18)
        assert model.busy_time(bits, 0.0) <= res.activity <= model.busy_time(bits, 1.0)
        assert model.busy_time(bits, res.activity) == pytest.approx(res.activity, rel=1e-6)

    def test_unpolished_non_convergence_raises(self, model):
        with pytest.raises(ConvergenceError) as info:
            activity_fixed_point(model.capacity_bits, model, tol=1e-14, max_iter=3,
                                 polish=False)
        assert 0 < info.value.last <= 1

    def test_polish_reaches_fixed_point(self, model):
        bits = model.capacity_bits
        res = activity_fixed_point(bits, model, tol=1e-10, max_iter=5)
        assert model.busy_time(bits, res.interferer_activity) == pytest.approx(
            res.interferer_activity, abs=1e-9)


class TestFeasibleLoad:
    def test_positive_and_deterministic(self, model):
        a = feasible_load(model)
        assert a > 0
        assert a == feasible_load(NetworkModel())
        fine = feasible_load(model, rel_tol=1e-12)
        assert a == pytest.approx(fine, rel=1e-3)

    def test_capacity_is_the_edge(self, model):
        assert activity(1.0, model).feasible
        assert not activity_fixed_point(1.001 * model.capacity_bits, model).feasible

    def test_default_tolerance_is_an_error_bound(self, model):
        coarse = activity(1.0, model).activity
        fine = activity(1.0, model, tol=1e-12).activity
        assert abs(coarse - fine) <= 1e-4

    def test_doubled_load_infeasible(self, model):
        res = activity_fixed_point(2 * model.capacity_bits, model)
        assert not res.feasible

    def test_zero_bandwidth(self):
        m = NetworkModel(radio=RadioParams(bandwidth=0.0)) if _zero_bw_allowed() else None
        if m is None:
            with pytest.raises(ValueError):
                RadioParams(bandwidth=0.0)
        else:
            assert feasible_load(m) == 0.0


def _zero_bw_allowed():
    try:
        RadioParams(bandwidth=0.0)
    except ValueError:
        return False
    return True


class TestTotalEnergy:
    def test_idle(self, model):
        assert total_energy(0.0, model) == 58.6

    def test_asleep(self, model):
        assert total_energy(0.3, model, awake=False) == 0.0
        assert total_energy(None, model) == 0.0

    @pytest.mark.parametrize("load", [0.0, 0.2, 0.55, 0.8, 1.0])
    def test_per_location_identity(self, model, load):
        assert total_energy_per_location(load, model) == pytest.approx(
            total_energy(load, model), rel=1e-9)

    def test_linear_in_activity(self, model):
        res = activity(0.4, model, tol=model.energy_tol)
        expect = (model.pa_power + 58.6 - 58.6) * res.activity + 58.6
        assert total_energy(0.4, model) == pytest.approx(expect, rel=1e-12)

    def test_full_load(self, model):
        assert total_energy(1.0, model) == pytest.approx(108.5, abs=0.05)

    @pytest.mark.parametrize("load", [-0.1, 1.2])
    def test_out_of_range(self, model, load):
        with pytest.raises(InfeasibleLoadError):
            total_energy(load, model)


class TestCostCurve:
    def test_grid(self, curve):
        assert curve.n_units == 20
        assert curve.load_grid[0] == 0.0 and curve.load_grid[-1] == 1.0
        assert curve.energy[0] == 58.6
        assert curve.P_idle == 58.6

    @pytest.mark.parametrize("name", ["curve", "fine_curve"])
    def test_monotone_and_convex(self, request, name):
        c = request.getfixturevalue(name)
        assert np.all(np.diff(c.energy) > 0)
        assert np.all(np.diff(c.energy, 2) >= -1e-9)

    def test_marginal_grows_toward_peak(self, curve):
        m = curve.marginal
        assert m[17] > m[8]  # step ending at 0.9 versus the one ending at 0.45

    def test_memoized(self, model, curve):
        assert build_cost_curve(model, 0.05) is curve
        assert build_cost_curve(NetworkModel(), 0.05) is curve

    def test_read_only(self, curve):
        with pytest.raises(ValueError):
            curve.energy[3] = 0.0

    def test_at_units(self, curve):
        assert curve.at_units(0) == 58.6
        with pytest.raises(InfeasibleLoadError):
            curve.at_units(21)

    @pytest.mark.parametrize("dl", [0.0, 0.3])
    def test_bad_unit(self, model, dl):
        with pytest.raises(ValueError):
            build_cost_curve(model, dl)

    def test_fine_grid_matches_coarse(self, curve, fine_curve):
        assert np.allclose(fine_curve.energy[::5], curve.energy, rtol=0, atol=1e-12)
