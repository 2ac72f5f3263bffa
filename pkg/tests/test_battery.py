import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp, trapezoid

from drfb.battery import (FLOW_RATE, K_MT, BatteryParams, LinearCrossover, SaturationWarning,
                          assemble_matrices, dynamics, invert_output, linear_crossover_callback,
                          linear_crossover_flux, ml_per_min_to_l_per_s, nernst_output,
                          per_min_to_per_s, simulate)
from drfb.errors import DomainError, InstabilityError, InvalidParameterError, UnsupportedModeError

# CODATA 2018 exact values, typed in rather than imported
R_CODATA = 8.314462618
F_CODATA = 96485.33212


def test_unit_conversions():
    assert ml_per_min_to_l_per_s(9.0) == pytest.approx(1.5e-4, rel=1e-15)
    assert per_min_to_per_s(60.0) == 1.0
    assert FLOW_RATE == pytest.approx(1.5e-4, rel=1e-15)


@pytest.mark.parametrize("field,value", [
    ("v_res", 0.0), ("v_cell", -1.0), ("c0", 0.0), ("epsilon", 0.0), ("epsilon", 1.2),
    ("temperature", -5.0), ("v_cell", 0.02),
])
def test_params_reject_invalid(field, value):
    with pytest.raises(InvalidParameterError):
        BatteryParams(**{field: value})


def test_matrix_entries(matrices, params):
    a = matrices.a_of_q(FLOW_RATE)
    assert a[1, 0] == pytest.approx(1.5e-4 / (0.87 * 6.985e-4), rel=1e-12)
    assert a[1, 0] == pytest.approx(0.24684, abs=1e-5)
    assert matrices.e[0] == pytest.approx(-1.0 / (0.1 * 0.0176), rel=1e-14)
    assert matrices.e[0] == pytest.approx(-568.18, abs=0.01)
    assert matrices.e[1] == pytest.approx(-1.0 / (0.87 * 0.1 * 6.985e-4), rel=1e-14)
    np.testing.assert_allclose(matrices.b, matrices.e / params.faraday, rtol=1e-15)
    assert np.all(matrices.b < 0) and np.all(matrices.e < 0)
    np.testing.assert_array_equal(matrices.c_row, [0.0, 1.0])
    np.testing.assert_array_equal(matrices.a_of_q(0.0), np.zeros((2, 2)))


@given(st.floats(min_value=0.0, max_value=1e-2))
def test_a_annihilates_equal_states(q):
    m = assemble_matrices(BatteryParams())
    np.testing.assert_array_equal(m.a_of_q(q) @ np.ones(2), np.zeros(2))
    assert np.all(m.a_of_q(q)[0] == 0)


def test_dynamics_examples(matrices, params):
    np.testing.assert_array_equal(dynamics(matrices, [0.5, 0.5], FLOW_RATE), [0.0, 0.0])
    d = dynamics(matrices, [0.5, 0.6], FLOW_RATE)
    assert d[0] == 0.0
    assert d[1] == pytest.approx(matrices.flow_gain * FLOW_RATE * (0.5 - 0.6), rel=1e-14)
    d = dynamics(matrices, [0.5, 0.5], FLOW_RATE, current=0.044)
    assert d[0] == pytest.approx(-0.044 / (0.1 * 0.0176 * params.faraday), rel=1e-14)
    assert d[0] == pytest.approx(-2.591e-4, abs=5e-7)


def test_nernst_anchor_and_slope(params):
    assert nernst_output(params, 0.5) == 2.2
    assert params.nernst_slope == pytest.approx(2 * R_CODATA * 275 / F_CODATA, rel=1e-12)
    assert params.nernst_slope == pytest.approx(0.047387, abs=1e-5)
    assert nernst_output(params, 0.9) == pytest.approx(2.2 + params.nernst_slope * math.log(9), rel=1e-15)
    assert nernst_output(params, 0.9) == pytest.approx(2.3041, abs=1e-4)


@pytest.mark.parametrize("s", [0.0, 1.0, -0.1, 1.5])
def test_nernst_domain(params, s):
    with pytest.raises(DomainError):
        nernst_output(params, s)


def test_nonzero_current_rejected(params):
    with pytest.raises(UnsupportedModeError):
        nernst_output(params, 0.5, current=0.01)
    with pytest.raises(UnsupportedModeError):
        invert_output(params, 2.2, current=0.01)


@given(st.floats(min_value=1e-4, max_value=1 - 1e-4))
def test_nernst_symmetry(s):
    p = BatteryParams()
    assert nernst_output(p, s) + nernst_output(p, 1 - s) == pytest.approx(2 * p.e0_cell, abs=1e-12)


def test_inversion_examples(params):
    assert invert_output(params, 2.2) == 0.5
    assert invert_output(params, nernst_output(params, 0.9)) == pytest.approx(0.9, abs=1e-12)
    grid = np.linspace(0.01, 0.99, 99)
    assert np.max(np.abs(invert_output(params, nernst_output(params, grid)) - grid)) <= 1e-10


@given(st.floats(min_value=0.01, max_value=0.99))
def test_inversion_round_trip_property(s):
    p = BatteryParams()
    assert abs(invert_output(p, nernst_output(p, s)) - s) <= 1e-10


def test_inversion_is_total_and_warns_at_saturation(params):
    with pytest.warns(SaturationWarning):
        assert invert_output(params, 10.0) == pytest.approx(1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        invert_output(params, 2.3)


def test_linear_crossover_flux(params):
    lc = LinearCrossover()
    assert linear_crossover_flux(lc, params, 0.0) == 0.0
    assert linear_crossover_flux(lc, params, 1.0) == pytest.approx(5.6142e-9 / 60, rel=1e-14)
    assert linear_crossover_flux(lc, params, 1.0) == pytest.approx(9.357e-11, rel=1e-4)
    assert linear_crossover_flux(lc, params, 0.4) == pytest.approx(2 * linear_crossover_flux(lc, params, 0.2))
    with pytest.raises(DomainError):
        linear_crossover_flux(lc, params, 1.01)
    with pytest.raises(InvalidParameterError):
        LinearCrossover(-1.0)


def test_simulate_equilibrium(params, matrices):
    tr = simulate(params, matrices, None, x0=(0.7, 0.7), dt=0.1, t_end=100)
    np.testing.assert_array_equal(tr.soc, 0.7)
    np.testing.assert_array_equal(tr.soc_cell, 0.7)


def test_simulate_matches_scipy_oracle(params, matrices):
    """RK4 against an adaptive high-accuracy integrator on an off-equilibrium start."""
    lc = LinearCrossover(K_MT * 1e4)
    tr = simulate(params, matrices, linear_crossover_callback(lc, params), x0=(0.6, 0.9), dt=0.1, t_end=60)
    gain = lc.k_mt * params.c0
    a = matrices.a_of_q(FLOW_RATE)

    def rhs(_, x):
        return a @ x + matrices.e * gain * x[1]

    ref = solve_ivp(rhs, (0, 60), [0.6, 0.9], t_eval=tr.t, rtol=1e-12, atol=1e-14, method="DOP853")
    np.testing.assert_allclose(tr.soc, ref.y[0], atol=1e-9)
    np.testing.assert_allclose(tr.soc_cell, ref.y[1], atol=1e-9)


def test_self_discharge_monotone_and_conserves_mass(params, matrices):
    tr = simulate(params, matrices, linear_crossover_callback(LinearCrossover(), params), dt=1.0, t_end=7200)
    assert np.all(np.diff(tr.soc) <= 0)
    assert np.all(np.diff(tr.voltage) < 0)
    lhs = params.c0 * params.v_res * (tr.soc[0] - tr.soc[-1])
    assert abs(lhs - trapezoid(tr.q_x, x=tr.t)) / (params.c0 * params.v_res) <= 1e-6


def test_zoh_input_table(params, matrices):
    q = FLOW_RATE
    table = [(0.0, 0.0, q), (10.0, 0.044, q), (20.0, 0.0, q)]
    tr = simulate(params, matrices, None, inputs=table, x0=(0.5, 0.5), dt=1.0, t_end=30)
    assert np.all(tr.current[:10] == 0) and np.all(tr.current[10:20] == 0.044) and np.all(tr.current[20:] == 0)
    drop = params.c0 * params.v_res * (tr.soc[0] - tr.soc[-1])
    assert drop == pytest.approx(0.044 * 10 / params.faraday, rel=1e-9)
    assert np.isnan(tr.voltage[10:20]).all()


def test_simulate_guards(params, matrices):
    with pytest.raises(InvalidParameterError):
        simulate(params, matrices, None, dt=3.0, t_end=10)
    with pytest.raises(InvalidParameterError):
        simulate(params, matrices, None, dt=0.0, t_end=10)
    with pytest.raises(InvalidParameterError):
        simulate(params, matrices, None, inputs=(0.0, -1.0), t_end=10)
    with pytest.raises(InstabilityError):
        simulate(params, matrices, None, inputs=(5.0, FLOW_RATE), x0=(0.01, 0.01), dt=0.1, t_end=100)
