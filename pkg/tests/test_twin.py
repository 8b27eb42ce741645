import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from agentic_control.twin import (
    BracketFailure, CommandOutOfRange, DisturbanceProfile, HeaterCommand, NonFiniteState,
    Trajectory, TwinParams, TwinState, equilibrium_temperature, naive_single_step,
    net_heat_rate, simulate_interval, step_rk4,
)

from oracles import euler_heater

P = TwinParams()
TA = P.ambient


def test_defaults_match_heater_physics():
    assert (P.mass, P.heat_capacity, P.area) == (0.004, 500.0, 1.2e-3)
    assert (P.htc, P.emissivity, P.stefan_boltzmann, P.ambient) == (10.0, 0.9, 5.67e-8, 293.15)
    assert P.thermal_mass == pytest.approx(2.0)


def test_net_heat_rate_zero_at_ambient():
    assert net_heat_rate(TA, 0.0) == 0.0


def test_net_heat_rate_hand_values():
    conv = 10 * 1.2e-3 * (305.6 - TA)
    rad = 0.9 * 5.67e-8 * 1.2e-3 * (305.6 ** 4 - TA ** 4)
    assert conv == pytest.approx(0.1494, abs=1e-4)
    assert rad == pytest.approx(0.0820, abs=2e-4)
    assert net_heat_rate(305.6, 0.0, P, 10.0) == pytest.approx(-0.2314, abs=2e-4)
    assert net_heat_rate(305.6, 0.3, P, 10.0) == pytest.approx(0.0686, abs=2e-4)
    assert net_heat_rate(305.6, 0.3) - net_heat_rate(305.6, 0.0) == pytest.approx(0.3)


def test_step_at_ambient_keeps_temperature():
    s = step_rk4(TwinState(TA, TA, 4.0), HeaterCommand(0, 0), 1.0)
    assert (s.t1, s.t2, s.time) == (TA, TA, 5.0)


def test_single_step_heating_rate():
    s = step_rk4(TwinState(305.6, 305.6), HeaterCommand(0.3, 0.3), 1.0)
    assert s.t1 == s.t2
    assert s.t1 - 305.6 == pytest.approx(0.0343, abs=1e-4)
    assert s.t1 == pytest.approx(euler_heater(305.6, 0.3, 10.0, 1e-3, 1.0), abs=1e-6)


def test_fan_cools_its_heater():
    s = step_rk4(TwinState(305.6, 305.6), HeaterCommand(0.2, 0.2), 1.0,
                 disturbance=DisturbanceProfile(fan_on_heater=1))
    assert s.t1 < s.t2
    s = step_rk4(TwinState(305.6, 305.6), HeaterCommand(0.2, 0.2), 1.0,
                 disturbance=DisturbanceProfile(fan_on_heater=2))
    assert s.t2 < s.t1


def test_disturbance_window():
    d = DisturbanceProfile(active_window=(100.0, 200.0))
    assert d.htc_factors(50.0) == (1.0, 1.0)
    assert d.htc_factors(150.0) == (1.5, 1.0)
    assert DisturbanceProfile.from_json(d.to_json()) == d


def test_stronger_fan_cools_more():
    temps = []
    for mult in (1.0, 1.5, 2.0, 3.0):
        traj = simulate_interval(TwinState(306, 306), HeaterCommand(0.2, 0.2), 120,
                                 disturbance=DisturbanceProfile(u_multiplier=mult))
        temps.append(traj.final_state.t1)
    assert all(a > b for a, b in zip(temps, temps[1:]))


def test_out_of_range_command_rejected():
    for cmd in [(0.31, 0.0), (-0.01, 0.1), (float("nan"), 0.1)]:
        with pytest.raises(CommandOutOfRange):
            step_rk4(TwinState(TA, TA), HeaterCommand(*cmd), 1.0)


def test_non_finite_state_detected():
    with pytest.raises(NonFiniteState):
        step_rk4(TwinState(1e80, TA), HeaterCommand(0, 0), 1.0)


def test_simulate_interval_sample_count():
    traj = simulate_interval(TwinState(300, 301, 60.0), HeaterCommand(0.1, 0.2), 30, 1.0)
    assert len(traj) == 31
    assert traj.times[-1] == 90.0
    assert np.all(traj.q1 == 0.1)


def test_simulate_at_ambient_is_flat():
    traj = simulate_interval(TwinState(TA, TA), HeaterCommand(0, 0), 30)
    assert np.all(traj.t1 == TA) and np.all(traj.t2 == TA)


def test_simulate_interval_rejects_fractional_duration():
    with pytest.raises(ValueError):
        simulate_interval(TwinState(TA, TA), HeaterCommand(0, 0), 2.5, 1.0)


def test_rk4_matches_fine_euler_over_episode():
    traj = simulate_interval(TwinState(TA, TA), HeaterCommand(0.3, 0.3), 900, 1.0)
    ref = euler_heater(TA, 0.3, 10.0, 1e-3, 900.0)
    assert abs(traj.final_state.t1 - ref) < 1e-3
    assert traj.final_state.t1 == traj.final_state.t2


def test_rk4_fourth_order():
    def rhs(t, y):
        return [net_heat_rate(y[0], 0.3) / P.thermal_mass]

    ref = solve_ivp(rhs, (0, 60), [TA], method="DOP853", rtol=1e-13, atol=1e-12).y[0, -1]
    errs = []
    for dt in (4.0, 2.0):
        traj = simulate_interval(TwinState(TA, TA), HeaterCommand(0.3, 0.3), 60, dt)
        errs.append(abs(traj.final_state.t1 - ref))
    ratio = errs[0] / errs[1]
    assert 12 < ratio < 20


def test_equilibrium():
    assert equilibrium_temperature(0.0) == TA
    T = equilibrium_temperature(0.3, P, 10.0)
    assert abs(net_heat_rate(T, 0.3, P, 10.0)) < 1e-9
    T_fan = equilibrium_temperature(0.3, P, 15.0)
    assert TA < T_fan < T


def test_equilibrium_bracket_failure():
    with pytest.raises(BracketFailure):
        equilibrium_temperature(50.0, TwinParams(q_max=100))


def test_long_run_stays_below_equilibrium():
    T_star = equilibrium_temperature(0.3)
    traj = simulate_interval(TwinState(TA, TA), HeaterCommand(0.3, 0.3), 3000)
    assert np.all(np.diff(traj.t1) > 0)
    assert traj.t1.max() < T_star
    assert traj.final_state.t1 == pytest.approx(T_star, abs=0.05)


def test_naive_prediction_diverges_with_horizon():
    start = TwinState(305.68, 305.68)
    cmd = HeaterCommand(0.3, 0.3)
    deltas = []
    for h in range(3, 31):
        truth = simulate_interval(start, cmd, h).final_state
        deltas.append(abs(naive_single_step(start, cmd, h)[0] - truth.t1))
    assert all(d > 0 for d in deltas)
    assert all(b > a for a, b in zip(deltas, deltas[1:]))


def test_naive_prediction_converges_for_small_horizon():
    start = TwinState(305.0, 304.0)
    cmd = HeaterCommand(0.1, 0.2)
    prev = math.inf
    for h in (1.0, 0.1, 0.01):
        truth = step_rk4(start, cmd, h)
        gap = abs(naive_single_step(start, cmd, h)[0] - truth.t1)
        assert gap < prev
        prev = gap
    assert prev < 1e-7


def test_trajectory_csv_round_trip(tmp_path):
    traj = simulate_interval(TwinState(300.1, 299.7), HeaterCommand(0.12, 0.3), 20)
    path = tmp_path / "t.csv"
    traj.to_csv(path)
    assert path.read_text().splitlines()[0] == "time_s,t1_K,t2_K,q1_W,q2_W"
    back = Trajectory.from_csv(path)
    assert back.rows() == traj.rows()


def test_extend_hands_over_boundary_sample():
    a = simulate_interval(TwinState(TA, TA), HeaterCommand(0.1, 0.1), 5)
    b = simulate_interval(a.final_state, HeaterCommand(0.2, 0.2), 5)
    a.extend(b)
    assert len(a) == 11
    assert a.q1[5] == 0.2 and a.q1[4] == 0.1
