import numpy as np
import pytest

from buckvrft.plant import SimulationPlan
from buckvrft.runtime import (ControllerGains, ControllerState, SignalError,
                              closed_loop, controller_step, saturate)
from buckvrft.signals import accumulate

WIDE = dict(sat_lo=0.0, sat_hi=1.0)


def run_controller(gains, errors):
    st = ControllerState.initial(gains)
    d_raw, d_sat = [], []
    for e in errors:
        d, st = controller_step(gains, st, e)
        d_sat.append(d)
        d_raw.append(st.last_d)
    return np.asarray(d_raw), np.asarray(d_sat)


def test_saturate_examples():
    assert saturate(0.95, 0.1, 0.9) == 0.9
    assert saturate(0.05, 0.1, 0.9) == 0.1
    assert saturate(0.5, 0.1, 0.9) == 0.5
    with pytest.raises(ValueError):
        saturate(0.5, 0.9, 0.1)


def test_controller_step_hand_recursion():
    g = ControllerGains(kp=0.1, ki=0.01, **WIDE)
    d_raw, _ = run_controller(g, [1.0, 1.0])
    # by hand: z=1 -> d=0.1+0.01; z=2 -> d=0.1+0.02
    assert d_raw == pytest.approx([0.11, 0.12])


def test_zero_error_clamps_to_low_limit():
    g = ControllerGains(kp=0.1, ki=0.01)
    d_raw, d_sat = run_controller(g, np.zeros(5))
    assert np.all(d_raw == 0.0)
    assert np.all(d_sat == g.sat_lo)


def test_non_finite_error_rejected():
    g = ControllerGains(kp=0.1, ki=0.01)
    st = ControllerState.initial(g)
    for bad in (float("nan"), float("inf")):
        with pytest.raises(SignalError):
            controller_step(g, st, bad)


def test_gain_validation():
    with pytest.raises(ValueError):
        ControllerGains(kp=0.1, ki=0.01, sat_lo=0.9, sat_hi=0.1)
    with pytest.raises(ValueError):
        ControllerGains(kp=0.1, ki=0.01, kaw=10.0, n_aw=0)
    with pytest.raises(ValueError):
        ControllerGains(kp=0.1, ki=0.01, t_samp=0.0)


def test_anti_windup_inactive_off_saturation():
    rng = np.random.default_rng(5)
    e = rng.uniform(-0.5, 0.5, 50)
    pi = ControllerGains(kp=0.01, ki=0.001, **WIDE)
    aw = ControllerGains(kp=0.01, ki=0.001, kaw=441.47, **WIDE)
    d_pi, sat_pi = run_controller(pi, e)
    d_aw, sat_aw = run_controller(aw, e)
    assert np.all(sat_pi != pi.sat_lo) and np.all(sat_pi != pi.sat_hi)
    assert np.array_equal(d_pi, d_aw)
    assert np.array_equal(sat_pi, sat_aw)


def test_integrator_matches_accumulator():
    # the runtime integrator is the stepwise form of signals.accumulate,
    # so a pure-integral controller reproduces the cumulative sum
    rng = np.random.default_rng(6)
    e = rng.uniform(-0.01, 0.01, 40)
    g = ControllerGains(kp=0.0, ki=1.0, **WIDE)
    d_raw, _ = run_controller(g, e)
    assert np.allclose(d_raw, accumulate(e), rtol=1e-12, atol=1e-15)


def test_linearity_off_saturation():
    g = ControllerGains(kp=0.02, ki=0.002, **WIDE)
    rng = np.random.default_rng(7)
    e1 = rng.uniform(-0.2, 0.2, 30)
    e2 = rng.uniform(-0.2, 0.2, 30)
    a, b = 0.7, 1.3
    d1, _ = run_controller(g, e1)
    d2, _ = run_controller(g, e2)
    d12, _ = run_controller(g, a * e1 + b * e2)
    assert np.allclose(d12, a * d1 + b * d2, rtol=1e-10, atol=1e-14)


def test_saturation_excess_feedback_pulls_back():
    # back-calculation: after a railed-high step the excess reduces the
    # next command relative to the plain PI output
    pi = ControllerGains(kp=0.0, ki=0.1, kaw=None)
    aw = ControllerGains(kp=0.0, ki=0.1, kaw=5.0)
    d_pi, _ = run_controller(pi, [20.0, 0.0])
    d_aw, _ = run_controller(aw, [20.0, 0.0])
    assert d_pi[0] == d_aw[0] == pytest.approx(2.0)
    assert d_aw[1] < d_pi[1]


def test_u_d_history_length_and_content():
    g = ControllerGains(kp=0.0, ki=0.1, kaw=1.0, n_aw=3)
    st = ControllerState.initial(g)
    assert st.u_d_history == (0.0, 0.0, 0.0)
    d_sat, st = controller_step(g, st, 20.0)   # d = 2.0 -> excess 1.1
    assert st.u_d_history == (pytest.approx(1.1), 0.0, 0.0)
    assert st.last_d == pytest.approx(2.0)
    assert st.last_d_sat == 0.9


def test_perfect_plant_stand_in_freezes_duty():
    # loop where the output tracks the reference instantly after one tick
    g = ControllerGains(kp=0.05, ki=0.01, **WIDE)
    st = ControllerState.initial(g)
    v_ref, y = 10.0, 0.0
    d_hist = []
    for _ in range(10):
        d_sat, st = controller_step(g, st, v_ref - y)
        d_hist.append(d_sat)
        y = v_ref
    assert len(set(d_hist[1:])) == 1


def test_closed_loop_channels_and_limits(model):
    g = ControllerGains(kp=0.003, ki=0.005)
    plan = SimulationPlan(duration=2e-3, mode="averaged", duty=None,
                          initial_state="zero")
    ts = closed_loop(model, plan, g, 10.0)
    for name in ("V_out", "d", "d_sat", "u_d", "e"):
        assert name in ts.channels
    d_sat = ts.channel("d_sat")
    assert d_sat.min() >= g.sat_lo - 1e-15
    assert d_sat.max() <= g.sat_hi + 1e-15


def test_closed_loop_regulates_both_modes(model):
    g = ControllerGains(kp=0.003, ki=0.005)
    finals = {}
    for mode in ("averaged", "switched"):
        plan = SimulationPlan(duration=8e-3, mode=mode, duty=None,
                              initial_state="zero", record_every=10)
        ts = closed_loop(model, plan, g, 10.0)
        finals[mode] = ts.channel("V_out")[-2000:].mean()
    assert finals["averaged"] == pytest.approx(10.0, abs=0.5)
    assert finals["switched"] == pytest.approx(10.0, abs=0.5)


def test_closed_loop_rejects_misconfiguration(model):
    g = ControllerGains(kp=0.003, ki=0.005)
    plan = SimulationPlan(duration=1e-3, mode="averaged", duty=0.5)
    with pytest.raises(ValueError):
        closed_loop(model, plan, g, 10.0)
    bad_rate = ControllerGains(kp=0.003, ki=0.005, t_samp=50e-6)
    plan = SimulationPlan(duration=1e-3, mode="averaged", duty=None)
    with pytest.raises(ValueError):
        closed_loop(model, plan, bad_rate, 10.0)
