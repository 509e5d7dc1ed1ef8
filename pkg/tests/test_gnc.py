import math

import numpy as np
import pytest

from fwsim import gnc
from fwsim.gnc import GncView, Pid, PidConfig


def make_view(t=0.0, **kwargs):
    base = dict(t=t, vtas=30.0, alpha=0.02, beta=0.0, theta=0.0, psi=0.0,
                bank=0.0, hp=1000.0, h=1000.0, gamma=0.0, chi=0.0,
                gamma_tas=0.0, chi_tas=0.0, mu_tas=0.0)
    base.update(kwargs)
    return GncView(**base)


SCRIPT = """
T:vtas=30 E:hp=1000 A:chi=0 R:beta=0 TRG:dt_op=50
T:vtas=28 E:hp=1100 A:chi=30 R:beta=0 TRG:hp=2500
"""


# --- guidance -------------------------------------------------------------------

def test_script_parsing():
    ops = gnc.parse_script(SCRIPT)
    assert len(ops) == 2
    assert ops[0].targets["throttle"] == ("vtas", 30.0)
    assert ops[0].trigger == ("dt_op", 50.0)
    assert ops[1].targets["ailerons"][0] == "chi"
    assert ops[1].targets["ailerons"][1] == pytest.approx(math.radians(30.0))


def test_script_rejects_illegal_channel_variable():
    with pytest.raises(ValueError):
        gnc.parse_script("T:vtas=30 E:hp=1000 A:chi=0 R:chi=0 TRG:dt_op=50")


def test_script_stochastic_values_resolved_from_seed():
    text = "T:vtas=N(29,1.5) E:hp=U(900,1100) A:chi=0 R:beta=0 TRG:dt_op=N(300,60)"
    ops1 = gnc.parse_script(text, guidance_seed=42)
    ops2 = gnc.parse_script(text, guidance_seed=42)
    ops3 = gnc.parse_script(text, guidance_seed=43)
    assert ops1[0].targets["throttle"][1] == ops2[0].targets["throttle"][1]
    assert ops1[0].targets["throttle"][1] != ops3[0].targets["throttle"][1]
    assert 900.0 <= ops1[0].targets["elevator"][1] <= 1100.0
    with pytest.raises(ValueError):
        gnc.parse_script(text)   # stochastic values need a seed


def test_trigger_elapsed_time_fires_at_fifty_seconds():
    ops = gnc.parse_script(SCRIPT)
    g = gnc.Guidance(ops)
    for t in np.arange(0.0, 50.0, 0.02):
        g.step(make_view(t=t))
        assert g.index == 0
    g.step(make_view(t=50.02))
    assert g.index == 1


def test_trigger_altitude_crossing_fires_both_directions():
    ops = gnc.parse_script("T:vtas=30 E:theta=0 A:chi=0 R:beta=0 TRG:hp=2500\n"
                           "T:vtas=30 E:theta=0 A:chi=0 R:beta=0 TRG:dt_op=1e9")
    # climbing through the threshold
    g = gnc.Guidance(ops)
    for hp in (2400.0, 2450.0, 2499.0):
        g.step(make_view(t=0.0, hp=hp))
    assert g.index == 0
    g.step(make_view(t=1.0, hp=2501.0))
    assert g.index == 1
    # descending through it
    g = gnc.Guidance(ops)
    for hp in (2600.0, 2550.0):
        g.step(make_view(t=0.0, hp=hp))
    assert g.index == 0
    g.step(make_view(t=1.0, hp=2499.0))
    assert g.index == 1


def test_single_operation_with_impossible_trigger_never_switches():
    ops = gnc.parse_script("T:vtas=30 E:hp=1000 A:chi=0 R:beta=0 TRG:hp=-1e6")
    g = gnc.Guidance(ops)
    for t in np.arange(0.0, 10.0, 0.02):
        op = g.step(make_view(t=t))
    assert g.index == 0 and op is ops[0]


def test_script_exhausted_sets_finished():
    ops = gnc.parse_script("T:vtas=30 E:hp=1000 A:chi=0 R:beta=0 TRG:dt_op=1")
    g = gnc.Guidance(ops)
    g.step(make_view(t=0.0))
    g.step(make_view(t=1.5))
    assert g.finished


# --- PID ---------------------------------------------------------------------------

def test_pid_zero_error_zero_output():
    pid = Pid(PidConfig(kp=2.0, ki=1.0, kd=0.5))
    for _ in range(10):
        u = pid.step(1.0, 1.0)
    assert u == 0.0


def test_pid_proportional_arithmetic():
    pid = Pid(PidConfig(kp=2.0, setpoint_weight_p=1.0))
    assert pid.step(1.0, 0.25) == pytest.approx(1.5)


def test_pid_weighted_forms_agree_at_unit_weights():
    # the weighted controller with b = c = 1 equals the plain error form
    cfg_w = PidConfig(kp=1.7, ki=0.8, kd=0.3, setpoint_weight_p=1.0,
                      setpoint_weight_d=1.0, deriv_tau=0.07)
    pid_w = Pid(cfg_w)

    class PlainPid:
        def __init__(self, kp, ki, kd, tau, dt=0.02):
            self.kp, self.ki, self.kd, self.tau, self.dt = kp, ki, kd, tau, dt
            self.integral = 0.0
            self.state = None

        def step(self, r, y):
            e = r - y
            self.integral += e * self.dt
            if self.state is None:
                self.state = e
            alpha = self.dt / (self.tau + self.dt)
            f = self.state + alpha * (e - self.state)
            deriv = (f - self.state) / self.dt
            self.state = f
            return self.kp * e + self.ki * self.integral + self.kd * deriv

    plain = PlainPid(1.7, 0.8, 0.3, 0.07)
    rng = np.random.default_rng(0)
    for _ in range(200):
        r = rng.standard_normal()
        y = rng.standard_normal()
        assert pid_w.step(r, y) == pytest.approx(plain.step(r, y), abs=1e-12)


def test_pid_integral_clamp():
    pid = Pid(PidConfig(kp=0.0, ki=1.0, integral_limit=0.5))
    for _ in range(500):
        u = pid.step(10.0, 0.0)
    assert u == pytest.approx(0.5)


def test_pid_setpoint_ramp_step_count():
    cfg = PidConfig(kp=1.0, ramp_rate=2.0)   # units per second
    pid = Pid(cfg, dt=0.02)
    pid.step(0.0, 0.0)
    target = 1.0
    per_step = 2.0 * 0.02
    needed = math.ceil(target / per_step)
    steps = 0
    while abs(pid._sp - target) > 1e-12:
        pid.step(target, 0.0)
        steps += 1
        assert steps < 1000
    assert steps == needed


def test_pid_gain_validation():
    with pytest.raises(ValueError):
        PidConfig(kp=-1.0)
    with pytest.raises(ValueError):
        PidConfig(kp=1.0, setpoint_weight_p=1.5)


# --- control system ------------------------------------------------------------------

def ops_with(throttle=("vtas", 30.0), elevator=("hp", 1000.0),
             ailerons=("chi", 0.0), rudder=("beta", 0.0)):
    return gnc.GuidanceOperation(targets={"throttle": throttle,
                                          "elevator": elevator,
                                          "ailerons": ailerons,
                                          "rudder": rudder},
                                 trigger=("dt_op", 1e9))


def test_direct_throttle_passthrough():
    control = gnc.ControlSystem(gnc.default_gains())
    op = ops_with(throttle=("throttle", 0.7))
    out = control.step(make_view(), op)
    assert out.throttle == 0.7


def test_altitude_target_engages_secondary_loop():
    control = gnc.ControlSystem(gnc.default_gains())
    # flying below target: expect nose-up elevator (negative deflection)
    view = make_view(hp=950.0)
    op = ops_with(elevator=("hp", 2500.0))
    out = control.step(view, op)
    assert out.elevator < 0.0
    # theta target engages only the primary loop
    control2 = gnc.ControlSystem(gnc.default_gains())
    out2 = control2.step(make_view(theta=-0.1),
                         ops_with(elevator=("theta", 0.1)))
    assert out2.elevator < 0.0


def test_rudder_handles_beta_always():
    control = gnc.ControlSystem(gnc.default_gains())
    out = control.step(make_view(beta=math.radians(5.0)), ops_with())
    assert out.rudder > 0.0   # right rudder to kill positive sideslip


def test_channel_independence():
    gains = gnc.default_gains()
    c1 = gnc.ControlSystem(gains)
    c2 = gnc.ControlSystem(gains)
    view = make_view(hp=990.0, beta=0.01, bank=0.05, vtas=29.0)
    op_a = ops_with(ailerons=("chi", 0.0))
    op_b = ops_with(ailerons=("chi", math.radians(45.0)))
    out_a = c1.step(view, op_a)
    out_b = c2.step(view, op_b)
    assert out_a.ailerons != out_b.ailerons
    assert out_a.throttle == out_b.throttle
    assert out_a.elevator == out_b.elevator
    assert out_a.rudder == out_b.rudder


def test_surface_limits_respected():
    control = gnc.ControlSystem(gnc.default_gains())
    out = control.step(make_view(theta=-0.5), ops_with(elevator=("theta", 0.5)))
    assert abs(out.elevator) <= 8.0
    assert 0.0 <= out.throttle <= 1.0


def test_unknown_target_variable_rejected_at_load():
    with pytest.raises(ValueError):
        gnc.GuidanceOperation(targets={"throttle": ("hp", 1000.0),
                                       "elevator": ("hp", 1000.0),
                                       "ailerons": ("chi", 0.0),
                                       "rudder": ("beta", 0.0)},
                              trigger=("dt_op", 10.0))


def test_view_from_estimate_angles():
    import fwsim.lie as lie

    q = lie.euler_to_quat(math.radians(30.0), math.radians(4.0), 0.0)
    v_n = np.array([20.0, 11.0, -1.0])
    view = gnc.view_from_estimate(1.0, q, v_n, 30.0, math.radians(4.0), 0.0,
                                  1000.0, 1010.0)
    assert view.psi == pytest.approx(math.radians(30.0))
    assert view.theta == pytest.approx(math.radians(4.0))
    assert view.chi == pytest.approx(math.atan2(11.0, 20.0))
    assert view.gamma == pytest.approx(math.atan2(1.0, math.hypot(20.0, 11.0)))
    # airspeed-frame path angle: theta - alpha in symmetric flight
    assert view.gamma_tas == pytest.approx(0.0, abs=1e-9)
