"""Guidance scripts with triggered operations, and the cascaded PID stack.

A mission is an ordered list of operations, each fixing one target per
control channel plus a trigger; exactly one operation is active at a time
and triggers are evaluated on the *estimated* state. Control runs four
independent channels at 50 Hz: direct throttle pass-through or PID loops
with setpoint weighting, setpoint ramping, derivative low-pass filtering,
and integral clamping; altitude/heading style targets cascade through a
secondary loop that feeds the attitude primary loop.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field

import numpy as np

from . import lie
from .airframe import ControlVector
from .seeds import make_stream

CONTROL_DT = 0.02   # s, 50 Hz

CHANNELS = ("throttle", "elevator", "ailerons", "rudder")
CHANNEL_PREFIX = {"T": "throttle", "E": "elevator", "A": "ailerons",
                  "R": "rudder"}
INSTRUCTION_VARS = {
    "throttle": ("vtas", "throttle"),
    "elevator": ("theta", "hp", "h", "gamma_tas"),
    "ailerons": ("bank", "chi", "psi", "mu_tas", "chi_tas"),
    "rudder": ("beta",),
}
TRIGGER_VARS = ("t", "dt_op", "h", "hp", "gamma", "chi", "psi")
ANGLE_VARS = {"theta", "bank", "beta", "chi", "psi", "mu_tas", "chi_tas",
              "gamma", "gamma_tas", "alpha"}


@dataclass(frozen=True)
class GuidanceOperation:
    """Four instruction targets plus the termination trigger."""
    targets: dict          # channel -> (variable, value)
    trigger: tuple         # (variable, threshold)

    def __post_init__(self):
        for channel, (var, _) in self.targets.items():
            if var not in INSTRUCTION_VARS[channel]:
                raise ValueError(
                    f"variable {var!r} is not a legal {channel} target")
        if self.trigger[0] not in TRIGGER_VARS:
            raise ValueError(f"unknown trigger variable {self.trigger[0]!r}")


_STOCHASTIC = re.compile(r"^([NU])\(([^,]+),([^)]+)\)$")


def _resolve_value(text: str, rng) -> float:
    """Plain number, or N(mu,sigma) / U(a,b) resolved from the guidance rng."""
    match = _STOCHASTIC.match(text.strip())
    if match is None:
        return float(text)
    kind, a, b = match.group(1), float(match.group(2)), float(match.group(3))
    if rng is None:
        raise ValueError("stochastic guidance value needs a guidance seed")
    if kind == "N":
        return a + b * rng.standard_normal()
    return float(rng.uniform(a, b))


def parse_script(text: str, guidance_seed: int | None = None):
    """Parse a mission script into operations.

    One operation per non-comment line:
    ``T:<var>=<val> E:<var>=<val> A:<var>=<val> R:<var>=<val> TRG:<var>=<val>``
    with values optionally ``N(mu,sigma)`` or ``U(a,b)``. Angles are given
    in degrees and stored in radians.
    """
    rng = make_stream(guidance_seed) if guidance_seed is not None else None
    operations = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        targets = {}
        trigger = None
        for token in line.split():
            prefix, assignment = token.split(":", 1)
            var, value_text = assignment.split("=", 1)
            value = _resolve_value(value_text, rng)
            if var in ANGLE_VARS:
                value = math.radians(value)
            if prefix == "TRG":
                trigger = (var, value)
            else:
                targets[CHANNEL_PREFIX[prefix]] = (var, value)
        if trigger is None or set(targets) != set(CHANNELS):
            raise ValueError(f"operation line needs all four channels and a "
                             f"trigger: {line!r}")
        operations.append(GuidanceOperation(targets=targets, trigger=trigger))
    if not operations:
        raise ValueError("empty guidance script")
    return operations


def load_script(path, guidance_seed: int | None = None):
    with open(path) as fh:
        return parse_script(fh.read(), guidance_seed)


@dataclass
class GncView:
    """The estimated scalars guidance and control consume."""
    t: float
    vtas: float
    alpha: float
    beta: float
    theta: float
    psi: float
    bank: float
    hp: float
    h: float
    gamma: float
    chi: float
    gamma_tas: float
    chi_tas: float
    mu_tas: float
    throttle: float = 0.0


def _angle_diff(a: float, b: float) -> float:
    return math.atan2(math.sin(a - b), math.cos(a - b))


class Guidance:
    """Walks the operation list, switching on trigger sign changes."""

    def __init__(self, operations):
        self.operations = list(operations)
        self.index = 0
        self.op_start_t: float | None = None
        self._last_sign: float | None = None
        self.finished = False

    @property
    def active(self) -> GuidanceOperation:
        return self.operations[min(self.index, len(self.operations) - 1)]

    def _trigger_value(self, view: GncView) -> float:
        var, threshold = self.active.trigger
        if var == "t":
            return view.t - threshold
        if var == "dt_op":
            return (view.t - self.op_start_t) - threshold
        observed = getattr(view, var)
        if var in ("chi", "psi"):
            return _angle_diff(observed, threshold)
        return observed - threshold

    def step(self, view: GncView) -> GuidanceOperation:
        """Returns the active operation for this control cycle."""
        if self.finished:
            return self.active
        if self.op_start_t is None:
            self.op_start_t = view.t
        value = self._trigger_value(view)
        sign = math.copysign(1.0, value) if value != 0.0 else 0.0
        if self._last_sign is None:
            self._last_sign = sign
        if sign != self._last_sign or sign == 0.0:
            self.index += 1
            self.op_start_t = view.t
            self._last_sign = None
            if self.index >= len(self.operations):
                self.index = len(self.operations) - 1
                self.finished = True
        else:
            self._last_sign = sign
        return self.active


# ---------------------------------------------------------------------------
# PID
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PidConfig:
    kp: float
    ki: float = 0.0
    kd: float = 0.0
    setpoint_weight_p: float = 1.0      # b
    setpoint_weight_d: float = 0.0      # c
    deriv_tau: float = 0.1              # s, derivative low-pass
    integral_limit: float = math.inf
    ramp_rate: float = math.inf         # setpoint units per second
    out_min: float = -math.inf
    out_max: float = math.inf
    angular: bool = False               # wrap setpoint/feedback differences
    anti_windup: bool = False           # back-calculation tracking at rails

    def __post_init__(self):
        if min(self.kp, self.ki, self.kd) < 0.0:
            raise ValueError("gains must be non-negative")
        if not (0.0 <= self.setpoint_weight_p <= 1.0
                and 0.0 <= self.setpoint_weight_d <= 1.0):
            raise ValueError("setpoint weights must lie in [0, 1]")


class Pid:
    """Discrete PID with setpoint weighting, ramping, and filtered derivative."""

    def __init__(self, cfg: PidConfig, dt: float = CONTROL_DT):
        self.cfg = cfg
        self.dt = dt
        self.integral = 0.0
        self._sp: float | None = None
        self._deriv_state: float | None = None
        self._last_output = 0.0

    def reset(self):
        self.integral = 0.0
        self._sp = None
        self._deriv_state = None
        self._last_output = 0.0

    def _ramped_setpoint(self, r: float, y: float | None = None) -> float:
        if self._sp is None:
            # start the commanded trajectory from the current process value
            # so mission entry is bumpless (ramped loops only)
            self._sp = r if (math.isinf(self.cfg.ramp_rate) or y is None) \
                else y
        if math.isinf(self.cfg.ramp_rate):
            self._sp = r
            return r
        delta = (_angle_diff(r, self._sp) if self.cfg.angular
                 else r - self._sp)
        step = self.cfg.ramp_rate * self.dt
        delta = min(max(delta, -step), step)
        self._sp = self._sp + delta
        if self.cfg.angular:
            self._sp = math.atan2(math.sin(self._sp), math.cos(self._sp))
        return self._sp

    def step(self, r: float, y: float) -> float:
        cfg = self.cfg
        sp = self._ramped_setpoint(r, y)
        if cfg.angular:
            # wrap-safe loops (heading): weights act on the wrapped error,
            # since absolute angle values are frame dependent
            error = _angle_diff(sp, y)
            p_term = cfg.kp * cfg.setpoint_weight_p * error
            d_input = error
        else:
            error = sp - y
            p_term = cfg.kp * (cfg.setpoint_weight_p * sp - y)
            d_input = cfg.setpoint_weight_d * sp - y
        self.integral = min(max(self.integral + error * self.dt,
                                -cfg.integral_limit), cfg.integral_limit)
        # first-order low-pass on the weighted derivative input
        if self._deriv_state is None:
            self._deriv_state = d_input
        alpha = self.dt / (cfg.deriv_tau + self.dt)
        filtered = self._deriv_state + alpha * (d_input - self._deriv_state)
        deriv = (filtered - self._deriv_state) / self.dt
        self._deriv_state = filtered
        u_raw = p_term + cfg.ki * self.integral + cfg.kd * deriv
        u = min(max(u_raw, cfg.out_min), cfg.out_max)
        if cfg.anti_windup and cfg.ki > 0.0 and u != u_raw:
            # back-calculation: bleed the integral toward the applied output
            self.integral += (u - u_raw) / cfg.kp * self.dt / (self.dt + 0.2)
        self._last_output = u
        return u


# ---------------------------------------------------------------------------
# control system
# ---------------------------------------------------------------------------

_SECONDARY_KEY = {"hp": "elevator_alt", "h": "elevator_alt",
                  "gamma_tas": "elevator_gamma",
                  "chi": "ailerons_heading", "psi": "ailerons_heading",
                  "chi_tas": "ailerons_heading", "mu_tas": "ailerons_mu"}


def load_gains(path) -> dict:
    """PID configurations per loop from an INI gain file."""
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)
    gains = {}
    for section in parser.sections():
        kw = {}
        for key, value in parser[section].items():
            if key in ("angular", "anti_windup"):
                kw[key] = parser[section].getboolean(key)
            else:
                kw[key] = float(value)
        gains[section] = PidConfig(**kw)
    return gains


def default_gains() -> dict:
    import importlib.resources as res

    return load_gains(res.files("fwsim.data") / "gnc" / "gains.ini")


class ControlSystem:
    """Four independent channels: direct input, primary, and secondary loops."""

    def __init__(self, gains: dict, dt: float = CONTROL_DT,
                 surface_limit_deg: float = 8.0):
        self.dt = dt
        self.surface_limit = surface_limit_deg
        self._gains = gains
        self._loops: dict = {}
        self._active_vars = {ch: None for ch in CHANNELS}
        self.effective_setpoints: dict = {}

    def _loop(self, name: str) -> Pid:
        if name not in self._loops:
            self._loops[name] = Pid(self._gains[name], self.dt)
        return self._loops[name]

    def initialize_from_trim(self, controls, pitch_trim: float = 0.0) -> None:
        """Pre-load the loop integrals so the first control cycle reproduces
        the trim deflections and trim pitch target (bumpless start)."""
        for name, value in [("throttle_vtas", controls.throttle),
                            ("elevator_theta", -controls.elevator),
                            ("ailerons_bank", controls.ailerons),
                            ("rudder_beta", -controls.rudder),
                            ("elevator_alt", pitch_trim),
                            ("elevator_gamma", pitch_trim)]:
            if name in self._gains and self._gains[name].ki > 0.0:
                loop = self._loop(name)
                loop.integral = min(max(value / self._gains[name].ki,
                                        -self._gains[name].integral_limit),
                                    self._gains[name].integral_limit)

    def _channel_switch(self, channel: str, var: str):
        if self._active_vars[channel] != var:
            self._active_vars[channel] = var

    def step(self, view: GncView, operation: GuidanceOperation) -> ControlVector:
        lim = self.surface_limit
        self.effective_setpoints = {}
        # throttle: direct input or airspeed hold
        var, value = operation.targets["throttle"]
        self._channel_switch("throttle", var)
        if var == "throttle":
            throttle = value
            self.effective_setpoints["throttle"] = (var, value)
        else:
            loop = self._loop("throttle_vtas")
            throttle = loop.step(value, view.vtas)
            self.effective_setpoints["throttle"] = (var, loop._sp)
        throttle = min(max(throttle, 0.0), 1.0)

        # elevator: pitch primary, altitude/path secondary
        var, value = operation.targets["elevator"]
        self._channel_switch("elevator", var)
        if var == "theta":
            theta_target = value
            self.effective_setpoints["elevator"] = (var, value)
        else:
            feedback = {"hp": view.hp, "h": view.h,
                        "gamma_tas": view.gamma_tas}[var]
            loop = self._loop(_SECONDARY_KEY[var])
            theta_target = loop.step(value, feedback)
            self.effective_setpoints["elevator"] = (var, loop._sp)
            theta_target = min(max(theta_target, math.radians(-12.0)),
                               math.radians(15.0))
        # positive elevator deflection pitches down: invert the loop output
        elevator = -self._loop("elevator_theta").step(theta_target, view.theta)
        elevator = min(max(elevator, -lim), lim)

        # ailerons: bank primary plus airspeed auxiliary, heading secondary
        var, value = operation.targets["ailerons"]
        self._channel_switch("ailerons", var)
        if var == "bank" or var == "mu_tas":
            bank_target = value
            self.effective_setpoints["ailerons"] = (var, value)
        else:
            feedback = {"chi": view.chi, "psi": view.psi,
                        "chi_tas": view.chi_tas}[var]
            loop = self._loop(_SECONDARY_KEY[var])
            bank_target = loop.step(value, feedback)
            self.effective_setpoints["ailerons"] = (var, loop._sp)
            bank_target = min(max(bank_target, math.radians(-30.0)),
                              math.radians(30.0))
        feedback_bank = view.mu_tas if var == "mu_tas" else view.bank
        ailerons = self._loop("ailerons_bank").step(bank_target, feedback_bank)
        tvar, tvalue = operation.targets["throttle"]
        if tvar == "vtas" and "ailerons_vtas_aux" in self._gains:
            ailerons += self._loop("ailerons_vtas_aux").step(tvalue, view.vtas)
        ailerons = min(max(ailerons, -lim), lim)

        # rudder: sideslip primary; positive rudder reduces positive
        # sideslip (yaws the nose into the relative wind), so invert
        var, value = operation.targets["rudder"]
        loop = self._loop("rudder_beta")
        rudder = -loop.step(value, view.beta)
        self.effective_setpoints["rudder"] = (var, loop._sp)
        rudder = min(max(rudder, -lim), lim)

        return ControlVector(throttle, elevator, ailerons, rudder)


def view_from_estimate(t, q_nb, v_n, vtas, alpha, beta, hp, h,
                       throttle=0.0) -> GncView:
    """Build the guidance/control view from estimated quantities."""
    psi, theta, bank = lie.quat_to_euler(q_nb)
    vn, ve, vd = v_n
    gamma = math.atan2(-vd, math.hypot(vn, ve))
    chi = math.atan2(ve, vn)
    q_wb = lie.quat_mul(lie.quat_r3(-beta), lie.quat_r2(alpha))
    q_nw = lie.compose(q_nb, lie.quat_conjugate(q_wb))
    chi_tas, gamma_tas, mu_tas = lie.quat_to_euler(q_nw)
    return GncView(t=t, vtas=vtas, alpha=alpha, beta=beta, theta=theta,
                   psi=psi, bank=bank, hp=hp, h=h, gamma=gamma, chi=chi,
                   gamma_tas=gamma_tas, chi_tas=chi_tas, mu_tas=mu_tas,
                   throttle=throttle)
