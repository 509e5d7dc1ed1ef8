"""Equations of motion and their integration on the rotating ellipsoid.

The truth state carries geodetic position, body-frame ground velocity,
attitude, inertial angular rate, and mass. Integration runs at 500 Hz with
a fourth-order Runge-Kutta scheme in one of three equivalent forms: fully
Euclidean (quaternion renormalized per step), attitude advanced on the
rotation manifold, or pose advanced on the rigid-motion manifold. The
rigid-motion form is the default truth integrator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import atmosphere, geodesy, lie
from .airframe import (
    AeroTables,
    ControlVector,
    PropellerMap,
    aero_forces_moments,
    engine_power_fuel,
    mass_interp,
)

TRUTH_DT = 0.002   # s, 500 Hz


def _cross3(a, b) -> np.ndarray:
    return np.array([a[1] * b[2] - a[2] * b[1],
                     a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]])


@dataclass
class TruthState:
    pos: np.ndarray        # [lon, lat, h] rad, rad, m
    v_b: np.ndarray        # ground velocity, body frame, m/s
    q_nb: np.ndarray       # attitude NED->body quaternion
    w_ib_b: np.ndarray     # inertial angular velocity, body frame, rad/s
    mass: float            # kg

    def copy(self) -> "TruthState":
        return TruthState(self.pos.copy(), self.v_b.copy(), self.q_nb.copy(),
                          self.w_ib_b.copy(), self.mass)


@dataclass
class Se3TruthState:
    mass: float
    twist: np.ndarray      # [v_b(3), w_eb_b(3)]
    zeta_eb: np.ndarray    # ECEF->body pose, unit dual quaternion


@dataclass
class FlightContext:
    """Everything the equations of motion need besides the state itself."""
    tables: AeroTables
    propeller: PropellerMap
    weather: object                  # (lon, lat, t) -> (dT, dp)
    wind: object                     # (lon, lat, h, t) -> NED wind
    turbulence: object               # .sample(height, airspeed, t) -> NED
    deviations: object               # RealityDeviations
    earth_rotation: bool = True
    gravity: bool = True             # test toggle for free-particle checks
    terrain_altitude: float = 0.0    # m, MSL elevation below the track

    def without_turbulence(self) -> "FlightContext":
        from .environment import TurbulenceGenerator

        return replace(self, turbulence=TurbulenceGenerator("off", seed=0))


@dataclass
class TruthAux:
    """Byproducts of one equations-of-motion evaluation."""
    atmos: atmosphere.AtmosState
    v_n: np.ndarray
    v_wind_n: np.ndarray
    v_turb_n: np.ndarray
    v_tas_b: np.ndarray
    vtas: float
    alpha: float           # rad
    beta: float            # rad
    w_nb_b: np.ndarray
    f_ib_b: np.ndarray     # specific force, body frame
    g_real_n: np.ndarray
    pos_dot: np.ndarray
    v_b_dot: np.ndarray
    q_nb_dot: np.ndarray
    w_ib_dot: np.ndarray
    mass_dot: float
    table_clamped: bool


def airspeed_triplet(v_tas_b):
    """(vtas, alpha, beta) from the body-frame air velocity."""
    u, v, w = v_tas_b
    vtas = math.sqrt(u * u + v * v + w * w)
    alpha = math.atan2(w, u)
    beta = math.asin(min(max(v / vtas, -1.0), 1.0)) if vtas > 0.0 else 0.0
    return vtas, alpha, beta


def v_tas_b_from_triplet(vtas, alpha, beta):
    return np.array([vtas * math.cos(beta) * math.cos(alpha),
                     vtas * math.sin(beta),
                     vtas * math.cos(beta) * math.sin(alpha)])


def evaluate_truth(ctx: FlightContext, state: TruthState,
                   controls: ControlVector, t: float) -> TruthAux:
    """Single evaluation of the equations of motion with all byproducts."""
    lon, lat, h = state.pos
    q_nb = state.q_nb
    v_n = lie.rotate_vector(q_nb, state.v_b)

    dt_off, dp_off = ctx.weather(lon, lat, t)
    big_h = geodesy.geopotential_from_geometric(h)
    atmos = atmosphere.state_at(big_h, dt_off, dp_off)

    v_wind_n = np.asarray(ctx.wind(lon, lat, h, t), dtype=float)
    height = max(h - ctx.terrain_altitude, 3.0)
    speed_hint = max(float(np.linalg.norm(state.v_b)), 1.0)
    v_turb_n = ctx.turbulence.sample(height, speed_hint, t)
    v_tas_b = state.v_b - lie.rotate_vector_inverse(q_nb, v_wind_n + v_turb_n)
    vtas, alpha, beta = airspeed_triplet(v_tas_b)

    if ctx.earth_rotation:
        w_ie_n = geodesy.earth_rate_ned(lat)
        a_cor_n = geodesy.coriolis_acceleration_ned(lat, v_n)
    else:
        w_ie_n = np.zeros(3)
        a_cor_n = np.zeros(3)
    w_en_n = geodesy.transport_rate_ned(lat, h, v_n)
    w_nb_b = state.w_ib_b - lie.rotate_vector_inverse(q_nb, w_ie_n + w_en_n)
    w_eb_b = state.w_ib_b - lie.rotate_vector_inverse(q_nb, w_ie_n)

    f_aer, m_aer, clamped = aero_forces_moments(
        ctx.tables, atmos.rho, v_tas_b, w_nb_b, controls, state.mass)
    power, fuel_flow = engine_power_fuel(controls.throttle, atmos.delta,
                                         atmos.theta)
    from .airframe import propeller_thrust_torque

    thrust, torque = propeller_thrust_torque(ctx.propeller, power, atmos.rho,
                                             v_tas_b[0])
    f_pro = np.array([thrust, 0.0, 0.0])
    m_pro = np.array([torque, 0.0, 0.0])

    if ctx.gravity:
        from .environment import apply_gravity_deviation

        g_model = geodesy.gravity_ned_model(lat, h)
        g_real_n = apply_gravity_deviation(g_model, ctx.deviations)
    else:
        g_real_n = np.zeros(3)

    f_ib_b = (f_aer + f_pro) / state.mass
    v_b_dot = (f_ib_b - _cross3(w_eb_b, state.v_b)
               + lie.rotate_vector_inverse(q_nb, g_real_n - a_cor_n))
    pos_dot = geodesy.geodetic_rates(lat, h, v_n)
    q_nb_dot = 0.5 * lie.quat_mul(q_nb, np.array([0.0, *w_nb_b]))
    _, inertia = mass_interp(state.mass)
    w_ib_dot = np.linalg.solve(
        inertia, m_aer + m_pro - _cross3(state.w_ib_b, inertia @ state.w_ib_b))
    return TruthAux(atmos=atmos, v_n=v_n, v_wind_n=v_wind_n, v_turb_n=v_turb_n,
                    v_tas_b=v_tas_b, vtas=vtas, alpha=alpha, beta=beta,
                    w_nb_b=w_nb_b, f_ib_b=f_ib_b, g_real_n=g_real_n,
                    pos_dot=pos_dot, v_b_dot=v_b_dot, q_nb_dot=q_nb_dot,
                    w_ib_dot=w_ib_dot, mass_dot=-fuel_flow,
                    table_clamped=clamped)


def v_n_dot_from_body(state: TruthState, aux: TruthAux) -> np.ndarray:
    """NED acceleration from the body-frame derivative pair."""
    return lie.rotate_vector(state.q_nb,
                             _cross3(aux.w_nb_b, state.v_b) + aux.v_b_dot)


def specific_force_ned(state: TruthState, aux: TruthAux,
                       earth_rotation: bool = True) -> np.ndarray:
    """f_IB^N from the NED-frame identity (dual path to aux.f_ib_b)."""
    lat, h = state.pos[1], state.pos[2]
    w_en_n = geodesy.transport_rate_ned(lat, h, aux.v_n)
    a_cor_n = (geodesy.coriolis_acceleration_ned(lat, aux.v_n)
               if earth_rotation else np.zeros(3))
    return (_cross3(w_en_n, aux.v_n) + v_n_dot_from_body(state, aux)
            - aux.g_real_n + a_cor_n)


# ---------------------------------------------------------------------------
# integrators
# ---------------------------------------------------------------------------

def step_euclidean(ctx, state: TruthState, controls: ControlVector, t: float,
                   dt: float = TRUTH_DT, renormalize: bool = True):
    """Classic RK4 treating the quaternion as a plain 4-vector."""
    def deriv(s, stage_t):
        aux = evaluate_truth(ctx, s, controls, stage_t)
        return aux, np.concatenate([aux.pos_dot, aux.v_b_dot, aux.q_nb_dot,
                                    aux.w_ib_dot, [aux.mass_dot]])

    def unpack(y):
        q = y[6:10]
        return TruthState(y[0:3], y[3:6], q / np.linalg.norm(q), y[10:13],
                          float(y[13]))

    y0 = np.concatenate([state.pos, state.v_b, state.q_nb, state.w_ib_b,
                         [state.mass]])
    aux1, k1 = deriv(state, t)
    _, k2 = deriv(unpack(y0 + 0.5 * dt * k1), t + 0.5 * dt)
    _, k3 = deriv(unpack(y0 + 0.5 * dt * k2), t + 0.5 * dt)
    _, k4 = deriv(unpack(y0 + dt * k3), t + dt)
    y1 = y0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    q = y1[6:10]
    if renormalize:
        q = q / np.linalg.norm(q)
    new = TruthState(y1[0:3], y1[3:6], q, y1[10:13], float(y1[13]))
    return new, aux1


def step_so3(ctx, state: TruthState, controls: ControlVector, t: float,
             dt: float = TRUTH_DT, renormalize: bool = True):
    """Modified RK4 advancing the attitude with the manifold plus operator."""
    def deriv(s, stage_t):
        aux = evaluate_truth(ctx, s, controls, stage_t)
        return aux, np.concatenate([aux.pos_dot, aux.v_b_dot, aux.w_ib_dot,
                                    [aux.mass_dot]]), aux.w_nb_b

    def advance(y, w, factor):
        q = lie.quat_mul(state.q_nb, lie.exp_so3(w * (dt * factor)))
        if renormalize:
            q = q / np.linalg.norm(q)
        yy = y0 + dt * factor * y
        return TruthState(yy[0:3], yy[3:6], q, yy[6:9], float(yy[9]))

    y0 = np.concatenate([state.pos, state.v_b, state.w_ib_b, [state.mass]])
    aux1, k1, w1 = deriv(state, t)
    _, k2, w2 = deriv(advance(k1, w1, 0.5), t + 0.5 * dt)
    _, k3, w3 = deriv(advance(k2, w2, 0.5), t + 0.5 * dt)
    _, k4, w4 = deriv(advance(k3, w3, 1.0), t + dt)
    y1 = y0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    w_avg = (w1 + 2.0 * w2 + 2.0 * w3 + w4) / 6.0
    q1 = lie.quat_mul(state.q_nb, lie.exp_so3(w_avg * dt))
    if renormalize:
        q1 = q1 / np.linalg.norm(q1)
    new = TruthState(y1[0:3], y1[3:6], q1, y1[6:9], float(y1[9]))
    return new, aux1


def truth_to_se3(state: TruthState, earth_rotation: bool = True) -> Se3TruthState:
    lon, lat, _ = state.pos
    q_en = geodesy.ned_to_ecef_quat(lon, lat)
    q_eb = lie.compose(q_en, state.q_nb)
    t_ebe = geodesy.geodetic_to_cartesian(state.pos)
    zeta = lie.dq_from_quat_trans(q_eb, t_ebe)
    w_ie_e = (np.array([0.0, 0.0, geodesy.OMEGA_EARTH]) if earth_rotation
              else np.zeros(3))
    w_eb_b = state.w_ib_b - lie.rotate_vector_inverse(q_eb, w_ie_e)
    return Se3TruthState(mass=state.mass,
                         twist=np.concatenate([state.v_b, w_eb_b]),
                         zeta_eb=zeta)


def se3_to_truth(s: Se3TruthState, earth_rotation: bool = True) -> TruthState:
    q_eb, t_ebe = lie.dq_to_quat_trans(s.zeta_eb)
    pos = geodesy.cartesian_to_geodetic(t_ebe)
    q_en = geodesy.ned_to_ecef_quat(pos[0], pos[1])
    q_nb = lie.compose(lie.quat_conjugate(q_en), q_eb)
    w_ie_e = (np.array([0.0, 0.0, geodesy.OMEGA_EARTH]) if earth_rotation
              else np.zeros(3))
    w_ib_b = s.twist[3:] + lie.rotate_vector_inverse(q_eb, w_ie_e)
    return TruthState(pos=pos, v_b=s.twist[:3].copy(), q_nb=q_nb,
                      w_ib_b=w_ib_b, mass=s.mass)


def step_se3(ctx, se3_state: Se3TruthState, controls: ControlVector, t: float,
             dt: float = TRUTH_DT, renormalize: bool = True):
    """Modified RK4 advancing the full pose with the rigid-motion plus."""
    w_ie_e = (np.array([0.0, 0.0, geodesy.OMEGA_EARTH]) if ctx.earth_rotation
              else np.zeros(3))

    def deriv(s: Se3TruthState, stage_t):
        truth = se3_to_truth(s, ctx.earth_rotation)
        aux = evaluate_truth(ctx, truth, controls, stage_t)
        q_eb = s.zeta_eb[:4]
        w_ie_b = lie.rotate_vector_inverse(q_eb, w_ie_e)
        w_eb_dot = aux.w_ib_dot - _cross3(w_ie_b, s.twist[3:])
        return aux, np.concatenate([aux.v_b_dot, w_eb_dot]), float(aux.mass_dot)

    def advance(twist_dot, m_dot, twist_stage, factor):
        zeta = lie.dq_mul(se3_state.zeta_eb,
                          lie.exp_se3(twist_stage * (dt * factor)))
        if renormalize:
            zeta = lie.dq_normalize(zeta)
        return Se3TruthState(mass=se3_state.mass + dt * factor * m_dot,
                             twist=se3_state.twist + dt * factor * twist_dot,
                             zeta_eb=zeta)

    x1 = se3_state.twist
    aux1, k1, m1 = deriv(se3_state, t)
    s2 = advance(k1, m1, x1, 0.5)
    _, k2, m2 = deriv(s2, t + 0.5 * dt)
    s3 = advance(k2, m2, s2.twist, 0.5)
    _, k3, m3 = deriv(s3, t + 0.5 * dt)
    s4 = advance(k3, m3, s3.twist, 1.0)
    _, k4, m4 = deriv(s4, t + dt)

    twist1 = se3_state.twist + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    mass1 = se3_state.mass + dt / 6.0 * (m1 + 2.0 * m2 + 2.0 * m3 + m4)
    twist_avg = (x1 + 2.0 * s2.twist + 2.0 * s3.twist + s4.twist) / 6.0
    zeta1 = lie.dq_mul(se3_state.zeta_eb, lie.exp_se3(twist_avg * dt))
    if renormalize:
        zeta1 = lie.dq_normalize(zeta1)
    new = Se3TruthState(mass=mass1, twist=twist1, zeta_eb=zeta1)
    return new, aux1


def integrate(ctx, state0: TruthState, controls_fn, dt: float, steps: int,
              method: str = "se3", renormalize: bool = True,
              record_every: int = 1):
    """Drive one of the three integrators; controls_fn(t) -> ControlVector.

    Returns (times, states) with states as TruthState snapshots.
    """
    times = [0.0]
    states = [state0.copy()]
    if method == "se3":
        cur = truth_to_se3(state0, ctx.earth_rotation)
    else:
        cur = state0.copy()
    for k in range(steps):
        t = k * dt
        controls = controls_fn(t)
        if method == "euclidean":
            cur, _ = step_euclidean(ctx, cur, controls, t, dt, renormalize)
            snapshot = cur
        elif method == "so3":
            cur, _ = step_so3(ctx, cur, controls, t, dt, renormalize)
            snapshot = cur
        elif method == "se3":
            cur, _ = step_se3(ctx, cur, controls, t, dt, renormalize)
            snapshot = None
        else:
            raise ValueError(f"unknown integrator {method!r}")
        if (k + 1) % record_every == 0:
            if method == "se3":
                snapshot = se3_to_truth(cur, ctx.earth_rotation)
            times.append((k + 1) * dt)
            states.append(snapshot.copy())
    return np.array(times), states


# ---------------------------------------------------------------------------
# steady-flight trim
# ---------------------------------------------------------------------------

def build_state(ctx, lon, lat, hp_target, vtas, alpha, beta, chi_tas=0.0,
                gamma_tas=0.0, mass: float = 19.715, t: float = 0.0) -> TruthState:
    """Kinematically consistent state for given airspeed-frame targets."""
    dt_off, dp_off = ctx.weather(lon, lat, t)
    hp = hp_target
    big_h = atmosphere.geopotential_from_hp(hp, dt_off, dp_off)
    h = geodesy.geometric_from_geopotential(big_h)
    q_nw = lie.euler_to_quat(chi_tas, gamma_tas, 0.0)
    q_wb = lie.quat_mul(lie.quat_r3(-beta), lie.quat_r2(alpha))
    q_nb = lie.compose(q_nw, q_wb)
    v_tas_b = v_tas_b_from_triplet(vtas, alpha, beta)
    v_wind_n = np.asarray(ctx.wind(lon, lat, h, t), dtype=float)
    v_b = v_tas_b + lie.rotate_vector_inverse(q_nb, v_wind_n)
    v_n = lie.rotate_vector(q_nb, v_b)
    w_ie_n = geodesy.earth_rate_ned(lat) if ctx.earth_rotation else np.zeros(3)
    w_en_n = geodesy.transport_rate_ned(lat, h, v_n)
    w_ib_b = lie.rotate_vector_inverse(q_nb, w_ie_n + w_en_n)
    return TruthState(pos=np.array([lon, lat, h]), v_b=v_b, q_nb=q_nb,
                      w_ib_b=w_ib_b, mass=mass)


def trim_search(ctx, vtas, hp_target, gamma=0.0, chi=0.0, lon=0.0, lat=0.0,
                mass=19.715, max_iter: int = 200):
    """Damped Newton search for steady flight at (vtas, Hp, gamma).

    Unknowns are the four controls plus the aerodynamic angles; residuals are
    the body linear and angular accelerations.
    """
    ctx = ctx.without_turbulence()

    def residual(x):
        throttle, elevator, ailerons, rudder, alpha, beta = x
        controls = ControlVector(throttle, elevator, ailerons, rudder)
        state = build_state(ctx, lon, lat, hp_target, vtas, alpha, beta,
                            chi_tas=chi, gamma_tas=gamma, mass=mass)
        aux = evaluate_truth(ctx, state, controls, 0.0)
        return np.concatenate([aux.v_b_dot, aux.w_ib_dot]), state, controls

    x = np.array([0.6, 0.0, 0.5, 0.5, 2.0 * math.pi / 180.0, 0.0])
    r, state, controls = residual(x)
    scale = np.array([0.05, 0.5, 0.5, 0.5, 0.2 * math.pi / 180.0,
                      0.2 * math.pi / 180.0])
    # keep iterates inside the table hull; clamped tables have flat gradients
    step_cap = np.array([0.15, 2.0, 2.0, 2.0, math.radians(1.5),
                         math.radians(1.5)])
    lo = np.array([0.01, -8.0, -8.0, -8.0, math.radians(-5.0),
                   math.radians(-8.0)])
    hi = np.array([1.0, 8.0, 8.0, 8.0, math.radians(12.0), math.radians(8.0)])
    for _ in range(max_iter):
        if np.linalg.norm(r[:3]) < 1e-7 and np.linalg.norm(r[3:]) < 1e-9:
            return state, controls
        jac = np.zeros((6, 6))
        for i in range(6):
            dx = np.zeros(6)
            dx[i] = scale[i] * 1e-3
            rp, _, _ = residual(x + dx)
            jac[:, i] = (rp - r) / dx[i]
        # least squares tolerates flat columns (saturated throttle / tables)
        step = np.linalg.lstsq(jac, -r, rcond=None)[0]
        step = np.clip(step, -step_cap, step_cap)
        lam = 1.0
        for _ in range(8):
            x_new = np.clip(x + lam * step, lo, hi)
            r_new, state_new, controls_new = residual(x_new)
            if np.linalg.norm(r_new) < np.linalg.norm(r):
                break
            lam *= 0.5
        x = x_new
        r, state, controls = r_new, state_new, controls_new
    raise RuntimeError(
        f"trim did not converge: |v_dot|={np.linalg.norm(r[:3]):.2e} m/s^2, "
        f"|w_dot|={np.linalg.norm(r[3:]):.2e} rad/s^2")


# ---------------------------------------------------------------------------
# compiled fast path (equivalence-tested against the reference step)
# ---------------------------------------------------------------------------

class FastSe3Integrator:
    """Drives the compiled rigid-motion step for constant weather/wind fields.

    Exotic position-dependent fields fall outside this fast path; the
    reference integrator handles those.
    """

    def __init__(self, ctx: FlightContext, lon0: float, lat0: float,
                 t0: float = 0.0):
        from . import _fast
        from .environment import apply_gravity_deviation

        self._fast = _fast
        self.ctx = ctx
        dt_off, dp_off = ctx.weather(lon0, lat0, t0)
        scalars = np.zeros(_fast.N_SCALARS)
        scalars[_fast.S_WEATHER_DT] = dt_off
        scalars[_fast.S_WEATHER_DP] = dp_off
        scalars[_fast.S_PROP_J0] = ctx.propeller.j_grid.starts[0]
        scalars[_fast.S_PROP_DJ] = ctx.propeller.j_grid.steps[0]
        scalars[_fast.S_PROP_N] = ctx.propeller.j_grid.counts[0]
        scalars[_fast.S_PROP_DIAM] = ctx.propeller.diameter
        scalars[_fast.S_EARTH] = 1.0 if ctx.earth_rotation else 0.0
        scalars[_fast.S_GRAVITY] = 1.0 if ctx.gravity else 0.0
        scalars[_fast.S_TERRAIN] = ctx.terrain_altitude
        scalars[_fast.S_GRAV_DEV] = ctx.deviations.gravity_intensity
        self.scalars = scalars
        # constant gravity-deviation rotation matrix
        axis = np.array([math.cos(ctx.deviations.gravity_tilt_azimuth),
                         math.sin(ctx.deviations.gravity_tilt_azimuth), 0.0])
        self.grav_rot = lie.quat_to_matrix(
            lie.exp_so3(axis * ctx.deviations.gravity_tilt))
        self.lon_meta = np.array([*ctx.tables.lon_grid.starts,
                                  *ctx.tables.lon_grid.steps,
                                  *map(float, ctx.tables.lon_grid.counts)])
        self.lat_meta = np.array([*ctx.tables.lat_grid.starts,
                                  *ctx.tables.lat_grid.steps,
                                  *map(float, ctx.tables.lat_grid.counts)])
        self.lon_values = np.ascontiguousarray(ctx.tables.lon_values)
        self.lat_values = np.ascontiguousarray(ctx.tables.lat_values)
        self.prop_ct = np.ascontiguousarray(ctx.propeller.ct)
        self.prop_cp = np.ascontiguousarray(ctx.propeller.cp)
        self.wind_ned = np.asarray(ctx.wind(lon0, lat0, 0.0, t0), dtype=float)
        self.aux = np.zeros(_fast.AUX_SIZE)
        self._last_h = None

    def step(self, se3_state: Se3TruthState, controls: ControlVector,
             t: float, dt: float = TRUTH_DT):
        """Advance one truth step; returns (new_state, aux_array)."""
        if self._last_h is None:
            _, t_ebe = lie.dq_to_quat_trans(se3_state.zeta_eb)
            self._last_h = geodesy.cartesian_to_geodetic(t_ebe)[2]
        height = max(self._last_h - self.ctx.terrain_altitude, 3.0)
        speed = max(float(np.linalg.norm(se3_state.twist[:3])), 1.0)
        turb_now = self.ctx.turbulence.sample(height, speed, t)
        turb_next = self.ctx.turbulence.sample(height, speed, t + dt)
        ctrl = controls.as_array()
        mass1, twist1, zeta1 = self._fast.se3_step_fast(
            se3_state.mass, se3_state.twist, se3_state.zeta_eb, ctrl, dt,
            self.lon_values, self.lon_meta, self.lat_values, self.lat_meta,
            self.prop_ct, self.prop_cp, self.scalars, self.wind_ned,
            self.grav_rot, np.asarray(turb_now, dtype=float),
            np.asarray(turb_next, dtype=float), self.aux)
        self._last_h = self.aux[2]
        return Se3TruthState(mass=mass1, twist=twist1, zeta_eb=zeta1), self.aux

    def evaluate(self, se3_state: Se3TruthState, controls: ControlVector,
                 t: float) -> np.ndarray:
        """Aux snapshot at the current state without advancing it."""
        if self._last_h is None:
            _, t_ebe = lie.dq_to_quat_trans(se3_state.zeta_eb)
            self._last_h = geodesy.cartesian_to_geodetic(t_ebe)[2]
        height = max(self._last_h - self.ctx.terrain_altitude, 3.0)
        speed = max(float(np.linalg.norm(se3_state.twist[:3])), 1.0)
        turb = self.ctx.turbulence.sample(height, speed, t)
        aux = np.zeros(self._fast.AUX_SIZE)
        self._fast.se3_aux_fast(
            se3_state.mass, se3_state.twist, se3_state.zeta_eb,
            controls.as_array(), self.lon_values, self.lon_meta,
            self.lat_values, self.lat_meta, self.prop_ct, self.prop_cp,
            self.scalars, self.wind_ned, self.grav_rot,
            np.asarray(turb, dtype=float), aux)
        return aux
