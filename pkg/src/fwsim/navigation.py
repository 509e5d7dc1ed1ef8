"""Inertial navigation: the air-data filter and the manifold attitude filter.

Two extended Kalman filters run back to back at 100 Hz. The air-data
filter is a plain Euclidean smoother over (airspeed, flow angles,
temperature, pressure altitude) and their rates. The navigation filter
estimates attitude as a unit quaternion updated through local body-frame
rotation-vector perturbations that are folded back (reset) every cycle,
alongside 24 Euclidean states: body rates, geodetic position, ground
velocity, specific force, and the slowly varying sensor and field errors.

The filters read sensed measurements and initial conditions only — never
the truth state. Gravity and magnetic field come from the onboard models
evaluated at the estimated position; the real (deviated) fields never
enter here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import atmosphere, geodesy, lie
from .geodesy import BETA_T, G0_STANDARD, P0_STANDARD, R_AIR, T0_STANDARD

NAV_DT = 0.01    # s, 100 Hz
GNSS_EVERY = 100  # navigation cycles per GNSS epoch


class CovarianceError(RuntimeError):
    pass


def _spd_solve(s: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        factor = scipy.linalg.cho_factor(s, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise CovarianceError(
            f"innovation covariance not SPD (cond={np.linalg.cond(s):.3e})"
        ) from exc
    return scipy.linalg.cho_solve(factor, rhs, check_finite=False)


# ---------------------------------------------------------------------------
# air-data filter
# ---------------------------------------------------------------------------

AIRDATA_Q_DIAG = np.array([1e-15, 1e-15, 1e-15, 1e-4, 1e-15,
                           1e-3, 1e-4, 1e-6, 1e-6])


class AirDataFilter:
    """Nine-state smoother: (vtas, aoa, aos, T, Hp, ROC, and three rates)."""

    def __init__(self, specs_air: dict, dt: float = NAV_DT):
        self.dt = dt
        self.q_d = np.diag(AIRDATA_Q_DIAG)
        self.r_diag = np.array([specs_air["airspeed_noise"]**2,
                                specs_air["aoa_noise"]**2,
                                specs_air["aos_noise"]**2,
                                specs_air["temperature_noise"]**2,
                                specs_air["pressure_noise"]**2])
        self._p0_bias = np.array([specs_air["airspeed_bias"]**2,
                                  specs_air["aoa_bias"]**2,
                                  specs_air["aos_bias"]**2,
                                  specs_air["temperature_bias"]**2,
                                  specs_air["pressure_bias"]**2])
        self.x: np.ndarray | None = None
        self.p: np.ndarray | None = None

    def initialize(self, y0):
        """First measurements become the initial state estimate."""
        vtas, aoa, aos, temp, press = y0
        hp0 = atmosphere.hp_from_pressure(press)
        self.x = np.array([vtas, aoa, aos, temp, hp0, 0.0, 0.0, 0.0, 0.0])
        # pressure variance mapped through dHp/dp at the operating point
        dhp_dp = -R_AIR * (T0_STANDARD + BETA_T * hp0) / (G0_STANDARD * press)
        p_diag = np.zeros(9)
        p_diag[:4] = self.r_diag[:4] + self._p0_bias[:4]
        p_diag[4] = dhp_dp**2 * (self.r_diag[4] + self._p0_bias[4])
        self.p = np.diag(p_diag)

    @staticmethod
    def _transition(dt: float) -> np.ndarray:
        f = np.eye(9)
        f[0, 6] = dt
        f[1, 7] = dt
        f[2, 8] = dt
        f[4, 5] = dt
        return f

    def step(self, y) -> np.ndarray:
        """One predict/update cycle; returns the posterior state."""
        if self.x is None:
            self.initialize(y)
            return self.x.copy()
        f = self._transition(self.dt)
        self.x = f @ self.x
        self.p = f @ self.p @ f.T + self.q_d

        hp = self.x[4]
        press_pred = atmosphere.pressure_from_hp(hp)
        h_of_x = np.array([self.x[0], self.x[1], self.x[2], self.x[3],
                           press_pred])
        h_mat = np.zeros((5, 9))
        h_mat[0, 0] = h_mat[1, 1] = h_mat[2, 2] = h_mat[3, 3] = 1.0
        h_mat[4, 4] = -G0_STANDARD * press_pred / (
            R_AIR * (T0_STANDARD + BETA_T * hp))
        innov = np.asarray(y, dtype=float) - h_of_x
        s = h_mat @ self.p @ h_mat.T + np.diag(self.r_diag)
        gain = _spd_solve(s, h_mat @ self.p).T
        self.x = self.x + gain @ innov
        ikh = np.eye(9) - gain @ h_mat
        self.p = ikh @ self.p @ ikh.T + gain @ np.diag(self.r_diag) @ gain.T
        self.p = 0.5 * (self.p + self.p.T)
        return self.x.copy()


# ---------------------------------------------------------------------------
# navigation filter (local rotation-manifold EKF, 27 Euclidean states)
# ---------------------------------------------------------------------------

# state slices
DR = slice(0, 3)     # attitude perturbation (body rotation vector)
W = slice(3, 6)      # w_nb_b
T = slice(6, 9)      # geodetic position
V = slice(9, 12)     # ground velocity NED
F = slice(12, 15)    # specific force body
EG = slice(15, 18)   # gyroscope full error
EA = slice(18, 21)   # accelerometer full error
EM = slice(21, 24)   # magnetometer full error
BD = slice(24, 27)   # magnetic field deviation, NED

ATT_P0 = 1e-8        # rad^2, hand-adjusted initial attitude covariance


def nav_process_noise_diag(sigma_u_acc: float, dt: float) -> np.ndarray:
    return np.concatenate([
        np.full(3, 5e-15),                 # attitude perturbation
        np.full(3, 1e-6),                  # body rates
        np.array([1e-3, 1e-3, 5e-6]),      # position (meters, mapped by L)
        np.full(3, 5e-13),                 # velocity
        np.full(3, 1e-4),                  # specific force
        np.full(3, 3e-14),                 # gyroscope error
        np.full(3, 1e-3 * sigma_u_acc**2 * dt),  # accelerometer error
        np.full(3, 1e-14),                 # magnetometer error
        np.full(3, 1e-12),                 # field deviation
    ])


@dataclass
class NavigationFilter:
    """Local-manifold attitude EKF with per-cycle perturbation reset."""
    specs: dict
    magnetic_model: object           # onboard field model: field_ned(lon, lat)
    dt: float = NAV_DT
    gnss_every: int = GNSS_EVERY
    reset_every: int = 1     # fold the attitude perturbation every n cycles
    q_nb: np.ndarray = field(default_factory=lambda: lie.Q_IDENTITY.copy())
    x: np.ndarray = field(default_factory=lambda: np.zeros(27))
    p: np.ndarray = field(default_factory=lambda: np.eye(27))
    cycle: int = 0

    def __post_init__(self):
        gyr = self.specs["gyroscope"]
        acc = self.specs["accelerometer"]
        mag = self.specs["magnetometer"]
        gnss = self.specs["gnss"]
        self.q_d = np.diag(nav_process_noise_diag(acc["bias_drift"], self.dt))
        self._r_inertial = np.concatenate([
            np.full(3, gyr["white_noise"]**2 / self.dt),
            np.full(3, acc["white_noise"]**2 / self.dt),
            np.full(3, mag["white_noise"]**2 / self.dt),
        ])
        self._r_gnss_ned = np.diag([gnss["horizontal_sigma"]**2,
                                    gnss["horizontal_sigma"]**2,
                                    gnss["vertical_sigma"]**2])
        self._r_gnss_vel = np.full(3, gnss["velocity_sigma"]**2)

    # -- initialization ------------------------------------------------------

    def initialize(self, init, w_meas0, f_meas0, pos_meas0, v_meas0):
        """From fine-alignment output plus the first sensor readings."""
        self.q_nb = init.q_nb.copy()
        x = np.zeros(27)
        x[W] = w_meas0 - init.e_gyr
        x[T] = pos_meas0
        x[V] = v_meas0
        x[F] = f_meas0 - init.e_acc
        x[EG] = init.e_gyr
        x[EA] = init.e_acc
        x[EM] = init.e_mag
        x[BD] = init.b_dev_n
        self.x = x

        gyr = self.specs["gyroscope"]
        acc = self.specs["accelerometer"]
        mag = self.specs["magnetometer"]
        gnss = self.specs["gnss"]
        from .environment import SIGMA_B_DEV_NT
        from .preflight import (SIGMA_B_DEV_INIT, SIGMA_E_ACC_INIT,
                                SIGMA_E_GYR_INIT, SIGMA_E_MAG_INIT)

        e_gyr_var = ((gyr["bias_offset"]**2 + gyr["bias_drift"]**2 * self.dt)
                     * SIGMA_E_GYR_INIT**2)
        e_acc_var = ((acc["bias_offset"]**2 + acc["bias_drift"]**2 * self.dt)
                     * SIGMA_E_ACC_INIT**2)
        e_mag_var = ((mag["bias_offset"]**2 + mag["hard_iron"]**2)
                     * SIGMA_E_MAG_INIT**2)
        jac = geodesy.jac_geodetic_rates_wrt_v(pos_meas0[1], pos_meas0[2])
        p_pos = jac @ self._r_gnss_ned @ jac.T
        p_diag = np.concatenate([
            np.full(3, ATT_P0),
            np.full(3, gyr["white_noise"]**2 / self.dt + e_gyr_var),
            np.zeros(3),                      # replaced by the full block
            np.full(3, gnss["velocity_sigma"]**2),
            np.full(3, acc["white_noise"]**2 / self.dt + e_acc_var),
            np.full(3, e_gyr_var),
            np.full(3, e_acc_var),
            np.full(3, e_mag_var),
            SIGMA_B_DEV_NT**2 * SIGMA_B_DEV_INIT**2,
        ])
        self.p = np.diag(p_diag)
        self.p[T, T] = p_pos
        self.cycle = 0

    # -- helpers ---------------------------------------------------------------

    def _rotation_hat(self) -> np.ndarray:
        """Attitude including the current (usually zero) perturbation."""
        return lie.so3_plus(self.q_nb, self.x[DR])

    # -- cycle -------------------------------------------------------------------

    def step(self, w_meas, f_meas, b_meas, gnss_meas=None) -> None:
        """One 100 Hz cycle; gnss_meas is (pos_gdt, v_ned) on its epochs."""
        dt = self.dt
        x = self.x
        lon, lat, h = x[T]
        q_hat = self._rotation_hat()
        rot = lie.quat_to_matrix(q_hat)

        # --- predict ---------------------------------------------------------
        w_en_n = geodesy.transport_rate_ned(lat, h, x[V])
        a_cor_n = geodesy.coriolis_acceleration_ned(lat, x[V])
        g_mod = geodesy.gravity_ned_model(lat, h)
        v_dot = rot @ x[F] - np.cross(w_en_n, x[V]) + g_mod - a_cor_n
        pos_dot = geodesy.geodetic_rates(lat, h, x[V])

        jac_pos = geodesy.jac_geodetic_rates_wrt_v(lat, h)
        a_mat = np.zeros((27, 27))
        a_mat[DR, W] = np.eye(3)
        a_mat[T, V] = jac_pos
        a_mat[V, DR] = lie.jac_rotate_local(q_hat, x[F])
        a_mat[V, V] = (-lie.skew(w_en_n)
                       + lie.skew(x[V]) @ geodesy.jac_transport_rate_wrt_v(lat, h)
                       - geodesy.jac_coriolis_wrt_v(lat))
        a_mat[V, F] = rot

        x_new = x.copy()
        x_new[DR] = x[DR] + x[W] * dt
        x_new[T] = x[T] + pos_dot * dt
        x_new[V] = x[V] + v_dot * dt
        self.x = x_new

        f_d = np.eye(27) + a_mat * dt
        l_mat = np.eye(27)
        l_mat[T, T] = jac_pos
        self.p = f_d @ self.p @ f_d.T + l_mat @ self.q_d @ l_mat.T

        # --- update ----------------------------------------------------------
        x = self.x
        lon, lat, h = x[T]
        q_hat = self._rotation_hat()
        rot = lie.quat_to_matrix(q_hat)
        w_ie_n = geodesy.earth_rate_ned(lat)
        w_en_n = geodesy.transport_rate_ned(lat, h, x[V])
        w_in_n = w_ie_n + w_en_n
        b_mod = self.magnetic_model.field_ned(lon, lat)
        b_body = rot.T @ (b_mod - x[BD])

        gnss_active = gnss_meas is not None
        n_rows = 15 if gnss_active else 9
        h_mat = np.zeros((n_rows, 27))
        h_mat[0:3, DR] = lie.jac_adjoint_inv_local(q_hat, w_in_n)
        h_mat[0:3, W] = np.eye(3)
        h_mat[0:3, V] = rot.T @ geodesy.jac_transport_rate_wrt_v(lat, h)
        h_mat[0:3, EG] = np.eye(3)
        h_mat[3:6, F] = np.eye(3)
        h_mat[3:6, EA] = np.eye(3)
        h_mat[6:9, DR] = lie.jac_rotate_inv_local(q_hat, b_mod - x[BD])
        h_mat[6:9, EM] = np.eye(3)
        h_mat[6:9, BD] = -rot.T

        pred = np.concatenate([
            x[W] + rot.T @ w_in_n + x[EG],
            x[F] + x[EA],
            b_body + x[EM],
        ])
        meas = np.concatenate([w_meas, f_meas, b_meas])
        r_diag = self._r_inertial.copy()
        r_full = np.diag(r_diag)

        if gnss_active:
            pos_meas, v_meas = gnss_meas
            h_mat[9:12, T] = np.eye(3)
            h_mat[12:15, V] = np.eye(3)
            pred = np.concatenate([pred, x[T], x[V]])
            meas = np.concatenate([meas, pos_meas, v_meas])
            jac = geodesy.jac_geodetic_rates_wrt_v(lat, h)
            r_full = np.zeros((15, 15))
            r_full[:9, :9] = np.diag(r_diag)
            r_full[9:12, 9:12] = jac @ self._r_gnss_ned @ jac.T
            r_full[12:15, 12:15] = np.diag(self._r_gnss_vel)

        innov = meas - pred
        s = h_mat @ self.p @ h_mat.T + r_full
        gain = _spd_solve(s, h_mat @ self.p).T
        self.x = self.x + gain @ innov
        ikh = np.eye(27) - gain @ h_mat
        self.p = ikh @ self.p @ ikh.T + gain @ r_full @ gain.T

        # --- reset -------------------------------------------------------------
        if self.cycle % self.reset_every == self.reset_every - 1:
            dr = self.x[DR]
            self.q_nb = lie.so3_plus(self.q_nb, dr)
            g_reset = np.eye(27)
            g_reset[DR, DR] = lie.jac_reset(dr)
            self.p = g_reset @ self.p @ g_reset.T
            self.x[DR] = 0.0
        self.p = 0.5 * (self.p + self.p.T)
        self.cycle += 1


# ---------------------------------------------------------------------------
# full INS: both filters plus the extra estimation steps
# ---------------------------------------------------------------------------

@dataclass
class ObservedState:
    """The estimated state the guidance and control systems consume."""
    t: float
    q_nb: np.ndarray
    pos: np.ndarray
    v_n: np.ndarray
    w_nb_b: np.ndarray
    f_ib_b: np.ndarray
    e_gyr: np.ndarray
    e_acc: np.ndarray
    e_mag: np.ndarray
    b_dev_n: np.ndarray
    vtas: float
    alpha: float
    beta: float
    temp: float
    hp: float
    roc: float
    dt_offset: float
    dp_offset: float
    wind_ned: np.ndarray
    mass: float

    @property
    def zeta_eb(self) -> np.ndarray:
        q_en = geodesy.ned_to_ecef_quat(self.pos[0], self.pos[1])
        return lie.dq_from_quat_trans(lie.compose(q_en, self.q_nb),
                                      geodesy.geodetic_to_cartesian(self.pos))

    @property
    def twist_eb_b(self) -> np.ndarray:
        v_b = lie.rotate_vector_inverse(self.q_nb, self.v_n)
        w_en_n = geodesy.transport_rate_ned(self.pos[1], self.pos[2], self.v_n)
        w_eb_b = self.w_nb_b + lie.rotate_vector_inverse(self.q_nb, w_en_n)
        return np.concatenate([v_b, w_eb_b])


def estimate_dp_offset(hp_est, big_h_est, dt_offset_est, dp_start=0.0,
                       tol_pa: float = 0.1, max_iter: int = 40):
    """Invert the altitude relation for the pressure offset.

    Newton iteration on dp with a numeric derivative; returns
    (dp, converged). Divergence leaves the caller holding the last value.
    """
    dp = dp_start
    for _ in range(max_iter):
        resid = atmosphere.geopotential_from_hp(hp_est, dt_offset_est, dp) \
            - big_h_est
        step_scale = 100.0
        resid_up = atmosphere.geopotential_from_hp(hp_est, dt_offset_est,
                                                   dp + step_scale) - big_h_est
        slope = (resid_up - resid) / step_scale
        if slope == 0.0:
            return dp, False
        delta = -resid / slope
        dp += delta
        if abs(delta) < tol_pa:
            return dp, True
    return dp, False


class InertialNavigationSystem:
    """Air-data filter, navigation filter, and the closing extra steps."""

    def __init__(self, specs: dict, magnetic_model, fuel_flow_fn,
                 mass0: float, dt: float = NAV_DT,
                 gnss_every: int = GNSS_EVERY):
        self.air = AirDataFilter(specs["air_data"], dt)
        self.nav = NavigationFilter(specs=specs, magnetic_model=magnetic_model,
                                    dt=dt, gnss_every=gnss_every)
        self.dt = dt
        self._fuel_flow = fuel_flow_fn     # (throttle, hp, dT) -> kg/s
        self.mass_est = mass0
        self._dp_est = 0.0
        self._dp_flag = False
        self._wind_est = np.zeros(3)
        self._wind_initialized = False
        # first-order smoothing of the wind and pressure-offset estimates
        self._lp_alpha = dt / (5.0 + dt)
        self._initialized = False
        self._throttle_prev = 0.0

    @staticmethod
    def _ads_to_filter_order(ads_meas) -> np.ndarray:
        # sensors report (p, T, vtas, aoa, aos); the filter observes
        # (vtas, aoa, aos, T, p)
        p, temp, vtas, aoa, aos = ads_meas
        return np.array([vtas, aoa, aos, temp, p])

    def initialize(self, init_conditions, w_meas, f_meas, ads_meas, gnss_meas):
        self.air.initialize(self._ads_to_filter_order(ads_meas))
        pos_meas, v_meas = gnss_meas
        self.nav.initialize(init_conditions, w_meas, f_meas, pos_meas, v_meas)
        self._initialized = True

    def step(self, t, w_meas, f_meas, b_meas, ads_meas, gnss_meas=None,
             throttle: float = 0.0) -> ObservedState:
        """One 100 Hz navigation cycle from the sensed values only."""
        if not self._initialized:
            raise RuntimeError("navigation must be initialized first")
        # mass propagation uses the previous cycle's estimates
        air_x_prev = self.air.x
        fuel = self._fuel_flow(self._throttle_prev, air_x_prev[4],
                               air_x_prev[3] - T0_STANDARD
                               - BETA_T * air_x_prev[4])
        self.mass_est = max(self.mass_est - self.dt * fuel, 0.0)
        self._throttle_prev = throttle

        air_x = self.air.step(self._ads_to_filter_order(ads_meas))
        self.nav.step(w_meas, f_meas, b_meas, gnss_meas)
        x = self.nav.x

        # extra steps: temperature offset, pressure offset, wind
        dt_offset = air_x[3] - T0_STANDARD - BETA_T * air_x[4]
        big_h = geodesy.geopotential_from_geometric(x[T][2])
        dp, ok = estimate_dp_offset(air_x[4], big_h, dt_offset, self._dp_est)
        if ok:
            self._dp_est += self._lp_alpha * (dp - self._dp_est)
            self._dp_flag = False
        else:
            self._dp_flag = True
        v_tas_b = np.array([
            air_x[0] * math.cos(air_x[2]) * math.cos(air_x[1]),
            air_x[0] * math.sin(air_x[2]),
            air_x[0] * math.cos(air_x[2]) * math.sin(air_x[1]),
        ])
        wind_raw = x[V] - lie.rotate_vector(self.nav.q_nb, v_tas_b)
        if not self._wind_initialized:
            self._wind_est = wind_raw
            self._wind_initialized = True
        else:
            self._wind_est += self._lp_alpha * (wind_raw - self._wind_est)

        return ObservedState(
            t=t, q_nb=self.nav.q_nb.copy(), pos=x[T].copy(), v_n=x[V].copy(),
            w_nb_b=x[W].copy(), f_ib_b=x[F].copy(), e_gyr=x[EG].copy(),
            e_acc=x[EA].copy(), e_mag=x[EM].copy(), b_dev_n=x[BD].copy(),
            vtas=air_x[0], alpha=air_x[1], beta=air_x[2], temp=air_x[3],
            hp=air_x[4], roc=air_x[5], dt_offset=dt_offset,
            dp_offset=self._dp_est, wind_ned=self._wind_est.copy(),
            mass=self.mass_est)
