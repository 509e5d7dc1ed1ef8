"""Stochastic sensor models: IMU triads, magnetometer, air data, GNSS, camera.

Each sensor owns generators keyed by its seed-tree entry: one "fixed"
stream for airframe-build errors (scale, cross coupling, hard iron,
mounting) and one "run" stream for bias offsets and in-run noise. The draw
order inside each stream is fixed: all construction-time draws first, then
the per-measurement draws in measurement order. With all stochastic
parameters zeroed every sensor is the identity on its truth inputs (up to
deterministic lever-arm and mounting geometry).
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field

import numpy as np

from . import lie
from .geodesy import radii_of_curvature
from .seeds import SeedTree, make_stream

SENSOR_DT = 0.01       # s, 100 Hz
GNSS_DT = 1.0          # s
ION_KNOT_EVERY = 60    # GNSS epochs per ionospheric random-walk knot

# platform (IMU) and camera locations relative to the body frame, full/empty
T_BP_FULL = np.array([0.093, 0.0, 0.105])
T_BP_EMPTY = np.array([0.081, 0.0, 0.106])
T_BC_FULL = np.array([0.293, 0.0, 0.125])
T_BC_EMPTY = np.array([0.281, 0.0, 0.126])
CAMERA_YAW_NOMINAL = math.pi / 2.0

MASS_FULL = 19.715
MASS_EMPTY = 17.835

TIERS = ("uncalibrated", "baseline", "better", "perfect")


def _lever_interp(full, empty, mass):
    m = min(max(mass, MASS_EMPTY), MASS_FULL)
    w = (MASS_FULL - m) / (MASS_FULL - MASS_EMPTY)
    return full + w * (empty - full)


def load_sensor_specs(path, tier: str = "baseline") -> dict:
    """Parse the columnar sensor spec file for one fidelity tier."""
    if tier not in TIERS:
        raise ValueError(f"unknown sensor tier {tier!r}; pick one of {TIERS}")
    col = TIERS.index(tier)
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)
    specs = {}
    for section in parser.sections():
        specs[section] = {key: float(value.split()[col])
                          for key, value in parser[section].items()}
    return specs


def default_sensor_specs(tier: str = "baseline") -> dict:
    import importlib.resources as res

    path = res.files("fwsim.data") / "sensors" / "sensors.ini"
    return load_sensor_specs(path, tier)


# ---------------------------------------------------------------------------
# single-axis error model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SingleAxisErrorParams:
    """Bias offset, bias drift, and white noise of one sensor axis."""
    bias_offset: float
    sigma_u: float
    sigma_v: float
    dt: float = SENSOR_DT
    drift_band_scale: float | None = 100.0   # band = scale * sigma_u * sqrt(dt)

    def __post_init__(self):
        if min(self.bias_offset, self.sigma_u, self.sigma_v) < 0.0:
            raise ValueError("error parameters must be non-negative")


class SingleAxisError:
    """Stepwise sampler of the bias + white-noise error process.

    The bias drift is a random walk hard-clamped to its warm-up band; the
    band can be disabled for textbook ensemble studies.
    """

    def __init__(self, params: SingleAxisErrorParams, rng, n_axes: int = 1):
        self.params = params
        self.rng = rng
        self.n = n_axes
        self.bias0 = params.bias_offset * rng.standard_normal(n_axes)
        self.drift = np.zeros(n_axes)
        self.sqrt_dt = math.sqrt(params.dt)
        if params.drift_band_scale is None:
            self.band = math.inf
        else:
            self.band = params.drift_band_scale * params.sigma_u * self.sqrt_dt

    def step(self):
        """Advance one sample; returns (full_error_no_white, white_noise)."""
        p = self.params
        self.drift = np.clip(
            self.drift + p.sigma_u * self.sqrt_dt * self.rng.standard_normal(self.n),
            -self.band, self.band)
        white = p.sigma_v / self.sqrt_dt * self.rng.standard_normal(self.n)
        return self.bias0 + self.drift, white


def single_axis_error_series(params: SingleAxisErrorParams, seed: int,
                             steps: int) -> np.ndarray:
    """Vectorized error sample path (ensemble studies and tests)."""
    rng = make_stream(seed)
    bias0 = params.bias_offset * rng.standard_normal()
    sqrt_dt = math.sqrt(params.dt)
    incr = params.sigma_u * sqrt_dt * rng.standard_normal(steps)
    drift = np.cumsum(incr)
    if params.drift_band_scale is not None:
        band = params.drift_band_scale * params.sigma_u * sqrt_dt
        # sequential clamp has no closed vector form; do it in one pass
        run = 0.0
        for i in range(steps):
            run = min(max(run + incr[i], -band), band)
            drift[i] = run
    white = params.sigma_v / sqrt_dt * rng.standard_normal(steps)
    return bias0 + drift + white


# ---------------------------------------------------------------------------
# IMU (accelerometer + gyroscope triads with mounting)
# ---------------------------------------------------------------------------

@dataclass
class Mounting:
    """True and estimated pose of the IMU platform relative to the body."""
    q_bp: np.ndarray
    q_bp_est: np.ndarray
    t_bp_offset_est: np.ndarray   # additive estimation error on the lever

    def t_bp(self, mass: float) -> np.ndarray:
        return _lever_interp(T_BP_FULL, T_BP_EMPTY, mass)

    def t_bp_est(self, mass_est: float) -> np.ndarray:
        return self.t_bp(mass_est) + self.t_bp_offset_est


def realize_mounting(specs_mounting: dict, seed: int) -> Mounting:
    rng = make_stream(seed)
    angles = np.array([specs_mounting["platform_yaw_sigma"],
                       specs_mounting["platform_pitch_sigma"],
                       specs_mounting["platform_bank_sigma"]])
    phi_bp = angles * rng.standard_normal(3)
    t_err = specs_mounting["platform_pos_est_sigma"] * rng.standard_normal(3)
    phi_err = specs_mounting["platform_att_est_sigma"] * rng.standard_normal(3)
    phi_bp_est = phi_bp + phi_err
    return Mounting(q_bp=lie.euler_to_quat(*phi_bp),
                    q_bp_est=lie.euler_to_quat(*phi_bp_est),
                    t_bp_offset_est=t_err)


def _scale_cross_lower(rng, s_sigma, m_sigma) -> np.ndarray:
    """Lower-triangular scale/cross matrix (accelerometer pattern)."""
    m = np.eye(3)
    m[0, 0], m[1, 1], m[2, 2] = 1.0 + s_sigma * rng.standard_normal(3)
    m[1, 0], m[2, 0], m[2, 1] = m_sigma * rng.standard_normal(3)
    return m


def _scale_cross_full(rng, s_sigma, m_sigma) -> np.ndarray:
    """Full scale/cross matrix (gyroscope pattern), row-major off-diagonals."""
    m = np.eye(3)
    m[0, 0], m[1, 1], m[2, 2] = 1.0 + s_sigma * rng.standard_normal(3)
    off = m_sigma * rng.standard_normal(6)
    m[0, 1], m[0, 2], m[1, 0], m[1, 2], m[2, 0], m[2, 1] = off
    return m


class ImuModel:
    """Strapdown accelerometer and gyroscope triads.

    The gyroscope is measured first in every cycle; the accelerometer's
    lever-arm correction uses the gyroscope measurement and its first
    difference in place of the unknown true rates.
    """

    def __init__(self, acc_spec: dict, gyr_spec: dict, mounting: Mounting,
                 acc_fixed_seed: int, gyr_fixed_seed: int,
                 acc_run_seed: int, gyr_run_seed: int, dt: float = SENSOR_DT):
        rng_acc_fixed = make_stream(acc_fixed_seed)
        rng_gyr_fixed = make_stream(gyr_fixed_seed)
        self.m_acc = _scale_cross_lower(rng_acc_fixed,
                                        acc_spec["scale_factor"],
                                        acc_spec["cross_coupling"])
        self.m_gyr = _scale_cross_full(rng_gyr_fixed,
                                       gyr_spec["scale_factor"],
                                       gyr_spec["cross_coupling"])
        self.mounting = mounting
        self.dt = dt
        self._acc_err = SingleAxisError(
            SingleAxisErrorParams(acc_spec["bias_offset"],
                                  acc_spec["bias_drift"],
                                  acc_spec["white_noise"], dt),
            make_stream(acc_run_seed), n_axes=3)
        self._gyr_err = SingleAxisError(
            SingleAxisErrorParams(gyr_spec["bias_offset"],
                                  gyr_spec["bias_drift"],
                                  gyr_spec["white_noise"], dt),
            make_stream(gyr_run_seed), n_axes=3)
        self._w_meas_prev: np.ndarray | None = None
        self.last_full_error_acc = np.zeros(3)
        self.last_full_error_gyr = np.zeros(3)

    def measure(self, f_ib_b, w_ib_b, alpha_ib_b, mass: float,
                mass_est: float | None = None):
        """(f_meas, w_meas) for one 100 Hz cycle from truth inputs."""
        q_bp = self.mounting.q_bp
        q_bp_est = self.mounting.q_bp_est

        gyr_bias, gyr_white = self._gyr_err.step()
        w_p = lie.rotate_vector_inverse(q_bp, w_ib_b)
        w_meas = (lie.rotate_vector(q_bp_est, self.m_gyr @ w_p)
                  + gyr_bias + gyr_white)
        self.last_full_error_gyr = w_meas - w_ib_b - gyr_white

        if self._w_meas_prev is None:
            alpha_meas = np.zeros(3)
        else:
            alpha_meas = (w_meas - self._w_meas_prev) / self.dt
        self._w_meas_prev = w_meas

        acc_bias, acc_white = self._acc_err.step()
        t_bp = self.mounting.t_bp(mass)
        t_bp_est = self.mounting.t_bp_est(mass if mass_est is None else mass_est)
        f_at_p = (f_ib_b + np.cross(alpha_ib_b, t_bp)
                  + np.cross(w_ib_b, np.cross(w_ib_b, t_bp)))
        f_p = lie.rotate_vector_inverse(q_bp, f_at_p)
        f_meas = (lie.rotate_vector(q_bp_est, self.m_acc @ f_p)
                  - np.cross(alpha_meas, t_bp_est)
                  - np.cross(w_meas, np.cross(w_meas, t_bp_est))
                  + acc_bias + acc_white)
        self.last_full_error_acc = f_meas - f_ib_b - acc_white
        return f_meas, w_meas


class MagnetometerModel:
    """Triaxial magnetometer with hard iron, bias, scale/cross, white noise."""

    def __init__(self, spec: dict, fixed_seed: int, run_seed: int,
                 dt: float = SENSOR_DT):
        rng_fixed = make_stream(fixed_seed)
        self.hard_iron = spec["hard_iron"] * rng_fixed.standard_normal(3)
        m = np.empty((3, 3))
        s, x = spec["scale_factor"], spec["cross_coupling"]
        draws = rng_fixed.standard_normal(9).reshape(3, 3)
        for i in range(3):
            for j in range(3):
                m[i, j] = (1.0 + s * draws[i, j]) if i == j else x * draws[i, j]
        self.m_mag = m
        rng_run = make_stream(run_seed)
        self.bias0 = spec["bias_offset"] * rng_run.standard_normal(3)
        self._rng = rng_run
        self._sigma_v = spec["white_noise"]
        self._sqrt_dt = math.sqrt(dt)
        self.last_full_error = np.zeros(3)

    def measure(self, b_real_n, q_nb):
        b_b = lie.rotate_vector_inverse(q_nb, b_real_n)
        white = self._sigma_v / self._sqrt_dt * self._rng.standard_normal(3)
        meas = self.hard_iron + self.bias0 + self.m_mag @ b_b + white
        self.last_full_error = meas - b_b - white
        return meas


class AirDataModel:
    """Static pressure, temperature, airspeed, and flow-angle channels."""

    _CHANNELS = ("pressure", "temperature", "airspeed", "aoa", "aos")
    _KEYS = {"pressure": ("pressure_bias", "pressure_noise"),
             "temperature": ("temperature_bias", "temperature_noise"),
             "airspeed": ("airspeed_bias", "airspeed_noise"),
             "aoa": ("aoa_bias", "aoa_noise"),
             "aos": ("aos_bias", "aos_noise")}

    def __init__(self, spec: dict, run_seeds: dict):
        self._sigma = {}
        self._bias = {}
        self._rng = {}
        for name in self._CHANNELS:
            bias_key, noise_key = self._KEYS[name]
            rng = make_stream(run_seeds[name])
            self._bias[name] = spec[bias_key] * rng.standard_normal()
            self._sigma[name] = spec[noise_key]
            self._rng[name] = rng

    def _one(self, name, truth):
        return truth + self._bias[name] + self._sigma[name] * \
            self._rng[name].standard_normal()

    def measure(self, p, temp, vtas, alpha, beta):
        return (self._one("pressure", p), self._one("temperature", temp),
                self._one("airspeed", vtas), self._one("aoa", alpha),
                self._one("aos", beta))


class GnssModel:
    """1 Hz position/velocity receiver with a slow ionospheric walk.

    The ionospheric error is a bias plus random walk realized on 60 s knots
    and interpolated linearly in between; position white noise uses the
    horizontal sigma on the north/east axes and the vertical sigma on down.
    """

    def __init__(self, spec: dict, run_seed: int,
                 ionosphere: bool = True):
        rng = make_stream(run_seed)
        self._rng = rng
        self.sigma_hor = spec["horizontal_sigma"]
        self.sigma_ver = spec["vertical_sigma"]
        self.sigma_vel = spec["velocity_sigma"]
        self.sigma_ion = spec["iono_walk_sigma"]
        self.ionosphere = ionosphere
        bias0 = spec["iono_bias"] * rng.standard_normal(3)
        self._knots = [bias0]
        self.epoch = 0

    def _ensure_knots(self, upto: int):
        while len(self._knots) <= upto:
            self._knots.append(self._knots[-1]
                               + self.sigma_ion * self._rng.standard_normal(3))

    def measure(self, pos_gdt, v_n):
        """One epoch; returns (pos_meas [lon, lat, h], v_meas NED)."""
        g = self.epoch
        self.epoch += 1
        i, r = divmod(g, ION_KNOT_EVERY)
        if self.ionosphere:
            self._ensure_knots(i + 1)
            e_ion = self._knots[i] + (r / ION_KNOT_EVERY) * (
                self._knots[i + 1] - self._knots[i])
        else:
            e_ion = np.zeros(3)
        e_ned = np.array([self.sigma_hor, self.sigma_hor, self.sigma_ver]) \
            * self._rng.standard_normal(3) + e_ion
        lon, lat, h = pos_gdt
        n_rad, m_rad = radii_of_curvature(lat)
        pos_meas = np.array([
            lon + e_ned[1] / ((n_rad + h) * math.cos(lat)),
            lat + e_ned[0] / (m_rad + h),
            h - e_ned[2],
        ])
        v_meas = np.asarray(v_n, dtype=float) \
            + self.sigma_vel * self._rng.standard_normal(3)
        return pos_meas, v_meas


# ---------------------------------------------------------------------------
# camera pose chain and pinhole projection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CameraParams:
    focal_mm: float = 19.0
    width_px: int = 768
    height_px: int = 1024
    pixel_mm: float = 17e-3
    center_px: tuple = (384.5, 511.5)

    @property
    def fov_h(self) -> float:
        return 2.0 * math.atan(self.width_px * self.pixel_mm
                               / (2.0 * self.focal_mm))

    @property
    def fov_v(self) -> float:
        return 2.0 * math.atan(self.height_px * self.pixel_mm
                               / (2.0 * self.focal_mm))


class CameraModel:
    """Downward camera: mounting chain and perspective projection map."""

    def __init__(self, params: CameraParams, specs_mounting: dict,
                 fixed_seed: int):
        rng = make_stream(fixed_seed)
        sig = np.array([specs_mounting["camera_yaw_sigma"],
                        specs_mounting["camera_pitch_sigma"],
                        specs_mounting["camera_bank_sigma"]])
        angles = sig * rng.standard_normal(3)
        angles[0] += CAMERA_YAW_NOMINAL
        self.q_bc = lie.euler_to_quat(*angles)
        t_err = specs_mounting["camera_pos_est_sigma"] * rng.standard_normal(3)
        a_err = specs_mounting["camera_att_est_sigma"] * rng.standard_normal(3)
        self.q_bc_est = lie.euler_to_quat(angles[0] + a_err[0],
                                          angles[1] + a_err[1],
                                          angles[2] + a_err[2])
        self.t_bc_offset_est = t_err
        self.params = params

    def t_bc(self, mass: float) -> np.ndarray:
        return _lever_interp(T_BC_FULL, T_BC_EMPTY, mass)

    def pose_ecef(self, pos_gdt, q_nb, mass: float) -> np.ndarray:
        """Camera pose with respect to ECEF as a unit dual quaternion."""
        from .geodesy import geodetic_to_cartesian, ned_to_ecef_quat

        zeta_en = lie.dq_from_quat_trans(
            ned_to_ecef_quat(pos_gdt[0], pos_gdt[1]),
            geodetic_to_cartesian(pos_gdt))
        zeta_nb = lie.dq_from_quat_trans(q_nb, np.zeros(3))
        zeta_bc = lie.dq_from_quat_trans(self.q_bc, self.t_bc(mass))
        return lie.dq_mul(lie.dq_mul(zeta_en, zeta_nb), zeta_bc)

    def project(self, p_cam) -> np.ndarray:
        """Perspective projection of a camera-frame point to pixels."""
        if p_cam[2] <= 0.0:
            raise ValueError("point behind the camera focal plane")
        k = self.params.focal_mm / self.params.pixel_mm
        return np.array([
            k * p_cam[0] / p_cam[2] + self.params.center_px[0],
            k * p_cam[1] / p_cam[2] + self.params.center_px[1],
        ])

    def unproject(self, p_img, depth: float) -> np.ndarray:
        k = self.params.pixel_mm / self.params.focal_mm
        return np.array([
            depth * k * (p_img[0] - self.params.center_px[0]),
            depth * k * (p_img[1] - self.params.center_px[1]),
            depth,
        ])


# ---------------------------------------------------------------------------
# full suite
# ---------------------------------------------------------------------------

class SensorSuite:
    """All onboard sensors of one flight, realized from the seed tree."""

    def __init__(self, specs: dict, tree: SeedTree, ionosphere: bool = True,
                 dt: float = SENSOR_DT):
        self.specs = specs
        self.mounting = realize_mounting(specs["mounting"], tree.fixed["platform"])
        self.imu = ImuModel(specs["accelerometer"], specs["gyroscope"],
                            self.mounting,
                            acc_fixed_seed=tree.fixed["acc_fixed"],
                            gyr_fixed_seed=tree.fixed["gyr_fixed"],
                            acc_run_seed=tree.run["acc"],
                            gyr_run_seed=tree.run["gyr"], dt=dt)
        self.magnetometer = MagnetometerModel(specs["magnetometer"],
                                              fixed_seed=tree.fixed["mag_fixed"],
                                              run_seed=tree.run["mag"], dt=dt)
        self.air_data = AirDataModel(specs["air_data"],
                                     run_seeds={"pressure": tree.run["osp"],
                                                "temperature": tree.run["oat"],
                                                "airspeed": tree.run["tas"],
                                                "aoa": tree.run["aoa"],
                                                "aos": tree.run["aos"]})
        self.gnss = GnssModel(specs["gnss"], run_seed=tree.run["gnss"],
                              ionosphere=ionosphere)
        self.camera = CameraModel(CameraParams(), specs["mounting"],
                                  fixed_seed=tree.fixed["camera"])
