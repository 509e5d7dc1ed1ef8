"""Weather, wind, turbulence, magnetic field, and model-vs-reality deviations.

Everything stochastic in here is seeded from the flight seed tree; repeated
construction with the same seeds reproduces the same fields bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import lie
from .seeds import make_stream

FT_PER_M = 1.0 / 0.3048
KT_TO_MS = 0.514444

# wind speed at 20 ft driving the low-altitude turbulence intensity
_W20_KT = {"light": 15.0, "moderate": 30.0, "severe": 45.0}
# representative medium/high-altitude intensities, m/s
_SIGMA_HIGH = {"light": 1.5, "moderate": 3.0, "severe": 6.0}

_LOW_ALT_FT = 1000.0
_HIGH_ALT_FT = 2000.0
_LENGTH_HIGH_FT = 1750.0


# ---------------------------------------------------------------------------
# weather and wind fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantWeather:
    """Uniform temperature/pressure offsets, constant in space and time."""
    dt_offset: float = 0.0
    dp_offset: float = 0.0

    def __call__(self, lon: float, lat: float, t: float):
        return self.dt_offset, self.dp_offset


def realize_weather(seed: int, dt_mean: float = 0.0, dt_sigma: float = 0.0,
                    dp_mean: float = 0.0, dp_sigma: float = 0.0) -> ConstantWeather:
    """Draw one constant weather field from its seed stream."""
    rng = make_stream(seed)
    n = rng.standard_normal(2)
    return ConstantWeather(dt_mean + dt_sigma * n[0], dp_mean + dp_sigma * n[1])


def wind_ned_from_bearing(speed: float, bearing: float,
                          path_angle: float = 0.0) -> np.ndarray:
    cg = math.cos(path_angle)
    return np.array([speed * cg * math.cos(bearing),
                     speed * cg * math.sin(bearing),
                     -speed * math.sin(path_angle)])


@dataclass(frozen=True)
class ConstantWind:
    """Uniform low-frequency wind field."""
    v_ned: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __call__(self, lon: float, lat: float, h: float, t: float):
        return self.v_ned

    @property
    def bearing(self) -> float:
        return math.atan2(self.v_ned[1], self.v_ned[0])


def realize_wind(seed: int, speed_mean: float = 0.0, speed_sigma: float = 0.0,
                 bearing_deg: float | None = None) -> ConstantWind:
    """Draw one constant wind field; bearing uniform when not prescribed."""
    rng = make_stream(seed)
    speed = max(0.0, speed_mean + speed_sigma * rng.standard_normal())
    if bearing_deg is None:
        bearing = math.radians(float(rng.integers(-179, 181)))
    else:
        bearing = math.radians(bearing_deg)
    return ConstantWind(wind_ned_from_bearing(speed, bearing))


# ---------------------------------------------------------------------------
# Dryden turbulence
# ---------------------------------------------------------------------------

def dryden_parameters(height_m: float, intensity: str):
    """Scale lengths (m) and intensities (m/s) per axis for a given height.

    Low-altitude (< 1000 ft) and high-altitude (> 2000 ft) regimes with a
    linear blend in between.
    """
    if intensity == "off":
        return np.zeros(3), np.zeros(3)
    h_ft = max(height_m * FT_PER_M, 10.0)
    w20 = _W20_KT[intensity] * KT_TO_MS
    sig_hi = _SIGMA_HIGH[intensity]

    def low(hft):
        denom = (0.177 + 0.000823 * hft)
        lw = hft / FT_PER_M
        lu = hft / denom**1.2 / FT_PER_M
        sw = 0.1 * w20
        su = sw / denom**0.4
        return np.array([lu, lu, lw]), np.array([su, su, sw])

    def high():
        l_hi = _LENGTH_HIGH_FT / FT_PER_M
        return np.full(3, l_hi), np.full(3, sig_hi)

    if h_ft <= _LOW_ALT_FT:
        return low(h_ft)
    if h_ft >= _HIGH_ALT_FT:
        return high()
    w = (h_ft - _LOW_ALT_FT) / (_HIGH_ALT_FT - _LOW_ALT_FT)
    l_lo, s_lo = low(_LOW_ALT_FT)
    l_hi, s_hi = high()
    return (1.0 - w) * l_lo + w * l_hi, (1.0 - w) * s_lo + w * s_hi


class TurbulenceGenerator:
    """Discrete Dryden forming filters run at the truth rate.

    The longitudinal and lateral axes use first-order Gauss-Markov filters;
    the vertical axis a second-order filter with the standard sqrt(3) zero.
    Filter coefficients are gain-scheduled on quantized (height, airspeed)
    so statistics are exactly stationary when the inputs are held fixed.
    The generated sequence lives on the sample-rate grid; queries are by
    time and may repeat or look one sample ahead (frozen field).
    """

    def __init__(self, intensity: str, seed: int, wingspan: float = 2.68,
                 sample_rate: float = 500.0, bearing: float = 0.0):
        if intensity not in ("off", "light", "moderate", "severe"):
            raise ValueError(f"unknown turbulence intensity {intensity!r}")
        self.intensity = intensity
        self.wingspan = wingspan
        self.dt = 1.0 / sample_rate
        self.bearing = bearing
        self._rng = make_stream(seed)
        self._index = -1
        self._value_t = np.zeros(3)
        self._prev_value_t = np.zeros(3)
        # all internal states are unit-variance colored noises so that
        # gain-scheduled coefficient changes never inject energy
        self._xu = 0.0
        self._xv = 0.0
        self._xw1 = 0.0
        self._xw2 = 0.0
        self._coeff_key = None
        self._coeffs = None

    # -- filter design -------------------------------------------------------

    @staticmethod
    def _w_mixing(d: float, sigma_w: float):
        """Output mixing (a, b) for the vertical-axis shape.

        The vertical channel is y = a x1 + b x2 with x1 a unit AR(1) and
        x2 the unit-DC-gain cascade of x1; the mix reproduces the classic
        numerator zero at exp(-dt / (sqrt(3) T)) with stationary variance
        sigma_w^2 exactly.
        """
        z0 = d ** (1.0 / math.sqrt(3.0))
        ratio = (d / z0 - 1.0) / (1.0 - d)
        var_unit = (1.0 + ratio**2 * (1.0 + d * d) / (1.0 + d) ** 2
                    + 2.0 * ratio / (1.0 + d))
        a = sigma_w / math.sqrt(var_unit)
        return a, ratio * a

    def _design(self, height_m: float, airspeed: float):
        key = (round(height_m / 50.0), round(airspeed / 5.0))
        if key == self._coeff_key:
            return
        lengths, sigmas = dryden_parameters(max(height_m, 3.0), self.intensity)
        v = max(airspeed, 1.0)
        dt = self.dt
        tu, tv, tw = lengths / v if self.intensity != "off" else (1.0, 1.0, 1.0)
        au = math.exp(-dt / tu)
        av = math.exp(-dt / tv)
        dw = math.exp(-dt / tw)
        wa, wb = self._w_mixing(dw, sigmas[2])
        self._coeff_key = key
        self._coeffs = (au, sigmas[0], av, sigmas[1], dw, wa, wb)

    def _advance(self):
        au, su, av, sv, dw, wa, wb = self._coeffs
        eta = self._rng.standard_normal(3)
        self._xu = au * self._xu + math.sqrt(1.0 - au * au) * eta[0]
        self._xv = av * self._xv + math.sqrt(1.0 - av * av) * eta[1]
        self._xw1 = dw * self._xw1 + math.sqrt(1.0 - dw * dw) * eta[2]
        self._xw2 = dw * self._xw2 + (1.0 - dw) * self._xw1
        self._prev_value_t = self._value_t
        self._value_t = np.array([su * self._xu, sv * self._xv,
                                  wa * self._xw1 + wb * self._xw2])

    # -- public sampling -----------------------------------------------------

    def sample(self, height_m: float, airspeed: float, t: float) -> np.ndarray:
        """Turbulence velocity in NED at time t (monotone, grid-aligned)."""
        if self.intensity == "off":
            return np.zeros(3)
        if height_m <= 0.0 or airspeed <= 0.0:
            raise ValueError("turbulence requires positive height and airspeed")
        self._design(height_m, airspeed)
        index = int(math.floor(t / self.dt + 1e-9))
        if index < self._index - 1:
            raise ValueError("turbulence may only be sampled forward in time")
        while self._index < index:
            self._advance()
            self._index += 1
        value = self._value_t if index == self._index else self._prev_value_t
        return lie.rotate_vector(lie.quat_r3(self.bearing), value)

    def sample_block(self, height_m: float, airspeed: float, n: int) -> np.ndarray:
        """Generate n consecutive frame-T samples (tests and table export)."""
        from scipy.signal import lfilter

        if self.intensity == "off":
            return np.zeros((n, 3))
        self._design(height_m, airspeed)
        au, su, av, sv, dw, wa, wb = self._coeffs
        eta = self._rng.standard_normal((n, 3))
        u = su * lfilter([math.sqrt(1.0 - au * au)], [1.0, -au], eta[:, 0])
        v = sv * lfilter([math.sqrt(1.0 - av * av)], [1.0, -av], eta[:, 1])
        x1 = lfilter([math.sqrt(1.0 - dw * dw)], [1.0, -dw], eta[:, 2])
        x2 = lfilter([1.0 - dw], [1.0, -dw], x1)
        return np.column_stack([u, v, wa * x1 + wb * x2])


class TabulatedTurbulence:
    """Replay of a precomputed turbulence table (frame T samples)."""

    def __init__(self, path, bearing: float = 0.0):
        with open(path) as fh:
            header = fh.readline().split()
            meta = dict(item.split("=") for item in header)
            self.rate = float(meta["rate"])
            self.seed_id = int(meta.get("seed", 0))
            self.samples = np.loadtxt(fh, ndmin=2)
        if self.samples.shape[1] != 3:
            raise ValueError("turbulence table must have three columns")
        self.bearing = bearing
        self.intensity = "table"

    def sample(self, height_m: float, airspeed: float, t: float) -> np.ndarray:
        idx = min(int(math.floor(t * self.rate + 1e-9)), len(self.samples) - 1)
        return lie.rotate_vector(lie.quat_r3(self.bearing), self.samples[idx])


def write_turbulence_table(path, samples: np.ndarray, rate: float,
                           seed_id: int = 0) -> None:
    with open(path, "w") as fh:
        fh.write(f"rate={rate:g} seed={seed_id}\n")
        np.savetxt(fh, samples, fmt="%.17g")


# ---------------------------------------------------------------------------
# magnetic field model (bilinear interpolation of four corner values)
# ---------------------------------------------------------------------------

class MagneticModel:
    """Earth magnetic field over a four-corner box, NED components in nT."""

    def __init__(self, corners):
        corners = np.asarray(corners, dtype=float)
        if corners.shape != (4, 5):
            raise ValueError("expected 4 corner records of (lon, lat, BN, BE, BD)")
        lons = np.unique(corners[:, 0])
        lats = np.unique(corners[:, 1])
        if len(lons) != 2 or len(lats) != 2:
            raise ValueError("corners must form a lon/lat aligned rectangle")
        self.lon_deg = lons
        self.lat_deg = lats
        self._grid = np.zeros((2, 2, 3))
        for row in corners:
            i = int(np.searchsorted(lons, row[0]))
            j = int(np.searchsorted(lats, row[1]))
            self._grid[i, j] = row[2:]

    @classmethod
    def from_file(cls, path) -> "MagneticModel":
        return cls(np.loadtxt(path, ndmin=2))

    def field_ned(self, lon: float, lat: float) -> np.ndarray:
        lon_deg = math.degrees(lon)
        lat_deg = math.degrees(lat)
        tol = 1e-9
        if not (self.lon_deg[0] - tol <= lon_deg <= self.lon_deg[1] + tol
                and self.lat_deg[0] - tol <= lat_deg <= self.lat_deg[1] + tol):
            raise ValueError(
                f"magnetic query ({lon_deg:.4f}, {lat_deg:.4f}) deg outside "
                f"corner box lon{list(self.lon_deg)} lat{list(self.lat_deg)}")
        u = (lon_deg - self.lon_deg[0]) / (self.lon_deg[1] - self.lon_deg[0])
        v = (lat_deg - self.lat_deg[0]) / (self.lat_deg[1] - self.lat_deg[0])
        return ((1 - u) * (1 - v) * self._grid[0, 0]
                + u * (1 - v) * self._grid[1, 0]
                + (1 - u) * v * self._grid[0, 1]
                + u * v * self._grid[1, 1])


def declination_inclination(b_ned):
    """Angles of the field relative to geodetic north and the horizontal."""
    bn, be, bd = b_ned
    declination = math.atan2(be, bn)
    inclination = math.atan2(bd, math.hypot(bn, be))
    return declination, inclination


# ---------------------------------------------------------------------------
# reality deviations of the gravity and magnetic models
# ---------------------------------------------------------------------------

SIGMA_GRAVITY_INTENSITY = 1.0e-4     # m/s^2
SIGMA_GRAVITY_TILT_DEG = 0.0028      # deg
SIGMA_B_DEV_NT = np.array([138.0, 89.0, 165.0])  # nT per NED axis


@dataclass(frozen=True)
class RealityDeviations:
    """Constant-per-flight difference between onboard models and reality."""
    gravity_intensity: float          # m/s^2, subtracted from model intensity
    gravity_tilt: float               # rad, rotation away from vertical
    gravity_tilt_azimuth: float       # rad, horizontal rotation axis direction
    b_dev_ned: np.ndarray             # nT

    @classmethod
    def zero(cls) -> "RealityDeviations":
        return cls(0.0, 0.0, 0.0, np.zeros(3))


def realize_deviations(seed: int) -> RealityDeviations:
    """Five normal draws (3 magnetic + 2 gravity) plus one discrete uniform."""
    rng = make_stream(seed)
    n = rng.standard_normal(5)
    b_dev = SIGMA_B_DEV_NT * n[:3]
    g_dev = SIGMA_GRAVITY_INTENSITY * n[3]
    gamma_dev = math.radians(SIGMA_GRAVITY_TILT_DEG) * n[4]
    phi_dev = math.radians(float(rng.integers(-179, 181)))
    return RealityDeviations(g_dev, gamma_dev, phi_dev, b_dev)


def apply_gravity_deviation(g_model_ned, dev: RealityDeviations) -> np.ndarray:
    """Shrink the model intensity then rotate about a horizontal axis."""
    axis = np.array([math.cos(dev.gravity_tilt_azimuth),
                     math.sin(dev.gravity_tilt_azimuth), 0.0])
    base = np.array([0.0, 0.0, g_model_ned[2] - dev.gravity_intensity])
    return lie.rotate_vector(lie.exp_so3(axis * dev.gravity_tilt), base)


def apply_magnetic_deviation(b_model_ned, dev: RealityDeviations) -> np.ndarray:
    return np.asarray(b_model_ned, dtype=float) - dev.b_dev_ned
