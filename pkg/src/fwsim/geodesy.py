"""WGS84 ellipsoid, coordinate conversions, gravity, and Earth-rate terms.

Frames: NED components are ordered [north, east, down]; geodetic positions
are ``[lon, lat, h]`` in radians / meters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import lie

# --- ellipsoid and atmosphere constants (full printed precision) -----------
A_SEMIMAJOR = 6378137.0                  # m
FLATTENING = 1.0 / 298.257223563
GM_EARTH = 3986004.418e8                 # m^3/s^2, atmosphere included
C20_BAR = -0.484166774985e-3             # 2nd degree zonal harmonic
OMEGA_EARTH = 7.292115e-5                # rad/s
GAMMA_EQUATOR = 9.7803253359             # m/s^2, theoretical gravity, equator
GAMMA_POLE = 9.8321849378                # m/s^2, theoretical gravity, poles
G0_STANDARD = 9.80665                    # m/s^2, standard free fall
RE_NOMINAL = 6356766.0                   # m, nominal Earth radius
T0_STANDARD = 288.15                     # K
P0_STANDARD = 101325.0                   # Pa
RHO0_STANDARD = 1.225                    # kg/m^3
R_AIR = 287.05287                        # m^2/(K s^2)
BETA_T = -6.5e-3                         # K/m, tropospheric gradient
HP_TROPOPAUSE = 11000.0                  # m
KAPPA_AIR = 1.4

B_SEMIMINOR = A_SEMIMAJOR * (1.0 - FLATTENING)
E2_FIRST = FLATTENING * (2.0 - FLATTENING)            # e^2
G2_SECOND = (A_SEMIMAJOR**2 - B_SEMIMINOR**2) / B_SEMIMINOR**2  # g^2

# Somigliana auxiliary constants
K_SOMIGLIANA = B_SEMIMINOR * GAMMA_POLE / (A_SEMIMAJOR * GAMMA_EQUATOR) - 1.0
M_SOMIGLIANA = OMEGA_EARTH**2 * A_SEMIMAJOR**2 * B_SEMIMINOR / GM_EARTH


@dataclass(frozen=True)
class EllipsoidConstants:
    """Bundle of the model constants, mostly for introspection and tests."""
    a: float = A_SEMIMAJOR
    f: float = FLATTENING
    b: float = B_SEMIMINOR
    e2: float = E2_FIRST
    g2: float = G2_SECOND
    gm: float = GM_EARTH
    c20bar: float = C20_BAR
    omega_e: float = OMEGA_EARTH
    gamma_e: float = GAMMA_EQUATOR
    gamma_p: float = GAMMA_POLE
    g0: float = G0_STANDARD
    re: float = RE_NOMINAL
    beta_t: float = BETA_T
    t0: float = T0_STANDARD
    p0: float = P0_STANDARD
    rho0: float = RHO0_STANDARD
    r_air: float = R_AIR
    kappa: float = KAPPA_AIR
    hp_trop: float = HP_TROPOPAUSE


WGS84 = EllipsoidConstants()


def wrap_longitude(lam: float) -> float:
    """Wrap to (-pi, pi]."""
    lam = math.fmod(lam + math.pi, 2.0 * math.pi)
    if lam <= 0.0:
        lam += 2.0 * math.pi
    return lam - math.pi


def radii_of_curvature(lat: float):
    """Prime-vertical and meridian radii of curvature (N, M) at latitude."""
    s = math.sin(lat)
    c = math.cos(lat)
    n = A_SEMIMAJOR / math.sqrt(1.0 - E2_FIRST * s * s)
    m = n / (1.0 + G2_SECOND * c * c)
    return n, m


def geodetic_to_cartesian(pos) -> np.ndarray:
    lon, lat, h = pos
    n, _ = radii_of_curvature(lat)
    cl = math.cos(lat)
    return np.array([
        (n + h) * cl * math.cos(lon),
        (n + h) * cl * math.sin(lon),
        (n * (1.0 - E2_FIRST) + h) * math.sin(lat),
    ])


def cartesian_to_geodetic(xyz, tol: float = 1e-12, max_iter: int = 10) -> np.ndarray:
    """Newton iteration on latitude with a Bowring starting value."""
    x, y, z = (float(c) for c in xyz)
    lon = math.atan2(y, x)
    p = math.hypot(x, y)
    if p < 1.0 and abs(z) < 1.0:
        raise ValueError("point too close to the Earth center for geodetic conversion")
    # Bowring's parametric-latitude initial guess
    beta = math.atan2(z * A_SEMIMAJOR, p * B_SEMIMINOR)
    eps2 = (A_SEMIMAJOR**2 - B_SEMIMINOR**2) / B_SEMIMINOR**2
    lat = math.atan2(z + eps2 * B_SEMIMINOR * math.sin(beta) ** 3,
                     p - E2_FIRST * A_SEMIMAJOR * math.cos(beta) ** 3)
    for _ in range(max_iter):
        s, c = math.sin(lat), math.cos(lat)
        n = A_SEMIMAJOR / math.sqrt(1.0 - E2_FIRST * s * s)
        # f(lat) = 0 with f = z + e^2 N sin(lat) - p tan(lat)... solved in the
        # equivalent residual form z*c - (p - e^2 N c) * s = 0
        f = z * c - (p * s - E2_FIRST * n * s * c)
        dndlat = A_SEMIMAJOR * E2_FIRST * s * c / (1.0 - E2_FIRST * s * s) ** 1.5
        df = (-z * s - p * c
              + E2_FIRST * (dndlat * s * c + n * (c * c - s * s)))
        step = f / df
        lat -= step
        if abs(step) < tol:
            break
    else:
        raise RuntimeError("geodetic latitude iteration did not converge")
    s, c = math.sin(lat), math.cos(lat)
    n = A_SEMIMAJOR / math.sqrt(1.0 - E2_FIRST * s * s)
    if abs(c) > 0.1:
        h = p / c - n
    else:
        h = z / s - n * (1.0 - E2_FIRST)
    return np.array([lon, lat, h])


def geodetic_to_geocentric(pos) -> np.ndarray:
    """Geodetic [lon, lat, h] to geocentric [colatitude, lon, radius]."""
    lon, lat, h = pos
    n, _ = radii_of_curvature(lat)
    rho = (n + h) * math.cos(lat)
    zz = (n * (1.0 - E2_FIRST) + h) * math.sin(lat)
    return np.array([math.atan2(rho, zz), lon, math.hypot(rho, zz)])


def ned_to_ecef_quat(lon: float, lat: float) -> np.ndarray:
    """q_EN: rotation of the local NED frame with respect to ECEF."""
    return lie.quat_mul(lie.quat_r3(lon), lie.quat_r2(-0.5 * math.pi - lat))


def geopotential_from_geometric(h: float) -> float:
    """Spherical closed form H(h)."""
    return RE_NOMINAL * h / (RE_NOMINAL + h)


def geometric_from_geopotential(big_h: float) -> float:
    return RE_NOMINAL * big_h / (RE_NOMINAL - big_h)


def gravity_ned_model(lat: float, h: float) -> np.ndarray:
    """Somigliana gravity with altitude correction, NED components."""
    s2 = math.sin(lat) ** 2
    g_msl = GAMMA_EQUATOR * (1.0 + K_SOMIGLIANA * s2) / math.sqrt(1.0 - E2_FIRST * s2)
    g = g_msl * (1.0
                 - 2.0 / A_SEMIMAJOR * (1.0 + FLATTENING + M_SOMIGLIANA
                                        - 2.0 * FLATTENING * s2) * h
                 + 3.0 / A_SEMIMAJOR**2 * h * h)
    return np.array([0.0, 0.0, g])


def transport_acceleration_ned(lat: float, h: float) -> np.ndarray:
    """Centripetal acceleration of the Earth-fixed frame, NED components."""
    n, _ = radii_of_curvature(lat)
    w2 = OMEGA_EARTH**2
    s, c = math.sin(lat), math.cos(lat)
    return np.array([w2 * (n + h) * s * c, 0.0, w2 * (n + h) * c * c])


def centrifugal_ned(lat: float, h: float) -> np.ndarray:
    """Centrifugal acceleration (the opposite of the transport term)."""
    return -transport_acceleration_ned(lat, h)


def coriolis_acceleration_ned(lat: float, v_ned) -> np.ndarray:
    we = OMEGA_EARTH
    s, c = math.sin(lat), math.cos(lat)
    vn, ve, vd = v_ned
    return np.array([
        2.0 * we * ve * s,
        2.0 * we * (-vn * s - vd * c),
        2.0 * we * ve * c,
    ])


def jac_coriolis_wrt_v(lat: float) -> np.ndarray:
    """2 [w_IE^N]x, exactly skew-symmetric."""
    we = OMEGA_EARTH
    s, c = math.sin(lat), math.cos(lat)
    return 2.0 * we * np.array([
        [0.0, s, 0.0],
        [-s, 0.0, -c],
        [0.0, c, 0.0],
    ])


def earth_rate_ned(lat: float) -> np.ndarray:
    """w_IE^N."""
    return np.array([OMEGA_EARTH * math.cos(lat), 0.0,
                     -OMEGA_EARTH * math.sin(lat)])


def transport_rate_ned(lat: float, h: float, v_ned) -> np.ndarray:
    """w_EN^N, the angular rate of the local NED frame due to travel."""
    n, m = radii_of_curvature(lat)
    vn, ve, _ = v_ned
    return np.array([
        ve / (n + h),
        -vn / (m + h),
        -ve * math.tan(lat) / (n + h),
    ])


def jac_transport_rate_wrt_v(lat: float, h: float) -> np.ndarray:
    n, m = radii_of_curvature(lat)
    return np.array([
        [0.0, 1.0 / (n + h), 0.0],
        [-1.0 / (m + h), 0.0, 0.0],
        [0.0, -math.tan(lat) / (n + h), 0.0],
    ])


def geodetic_rates(lat: float, h: float, v_ned) -> np.ndarray:
    """Time derivative of [lon, lat, h] given the NED ground velocity."""
    n, m = radii_of_curvature(lat)
    vn, ve, vd = v_ned
    return np.array([
        ve / ((n + h) * math.cos(lat)),
        vn / (m + h),
        -vd,
    ])


def jac_geodetic_rates_wrt_v(lat: float, h: float) -> np.ndarray:
    n, m = radii_of_curvature(lat)
    return np.array([
        [0.0, 1.0 / ((n + h) * math.cos(lat)), 0.0],
        [1.0 / (m + h), 0.0, 0.0],
        [0.0, 0.0, -1.0],
    ])


def egm96_ellipsoidal_gravitation(colat: float, r: float) -> np.ndarray:
    """Two-term gravitational field in the spherical frame [theta, lon, r]."""
    if r <= 0.0:
        raise ValueError("geocentric distance must be positive")
    ar2 = (A_SEMIMAJOR / r) ** 2
    s, c = math.sin(colat), math.cos(colat)
    gm_r2 = GM_EARTH / (r * r)
    return np.array([
        -gm_r2 * ar2 * C20_BAR * 3.0 * math.sqrt(5.0) * s * c,
        0.0,
        -gm_r2 * (1.0 + 3.0 * ar2 * C20_BAR * 0.5 * math.sqrt(5.0)
                  * (3.0 * c * c - 1.0)),
    ])
