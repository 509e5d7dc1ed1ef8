"""Compiled fast path for the 500 Hz truth integrator.

This module mirrors the reference equations of motion in ``dynamics`` with
numba-compiled scalar kernels; an equivalence test pins both paths together.
Only the hot loop lives here, so everything is plain float64 arrays.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from . import geodesy
from .airframe import (INERTIA_EMPTY, INERTIA_FULL, MASS_EMPTY, MASS_FULL,
                       POWER_MAX, PSFC, T_RB_EMPTY, T_RB_FULL, WING_AREA,
                       WING_CHORD, WING_SPAN)

# geodesy / atmosphere constants frozen into the compiled code
_A = geodesy.A_SEMIMAJOR
_E2 = geodesy.E2_FIRST
_G2 = geodesy.G2_SECOND
_B = geodesy.B_SEMIMINOR
_WE = geodesy.OMEGA_EARTH
_GAMMA_E = geodesy.GAMMA_EQUATOR
_K_SOM = geodesy.K_SOMIGLIANA
_M_SOM = geodesy.M_SOMIGLIANA
_F = geodesy.FLATTENING
_RE = geodesy.RE_NOMINAL
_T0 = geodesy.T0_STANDARD
_P0 = geodesy.P0_STANDARD
_RAIR = geodesy.R_AIR
_BETA = geodesy.BETA_T
_G0 = geodesy.G0_STANDARD
_GRB = -_G0 / (_RAIR * _BETA)
_DEG = math.pi / 180.0

# scalar-pack indices for the context vector
S_WEATHER_DT = 0
S_WEATHER_DP = 1
S_PROP_J0 = 2
S_PROP_DJ = 3
S_PROP_N = 4
S_PROP_DIAM = 5
S_EARTH = 6
S_GRAVITY = 7
S_TERRAIN = 8
S_GRAV_DEV = 9
N_SCALARS = 10

AUX_SIZE = 35


@njit(cache=True, inline="always")
def _quat_mul(q1, q2, out):
    w1, x1, y1, z1 = q1[0], q1[1], q1[2], q1[3]
    w2, x2, y2, z2 = q2[0], q2[1], q2[2], q2[3]
    out[0] = w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2
    out[1] = w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2
    out[2] = w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2
    out[3] = w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2


@njit(cache=True, inline="always")
def _rotate(q, v, out):
    w, x, y, z = q[0], q[1], q[2], q[3]
    v0, v1, v2 = v[0], v[1], v[2]
    t0 = 2.0 * (y * v2 - z * v1)
    t1 = 2.0 * (z * v0 - x * v2)
    t2 = 2.0 * (x * v1 - y * v0)
    out[0] = v0 + w * t0 + y * t2 - z * t1
    out[1] = v1 + w * t1 + z * t0 - x * t2
    out[2] = v2 + w * t2 + x * t1 - y * t0


@njit(cache=True, inline="always")
def _rotate_inv(q, v, out):
    w, x, y, z = q[0], -q[1], -q[2], -q[3]
    v0, v1, v2 = v[0], v[1], v[2]
    t0 = 2.0 * (y * v2 - z * v1)
    t1 = 2.0 * (z * v0 - x * v2)
    t2 = 2.0 * (x * v1 - y * v0)
    out[0] = v0 + w * t0 + y * t2 - z * t1
    out[1] = v1 + w * t1 + z * t0 - x * t2
    out[2] = v2 + w * t2 + x * t1 - y * t0


@njit(cache=True)
def _exp_so3(r, out):
    angle = math.sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2])
    if angle < 1e-8:
        k = 0.5 - angle * angle / 48.0
        out[0] = 1.0 - angle * angle / 8.0
        out[1] = k * r[0]
        out[2] = k * r[1]
        out[3] = k * r[2]
        n = math.sqrt(out[0]**2 + out[1]**2 + out[2]**2 + out[3]**2)
        for i in range(4):
            out[i] /= n
    else:
        half = 0.5 * angle
        k = math.sin(half) / angle
        out[0] = math.cos(half)
        out[1] = k * r[0]
        out[2] = k * r[1]
        out[3] = k * r[2]


@njit(cache=True)
def _exp_se3(tau, out):
    """SE(3) exponential to a unit dual quaternion, tau = [rho, theta]."""
    theta0, theta1, theta2 = tau[3], tau[4], tau[5]
    angle2 = theta0**2 + theta1**2 + theta2**2
    angle = math.sqrt(angle2)
    q = out[:4]
    _exp_so3(tau[3:], q)
    # left Jacobian times rho
    if angle < 1e-8:
        a = 0.5 - angle2 / 24.0
        b = 1.0 / 6.0 - angle2 / 120.0
    else:
        a = (1.0 - math.cos(angle)) / angle2
        b = (angle - math.sin(angle)) / (angle2 * angle)
    r0, r1, r2 = tau[0], tau[1], tau[2]
    c0 = theta1 * r2 - theta2 * r1
    c1 = theta2 * r0 - theta0 * r2
    c2 = theta0 * r1 - theta1 * r0
    d0 = theta1 * c2 - theta2 * c1
    d1 = theta2 * c0 - theta0 * c2
    d2 = theta0 * c1 - theta1 * c0
    t0 = r0 + a * c0 + b * d0
    t1 = r1 + a * c1 + b * d1
    t2 = r2 + a * c2 + b * d2
    # dual part = 0.5 * (0, t) * q
    out[4] = 0.5 * (-t0 * q[1] - t1 * q[2] - t2 * q[3])
    out[5] = 0.5 * (t0 * q[0] + t1 * q[3] - t2 * q[2])
    out[6] = 0.5 * (t1 * q[0] + t2 * q[1] - t0 * q[3])
    out[7] = 0.5 * (t2 * q[0] + t0 * q[2] - t1 * q[1])


@njit(cache=True)
def _dq_mul(z1, z2, out):
    _quat_mul(z1[:4], z2[:4], out[:4])
    tmp1 = np.empty(4)
    tmp2 = np.empty(4)
    _quat_mul(z1[:4], z2[4:], tmp1)
    _quat_mul(z1[4:], z2[:4], tmp2)
    for i in range(4):
        out[4 + i] = tmp1[i] + tmp2[i]


@njit(cache=True)
def _dq_normalize(z):
    n = math.sqrt(z[0]**2 + z[1]**2 + z[2]**2 + z[3]**2)
    for i in range(8):
        z[i] /= n
    dot = (z[0] * z[4] + z[1] * z[5] + z[2] * z[6] + z[3] * z[7])
    for i in range(4):
        z[4 + i] -= dot * z[i]


@njit(cache=True)
def _dq_to_quat_trans(z, q, t):
    for i in range(4):
        q[i] = z[i]
    # t = 2 * (dual x conj(real)), vector part
    dw, dx, dy, dz = z[4], z[5], z[6], z[7]
    t[0] = 2.0 * (-dw * q[1] + dx * q[0] - dy * q[3] + dz * q[2])
    t[1] = 2.0 * (-dw * q[2] + dy * q[0] - dz * q[1] + dx * q[3])
    t[2] = 2.0 * (-dw * q[3] + dz * q[0] - dx * q[2] + dy * q[1])


@njit(cache=True)
def _cartesian_to_geodetic(x, y, z, out):
    lon = math.atan2(y, x)
    p = math.hypot(x, y)
    beta = math.atan2(z * _A, p * _B)
    eps2 = (_A * _A - _B * _B) / (_B * _B)
    lat = math.atan2(z + eps2 * _B * math.sin(beta)**3,
                     p - _E2 * _A * math.cos(beta)**3)
    for _ in range(10):
        s = math.sin(lat)
        c = math.cos(lat)
        n = _A / math.sqrt(1.0 - _E2 * s * s)
        f = z * c - (p * s - _E2 * n * s * c)
        dndlat = _A * _E2 * s * c / (1.0 - _E2 * s * s)**1.5
        df = -z * s - p * c + _E2 * (dndlat * s * c + n * (c * c - s * s))
        step = f / df
        lat -= step
        if abs(step) < 1e-12:
            break
    s = math.sin(lat)
    c = math.cos(lat)
    n = _A / math.sqrt(1.0 - _E2 * s * s)
    if abs(c) > 0.1:
        h = p / c - n
    else:
        h = z / s - n * (1.0 - _E2)
    out[0] = lon
    out[1] = lat
    out[2] = h


@njit(cache=True)
def _interp1(start, step, count, values, x):
    """Scalar biparabolic interpolation along one equispaced axis."""
    u = (x - start) / step
    if u < 0.0:
        u = 0.0
    elif u > count - 1:
        u = float(count - 1)
    cell = int(u)
    if cell > count - 2:
        cell = count - 2
    s = u - cell
    if count == 2:
        return values[0] * (1.0 - s) + values[1] * s
    if cell == 0:
        return (values[0] * (s - 1.0) * (s - 2.0) / 2.0
                + values[1] * s * (2.0 - s)
                + values[2] * s * (s - 1.0) / 2.0)
    if cell == count - 2:
        ss = s + 1.0
        return (values[count - 3] * (ss - 1.0) * (ss - 2.0) / 2.0
                + values[count - 2] * ss * (2.0 - ss)
                + values[count - 1] * ss * (ss - 1.0) / 2.0)
    w0 = (1.0 - s) * s * (s - 1.0) / 2.0
    w1 = (1.0 - s) * (1.0 - s * s) + s * (s - 1.0) * (s - 2.0) / 2.0
    w2 = (1.0 - s) * s * (s + 1.0) / 2.0 + s * s * (2.0 - s)
    w3 = s * s * (s - 1.0) / 2.0
    return (values[cell - 1] * w0 + values[cell] * w1 + values[cell + 1] * w2
            + values[cell + 2] * w3)


@njit(cache=True)
def _axis_weights_fast(start, step, count, x, weights):
    """Stencil start and up-to-4 weights; returns (i0, nw, clamped)."""
    u = (x - start) / step
    clamped = False
    if u < 0.0:
        u = 0.0
        clamped = True
    elif u > count - 1:
        u = float(count - 1)
        clamped = True
    cell = int(u)
    if cell > count - 2:
        cell = count - 2
    s = u - cell
    if count == 2:
        weights[0] = 1.0 - s
        weights[1] = s
        return 0, 2, clamped
    if cell == 0:
        weights[0] = (s - 1.0) * (s - 2.0) / 2.0
        weights[1] = s * (2.0 - s)
        weights[2] = s * (s - 1.0) / 2.0
        return 0, 3, clamped
    if cell == count - 2:
        ss = s + 1.0
        weights[0] = (ss - 1.0) * (ss - 2.0) / 2.0
        weights[1] = ss * (2.0 - ss)
        weights[2] = ss * (ss - 1.0) / 2.0
        return count - 3, 3, clamped
    weights[0] = (1.0 - s) * s * (s - 1.0) / 2.0
    weights[1] = (1.0 - s) * (1.0 - s * s) + s * (s - 1.0) * (s - 2.0) / 2.0
    weights[2] = (1.0 - s) * s * (s + 1.0) / 2.0 + s * s * (2.0 - s)
    weights[3] = s * s * (s - 1.0) / 2.0
    return cell - 1, 4, clamped


@njit(cache=True)
def _eval_tables(values, meta, x0, x1, x2, out):
    """Evaluate all stacked tables at one point; returns the clamp flag."""
    w0 = np.empty(4)
    w1 = np.empty(4)
    w2 = np.empty(4)
    i0, n0, c0 = _axis_weights_fast(meta[0], meta[3], int(meta[6]), x0, w0)
    i1, n1, c1 = _axis_weights_fast(meta[1], meta[4], int(meta[7]), x1, w1)
    i2, n2, c2 = _axis_weights_fast(meta[2], meta[5], int(meta[8]), x2, w2)
    ntab = values.shape[0]
    for m in range(ntab):
        acc = 0.0
        for a in range(n0):
            wa = w0[a]
            for b in range(n1):
                wab = wa * w1[b]
                for c in range(n2):
                    acc += wab * w2[c] * values[m, i0 + a, i1 + b, i2 + c]
        out[m] = acc
    return c0 or c1 or c2


@njit(cache=True)
def _eom_eval(pos, v_b, q_nb, w_ib_b, mass, ctrl,
              lon_values, lon_meta, lat_values, lat_meta,
              prop_ct, prop_cp, scalars, wind_ned, grav_rot, turb,
              deriv_out, aux_out):
    """One equations-of-motion evaluation.

    deriv_out: [pos_dot(3), v_b_dot(3), w_ib_dot(3), w_nb_b(3), w_eb_dot(3),
                mass_dot]
    """
    lon = pos[0]
    lat = pos[1]
    h = pos[2]
    sin_lat = math.sin(lat)
    cos_lat = math.cos(lat)

    v_n = np.empty(3)
    _rotate(q_nb, v_b, v_n)

    # atmosphere at the geopotential altitude of the current position
    big_h = _RE * h / (_RE + h)
    dt_off = scalars[S_WEATHER_DT]
    dp_off = scalars[S_WEATHER_DP]
    hp_msl = _T0 / _BETA * (((_P0 + dp_off) / _P0)**(1.0 / _GRB) - 1.0)
    t_isa_msl = _T0 + _BETA * hp_msl
    hp = big_h
    for _ in range(50):
        t_here = _T0 + dt_off + _BETA * hp
        t_isa = _T0 + _BETA * hp
        resid = hp - hp_msl - big_h
        if dt_off != 0.0:
            resid += dt_off / _BETA * math.log((_T0 + _BETA * hp) / t_isa_msl)
        step = resid / (t_here / t_isa)
        hp -= step
        if abs(step) < 1e-9:
            break
    p = _P0 * (1.0 + _BETA / _T0 * hp)**_GRB
    temp = _T0 + dt_off + _BETA * hp
    rho = p / (_RAIR * temp)
    delta = p / _P0
    theta = temp / _T0

    # air velocity
    wind_total = np.empty(3)
    for i in range(3):
        wind_total[i] = wind_ned[i] + turb[i]
    wind_b = np.empty(3)
    _rotate_inv(q_nb, wind_total, wind_b)
    vt0 = v_b[0] - wind_b[0]
    vt1 = v_b[1] - wind_b[1]
    vt2 = v_b[2] - wind_b[2]
    vtas = math.sqrt(vt0 * vt0 + vt1 * vt1 + vt2 * vt2)
    alpha = math.atan2(vt2, vt0)
    sb = vt1 / vtas
    if sb > 1.0:
        sb = 1.0
    elif sb < -1.0:
        sb = -1.0
    beta = math.asin(sb)

    # earth rates and curvature
    n_rad = _A / math.sqrt(1.0 - _E2 * sin_lat * sin_lat)
    m_rad = n_rad / (1.0 + _G2 * cos_lat * cos_lat)
    earth_on = scalars[S_EARTH] > 0.5
    w_ie_n = np.zeros(3)
    a_cor = np.zeros(3)
    if earth_on:
        w_ie_n[0] = _WE * cos_lat
        w_ie_n[2] = -_WE * sin_lat
        a_cor[0] = 2.0 * _WE * v_n[1] * sin_lat
        a_cor[1] = 2.0 * _WE * (-v_n[0] * sin_lat - v_n[2] * cos_lat)
        a_cor[2] = 2.0 * _WE * v_n[1] * cos_lat
    w_en_n = np.empty(3)
    w_en_n[0] = v_n[1] / (n_rad + h)
    w_en_n[1] = -v_n[0] / (m_rad + h)
    w_en_n[2] = -v_n[1] * math.tan(lat) / (n_rad + h)

    tmp_n = np.empty(3)
    for i in range(3):
        tmp_n[i] = w_ie_n[i] + w_en_n[i]
    w_in_b = np.empty(3)
    _rotate_inv(q_nb, tmp_n, w_in_b)
    w_nb_b = np.empty(3)
    for i in range(3):
        w_nb_b[i] = w_ib_b[i] - w_in_b[i]
    w_ie_b = np.empty(3)
    _rotate_inv(q_nb, w_ie_n, w_ie_b)
    w_eb_b = np.empty(3)
    for i in range(3):
        w_eb_b[i] = w_ib_b[i] - w_ie_b[i]

    # aerodynamic coefficients
    alpha_deg = alpha / _DEG
    beta_deg = beta / _DEG
    p_nd = w_nb_b[0] * WING_SPAN / (2.0 * vtas)
    q_nd = w_nb_b[1] * WING_CHORD / (2.0 * vtas)
    r_nd = w_nb_b[2] * WING_SPAN / (2.0 * vtas)
    lon_c = np.empty(18)
    lat_c = np.empty(18)
    cl1 = _eval_tables(lon_values, lon_meta, alpha_deg, beta_deg, ctrl[1],
                       lon_c)
    cl2 = _eval_tables(lat_values, lat_meta, beta_deg, ctrl[2], ctrl[3],
                       lat_c)
    clamped = cl1 or cl2
    cfx = (lon_c[0] + lon_c[1] * ctrl[2] + lon_c[2] * ctrl[3]
           + lon_c[3] * p_nd + lon_c[4] * q_nd + lon_c[5] * r_nd)
    cfz = (lon_c[6] + lon_c[7] * ctrl[2] + lon_c[8] * ctrl[3]
           + lon_c[9] * p_nd + lon_c[10] * q_nd + lon_c[11] * r_nd)
    cmm = (lon_c[12] + lon_c[13] * ctrl[2] + lon_c[14] * ctrl[3]
           + lon_c[15] * p_nd + lon_c[16] * q_nd + lon_c[17] * r_nd)
    da5 = alpha_deg - 5.0
    cfy = (lat_c[0] + lat_c[1] * da5 + lat_c[2] * ctrl[1]
           + lat_c[3] * p_nd + lat_c[4] * q_nd + lat_c[5] * r_nd)
    cml = (lat_c[6] + lat_c[7] * da5 + lat_c[8] * ctrl[1]
           + lat_c[9] * p_nd + lat_c[10] * q_nd + lat_c[11] * r_nd)
    cmn = (lat_c[12] + lat_c[13] * da5 + lat_c[14] * ctrl[1]
           + lat_c[15] * p_nd + lat_c[16] * q_nd + lat_c[17] * r_nd)

    qbar_s = 0.5 * rho * WING_AREA * vtas * vtas
    f_aer = np.empty(3)
    f_aer[0] = qbar_s * cfx
    f_aer[1] = qbar_s * cfy
    f_aer[2] = qbar_s * cfz
    m_aer = np.empty(3)
    m_aer[0] = qbar_s * WING_SPAN * cml
    m_aer[1] = qbar_s * WING_CHORD * cmm
    m_aer[2] = qbar_s * WING_SPAN * cmn

    # center-of-mass shift correction: m += f x lever, lever = (dx, 0, dz)
    mass_c = mass
    if mass_c < MASS_EMPTY:
        mass_c = MASS_EMPTY
    elif mass_c > MASS_FULL:
        mass_c = MASS_FULL
    wfrac = (MASS_FULL - mass_c) / (MASS_FULL - MASS_EMPTY)
    dx = wfrac * (T_RB_EMPTY[0] - T_RB_FULL[0])
    dz = wfrac * (T_RB_EMPTY[2] - T_RB_FULL[2])
    m_aer[0] += f_aer[1] * dz
    m_aer[1] += f_aer[2] * dx - f_aer[0] * dz
    m_aer[2] += -f_aer[1] * dx

    # propulsion
    throttle = ctrl[0]
    if throttle < 0.0:
        throttle = 0.0
    elif throttle > 1.0:
        throttle = 1.0
    power = POWER_MAX * throttle
    lapse = POWER_MAX * delta / math.sqrt(theta)
    if lapse < power:
        power = lapse
    thrust = 0.0
    torque = 0.0
    if power > 1.0 and vt0 > 1.0:
        diam = scalars[S_PROP_DIAM]
        j0 = scalars[S_PROP_J0]
        dj = scalars[S_PROP_DJ]
        np_count = int(scalars[S_PROP_N])
        k = power / (rho * vt0 * vt0 * vt0 * diam * diam)
        lo = j0
        hi = j0 + dj * (np_count - 1)
        flo = _interp1(j0, dj, np_count, prop_cp, lo) - k * lo**3
        fhi = _interp1(j0, dj, np_count, prop_cp, hi) - k * hi**3
        if fhi > 0.0:
            # demanded power below the map at this speed: freewheel
            thrust = 0.0
            torque = 0.0
        else:
            if flo < 0.0:
                raise ValueError("demanded power exceeds the propeller map "
                                 "at this airspeed")
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                fm = _interp1(j0, dj, np_count, prop_cp, mid) - k * mid**3
                if fm > 0.0:
                    lo = mid
                else:
                    hi = mid
            j = 0.5 * (lo + hi)
            n_rev = vt0 / (j * diam)
            thrust = rho * n_rev * n_rev * diam**4 * _interp1(
                j0, dj, np_count, prop_ct, j)
            torque = -power / (2.0 * math.pi * n_rev)

    # gravity (deviation rotation is a constant matrix)
    g_real = np.zeros(3)
    if scalars[S_GRAVITY] > 0.5:
        s2 = sin_lat * sin_lat
        g_msl = _GAMMA_E * (1.0 + _K_SOM * s2) / math.sqrt(1.0 - _E2 * s2)
        g3 = g_msl * (1.0 - 2.0 / _A * (1.0 + _F + _M_SOM - 2.0 * _F * s2) * h
                      + 3.0 / (_A * _A) * h * h)
        gz = g3 - scalars[S_GRAV_DEV]
        g_real[0] = grav_rot[0, 2] * gz
        g_real[1] = grav_rot[1, 2] * gz
        g_real[2] = grav_rot[2, 2] * gz

    # assemble derivatives
    f_ib = np.empty(3)
    f_ib[0] = (f_aer[0] + thrust) / mass
    f_ib[1] = f_aer[1] / mass
    f_ib[2] = f_aer[2] / mass
    grav_cor = np.empty(3)
    for i in range(3):
        grav_cor[i] = g_real[i] - a_cor[i]
    grav_cor_b = np.empty(3)
    _rotate_inv(q_nb, grav_cor, grav_cor_b)
    deriv_out[3] = (f_ib[0] - (w_eb_b[1] * v_b[2] - w_eb_b[2] * v_b[1])
                    + grav_cor_b[0])
    deriv_out[4] = (f_ib[1] - (w_eb_b[2] * v_b[0] - w_eb_b[0] * v_b[2])
                    + grav_cor_b[1])
    deriv_out[5] = (f_ib[2] - (w_eb_b[0] * v_b[1] - w_eb_b[1] * v_b[0])
                    + grav_cor_b[2])
    deriv_out[0] = v_n[1] / ((n_rad + h) * cos_lat)
    deriv_out[1] = v_n[0] / (m_rad + h)
    deriv_out[2] = -v_n[2]

    # moments: solve I w_dot = m_total - w x (I w)
    ixx = INERTIA_FULL[0, 0] + wfrac * (INERTIA_EMPTY[0, 0] - INERTIA_FULL[0, 0])
    iyy = INERTIA_FULL[1, 1] + wfrac * (INERTIA_EMPTY[1, 1] - INERTIA_FULL[1, 1])
    izz = INERTIA_FULL[2, 2] + wfrac * (INERTIA_EMPTY[2, 2] - INERTIA_FULL[2, 2])
    ixz = INERTIA_FULL[0, 2] + wfrac * (INERTIA_EMPTY[0, 2] - INERTIA_FULL[0, 2])
    iw0 = ixx * w_ib_b[0] + ixz * w_ib_b[2]
    iw1 = iyy * w_ib_b[1]
    iw2 = ixz * w_ib_b[0] + izz * w_ib_b[2]
    mt0 = m_aer[0] + torque - (w_ib_b[1] * iw2 - w_ib_b[2] * iw1)
    mt1 = m_aer[1] - (w_ib_b[2] * iw0 - w_ib_b[0] * iw2)
    mt2 = m_aer[2] - (w_ib_b[0] * iw1 - w_ib_b[1] * iw0)
    det = ixx * izz - ixz * ixz
    deriv_out[6] = (izz * mt0 - ixz * mt2) / det
    deriv_out[7] = mt1 / iyy
    deriv_out[8] = (ixx * mt2 - ixz * mt0) / det
    for i in range(3):
        deriv_out[9 + i] = w_nb_b[i]
    # w_eb_dot = w_ib_dot - w_ie_b x w_eb_b
    deriv_out[12] = deriv_out[6] - (w_ie_b[1] * w_eb_b[2] - w_ie_b[2] * w_eb_b[1])
    deriv_out[13] = deriv_out[7] - (w_ie_b[2] * w_eb_b[0] - w_ie_b[0] * w_eb_b[2])
    deriv_out[14] = deriv_out[8] - (w_ie_b[0] * w_eb_b[1] - w_ie_b[1] * w_eb_b[0])
    deriv_out[15] = -PSFC * power

    # aux snapshot
    aux_out[0] = lon
    aux_out[1] = lat
    aux_out[2] = h
    for i in range(3):
        aux_out[3 + i] = v_n[i]
    for i in range(4):
        aux_out[6 + i] = q_nb[i]
    for i in range(3):
        aux_out[10 + i] = f_ib[i]
        aux_out[13 + i] = deriv_out[6 + i]
        aux_out[16 + i] = w_nb_b[i]
    aux_out[19] = p
    aux_out[20] = temp
    aux_out[21] = rho
    aux_out[22] = hp
    aux_out[23] = vtas
    aux_out[24] = alpha
    aux_out[25] = beta
    for i in range(3):
        aux_out[26 + i] = wind_total[i]
    aux_out[29] = -PSFC * power
    aux_out[30] = 1.0 if clamped else 0.0
    for i in range(3):
        aux_out[31 + i] = w_ib_b[i]
    aux_out[34] = 0.0


@njit(cache=True)
def se3_step_fast(mass, twist, zeta, ctrl, dt,
                  lon_values, lon_meta, lat_values, lat_meta,
                  prop_ct, prop_cp, scalars, wind_ned, grav_rot,
                  turb_now, turb_next, aux_out):
    """One RK4 step of the rigid-motion truth integrator.

    Returns (mass1, twist1, zeta1); aux of the step start is written into
    aux_out. Turbulence is frozen over the step except for the final stage,
    which sees the next grid sample.
    """
    earth_on = scalars[S_EARTH] > 0.5
    pos = np.empty(3)
    q_nb = np.empty(4)
    q_eb = np.empty(4)
    t_ebe = np.empty(3)
    deriv = np.empty(16)
    aux_tmp = np.empty(AUX_SIZE)

    k_twist = np.empty((4, 6))
    k_mass = np.empty(4)
    stage_twists = np.empty((4, 6))

    cur_mass = mass
    cur_twist = twist.copy()
    cur_zeta = zeta.copy()

    for stage in range(4):
        _dq_to_quat_trans(cur_zeta, q_eb, t_ebe)
        _cartesian_to_geodetic(t_ebe[0], t_ebe[1], t_ebe[2], pos)
        # q_en from lon/lat, q_nb = conj(q_en) * q_eb
        half_lon = 0.5 * pos[0]
        half_ang = 0.5 * (-0.5 * math.pi - pos[1])
        q3 = np.empty(4)
        q3[0] = math.cos(half_lon)
        q3[1] = 0.0
        q3[2] = 0.0
        q3[3] = math.sin(half_lon)
        q2 = np.empty(4)
        q2[0] = math.cos(half_ang)
        q2[1] = 0.0
        q2[2] = math.sin(half_ang)
        q2[3] = 0.0
        q_en = np.empty(4)
        _quat_mul(q3, q2, q_en)
        q_en_c = np.empty(4)
        q_en_c[0] = q_en[0]
        q_en_c[1] = -q_en[1]
        q_en_c[2] = -q_en[2]
        q_en_c[3] = -q_en[3]
        _quat_mul(q_en_c, q_eb, q_nb)
        n = math.sqrt(q_nb[0]**2 + q_nb[1]**2 + q_nb[2]**2 + q_nb[3]**2)
        for i in range(4):
            q_nb[i] /= n

        w_ib_b = np.empty(3)
        if earth_on:
            w_ie_e = np.empty(3)
            w_ie_e[0] = 0.0
            w_ie_e[1] = 0.0
            w_ie_e[2] = _WE
            w_ie_b = np.empty(3)
            _rotate_inv(q_eb, w_ie_e, w_ie_b)
            for i in range(3):
                w_ib_b[i] = cur_twist[3 + i] + w_ie_b[i]
        else:
            for i in range(3):
                w_ib_b[i] = cur_twist[3 + i]

        turb = turb_now if stage < 3 else turb_next
        _eom_eval(pos, cur_twist[:3], q_nb, w_ib_b, cur_mass, ctrl,
                  lon_values, lon_meta, lat_values, lat_meta,
                  prop_ct, prop_cp, scalars, wind_ned, grav_rot, turb,
                  deriv, aux_tmp)
        if stage == 0:
            for i in range(AUX_SIZE):
                aux_out[i] = aux_tmp[i]
        for i in range(3):
            k_twist[stage, i] = deriv[3 + i]
            k_twist[stage, 3 + i] = deriv[12 + i]
        k_mass[stage] = deriv[15]
        for i in range(6):
            stage_twists[stage, i] = cur_twist[i]

        if stage < 3:
            factor = 0.5 if stage < 2 else 1.0
            for i in range(6):
                cur_twist[i] = twist[i] + dt * factor * k_twist[stage, i]
            cur_mass = mass + dt * factor * k_mass[stage]
            tau = np.empty(6)
            for i in range(6):
                tau[i] = stage_twists[stage, i] * dt * factor
            dz = np.empty(8)
            _exp_se3(tau, dz)
            new_zeta = np.empty(8)
            _dq_mul(zeta, dz, new_zeta)
            _dq_normalize(new_zeta)
            cur_zeta = new_zeta

    twist1 = np.empty(6)
    for i in range(6):
        twist1[i] = twist[i] + dt / 6.0 * (
            k_twist[0, i] + 2.0 * k_twist[1, i] + 2.0 * k_twist[2, i]
            + k_twist[3, i])
    mass1 = mass + dt / 6.0 * (k_mass[0] + 2.0 * k_mass[1] + 2.0 * k_mass[2]
                               + k_mass[3])
    tau = np.empty(6)
    for i in range(6):
        tau[i] = dt / 6.0 * (stage_twists[0, i] + 2.0 * stage_twists[1, i]
                             + 2.0 * stage_twists[2, i] + stage_twists[3, i])
    dz = np.empty(8)
    _exp_se3(tau, dz)
    zeta1 = np.empty(8)
    _dq_mul(zeta, dz, zeta1)
    _dq_normalize(zeta1)
    return mass1, twist1, zeta1


@njit(cache=True)
def se3_aux_fast(mass, twist, zeta, ctrl,
                 lon_values, lon_meta, lat_values, lat_meta,
                 prop_ct, prop_cp, scalars, wind_ned, grav_rot,
                 turb, aux_out):
    """Aux snapshot of the current state under the currently held controls."""
    pos = np.empty(3)
    q_nb = np.empty(4)
    q_eb = np.empty(4)
    t_ebe = np.empty(3)
    deriv = np.empty(16)
    _dq_to_quat_trans(zeta, q_eb, t_ebe)
    _cartesian_to_geodetic(t_ebe[0], t_ebe[1], t_ebe[2], pos)
    half_lon = 0.5 * pos[0]
    half_ang = 0.5 * (-0.5 * math.pi - pos[1])
    q3 = np.empty(4)
    q3[0] = math.cos(half_lon)
    q3[1] = 0.0
    q3[2] = 0.0
    q3[3] = math.sin(half_lon)
    q2 = np.empty(4)
    q2[0] = math.cos(half_ang)
    q2[1] = 0.0
    q2[2] = math.sin(half_ang)
    q2[3] = 0.0
    q_en = np.empty(4)
    _quat_mul(q3, q2, q_en)
    q_en[1] = -q_en[1]
    q_en[2] = -q_en[2]
    q_en[3] = -q_en[3]
    _quat_mul(q_en, q_eb, q_nb)
    n = math.sqrt(q_nb[0]**2 + q_nb[1]**2 + q_nb[2]**2 + q_nb[3]**2)
    for i in range(4):
        q_nb[i] /= n
    w_ib_b = np.empty(3)
    if scalars[S_EARTH] > 0.5:
        w_ie_e = np.empty(3)
        w_ie_e[0] = 0.0
        w_ie_e[1] = 0.0
        w_ie_e[2] = _WE
        w_ie_b = np.empty(3)
        _rotate_inv(q_eb, w_ie_e, w_ie_b)
        for i in range(3):
            w_ib_b[i] = twist[3 + i] + w_ie_b[i]
    else:
        for i in range(3):
            w_ib_b[i] = twist[3 + i]
    _eom_eval(pos, twist[:3], q_nb, w_ib_b, mass, ctrl,
              lon_values, lon_meta, lat_values, lat_meta,
              prop_ct, prop_cp, scalars, wind_ned, grav_rot, turb,
              deriv, aux_out)
