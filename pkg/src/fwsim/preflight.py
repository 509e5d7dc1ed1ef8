"""Pre-flight self-alignment and the synthesized fine-alignment outcome.

Self-alignment runs on synthetic stationary sensor batches: leveling
recovers pitch/bank from averaged specific force, gyrocompassing recovers
heading from the Earth rate (high-grade gyros only), magnetic alignment
recovers heading from the declination-corrected field. The fine-alignment
estimation process itself is not simulated; its statistical outcome is
synthesized directly into the navigation filter's initial conditions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import geodesy, lie
from .seeds import make_stream

# fine-alignment accuracy: attitude (rad), relative sensor-error accuracy,
# relative magnetic-deviation accuracy
SIGMA_ATT_INIT = math.radians(0.1)
SIGMA_E_ACC_INIT = 0.01
SIGMA_E_GYR_INIT = 0.01
SIGMA_E_MAG_INIT = 0.01
SIGMA_B_DEV_INIT = 0.10


@dataclass
class AlignmentResult:
    yaw: float
    pitch: float
    bank: float
    gyro_quality_ok: bool = True
    leveling_ok: bool = True


def leveling(f_mean_b):
    """Pitch and bank from averaged stationary accelerometer output."""
    fx, fy, fz = f_mean_b
    horizontal = math.sqrt(fy * fy + fz * fz)
    pitch = math.atan2(fx, horizontal)
    bank = math.atan2(-fy, -fz)
    ok = horizontal > 1e-3 * abs(fx)   # near-vertical fuselage is ambiguous
    return pitch, bank, ok


def gyrocompassing(w_mean_b, pitch, bank):
    """Heading from averaged Earth-rate measurements plus leveling angles.

    Only meaningful when the gyro bias is well below the Earth rate; the
    caller should check the quality flag from align_stationary.
    """
    w1, w2, w3 = w_mean_b
    sx, cx = math.sin(bank), math.cos(bank)
    st, ct = math.sin(pitch), math.cos(pitch)
    return math.atan2(-w2 * cx + w3 * sx,
                      w1 * ct + w2 * sx * st + w3 * cx * st)


def magnetic_alignment(b_mean_b, pitch, bank, declination):
    """Heading from averaged magnetometer output and the model declination."""
    b1, b2, b3 = b_mean_b
    sx, cx = math.sin(bank), math.cos(bank)
    st, ct = math.sin(pitch), math.cos(pitch)
    psi = declination + math.atan2(-b2 * cx + b3 * sx,
                                   b1 * ct + b2 * sx * st + b3 * cx * st)
    return math.atan2(math.sin(psi), math.cos(psi))


def stationary_truth(q_nb, lat, g_real_n):
    """Specific force and inertial rate of a stationary, ground-fixed body."""
    f_ib_b = -lie.rotate_vector_inverse(q_nb, g_real_n)
    w_ib_b = lie.rotate_vector_inverse(q_nb, geodesy.earth_rate_ned(lat))
    return f_ib_b, w_ib_b


def align_stationary(suite, q_nb_true, lat, g_real_n, b_real_n,
                     declination_model, duration_s: float = 60.0,
                     dt: float = 0.01, use_magnetic: bool = True):
    """Run self-alignment on a synthetic stationary measurement batch."""
    f_true, w_true = stationary_truth(q_nb_true, lat, g_real_n)
    steps = int(round(duration_s / dt))
    f_sum = np.zeros(3)
    w_sum = np.zeros(3)
    b_sum = np.zeros(3)
    for _ in range(steps):
        f_meas, w_meas = suite.imu.measure(f_true, w_true, np.zeros(3),
                                           mass=MASS_FOR_ALIGNMENT)
        f_sum += f_meas
        w_sum += w_meas
        b_sum += suite.magnetometer.measure(b_real_n, q_nb_true)
    f_mean = f_sum / steps
    w_mean = w_sum / steps
    b_mean = b_sum / steps

    pitch, bank, level_ok = leveling(f_mean)
    # the Earth rate must not be masked by the gyro bias for gyrocompassing
    bias_scale = suite.imu._gyr_err.params.bias_offset
    gyro_ok = bias_scale < 0.1 * geodesy.OMEGA_EARTH * math.cos(lat)
    if use_magnetic or not gyro_ok:
        yaw = magnetic_alignment(b_mean, pitch, bank, declination_model)
    else:
        yaw = gyrocompassing(w_mean, pitch, bank)
    return AlignmentResult(yaw=yaw, pitch=pitch, bank=bank,
                           gyro_quality_ok=gyro_ok, leveling_ok=level_ok)


MASS_FOR_ALIGNMENT = 19.715   # full tank on the apron


@dataclass
class InitConditions:
    """Navigation filter initial conditions from fine alignment."""
    q_nb: np.ndarray
    e_acc: np.ndarray
    e_gyr: np.ndarray
    e_mag: np.ndarray
    b_dev_n: np.ndarray


def synthesize_fine_alignment(q_nb_true, e_acc_true, e_gyr_true, e_mag_true,
                              b_dev_true, tree) -> InitConditions:
    """Statistical outcome of the (unsimulated) fine-alignment process.

    The attitude estimate is the truth perturbed by a random rotation of
    normally distributed magnitude about a uniformly distributed axis; the
    sensor-error and field-deviation estimates carry relative element-wise
    errors at the configured accuracy levels.
    """
    rng_att = make_stream(tree.run["init_att"])
    phi1 = math.radians(float(rng_att.integers(-179, 181)))
    phi2 = math.radians(float(rng_att.integers(-90, 91)))
    gamma = SIGMA_ATT_INIT * rng_att.standard_normal()
    axis = np.array([math.cos(phi1) * math.cos(phi2),
                     math.sin(phi1) * math.cos(phi2),
                     math.sin(phi2)])
    q_init = lie.compose(lie.exp_so3(axis * gamma), q_nb_true)

    def relative(truth, sigma, seed_name):
        rng = make_stream(tree.run[seed_name])
        return np.asarray(truth) * (1.0 + sigma * rng.standard_normal(3))

    return InitConditions(
        q_nb=q_init,
        e_acc=relative(e_acc_true, SIGMA_E_ACC_INIT, "init_eacc"),
        e_gyr=relative(e_gyr_true, SIGMA_E_GYR_INIT, "init_egyr"),
        e_mag=relative(e_mag_true, SIGMA_E_MAG_INIT, "init_emag"),
        b_dev_n=relative(b_dev_true, SIGMA_B_DEV_INIT, "init_bdev"),
    )
