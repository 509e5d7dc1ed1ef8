import math

import numpy as np
import pytest

from fwsim import environment as env
from fwsim import geodesy, lie
from fwsim import preflight as pf
from fwsim import sensors as sn
from fwsim.seeds import derive_seed_tree

LAT = math.radians(40.5)
G_N = geodesy.gravity_ned_model(LAT, 0.0)
B_N = np.array([25600.0, -300.0, 36800.0])


def suite_for(tier, a=3, f=9, run=0):
    return sn.SensorSuite(sn.default_sensor_specs(tier),
                          derive_seed_tree(a, f, run))


# --- leveling -----------------------------------------------------------------

def test_leveling_level_aircraft():
    pitch, bank, ok = pf.leveling([0.0, 0.0, -9.8])
    assert pitch == 0.0 and bank == 0.0 and ok


def test_leveling_closed_form_10deg_pitch():
    g = 9.8
    th = math.radians(10.0)
    f_mean = [g * math.sin(th), 0.0, -g * math.cos(th)]
    pitch, bank, ok = pf.leveling(f_mean)
    assert pitch == pytest.approx(th, abs=1e-12)
    assert bank == pytest.approx(0.0, abs=1e-12)


def test_leveling_near_vertical_flagged():
    _, _, ok = pf.leveling([9.8, 1e-6, -1e-6])
    assert not ok


def test_leveling_inverts_forward_model_exactly():
    # perfect sensors, deviation-free vertical gravity: exact recovery
    for yaw, pitch, bank in [(0.3, 0.12, -0.2), (2.0, -0.3, 0.5)]:
        q = lie.euler_to_quat(yaw, pitch, bank)
        f_b = -lie.rotate_vector_inverse(q, G_N)
        th, xi, _ = pf.leveling(f_b)
        assert th == pytest.approx(pitch, abs=1e-12)
        assert xi == pytest.approx(bank, abs=1e-12)


# --- gyrocompassing --------------------------------------------------------------

@pytest.mark.parametrize("yaw_deg", [0.0, 30.0, 120.0, -150.0])
def test_gyrocompassing_inverts_forward_model(yaw_deg):
    yaw = math.radians(yaw_deg)
    pitch, bank = 0.05, -0.1
    q = lie.euler_to_quat(yaw, pitch, bank)
    w_b = lie.rotate_vector_inverse(q, geodesy.earth_rate_ned(LAT))
    psi = pf.gyrocompassing(w_b, pitch, bank)
    assert psi == pytest.approx(yaw, abs=1e-9)


def test_gyrocompassing_zero_heading():
    q = lie.euler_to_quat(0.0, 0.0, 0.0)
    w_b = lie.rotate_vector_inverse(q, geodesy.earth_rate_ned(LAT))
    assert pf.gyrocompassing(w_b, 0.0, 0.0) == pytest.approx(0.0, abs=1e-12)


def test_baseline_gyros_flagged_for_gyrocompassing():
    suite = suite_for("baseline")
    res = pf.align_stationary(suite, lie.euler_to_quat(0.5, 0.0, 0.0), LAT,
                              G_N, B_N, declination_model=0.0,
                              duration_s=1.0)
    assert not res.gyro_quality_ok


def test_perfect_gyros_pass_quality_and_align():
    suite = suite_for("perfect")
    yaw = math.radians(30.0)
    q = lie.euler_to_quat(yaw, 0.0, 0.0)
    res = pf.align_stationary(suite, q, LAT, G_N, B_N, declination_model=None,
                              duration_s=1.0, use_magnetic=False)
    assert res.gyro_quality_ok
    assert res.yaw == pytest.approx(yaw, abs=1e-9)
    assert res.pitch == pytest.approx(0.0, abs=1e-9)


# --- magnetic alignment ------------------------------------------------------------

@pytest.mark.parametrize("yaw_deg", [0.0, 120.0, -60.0])
def test_magnetic_alignment_inverts_forward_model(yaw_deg):
    yaw = math.radians(yaw_deg)
    pitch, bank = 0.04, -0.07
    q = lie.euler_to_quat(yaw, pitch, bank)
    dec, _ = env.declination_inclination(B_N)
    b_b = lie.rotate_vector_inverse(q, B_N)
    psi = pf.magnetic_alignment(b_b, pitch, bank, dec)
    assert psi == pytest.approx(yaw, abs=1e-9)


def test_magnetic_alignment_aligned_field_zero_heading():
    b = np.array([20000.0, 0.0, 40000.0])
    psi = pf.magnetic_alignment(b, 0.0, 0.0, 0.0)
    assert psi == pytest.approx(0.0, abs=1e-12)


def test_leveling_ensemble_std_baseline():
    # swing one realization through 36 headings: the heading-to-heading
    # pitch scatter is ~0.003 deg while the bias offset sets the mean level
    suite = suite_for("baseline")
    pitches = []
    for yaw_deg in range(0, 360, 10):
        q = lie.euler_to_quat(math.radians(yaw_deg), 0.0, 0.0)
        res = pf.align_stationary(suite, q, LAT, G_N, B_N,
                                  declination_model=0.0, duration_s=30.0)
        pitches.append(math.degrees(res.pitch))
    spread = np.std(pitches)
    mean_offset = abs(np.mean(pitches))
    assert spread == pytest.approx(0.003, rel=0.5)
    # bias-offset-dominated mean error of order arcsin(B0/g) ~ 0.9 deg
    assert 0.05 < mean_offset < 2.5


def test_magnetic_alignment_ensemble_std_baseline():
    dec, _ = env.declination_inclination(B_N)
    errors = []
    for k, yaw_deg in enumerate(range(0, 360, 10)):
        suite = suite_for("baseline", f=100 + k)
        yaw = math.radians(yaw_deg)
        res = pf.align_stationary(suite, lie.euler_to_quat(yaw, 0.0, 0.0),
                                  LAT, G_N, B_N, declination_model=dec,
                                  duration_s=30.0)
        err = math.degrees(math.atan2(math.sin(res.yaw - yaw),
                                      math.cos(res.yaw - yaw)))
        errors.append(err)
    assert 1.0 <= np.std(errors) <= 5.0


# --- fine alignment ------------------------------------------------------------------

def test_fine_alignment_exact_with_zero_sigmas(monkeypatch):
    monkeypatch.setattr(pf, "SIGMA_ATT_INIT", 0.0)
    monkeypatch.setattr(pf, "SIGMA_E_ACC_INIT", 0.0)
    monkeypatch.setattr(pf, "SIGMA_E_GYR_INIT", 0.0)
    monkeypatch.setattr(pf, "SIGMA_E_MAG_INIT", 0.0)
    monkeypatch.setattr(pf, "SIGMA_B_DEV_INIT", 0.0)
    tree = derive_seed_tree(1, 2, 0)
    q = lie.euler_to_quat(0.3, 0.1, 0.0)
    e_acc = np.array([0.1, -0.05, 0.2])
    init = pf.synthesize_fine_alignment(q, e_acc, e_acc, e_acc, e_acc, tree)
    np.testing.assert_allclose(init.q_nb, q, atol=1e-15)
    np.testing.assert_allclose(init.e_acc, e_acc)


def test_fine_alignment_attitude_perturbation_std():
    q_true = lie.euler_to_quat(0.4, 0.05, -0.1)
    angles = []
    for f_seed in range(2000):
        tree = derive_seed_tree(1, f_seed, 0)
        init = pf.synthesize_fine_alignment(q_true, np.ones(3), np.ones(3),
                                            np.ones(3), np.ones(3), tree)
        angles.append(lie.rotation_angle(
            lie.quat_mul(lie.quat_conjugate(q_true), init.q_nb)))
    # |gamma| of a zero-mean normal: E|x| = sigma sqrt(2/pi)
    sigma_est = np.std(np.array(angles) * np.sign(np.random.default_rng(0)
                                                  .standard_normal(len(angles))))
    rms = math.sqrt(np.mean(np.square(angles)))
    assert rms == pytest.approx(pf.SIGMA_ATT_INIT, rel=0.05)


def test_fine_alignment_sensor_error_relative_accuracy():
    e_true = np.array([0.2, -0.1, 0.05])
    rel = []
    for f_seed in range(2000):
        tree = derive_seed_tree(1, f_seed, 0)
        init = pf.synthesize_fine_alignment(lie.Q_IDENTITY, e_true, e_true,
                                            e_true, e_true, tree)
        rel.append((init.e_acc - e_true) / e_true)
    rel = np.array(rel)
    assert np.std(rel) == pytest.approx(pf.SIGMA_E_ACC_INIT, rel=0.05)
    assert abs(np.mean(rel)) < 0.002


def test_fine_alignment_draw_order_fixed():
    tree = derive_seed_tree(5, 6, 0)
    i1 = pf.synthesize_fine_alignment(lie.Q_IDENTITY, np.ones(3), np.ones(3),
                                      np.ones(3), np.ones(3), tree)
    i2 = pf.synthesize_fine_alignment(lie.Q_IDENTITY, np.ones(3), np.ones(3),
                                      np.ones(3), np.ones(3), tree)
    np.testing.assert_array_equal(i1.q_nb, i2.q_nb)
    np.testing.assert_array_equal(i1.e_gyr, i2.e_gyr)
