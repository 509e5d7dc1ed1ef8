import math

import numpy as np
import pytest

from fwsim import lie
from fwsim import sensors as sn
from fwsim.seeds import aircraft_seed, derive_seed_tree, flight_seed

DEG = math.pi / 180.0


def make_tree(run_index=0, a=11, f=77):
    return derive_seed_tree(a, f, run_index)


def perfect_suite(run_index=0):
    return sn.SensorSuite(sn.default_sensor_specs("perfect"),
                          make_tree(run_index))


def baseline_suite(run_index=0, f=77):
    return sn.SensorSuite(sn.default_sensor_specs("baseline"),
                          make_tree(run_index, f=f))


# --- seed tree ---------------------------------------------------------------

def test_seed_tree_deterministic():
    t1 = derive_seed_tree(1, 2, 3)
    t2 = derive_seed_tree(1, 2, 3)
    assert t1.fixed == t2.fixed
    assert t1.run == t2.run
    assert t1.turbulence == 3


def test_seed_tree_run_index_changes_only_turbulence():
    t1 = derive_seed_tree(1, 2, 3)
    t2 = derive_seed_tree(1, 2, 4)
    assert t1.fixed == t2.fixed
    assert t1.run == t2.run
    assert t1.turbulence != t2.turbulence


def test_seed_tree_aircraft_and_flight_streams_independent():
    t1 = derive_seed_tree(1, 2, 0)
    t2 = derive_seed_tree(9, 2, 0)
    t3 = derive_seed_tree(1, 8, 0)
    assert t1.fixed != t2.fixed and t1.run == t2.run
    assert t1.fixed == t3.fixed and t1.run != t3.run


def test_master_seed_tables_stable():
    assert aircraft_seed(5) == aircraft_seed(5)
    assert flight_seed(7) == flight_seed(7)
    assert aircraft_seed(5) != flight_seed(5)


# --- single-axis error ----------------------------------------------------------

FICTITIOUS = sn.SingleAxisErrorParams(bias_offset=1.6e-2, sigma_u=4e-3,
                                      sigma_v=1e-3, dt=0.01,
                                      drift_band_scale=None)


def test_zero_params_give_zero_error():
    params = sn.SingleAxisErrorParams(0.0, 0.0, 0.0, 0.01)
    series = sn.single_axis_error_series(params, seed=3, steps=100)
    np.testing.assert_array_equal(series, np.zeros(100))


def test_single_axis_ensemble_std_at_100s():
    # ensemble law: Var = B0^2 + su^2 t + sv^2/dt
    vals = [sn.single_axis_error_series(FICTITIOUS, seed, 10_000)[-1]
            for seed in range(2000)]
    expected = math.sqrt(1.6e-2**2 + 4e-3**2 * 100.0 + 1e-3**2 / 0.01)
    assert expected == pytest.approx(0.0442, abs=5e-4)
    assert np.std(vals) == pytest.approx(expected, rel=0.05)


def test_single_axis_first_integral_std_at_1000s():
    rng_vals = []
    dt = FICTITIOUS.dt
    for seed in range(500):
        e = sn.single_axis_error_series(FICTITIOUS, seed, 100_000)
        rng_vals.append(dt * np.sum(e))
    t = 1000.0
    expected = math.sqrt(1.6e-2**2 * t**2 + 4e-3**2 / 3.0 * t**3
                         + 1e-3**2 * t)
    assert expected == pytest.approx(74.8, rel=0.01)
    assert np.std(rng_vals) == pytest.approx(expected, rel=0.10)


def test_drift_band_clamp():
    params = sn.SingleAxisErrorParams(0.0, 4e-3, 0.0, 0.01)
    band = 100.0 * 4e-3 * math.sqrt(0.01)
    series = sn.single_axis_error_series(params, seed=5, steps=200_000)
    assert np.max(np.abs(series)) <= band + 1e-12
    # and the band is actually reached in a long run
    assert np.max(np.abs(series)) > 0.9 * band


def test_negative_params_rejected():
    with pytest.raises(ValueError):
        sn.SingleAxisErrorParams(-1.0, 0.0, 0.0, 0.01)


# --- IMU -------------------------------------------------------------------------

def test_perfect_imu_is_identity_with_zero_lever():
    suite = perfect_suite()
    suite.imu.mounting.q_bp = lie.Q_IDENTITY.copy()
    suite.imu.mounting.q_bp_est = lie.Q_IDENTITY.copy()
    f = np.array([0.1, -0.2, -9.7])
    w = np.array([0.01, 0.02, -0.03])
    # zero lever arm: evaluate at a mass where the lever vanishes is not
    # possible (fixed geometry), so null the lever instead
    suite.imu.mounting.t_bp = lambda m: np.zeros(3)
    suite.imu.mounting.t_bp_est = lambda m: np.zeros(3)
    f_meas, w_meas = suite.imu.measure(f, w, np.zeros(3), mass=19.0)
    np.testing.assert_allclose(w_meas, w, atol=1e-15)
    np.testing.assert_allclose(f_meas, f, atol=1e-15)


def test_perfect_imu_lever_arm_centripetal():
    # pure rotation about z with the real lever: centripetal term appears
    suite = perfect_suite()
    suite.imu.mounting.q_bp = lie.Q_IDENTITY.copy()
    suite.imu.mounting.q_bp_est = lie.Q_IDENTITY.copy()
    lever = np.array([0.09, 0.0, 0.105])
    suite.imu.mounting.t_bp = lambda m: lever
    # estimated lever zero so that the true lever effect is exposed
    suite.imu.mounting.t_bp_est = lambda m: np.zeros(3)
    w = np.array([0.0, 0.0, 1.0])
    f_meas, _ = suite.imu.measure(np.zeros(3), w, np.zeros(3), mass=19.0)
    np.testing.assert_allclose(f_meas, [-0.09, 0.0, 0.0], atol=1e-12)


def test_perfect_imu_estimated_lever_cancels_true_lever():
    suite = perfect_suite()
    w = np.array([0.3, -0.2, 0.5])
    f = np.array([0.5, 0.2, -9.8])
    # second call so the angular-acceleration difference rule has history
    suite.imu.measure(f, w, np.zeros(3), mass=19.7)
    f_meas, w_meas = suite.imu.measure(f, w, np.zeros(3), mass=19.7)
    np.testing.assert_allclose(w_meas, w, atol=1e-14)
    np.testing.assert_allclose(f_meas, f, atol=1e-12)


def test_baseline_gyro_white_noise_std():
    # per-axis white noise std = sigma_v / sqrt(dt) = 4.30e-2 deg/s
    suite = baseline_suite()
    w = np.zeros(3)
    n = 4000
    meas = np.array([suite.imu.measure(np.zeros(3), w, np.zeros(3), 19.7)[1]
                     for _ in range(n)])
    diffs = np.diff(meas, axis=0)   # differences kill bias and slow drift
    std = np.std(diffs) / math.sqrt(2.0)
    assert std == pytest.approx(math.radians(4.30e-2), rel=0.05)


def test_imu_full_error_excludes_white_noise():
    suite = baseline_suite()
    f = np.array([0.0, 0.0, -9.8])
    w = np.array([0.0, 0.0, 0.02])
    f_meas, w_meas = suite.imu.measure(f, w, np.zeros(3), 19.7)
    # reconstruct: measurement = truth + full_error + white
    resid_gyr = w_meas - w - suite.imu.last_full_error_gyr
    sigma_white = suite.specs["gyroscope"]["white_noise"] / math.sqrt(0.01)
    assert np.all(np.abs(resid_gyr) < 6.0 * sigma_white)


def test_scale_cross_matrix_shapes():
    suite = baseline_suite()
    m_acc = suite.imu.m_acc
    assert m_acc[0, 1] == 0.0 and m_acc[0, 2] == 0.0 and m_acc[1, 2] == 0.0
    assert abs(m_acc[0, 0] - 1.0) < 1e-3
    m_gyr = suite.imu.m_gyr
    assert abs(m_gyr[1, 1] - 1.0) < 1e-3
    assert abs(m_gyr[0, 1]) < 1e-3 and abs(m_gyr[0, 1]) > 0.0


# --- magnetometer ----------------------------------------------------------------

def test_perfect_magnetometer_identity_attitude():
    suite = perfect_suite()
    b = np.array([25000.0, -300.0, 37000.0])
    np.testing.assert_allclose(
        suite.magnetometer.measure(b, lie.Q_IDENTITY), b, atol=1e-9)


def test_perfect_magnetometer_rotates_field():
    suite = perfect_suite()
    q = lie.euler_to_quat(0.4, 0.1, -0.2)
    b = np.array([25000.0, -300.0, 37000.0])
    np.testing.assert_allclose(suite.magnetometer.measure(b, q),
                               lie.rotate_vector_inverse(q, b), atol=1e-9)


def test_magnetometer_hard_iron_ensemble_std():
    vals = np.array([sn.SensorSuite(sn.default_sensor_specs("baseline"),
                                    make_tree(a=seed)).magnetometer.hard_iron
                     for seed in range(2000)])
    assert np.std(vals) == pytest.approx(175.0, rel=0.05)


def test_magnetometer_white_noise_std():
    suite = baseline_suite()
    b = np.array([25000.0, 0.0, 37000.0])
    meas = np.array([suite.magnetometer.measure(b, lie.Q_IDENTITY)
                     for _ in range(4000)])
    std = np.std(np.diff(meas, axis=0)) / math.sqrt(2.0)
    assert std == pytest.approx(50.0, rel=0.05)


# --- air data ---------------------------------------------------------------------

def test_perfect_air_data_identity():
    suite = perfect_suite()
    out = suite.air_data.measure(90000.0, 280.0, 30.0, 0.05, -0.01)
    assert out == (90000.0, 280.0, 30.0, 0.05, -0.01)


def test_airspeed_noise_sigma():
    suite = baseline_suite()
    vals = np.array([suite.air_data.measure(9e4, 280.0, 30.0, 0.0, 0.0)[2]
                     for _ in range(4000)])
    assert np.std(vals) == pytest.approx(0.333, rel=0.06)


def test_pressure_bias_constant_within_flight_varies_across_flights():
    biases = []
    for f_seed in range(300):
        suite = baseline_suite(f=f_seed)
        vals = [suite.air_data.measure(9e4, 280.0, 30.0, 0.0, 0.0)[0]
                for _ in range(50)]
        biases.append(np.mean(vals) - 9e4)
    assert np.std(biases) == pytest.approx(100.0, rel=0.15)


# --- GNSS --------------------------------------------------------------------------

POS0 = np.array([math.radians(-4.0), math.radians(40.5), 1000.0])


def test_perfect_gnss_exact():
    suite = perfect_suite()
    pos, vel = suite.gnss.measure(POS0, np.array([30.0, 0.0, 0.0]))
    np.testing.assert_allclose(pos, POS0)
    np.testing.assert_allclose(vel, [30.0, 0.0, 0.0])


def test_gnss_cep_horizontal():
    # median horizontal radial error ~ 2.5 m with the ionosphere disabled
    spec = sn.default_sensor_specs("baseline")
    from fwsim.geodesy import radii_of_curvature
    n_rad, m_rad = radii_of_curvature(POS0[1])
    errors = []
    for seed in range(10):
        gnss = sn.GnssModel(spec["gnss"], run_seed=1000 + seed,
                            ionosphere=False)
        for _ in range(1000):
            pos, _ = gnss.measure(POS0, np.zeros(3))
            de = (pos[0] - POS0[0]) * (n_rad + POS0[2]) * math.cos(POS0[1])
            dn = (pos[1] - POS0[1]) * (m_rad + POS0[2])
            errors.append(math.hypot(de, dn))
    assert np.median(errors) == pytest.approx(2.5, rel=0.05)


def test_gnss_velocity_sigma():
    spec = sn.default_sensor_specs("baseline")
    gnss = sn.GnssModel(spec["gnss"], run_seed=4, ionosphere=False)
    vels = np.array([gnss.measure(POS0, np.zeros(3))[1] for _ in range(3000)])
    assert np.std(vels) == pytest.approx(7.41e-2, rel=0.05)


def test_gnss_ionosphere_piecewise_linear():
    spec = sn.default_sensor_specs("baseline")
    spec = {k: dict(v) for k, v in spec.items()}
    spec["gnss"]["horizontal_sigma"] = 0.0
    spec["gnss"]["vertical_sigma"] = 0.0
    spec["gnss"]["velocity_sigma"] = 0.0
    gnss = sn.GnssModel(spec["gnss"], run_seed=9)
    from fwsim.geodesy import radii_of_curvature
    n_rad, m_rad = radii_of_curvature(POS0[1])
    north = []
    for _ in range(181):
        pos, _ = gnss.measure(POS0, np.zeros(3))
        north.append((pos[1] - POS0[1]) * (m_rad + POS0[2]))
    north = np.array(north)
    # piecewise linear between 60 s knots: second differences vanish inside
    inner = np.diff(north, 2)
    assert np.abs(inner[:58]).max() < 1e-9
    assert np.abs(inner[60:118]).max() < 1e-9
    # and the error is not globally linear (knots bend the line)
    assert abs(inner[58]) > 0.0 or abs(inner[59]) > 0.0


def test_gnss_determinism():
    spec = sn.default_sensor_specs("baseline")
    g1 = sn.GnssModel(spec["gnss"], run_seed=77)
    g2 = sn.GnssModel(spec["gnss"], run_seed=77)
    for _ in range(5):
        p1, v1 = g1.measure(POS0, np.zeros(3))
        p2, v2 = g2.measure(POS0, np.zeros(3))
        np.testing.assert_array_equal(p1, p2)
        np.testing.assert_array_equal(v1, v2)


# --- camera -----------------------------------------------------------------------

def test_camera_fov_reference_values():
    cam = sn.CameraParams()
    assert math.degrees(cam.fov_h) == pytest.approx(37.923, abs=1e-3)
    assert math.degrees(cam.fov_v) == pytest.approx(49.226, abs=1e-3)


def test_camera_principal_point_projection():
    suite = perfect_suite()
    p_img = suite.camera.project([0.0, 0.0, 5.0])
    np.testing.assert_allclose(p_img, [384.5, 511.5])


def test_camera_projection_round_trip():
    suite = perfect_suite()
    rng = np.random.default_rng(3)
    for _ in range(50):
        depth = rng.uniform(1.0, 500.0)
        p_img = rng.uniform([0.0, 0.0], [768.0, 1024.0])
        p_cam = suite.camera.unproject(p_img, depth)
        np.testing.assert_allclose(suite.camera.project(p_cam), p_img,
                                   atol=1e-9)


def test_camera_behind_plane_rejected():
    suite = perfect_suite()
    with pytest.raises(ValueError):
        suite.camera.project([0.0, 0.0, -1.0])


def test_camera_pose_chain_points_down_in_level_flight():
    suite = perfect_suite()
    # zero mounting perturbations: camera z axis along body x-down rotated
    zeta = suite.camera.pose_ecef(POS0, lie.Q_IDENTITY, mass=19.7)
    q_ec, _ = lie.dq_to_quat_trans(zeta)
    # the camera principal axis (+z in camera frame) in NED
    from fwsim.geodesy import ned_to_ecef_quat
    q_en = ned_to_ecef_quat(POS0[0], POS0[1])
    q_nc = lie.compose(lie.quat_conjugate(q_en), q_ec)
    axis_ned = lie.rotate_vector(q_nc, [0.0, 0.0, 1.0])
    assert axis_ned[2] == pytest.approx(1.0, abs=1e-9)


def test_suite_full_determinism():
    a1 = baseline_suite(run_index=2)
    a2 = baseline_suite(run_index=2)
    f = np.array([0.1, 0.0, -9.8])
    w = np.array([0.0, 0.01, 0.0])
    for _ in range(10):
        m1 = a1.imu.measure(f, w, np.zeros(3), 19.7)
        m2 = a2.imu.measure(f, w, np.zeros(3), 19.7)
        np.testing.assert_array_equal(m1[0], m2[0])
        np.testing.assert_array_equal(m1[1], m2[1])


def test_sensor_spec_tiers_exist():
    for tier in sn.TIERS:
        specs = sn.default_sensor_specs(tier)
        assert set(specs) == {"gyroscope", "accelerometer", "magnetometer",
                              "air_data", "gnss", "mounting"}
    with pytest.raises(ValueError):
        sn.default_sensor_specs("luxury")
