import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fwsim import lie


def random_quat(rng):
    q = rng.standard_normal(4)
    return q / np.linalg.norm(q)


def finite_difference_jacobian(f, x0, step=1e-6):
    x0 = np.asarray(x0, dtype=float)
    cols = []
    for i in range(x0.size):
        dx = np.zeros_like(x0)
        dx[i] = step
        cols.append((f(x0 + dx) - f(x0 - dx)) / (2.0 * step))
    return np.column_stack(cols)


# --- rotation action -------------------------------------------------------

def test_identity_rotation():
    v = np.array([1.0, 2.0, 3.0])
    np.testing.assert_allclose(lie.rotate_vector(lie.Q_IDENTITY, v), v)


def test_r3_90deg_rotates_x_to_y():
    q = lie.quat_r3(math.pi / 2.0)
    np.testing.assert_allclose(lie.rotate_vector(q, [1.0, 0.0, 0.0]),
                               [0.0, 1.0, 0.0], atol=1e-15)


def test_adjoint_matches_rotation_action():
    rng = np.random.default_rng(7)
    for _ in range(100):
        q = random_quat(rng)
        v = rng.standard_normal(3)
        np.testing.assert_allclose(lie.adjoint(q) @ v, lie.rotate_vector(q, v),
                                   atol=1e-13)


def test_adjoint_of_inverse_is_inverse_of_adjoint():
    rng = np.random.default_rng(8)
    q = random_quat(rng)
    np.testing.assert_allclose(lie.adjoint(lie.quat_inverse(q)),
                               np.linalg.inv(lie.adjoint(q)), atol=1e-12)


def test_rotation_preserves_norm():
    rng = np.random.default_rng(9)
    for _ in range(20):
        q = random_quat(rng)
        v = rng.standard_normal(3)
        assert np.linalg.norm(lie.rotate_vector(q, v)) == pytest.approx(
            np.linalg.norm(v), rel=1e-12)


def test_non_finite_input_rejected():
    with pytest.raises(ValueError):
        lie.quat_normalize([np.nan, 0.0, 0.0, 0.0])


def test_double_cover_equal_rotation():
    rng = np.random.default_rng(10)
    q = random_quat(rng)
    v = rng.standard_normal(3)
    np.testing.assert_allclose(lie.rotate_vector(q, v), lie.rotate_vector(-q, v),
                               atol=1e-13)


def test_quat_from_matrix_round_trip():
    rng = np.random.default_rng(11)
    for _ in range(50):
        q = random_quat(rng)
        q2 = lie.quat_from_matrix(lie.quat_to_matrix(q))
        assert min(np.linalg.norm(q2 - q), np.linalg.norm(q2 + q)) < 1e-12


# --- plus / minus / exp / log ----------------------------------------------

def test_plus_zero_is_identity():
    rng = np.random.default_rng(12)
    q = random_quat(rng)
    np.testing.assert_allclose(lie.so3_plus(q, np.zeros(3)), q, atol=1e-15)


def test_minus_of_same_quaternion_is_zero():
    rng = np.random.default_rng(13)
    q = random_quat(rng)
    np.testing.assert_allclose(lie.so3_minus(q, q), np.zeros(3), atol=1e-15)


def test_plus_axis_angle_closed_form():
    # identity (+) (0,0,pi/2) must be the 90 deg z rotation
    q = lie.so3_plus(lie.Q_IDENTITY, [0.0, 0.0, math.pi / 2.0])
    expected = lie.quat_r3(math.pi / 2.0)
    np.testing.assert_allclose(q, expected, atol=1e-14)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-1.0, 1.0), min_size=3, max_size=3),
       st.floats(1e-4, math.pi - 0.01))
def test_exp_log_round_trip(direction, angle):
    d = np.asarray(direction)
    n = np.linalg.norm(d)
    if n < 1e-3:
        d = np.array([1.0, 0.0, 0.0])
        n = 1.0
    r = d / n * angle
    np.testing.assert_allclose(lie.log_so3(lie.exp_so3(r)), r, atol=1e-10)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_plus_minus_round_trip(seed):
    rng = np.random.default_rng(seed)
    q = random_quat(rng)
    r = rng.uniform(-1.0, 1.0, 3)
    np.testing.assert_allclose(lie.so3_minus(lie.so3_plus(q, r), q), r,
                               atol=1e-10)


def test_minus_near_pi_sets_ambiguity_flag():
    q1 = lie.Q_IDENTITY
    q2 = lie.exp_so3([math.pi - 1e-9, 0.0, 0.0])
    _, flag = lie.so3_minus_flagged(q2, q1)
    assert flag
    _, flag = lie.so3_minus_flagged(lie.exp_so3([0.5, 0.2, 0.1]), q1)
    assert not flag


def test_norm_drift_over_many_compositions():
    rng = np.random.default_rng(14)
    increments = [lie.exp_so3(rng.uniform(-0.05, 0.05, 3)) for _ in range(64)]
    q = random_quat(rng)
    for i in range(1_000_000):
        q = lie.compose(q, increments[i & 63])
    assert abs(np.linalg.norm(q) - 1.0) < 1e-9


# --- Euler angles -----------------------------------------------------------

@settings(max_examples=200, deadline=None)
@given(st.floats(-math.pi + 1e-6, math.pi - 1e-6),
       st.floats(-math.pi / 2 + 0.01, math.pi / 2 - 0.01),
       st.floats(-math.pi + 1e-6, math.pi - 1e-6))
def test_euler_round_trip(yaw, pitch, bank):
    q = lie.euler_to_quat(yaw, pitch, bank)
    y2, p2, b2 = lie.quat_to_euler(q)
    assert y2 == pytest.approx(yaw, abs=1e-9)
    assert p2 == pytest.approx(pitch, abs=1e-9)
    assert b2 == pytest.approx(bank, abs=1e-9)


@pytest.mark.parametrize("pitch", [math.pi / 2.0, -math.pi / 2.0])
def test_euler_gimbal_lock_folds_bank_into_yaw(pitch):
    q = lie.euler_to_quat(0.7, pitch, 0.3)
    yaw, p, bank = lie.quat_to_euler(q)
    assert bank == 0.0
    assert p == pytest.approx(pitch)
    # the reported angles must reproduce the same rotation
    q2 = lie.euler_to_quat(yaw, p, bank)
    assert min(np.linalg.norm(q2 - q), np.linalg.norm(q2 + q)) < 1e-9


# --- Jacobians ---------------------------------------------------------------

def test_jac_rotate_local_at_identity_is_minus_skew():
    v = np.array([0.3, -1.2, 2.0])
    np.testing.assert_allclose(lie.jac_rotate_local(lie.Q_IDENTITY, v),
                               -lie.skew(v), atol=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_jac_rotate_local_finite_difference(seed):
    rng = np.random.default_rng(seed)
    q = random_quat(rng)
    v = rng.standard_normal(3)

    def f(dr):
        return lie.rotate_vector(lie.so3_plus(q, dr), v)

    jac_fd = finite_difference_jacobian(f, np.zeros(3))
    np.testing.assert_allclose(lie.jac_rotate_local(q, v), jac_fd,
                               rtol=1e-5, atol=1e-7)


@pytest.mark.parametrize("seed", range(5))
def test_jac_rotate_inv_local_finite_difference(seed):
    rng = np.random.default_rng(100 + seed)
    q = random_quat(rng)
    v = rng.standard_normal(3)

    def f(dr):
        return lie.rotate_vector_inverse(lie.so3_plus(q, dr), v)

    jac_fd = finite_difference_jacobian(f, np.zeros(3))
    np.testing.assert_allclose(lie.jac_rotate_inv_local(q, v), jac_fd,
                               rtol=1e-5, atol=1e-7)


def test_jac_rotate_inv_local_frobenius_norm():
    # [R^T v]x has Frobenius norm sqrt(2)|v| for any rotation
    rng = np.random.default_rng(15)
    for _ in range(20):
        q = random_quat(rng)
        v = rng.standard_normal(3)
        jac = lie.jac_rotate_inv_local(q, v)
        assert np.linalg.norm(jac) == pytest.approx(
            math.sqrt(2.0) * np.linalg.norm(v), rel=1e-12)


def test_jac_reset_identity_at_zero():
    np.testing.assert_allclose(lie.jac_reset(np.zeros(3)), np.eye(3), atol=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_jac_reset_finite_difference(seed):
    rng = np.random.default_rng(200 + seed)
    dr = rng.uniform(-0.5, 0.5, 3)

    # residual perturbation after folding dr: Log(Exp(dr)^-1 Exp(dr + d))
    def f(d):
        return lie.so3_minus(lie.exp_so3(dr + d), lie.exp_so3(dr))

    jac_fd = finite_difference_jacobian(f, np.zeros(3))
    np.testing.assert_allclose(lie.jac_reset(dr), jac_fd, rtol=1e-5, atol=1e-7)


# --- dual quaternions --------------------------------------------------------

def random_pose(rng):
    q = random_quat(rng)
    t = 100.0 * rng.standard_normal(3)
    return lie.dq_from_quat_trans(q, t), q, t


def test_dq_pose_action_matches_homogeneous_matrix():
    rng = np.random.default_rng(16)
    zeta, q, t = random_pose(rng)
    rot = lie.quat_to_matrix(q)
    pts = rng.standard_normal((1000, 3)) * 50.0
    for p in pts:
        np.testing.assert_allclose(lie.dq_act_point(zeta, p), rot @ p + t,
                                    atol=1e-9)


def test_dq_compose_matches_matrix_compose():
    rng = np.random.default_rng(17)
    z1, q1, t1 = random_pose(rng)
    z2, q2, t2 = random_pose(rng)
    z12 = lie.dq_mul(z1, z2)
    p = rng.standard_normal(3)
    m1 = lie.quat_to_matrix(q1)
    m2 = lie.quat_to_matrix(q2)
    np.testing.assert_allclose(lie.dq_act_point(z12, p),
                               m1 @ (m2 @ p + t2) + t1, atol=1e-9)


def test_dq_inverse():
    rng = np.random.default_rng(18)
    zeta, _, _ = random_pose(rng)
    ident = lie.dq_mul(zeta, lie.dq_inverse(zeta))
    np.testing.assert_allclose(ident, lie.dq_identity(), atol=1e-12)


def test_dq_constraints_after_normalize():
    rng = np.random.default_rng(19)
    zeta, _, _ = random_pose(rng)
    zeta = zeta + rng.standard_normal(8) * 1e-8
    zeta = lie.dq_normalize(zeta)
    assert lie.dq_constraint_error(zeta) < 1e-10


def test_se3_exp_log_round_trip():
    rng = np.random.default_rng(20)
    for _ in range(20):
        tau = np.concatenate([rng.standard_normal(3) * 10.0,
                              rng.uniform(-1.0, 1.0, 3)])
        np.testing.assert_allclose(lie.log_se3(lie.exp_se3(tau)), tau, atol=1e-9)


def test_se3_plus_pure_translation():
    zeta = lie.dq_identity()
    zeta = lie.se3_plus(zeta, [1.0, 2.0, 3.0, 0.0, 0.0, 0.0])
    _, t = lie.dq_to_quat_trans(zeta)
    np.testing.assert_allclose(t, [1.0, 2.0, 3.0], atol=1e-14)
