"""Rotation and rigid-motion algebra on unit quaternions and unit dual quaternions.

Conventions used throughout the simulator:

* quaternions are ``[w, x, y, z]`` numpy arrays; ``q_AB`` rotates coordinates
  from frame B into frame A, ``v_A = q_AB * v_B * conj(q_AB)``
* perturbations are local (body side): ``q (+) r = q * exp(r)``
* dual quaternions are ``[real(4), dual(4)]`` arrays with
  ``dual = 0.5 * t_spatial * real``, so the point action is ``R p + t``
* twists are ``[linear(3), angular(3)]``, expressed in the local frame
"""

from __future__ import annotations

import math

import numpy as np

Q_IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])

# unit-norm tolerance accepted on input checks
_NORM_TOL = 1e-9
# below this rotation angle the exp/log series expansions take over
_SMALL_ANGLE = 1e-8


def skew(v) -> np.ndarray:
    """Skew-symmetric (cross product) matrix of a 3-vector."""
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def _check_finite(q) -> None:
    if not np.all(np.isfinite(q)):
        raise ValueError("non-finite quaternion input")


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    _check_finite(q)
    return q / math.sqrt(q @ q)


def quat_mul(q1, q2) -> np.ndarray:
    """Raw Hamilton product, no renormalization."""
    w1, x1, y1, z1 = q1
    w2, x2, y2, z2 = q2
    return np.array([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ])


def compose(q1, q2) -> np.ndarray:
    """Quaternion product renormalized after the fact.

    Renormalizing every composition is cheap and keeps long composition
    chains (integration, filter resets) exactly on the manifold.
    """
    return quat_normalize(quat_mul(q1, q2))


def quat_conjugate(q) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


quat_inverse = quat_conjugate  # unit quaternions only


def rotate_vector(q, v) -> np.ndarray:
    """Rotation action q * v * conj(q) on a 3-vector."""
    w, x, y, z = q
    v0, v1, v2 = v
    # expanded double cross product; avoids small-array overhead
    t0 = 2.0 * (y * v2 - z * v1)
    t1 = 2.0 * (z * v0 - x * v2)
    t2 = 2.0 * (x * v1 - y * v0)
    return np.array([
        v0 + w * t0 + y * t2 - z * t1,
        v1 + w * t1 + z * t0 - x * t2,
        v2 + w * t2 + x * t1 - y * t0,
    ])


def rotate_vector_inverse(q, v) -> np.ndarray:
    return rotate_vector(quat_conjugate(q), v)


def quat_to_matrix(q) -> np.ndarray:
    """Rotation matrix R with R v = rotate_vector(q, v).

    For SO(3) this doubles as the adjoint of q.
    """
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


adjoint = quat_to_matrix


def quat_from_matrix(m) -> np.ndarray:
    """Shepperd's method, numerically stable for all rotations."""
    m = np.asarray(m, dtype=float)
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0.0:
        s = math.sqrt(tr + 1.0) * 2.0
        q = np.array([0.25 * s,
                      (m[2, 1] - m[1, 2]) / s,
                      (m[0, 2] - m[2, 0]) / s,
                      (m[1, 0] - m[0, 1]) / s])
    elif m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        q = np.array([(m[2, 1] - m[1, 2]) / s,
                      0.25 * s,
                      (m[0, 1] + m[1, 0]) / s,
                      (m[0, 2] + m[2, 0]) / s])
    elif m[1, 1] >= m[2, 2]:
        s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        q = np.array([(m[0, 2] - m[2, 0]) / s,
                      (m[0, 1] + m[1, 0]) / s,
                      0.25 * s,
                      (m[1, 2] + m[2, 1]) / s])
    else:
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        q = np.array([(m[1, 0] - m[0, 1]) / s,
                      (m[0, 2] + m[2, 0]) / s,
                      (m[1, 2] + m[2, 1]) / s,
                      0.25 * s])
    return quat_normalize(q)


def exp_so3(r) -> np.ndarray:
    """Rotation vector (radians) to unit quaternion."""
    r = np.asarray(r, dtype=float)
    angle = math.sqrt(r @ r)
    if angle < _SMALL_ANGLE:
        # sin(a/2)/a ~ 1/2 - a^2/48
        k = 0.5 - angle * angle / 48.0
        q = np.array([1.0 - angle * angle / 8.0, k * r[0], k * r[1], k * r[2]])
        return quat_normalize(q)
    half = 0.5 * angle
    k = math.sin(half) / angle
    return np.array([math.cos(half), k * r[0], k * r[1], k * r[2]])


def log_so3(q) -> np.ndarray:
    """Unit quaternion to rotation vector with angle in [0, pi]."""
    w, x, y, z = q
    if w < 0.0:  # double cover: pick the short representative
        w, x, y, z = -w, -x, -y, -z
    norm_v = math.sqrt(x * x + y * y + z * z)
    if norm_v < _SMALL_ANGLE:
        k = 2.0 / w * (1.0 + norm_v * norm_v / (3.0 * w * w))
        return k * np.array([x, y, z])
    angle = 2.0 * math.atan2(norm_v, w)
    return (angle / norm_v) * np.array([x, y, z])


def rotation_angle(q) -> float:
    w = abs(q[0])
    v = math.sqrt(q[1] ** 2 + q[2] ** 2 + q[3] ** 2)
    return 2.0 * math.atan2(v, w)


def so3_plus(q, r) -> np.ndarray:
    """Local (body) plus: q (+) r = q * exp(r)."""
    return compose(q, exp_so3(r))


def so3_minus(q2, q1) -> np.ndarray:
    """Local minus: the rotation vector r with q2 == q1 (+) r."""
    return log_so3(quat_mul(quat_conjugate(q1), q2))


def so3_minus_flagged(q2, q1, ambiguity_margin: float = 1e-6):
    """so3_minus plus an ambiguity flag raised when the angle is within
    ``ambiguity_margin`` of pi (where the sign of r is no longer unique)."""
    r = so3_minus(q2, q1)
    angle = math.sqrt(r @ r)
    return r, bool(angle >= math.pi - ambiguity_margin)


def quat_r1(angle: float) -> np.ndarray:
    h = 0.5 * angle
    return np.array([math.cos(h), math.sin(h), 0.0, 0.0])


def quat_r2(angle: float) -> np.ndarray:
    h = 0.5 * angle
    return np.array([math.cos(h), 0.0, math.sin(h), 0.0])


def quat_r3(angle: float) -> np.ndarray:
    h = 0.5 * angle
    return np.array([math.cos(h), 0.0, 0.0, math.sin(h)])


def euler_to_quat(yaw: float, pitch: float, bank: float) -> np.ndarray:
    """3-2-1 Euler sequence (yaw about z, pitch about y', bank about x'')."""
    return quat_mul(quat_mul(quat_r3(yaw), quat_r2(pitch)), quat_r1(bank))


def quat_to_euler(q):
    """Inverse of euler_to_quat; at gimbal lock bank is folded into yaw.

    Returns (yaw, pitch, bank) with pitch in [-pi/2, pi/2].
    """
    w, x, y, z = q
    sp = 2.0 * (w * y - z * x)
    if abs(sp) >= 1.0 - 1e-12:
        # pitch at +-90 deg: only yaw -+ bank observable; fold bank into yaw
        pitch = math.copysign(0.5 * math.pi, sp)
        yaw = math.atan2(math.sin(2.0 * math.atan2(z, w)),
                         math.cos(2.0 * math.atan2(z, w)))
        return yaw, pitch, 0.0
    pitch = math.asin(sp)
    yaw = math.atan2(2.0 * (x * y + w * z), 1.0 - 2.0 * (y * y + z * z))
    bank = math.atan2(2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y))
    return yaw, pitch, bank


# ---------------------------------------------------------------------------
# Jacobians (all with respect to local perturbations, FD-validated in tests)
# ---------------------------------------------------------------------------

def jac_rotate_local(q, v) -> np.ndarray:
    """d/d(dr) of rotate(q (+) dr, v) at dr = 0, equals -R [v]x."""
    return -quat_to_matrix(q) @ skew(v)


def jac_rotate_inv_local(q, v) -> np.ndarray:
    """d/d(dr) of rotate_inv(q (+) dr, v) at dr = 0, equals [R^T v]x."""
    return skew(rotate_vector_inverse(q, v))


# on SO(3) the adjoint action coincides with the rotation action
jac_adjoint_inv_local = jac_rotate_inv_local


def right_jacobian_so3(r) -> np.ndarray:
    """Right Jacobian J_r of SO(3): exp(r + dr) ~ exp(r) exp(J_r dr)."""
    r = np.asarray(r, dtype=float)
    angle = math.sqrt(r @ r)
    rx = skew(r)
    if angle < _SMALL_ANGLE:
        return np.eye(3) - 0.5 * rx + rx @ rx / 6.0
    a2 = angle * angle
    return (np.eye(3)
            - (1.0 - math.cos(angle)) / a2 * rx
            + (angle - math.sin(angle)) / (a2 * angle) * rx @ rx)


def left_jacobian_so3(r) -> np.ndarray:
    return right_jacobian_so3(-np.asarray(r, dtype=float))


def jac_reset(dr) -> np.ndarray:
    """Covariance Jacobian of folding the local perturbation dr into q.

    With the perturbed attitude q (+) (dr + d), the residual perturbation
    after the fold q <- q (+) dr is J_r(dr) d; identity at dr = 0.
    """
    return right_jacobian_so3(dr)


# ---------------------------------------------------------------------------
# Unit dual quaternions (rigid motions)
# ---------------------------------------------------------------------------

def dq_from_quat_trans(q, t) -> np.ndarray:
    """Pose from attitude q and spatial-frame translation t."""
    tq = np.array([0.0, t[0], t[1], t[2]])
    return np.concatenate([q, 0.5 * quat_mul(tq, q)])


def dq_to_quat_trans(zeta):
    q = zeta[:4]
    t = 2.0 * quat_mul(zeta[4:], quat_conjugate(q))
    return q, t[1:]


def dq_identity() -> np.ndarray:
    return np.concatenate([Q_IDENTITY, np.zeros(4)])


def dq_mul(z1, z2) -> np.ndarray:
    r = quat_mul(z1[:4], z2[:4])
    d = quat_mul(z1[:4], z2[4:]) + quat_mul(z1[4:], z2[:4])
    return np.concatenate([r, d])


def dq_inverse(zeta) -> np.ndarray:
    return np.concatenate([quat_conjugate(zeta[:4]), quat_conjugate(zeta[4:])])


def dq_normalize(zeta) -> np.ndarray:
    """Renormalize the real part and re-impose real-dual orthogonality."""
    r = zeta[:4]
    d = zeta[4:]
    n = math.sqrt(r @ r)
    r = r / n
    d = d / n
    d = d - (d @ r) * r
    return np.concatenate([r, d])


def dq_act_point(zeta, p) -> np.ndarray:
    """Rigid-motion action R p + t."""
    q, t = dq_to_quat_trans(zeta)
    return rotate_vector(q, p) + t


def dq_act_vector(zeta, v) -> np.ndarray:
    """Free-vector action (rotation only)."""
    return rotate_vector(zeta[:4], v)


def exp_se3(tau) -> np.ndarray:
    """SE(3) exponential of a scaled twist [rho(3), theta(3)] to a pose."""
    tau = np.asarray(tau, dtype=float)
    rho, theta = tau[:3], tau[3:]
    q = exp_so3(theta)
    t = left_jacobian_so3(theta) @ rho
    return dq_from_quat_trans(q, t)


def log_se3(zeta) -> np.ndarray:
    q, t = dq_to_quat_trans(zeta)
    theta = log_so3(q)
    rho = np.linalg.solve(left_jacobian_so3(theta), t)
    return np.concatenate([rho, theta])


def se3_plus(zeta, twist_dt) -> np.ndarray:
    """Local plus: zeta (+) tau = zeta * exp(tau), renormalized."""
    return dq_normalize(dq_mul(zeta, exp_se3(twist_dt)))


def dq_constraint_error(zeta) -> float:
    """Max of |1 - ||real||| and the scale-free orthogonality residual."""
    r = zeta[:4]
    d = zeta[4:]
    ortho = abs(r @ d) / max(1.0, math.sqrt(d @ d))
    return max(abs(math.sqrt(r @ r) - 1.0), ortho)
