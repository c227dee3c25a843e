"""Rotation and rigid-transform primitives.

Quaternions are stored in wxyz order everywhere and kept unit-norm. Rotations
can also travel as a continuous 6-D encoding (the first two columns of the
rotation matrix, column-major), which decodes back to an exactly orthonormal
matrix via Gram-Schmidt. All array functions broadcast over leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Gravity points down; only the direction enters any observation.
GRAVITY_DIRECTION = np.array([0.0, 0.0, -1.0])

UNIT_TOL = 1e-6
_EPS = 1e-12


def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    norm = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(norm < _EPS):
        raise ValueError("cannot normalize a zero quaternion")
    return q / norm


def quat_canonical(q: np.ndarray) -> np.ndarray:
    """Pick the double-cover representative with w >= 0.

    Never applied implicitly by the other operations.
    """
    q = np.asarray(q, dtype=float)
    return np.where(q[..., :1] < 0.0, -q, q)


def _check_unit(q: np.ndarray, tol: float = UNIT_TOL) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    err = np.abs(np.linalg.norm(q, axis=-1) - 1.0)
    if np.any(err > tol):
        raise ValueError(f"quaternion norm off unit by {float(np.max(err)):.3e} (tol {tol:.0e})")
    return q


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    aw, ax, ay, az = (a[..., i] for i in range(4))
    bw, bx, by, bz = (b[..., i] for i in range(4))
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vector(s) v by quaternion(s) q."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    u = q[..., 1:]
    w = q[..., :1]
    t = 2.0 * np.cross(u, v)
    return v + w * t + np.cross(u, t)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Unit quaternion(s) to rotation matrix(es); rejects non-unit input."""
    q = _check_unit(q)
    q = quat_normalize(q)
    w, x, y, z = (q[..., i] for i in range(4))
    m = np.empty(q.shape[:-1] + (3, 3))
    m[..., 0, 0] = 1.0 - 2.0 * (y * y + z * z)
    m[..., 0, 1] = 2.0 * (x * y - w * z)
    m[..., 0, 2] = 2.0 * (x * z + w * y)
    m[..., 1, 0] = 2.0 * (x * y + w * z)
    m[..., 1, 1] = 1.0 - 2.0 * (x * x + z * z)
    m[..., 1, 2] = 2.0 * (y * z - w * x)
    m[..., 2, 0] = 2.0 * (x * z - w * y)
    m[..., 2, 1] = 2.0 * (y * z + w * x)
    m[..., 2, 2] = 1.0 - 2.0 * (x * x + y * y)
    return m


def matrix_to_quat(m: np.ndarray) -> np.ndarray:
    """Rotation matrix(es) to unit quaternion(s), wxyz.

    Branch selection follows Shepperd's method for numerical stability; the
    returned sign is not canonicalized.
    """
    m = np.asarray(m, dtype=float)
    batch = m.shape[:-2]
    m = m.reshape((-1, 3, 3))
    out = np.empty((m.shape[0], 4))
    trace = m[:, 0, 0] + m[:, 1, 1] + m[:, 2, 2]
    choice = np.argmax(
        np.stack([trace, m[:, 0, 0], m[:, 1, 1], m[:, 2, 2]], axis=-1), axis=-1
    )
    for i in range(m.shape[0]):
        r = m[i]
        c = choice[i]
        if c == 0:
            s = np.sqrt(trace[i] + 1.0) * 2.0
            out[i] = [0.25 * s, (r[2, 1] - r[1, 2]) / s,
                      (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s]
        elif c == 1:
            s = np.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2.0
            out[i] = [(r[2, 1] - r[1, 2]) / s, 0.25 * s,
                      (r[0, 1] + r[1, 0]) / s, (r[0, 2] + r[2, 0]) / s]
        elif c == 2:
            s = np.sqrt(1.0 - r[0, 0] + r[1, 1] - r[2, 2]) * 2.0
            out[i] = [(r[0, 2] - r[2, 0]) / s, (r[0, 1] + r[1, 0]) / s,
                      0.25 * s, (r[1, 2] + r[2, 1]) / s]
        else:
            s = np.sqrt(1.0 - r[0, 0] - r[1, 1] + r[2, 2]) * 2.0
            out[i] = [(r[1, 0] - r[0, 1]) / s, (r[0, 2] + r[2, 0]) / s,
                      (r[1, 2] + r[2, 1]) / s, 0.25 * s]
    out = quat_normalize(out)
    return out.reshape(batch + (4,))


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(axis)
    if norm < _EPS:
        raise ValueError("axis must be non-zero")
    half = 0.5 * angle
    return np.concatenate([[np.cos(half)], np.sin(half) * axis / norm])


def quat_from_rotvec(v: np.ndarray) -> np.ndarray:
    """Exponential map: rotation vector (axis * angle) to quaternion."""
    v = np.asarray(v, dtype=float)
    angle = np.linalg.norm(v)
    if angle < 1e-10:
        # first-order expansion keeps the map smooth through zero
        q = np.concatenate([[1.0], 0.5 * v])
        return quat_normalize(q)
    return np.concatenate([[np.cos(0.5 * angle)], np.sin(0.5 * angle) * v / angle])


def quat_to_rotvec(q: np.ndarray) -> np.ndarray:
    """Logarithm map to the rotation vector with angle in [0, pi]."""
    q = quat_canonical(quat_normalize(q))
    vec = q[1:]
    sin_half = np.linalg.norm(vec)
    if sin_half < 1e-10:
        return 2.0 * vec
    angle = 2.0 * np.arctan2(sin_half, q[0])
    return angle * vec / sin_half


def quat_angle(q0: np.ndarray, q1: np.ndarray) -> float:
    """Geodesic rotation angle between two orientations, in [0, pi]."""
    rel = quat_mul(quat_conjugate(quat_normalize(q0)), quat_normalize(q1))
    return float(np.linalg.norm(quat_to_rotvec(rel)))


def rotation_log(r_from: np.ndarray, r_to: np.ndarray) -> np.ndarray:
    """Axis-angle vector of r_to @ r_from.T (world-frame orientation error)."""
    return quat_to_rotvec(matrix_to_quat(r_to @ r_from.T))


def slerp(q0: np.ndarray, q1: np.ndarray, t: float) -> np.ndarray:
    """Geodesic interpolation along the shorter arc; unit-norm output."""
    q0 = np.asarray(q0, dtype=float)
    q1 = np.asarray(q1, dtype=float)
    dot = float(np.dot(q0, q1))
    if dot < 0.0:
        q1 = -q1
        dot = -dot
    dot = min(dot, 1.0)
    angle = np.arccos(dot)
    if angle < 1e-6:
        return quat_normalize(q0 + t * (q1 - q0))
    s = np.sin(angle)
    return quat_normalize(
        (np.sin((1.0 - t) * angle) / s) * q0 + (np.sin(t * angle) / s) * q1
    )


def quat_yaw(q: np.ndarray) -> float:
    """Heading (z-rotation) of the orientation, ZYX convention."""
    w, x, y, z = (float(q[i]) for i in range(4))
    return float(np.arctan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z)))


def projected_gravity(q_root: np.ndarray) -> np.ndarray:
    """World down-direction expressed in the base frame: R(q)^T (0,0,-1)."""
    m = quat_to_matrix(q_root)
    return m.T @ GRAVITY_DIRECTION


def rot6d_encode(m: np.ndarray) -> np.ndarray:
    """First two columns of rotation matrix(es), packed column-major."""
    m = np.asarray(m, dtype=float)
    return np.concatenate([m[..., :, 0], m[..., :, 1]], axis=-1)


def rot6d_decode(v: np.ndarray) -> np.ndarray:
    """Gram-Schmidt a 6-D rotation encoding back to an orthonormal matrix.

    Raises ValueError on degenerate input (near-zero first column or
    near-parallel columns).
    """
    v = np.asarray(v, dtype=float)
    c0 = v[..., 0:3]
    c1 = v[..., 3:6]
    n0 = np.linalg.norm(c0, axis=-1, keepdims=True)
    if np.any(n0 < 1e-8):
        raise ValueError("degenerate 6-D rotation: first column near zero")
    a0 = c0 / n0
    proj = np.sum(a0 * c1, axis=-1, keepdims=True)
    res = c1 - proj * a0
    n1 = np.linalg.norm(res, axis=-1, keepdims=True)
    if np.any(n1 < 1e-8):
        raise ValueError("degenerate 6-D rotation: columns near parallel")
    a1 = res / n1
    a2 = np.cross(a0, a1)
    return np.stack([a0, a1, a2], axis=-1)


@dataclass(eq=False)
class Pose:
    """Rigid transform: translation in meters plus a wxyz unit quaternion.

    Value semantics; instances are treated as immutable.
    """

    translation: np.ndarray
    rotation: np.ndarray

    def __post_init__(self):
        self.translation = np.asarray(self.translation, dtype=float).reshape(3)
        self.rotation = quat_normalize(_check_unit(np.asarray(self.rotation, dtype=float).reshape(4)))

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.zeros(3), np.array([1.0, 0.0, 0.0, 0.0]))

    def compose(self, other: "Pose") -> "Pose":
        return Pose(
            self.translation + quat_rotate(self.rotation, other.translation),
            quat_mul(self.rotation, other.rotation),
        )

    def inverse(self) -> "Pose":
        q_inv = quat_conjugate(self.rotation)
        return Pose(-quat_rotate(q_inv, self.translation), q_inv)

    def transform_point(self, p: np.ndarray) -> np.ndarray:
        return self.translation + quat_rotate(self.rotation, np.asarray(p, dtype=float))

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = quat_to_matrix(self.rotation)
        m[:3, 3] = self.translation
        return m

    @staticmethod
    def from_matrix(m: np.ndarray) -> "Pose":
        m = np.asarray(m, dtype=float)
        return Pose(m[:3, 3], matrix_to_quat(m[:3, :3]))

    def copy(self) -> "Pose":
        return Pose(self.translation.copy(), self.rotation.copy())

    def isclose(self, other: "Pose", atol: float = 1e-9) -> bool:
        return (
            bool(np.all(np.abs(self.translation - other.translation) <= atol))
            and quat_angle(self.rotation, other.rotation) <= atol
        )


def pose_compose(a: Pose, b: Pose) -> Pose:
    return a.compose(b)


def pose_inverse(a: Pose) -> Pose:
    return a.inverse()
