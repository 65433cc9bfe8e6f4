"""Rigid transforms: rotation matrix + translation, quaternion (w,x,y,z) on the wire."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

ORTHO_TOL = 1e-9
QUAT_REJECT_TOL = 1e-6
# drift below this is already unit to machine precision; renormalizing would
# only churn the last bits and break byte-identical save/load round-trips
QUAT_RENORM_TOL = 1e-12


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


def orthonormality_drift(rotation: np.ndarray) -> float:
    return float(np.linalg.norm(rotation.T @ rotation - np.eye(3)))


def orthonormalize(rotation: np.ndarray) -> np.ndarray:
    """Nearest rotation matrix (Frobenius) via SVD, det forced to +1."""
    u, _, vt = np.linalg.svd(rotation)
    r = u @ vt
    if np.linalg.det(r) < 0:
        u[:, -1] = -u[:, -1]
        r = u @ vt
    return r


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """SE(3) pose. Immutable; arrays are read-only copies."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64)
        if r.shape != (3, 3) or t.shape != (3,):
            raise ValueError(f"bad shapes: rotation {r.shape}, translation {t.shape}")
        if orthonormality_drift(r) > ORTHO_TOL or abs(np.linalg.det(r) - 1.0) > 1e-6:
            raise ValueError("rotation is not orthonormal with det +1 within 1e-9")
        object.__setattr__(self, "rotation", _readonly(r))
        object.__setattr__(self, "translation", _readonly(t))

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform()

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "RigidTransform":
        m = np.asarray(m, dtype=np.float64)
        return cls(m[:3, :3], m[:3, 3])

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    @classmethod
    def from_quaternion(cls, q, t=(0.0, 0.0, 0.0)) -> "RigidTransform":
        q = np.asarray(q, dtype=np.float64)
        out = cls(quaternion_to_matrix(q), t)
        norm = float(np.linalg.norm(q))
        if abs(norm - 1.0) > QUAT_RENORM_TOL:
            q = q / norm
        object.__setattr__(out, "_quat", _readonly(q))
        return out

    def quaternion(self) -> np.ndarray:
        """Unit quaternion (w,x,y,z). Quaternion-born poses return their source
        bits so serialization round-trips are stable."""
        q = getattr(self, "_quat", None)
        if q is None:
            q = _readonly(matrix_to_quaternion(self.rotation))
            object.__setattr__(self, "_quat", q)
        return q

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -(rt @ self.translation))

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return compose(self, other)

    def transform_point(self, p) -> np.ndarray:
        return self.rotation @ np.asarray(p, dtype=np.float64) + self.translation

    def allclose(self, other: "RigidTransform", atol: float = 1e-9) -> bool:
        return bool(
            np.allclose(self.rotation, other.rotation, atol=atol, rtol=0.0)
            and np.allclose(self.translation, other.translation, atol=atol, rtol=0.0)
        )

    def equal_bits(self, other: "RigidTransform") -> bool:
        return bool(
            np.array_equal(self.rotation, other.rotation)
            and np.array_equal(self.translation, other.translation)
        )

    def __repr__(self):
        t = np.array2string(self.translation, precision=4, suppress_small=True)
        return f"RigidTransform(t={t})"


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Pose applying b then a. Rotation re-orthonormalized when drift exceeds 1e-9."""
    r = a.rotation @ b.rotation
    if orthonormality_drift(r) > ORTHO_TOL:
        r = orthonormalize(r)
    return RigidTransform(r, a.rotation @ b.translation + a.translation)


def relative_pose(world_om: RigidTransform, world_obkg: RigidTransform) -> RigidTransform:
    """Pose of the manipulated object expressed in the background object's frame."""
    return compose(world_obkg.inverse(), world_om)


def rot_x(angle_rad: float) -> np.ndarray:
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle_rad: float) -> np.ndarray:
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle_rad: float) -> np.ndarray:
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def quaternion_to_matrix(q: np.ndarray) -> np.ndarray:
    """Unit quaternion (w,x,y,z) to rotation matrix.

    Rejects |norm - 1| > 1e-6 (capture bug), normalizes drift above 1e-12 and
    leaves smaller drift untouched so re-loading saved data is a no-op.
    """
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (4,):
        raise ValueError("quaternion must be (w, x, y, z)")
    norm = float(np.linalg.norm(q))
    if abs(norm - 1.0) > QUAT_REJECT_TOL:
        raise ValueError(f"quaternion norm {norm:.9f} deviates from 1 by more than {QUAT_REJECT_TOL}")
    if abs(norm - 1.0) > QUAT_RENORM_TOL:
        q = q / norm
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quaternion(r: np.ndarray) -> np.ndarray:
    """Rotation matrix to unit quaternion (w,x,y,z), w >= 0 canonical."""
    r = np.asarray(r, dtype=np.float64)
    tr = r[0, 0] + r[1, 1] + r[2, 2]
    if tr > 0:
        s = np.sqrt(tr + 1.0) * 2.0
        q = np.array([0.25 * s, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s])
    elif r[0, 0] >= r[1, 1] and r[0, 0] >= r[2, 2]:
        s = np.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2.0
        q = np.array([(r[2, 1] - r[1, 2]) / s, 0.25 * s, (r[0, 1] + r[1, 0]) / s, (r[0, 2] + r[2, 0]) / s])
    elif r[1, 1] >= r[2, 2]:
        s = np.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2]) * 2.0
        q = np.array([(r[0, 2] - r[2, 0]) / s, (r[0, 1] + r[1, 0]) / s, 0.25 * s, (r[1, 2] + r[2, 1]) / s])
    else:
        s = np.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1]) * 2.0
        q = np.array([(r[1, 0] - r[0, 1]) / s, (r[0, 2] + r[2, 0]) / s, (r[1, 2] + r[2, 1]) / s, 0.25 * s])
    if q[0] < 0:
        q = -q
    q /= np.linalg.norm(q)
    return q


def _wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    a = (a + np.pi) % (2.0 * np.pi) - np.pi
    if a == -np.pi:
        a = np.pi
    return float(a)


GIMBAL_TOL = 1e-6


def euler_xyz_intrinsic(r: np.ndarray) -> tuple[float, float, float]:
    """Decompose R = Rx(a) @ Ry(b) @ Rz(c) (intrinsic x-y-z), radians.

    Of the two solution branches (a, b, c) and (a+pi, pi-b, c+pi) the one with
    the smaller total |angle| is returned, so a pure 180-degree rotation about
    one axis decomposes onto that axis instead of splitting across the others.
    Near gimbal lock (|b| ~ 90 deg) the x rotation is absorbed into z and the
    event is logged.
    """
    r = np.asarray(r, dtype=np.float64)
    sb = float(np.clip(r[0, 2], -1.0, 1.0))
    b1 = float(np.arcsin(sb))
    if abs(abs(sb) - 1.0) < GIMBAL_TOL:
        log.debug("gimbal-degenerate euler decomposition; absorbing x into z")
        return 0.0, b1, float(np.arctan2(r[1, 0], r[1, 1]))
    a1 = float(np.arctan2(-r[1, 2], r[2, 2]))
    c1 = float(np.arctan2(-r[0, 1], r[0, 0]))
    a2 = _wrap_angle(a1 + np.pi)
    b2 = _wrap_angle(np.pi - b1)
    c2 = _wrap_angle(c1 + np.pi)
    if abs(a1) + abs(b1) + abs(c1) <= abs(a2) + abs(b2) + abs(c2):
        return a1, b1, c1
    return a2, b2, c2
