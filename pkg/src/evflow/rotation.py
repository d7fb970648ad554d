"""Rotation utilities on SO(3): skew operators, closed-form log/exp, quaternions.

Quaternions follow the Hamilton convention with (x, y, z, w) ordering, w last.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError


def skew(omega) -> np.ndarray:
    """Map a 3-vector to the corresponding skew-symmetric 3x3 matrix."""
    wx, wy, wz = np.asarray(omega, dtype=float)
    return np.array([[0.0, -wz, wy],
                     [wz, 0.0, -wx],
                     [-wy, wx, 0.0]])


def unskew(m, tol: float = 1e-9) -> np.ndarray:
    """Inverse of skew. Raises DataError if m is not antisymmetric within tol."""
    m = np.asarray(m, dtype=float)
    if m.shape != (3, 3) or np.max(np.abs(m + m.T)) > tol:
        raise DataError("matrix is not antisymmetric within tolerance")
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def _check_special_orthogonal(r: np.ndarray, tol: float = 1e-6) -> None:
    if r.shape != (3, 3):
        raise DataError("rotation must be a 3x3 matrix")
    if np.max(np.abs(r.T @ r - np.eye(3))) > tol or abs(np.linalg.det(r) - 1.0) > tol:
        raise DataError("matrix is not special orthogonal")


def rotation_log(r) -> np.ndarray:
    """Rotation vector omega with skew(omega) = logm(R), via Rodrigues inversion.

    The rotation angle must stay below pi - 1e-6; at pi the axis is ambiguous
    and a DataError is raised.
    """
    r = np.asarray(r, dtype=float)
    _check_special_orthogonal(r)
    cos_theta = np.clip((np.trace(r) - 1.0) / 2.0, -1.0, 1.0)
    theta = float(np.arccos(cos_theta))
    if theta >= np.pi - 1e-6:
        raise DataError("rotation angle too close to pi; axis is ambiguous")
    # omega = theta / (2 sin theta) * vee(R - R^T); series expansion near zero.
    if theta < 1e-5:
        factor = 0.5 + theta * theta / 12.0
    else:
        factor = 0.5 * theta / np.sin(theta)
    d = r - r.T
    return factor * np.array([d[2, 1], d[0, 2], d[1, 0]])


def rotation_exp(omega) -> np.ndarray:
    """Rodrigues formula: the rotation matrix exp(skew(omega))."""
    omega = np.asarray(omega, dtype=float)
    theta = float(np.linalg.norm(omega))
    k = skew(omega)
    if theta < 1e-8:
        return np.eye(3) + k + 0.5 * (k @ k)
    k = k / theta
    return np.eye(3) + np.sin(theta) * k + (1.0 - np.cos(theta)) * (k @ k)


def quaternion_to_rotation(q) -> np.ndarray:
    """Rotation matrix for a quaternion (x, y, z, w).

    Tolerates small deviations from unit norm; the result is scaled by 2/|q|^2
    so near-unit quaternions map to proper rotations.
    """
    x, y, z, w = np.asarray(q, dtype=float)
    n = x * x + y * y + z * z + w * w
    if n <= 0.0 or not np.isfinite(n):
        raise DataError("quaternion norm must be positive and finite")
    s = 2.0 / n
    xs, ys, zs = x * s, y * s, z * s
    wx, wy, wz = w * xs, w * ys, w * zs
    xx, xy, xz = x * xs, x * ys, x * zs
    yy, yz, zz = y * ys, y * zs, z * zs
    return np.array([
        [1.0 - (yy + zz), xy - wz, xz + wy],
        [xy + wz, 1.0 - (xx + zz), yz - wx],
        [xz - wy, yz + wx, 1.0 - (xx + yy)],
    ])


def rotation_to_quaternion(r) -> np.ndarray:
    """Unit quaternion (x, y, z, w) for a rotation matrix, Shepperd's method."""
    r = np.asarray(r, dtype=float)
    _check_special_orthogonal(r)
    if r[2, 2] < 0.0:
        if r[0, 0] > r[1, 1]:
            t = 1.0 + r[0, 0] - r[1, 1] - r[2, 2]
            q = np.array([t, r[0, 1] + r[1, 0], r[2, 0] + r[0, 2], r[2, 1] - r[1, 2]])
        else:
            t = 1.0 - r[0, 0] + r[1, 1] - r[2, 2]
            q = np.array([r[0, 1] + r[1, 0], t, r[1, 2] + r[2, 1], r[0, 2] - r[2, 0]])
    else:
        if r[0, 0] < -r[1, 1]:
            t = 1.0 - r[0, 0] - r[1, 1] + r[2, 2]
            q = np.array([r[2, 0] + r[0, 2], r[1, 2] + r[2, 1], t, r[1, 0] - r[0, 1]])
        else:
            t = 1.0 + r[0, 0] + r[1, 1] + r[2, 2]
            q = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1], t])
    return q * (0.5 / np.sqrt(t))
