"""Quaternion and rotation-matrix helpers shared across the package.

Conventions, used everywhere without exception:

* quaternions are Hamilton, scalar-first ``(w, x, y, z)``, right-handed;
* a unit quaternion acts on column vectors as ``v' = quat_to_matrix(q) @ v``;
* orientation quaternions are sign-canonicalized to ``w >= 0`` at ingestion;
* rotation vectors are axis * angle with angle in ``[0, pi]``.
"""

import numpy as np

# Norms within this tolerance of 1 are accepted as-is so that float32 data
# survives file round trips bit-for-bit; anything farther off is repaired.
UNIT_NORM_TOL = 1e-6


class RotationError(ValueError):
    pass


def quat_normalize(q: np.ndarray) -> np.ndarray:
    """Return unit, sign-canonical (w >= 0) quaternions.

    Accepts a single quaternion ``(4,)`` or an array ``(..., 4)``. Norms
    already within ``UNIT_NORM_TOL`` of 1 pass through unchanged, which keeps
    the operation idempotent at the bit level. Zero-norm input is rejected.
    """
    q = np.asarray(q, dtype=np.float64).copy()
    norms = np.linalg.norm(q, axis=-1)
    if np.any(norms == 0.0) or not np.all(np.isfinite(norms)):
        raise RotationError("zero-norm or non-finite quaternion")
    off = np.abs(norms - 1.0) > UNIT_NORM_TOL
    if np.any(off):
        q[off] = q[off] / norms[off][..., None]
    flip = q[..., 0] < 0.0
    q[flip] = -q[flip]
    return q


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Rotation matrix of a (batch of) unit quaternion(s): (..., 4) -> (..., 3, 3)."""
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    out = np.empty(q.shape[:-1] + (3, 3), dtype=np.float64)
    out[..., 0, 0] = 1.0 - 2.0 * (y * y + z * z)
    out[..., 0, 1] = 2.0 * (x * y - w * z)
    out[..., 0, 2] = 2.0 * (x * z + w * y)
    out[..., 1, 0] = 2.0 * (x * y + w * z)
    out[..., 1, 1] = 1.0 - 2.0 * (x * x + z * z)
    out[..., 1, 2] = 2.0 * (y * z - w * x)
    out[..., 2, 0] = 2.0 * (x * z - w * y)
    out[..., 2, 1] = 2.0 * (y * z + w * x)
    out[..., 2, 2] = 1.0 - 2.0 * (x * x + y * y)
    return out


def matrix_to_quat(R: np.ndarray) -> np.ndarray:
    """Unit quaternion (w >= 0) of a rotation matrix, stable in all trace regimes."""
    R = np.asarray(R, dtype=np.float64)
    single = R.ndim == 2
    R = R.reshape((-1, 3, 3))
    n = R.shape[0]
    q = np.empty((n, 4), dtype=np.float64)
    # Shepperd's method: pick the largest of (w2, x2, y2, z2) per matrix.
    tr = np.trace(R, axis1=1, axis2=2)
    cand = np.stack([tr, R[:, 0, 0], R[:, 1, 1], R[:, 2, 2]], axis=1)
    case = np.argmax(cand, axis=1)
    for i in range(n):
        m = R[i]
        c = case[i]
        if c == 0:
            s = np.sqrt(tr[i] + 1.0) * 2.0
            q[i] = [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        elif c == 1:
            s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
            q[i] = [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
        elif c == 2:
            s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
            q[i] = [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
        else:
            s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
            q[i] = [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
    norms = np.linalg.norm(q, axis=1, keepdims=True)
    q /= norms
    flip = q[:, 0] < 0.0
    q[flip] = -q[flip]
    return q[0] if single else q


def quat_to_rotvec(q: np.ndarray) -> np.ndarray:
    """Axis-angle vector of a unit quaternion; angle in [0, pi] for w >= 0."""
    q = np.asarray(q, dtype=np.float64)
    single = q.ndim == 1
    q = q.reshape((-1, 4))
    v = q[:, 1:]
    s = np.linalg.norm(v, axis=1)
    angle = 2.0 * np.arctan2(s, q[:, 0])
    out = np.empty_like(v)
    small = s < 1e-12
    # sin(theta/2) ~ theta/2 below the threshold, so axis*angle ~ 2*v.
    out[small] = 2.0 * v[small]
    ns = ~small
    out[ns] = v[ns] * (angle[ns] / s[ns])[:, None]
    return out[0] if single else out


def matrix_to_rotvec(R: np.ndarray) -> np.ndarray:
    return quat_to_rotvec(matrix_to_quat(R))


def rotation_angle(R: np.ndarray) -> np.ndarray:
    """Rotation angle(s) in [0, pi] of (batched) rotation matrices."""
    R = np.asarray(R, dtype=np.float64)
    tr = np.trace(R, axis1=-2, axis2=-1)
    return np.arccos(np.clip((tr - 1.0) / 2.0, -1.0, 1.0))


def quat_slerp(q0: np.ndarray, q1: np.ndarray, u: float) -> np.ndarray:
    """Spherical interpolation along the shorter arc; u in [0, 1].

    Endpoints are returned untouched at u == 0 / u == 1 so resampling at the
    original timestamps is an exact identity.
    """
    q0 = np.asarray(q0, dtype=np.float64)
    q1 = np.asarray(q1, dtype=np.float64)
    if u == 0.0:
        return q0.copy()
    if u == 1.0:
        return q1.copy()
    d = float(np.dot(q0, q1))
    if d < 0.0:
        q1 = -q1
        d = -d
    if d > 1.0 - 1e-12:
        out = (1.0 - u) * q0 + u * q1
        return out / np.linalg.norm(out)
    theta = np.arccos(min(d, 1.0))
    st = np.sin(theta)
    return (np.sin((1.0 - u) * theta) * q0 + np.sin(u * theta) * q1) / st


def rot_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def is_rotation(R: np.ndarray, tol: float = 1e-6) -> bool:
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        return False
    if np.abs(R @ R.T - np.eye(3)).max() > tol:
        return False
    return abs(np.linalg.det(R) - 1.0) <= tol


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation matrix (via a normalized random quaternion)."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    return quat_to_matrix(q)
