import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation, Slerp

from geomimu.rotations import (
    RotationError,
    is_rotation,
    matrix_to_quat,
    matrix_to_rotvec,
    quat_normalize,
    quat_slerp,
    quat_to_matrix,
    quat_to_rotvec,
    random_rotation,
    rot_x,
    rot_y,
    rot_z,
    rotation_angle,
)


def to_scipy(q):
    # w-first here, xyzw in scipy
    q = np.asarray(q)
    return Rotation.from_quat(np.concatenate([q[..., 1:], q[..., :1]], axis=-1))


quat_components = st.floats(-1.0, 1.0, allow_nan=False)


@st.composite
def raw_quats(draw):
    q = np.array([draw(quat_components) for _ in range(4)])
    if np.linalg.norm(q) < 1e-3:
        q = q + np.array([1.0, 0.0, 0.0, 0.0])
    return q


@settings(deadline=None)
@given(raw_quats())
def test_quat_matrix_round_trip(q):
    qn = quat_normalize(q)
    R = quat_to_matrix(qn)
    back = matrix_to_quat(R)
    # q and -q encode the same rotation; the decoder picks the w >= 0 branch
    assert np.allclose(back, qn, atol=1e-12) or np.allclose(back, -qn, atol=1e-12)
    assert back[0] >= 0.0


@settings(deadline=None)
@given(raw_quats())
def test_quat_to_matrix_matches_scipy(q):
    qn = quat_normalize(q)
    assert np.allclose(quat_to_matrix(qn), to_scipy(qn).as_matrix(), atol=1e-12)


def test_quat_normalize_gating_is_bitwise():
    # a quaternion already unit within 1e-6 must come back untouched
    q = np.array([0.5, 0.5, 0.5, 0.5])
    out = quat_normalize(q)
    assert out.tobytes() == q.tobytes()
    # w < 0 flips sign even when the norm is fine
    out = quat_normalize(-q)
    assert np.array_equal(out, q)


def test_quat_normalize_rejects_bad_input():
    with pytest.raises(RotationError):
        quat_normalize(np.zeros(4))
    with pytest.raises(RotationError):
        quat_normalize(np.array([np.nan, 0.0, 0.0, 0.0]))


def test_matrix_to_quat_covers_all_branches():
    # 180-degree turns about each axis exercise the off-trace branches
    for R in (rot_x(np.pi), rot_y(np.pi), rot_z(np.pi), np.eye(3)):
        q = matrix_to_quat(R)
        assert q[0] >= 0.0
        assert np.allclose(quat_to_matrix(q), R, atol=1e-12)


def test_batched_quat_to_matrix(rng):
    qs = np.stack([quat_normalize(rng.normal(size=4)) for _ in range(17)])
    Rs = quat_to_matrix(qs.reshape(17, 1, 4))
    assert Rs.shape == (17, 1, 3, 3)
    for i in range(17):
        assert np.allclose(Rs[i, 0], quat_to_matrix(qs[i]))


def test_rotation_angle_known_values():
    for theta in (0.0, 0.3, 1.0, np.pi / 2, np.pi - 1e-9):
        assert rotation_angle(rot_z(theta)) == pytest.approx(theta, abs=1e-7)


def test_rotvec_small_angle_and_zero():
    assert np.array_equal(quat_to_rotvec(np.array([1.0, 0.0, 0.0, 0.0])), np.zeros(3))
    tiny = 1e-9
    q = quat_normalize(np.array([np.cos(tiny / 2), np.sin(tiny / 2), 0.0, 0.0]))
    v = quat_to_rotvec(q)
    assert v[0] == pytest.approx(tiny, rel=1e-6)
    assert np.allclose(matrix_to_rotvec(rot_y(0.7)), [0.0, 0.7, 0.0], atol=1e-12)


@settings(deadline=None)
@given(st.floats(0.01, 0.99), st.integers(0, 2**31))
def test_slerp_matches_scipy(u, seed):
    rng = np.random.default_rng(seed)
    q0 = quat_normalize(rng.normal(size=4))
    q1 = quat_normalize(rng.normal(size=4))
    got = quat_slerp(q0, q1, u)
    ref = Slerp([0.0, 1.0], Rotation.concatenate([to_scipy(q0), to_scipy(q1)]))(u)
    # compare as rotations: sign convention may differ
    assert np.allclose(quat_to_matrix(got), ref.as_matrix(), atol=1e-9)


def test_slerp_endpoints_are_bitwise_copies(rng):
    q0 = quat_normalize(rng.normal(size=4))
    q1 = quat_normalize(rng.normal(size=4))
    assert quat_slerp(q0, q1, 0.0).tobytes() == q0.tobytes()
    assert quat_slerp(q0, q1, 1.0).tobytes() == q1.tobytes()


def test_slerp_takes_shortest_arc(rng):
    q0 = quat_normalize(rng.normal(size=4))
    q1 = quat_normalize(rng.normal(size=4))
    mid = quat_slerp(q0, q1, 0.5)
    # midpoint angle to either end is half the total angle
    R0, R1, Rm = quat_to_matrix(q0), quat_to_matrix(q1), quat_to_matrix(mid)
    total = rotation_angle(R0.T @ R1)
    assert rotation_angle(R0.T @ Rm) == pytest.approx(total / 2, abs=1e-9)
    assert rotation_angle(Rm.T @ R1) == pytest.approx(total / 2, abs=1e-9)


def test_slerp_near_parallel(rng):
    q0 = quat_normalize(rng.normal(size=4))
    q1 = quat_normalize(q0 + 1e-14 * rng.normal(size=4))
    mid = quat_slerp(q0, q1, 0.5)
    assert np.allclose(mid, q0, atol=1e-12)
    assert abs(np.linalg.norm(mid) - 1.0) < 1e-12


def test_axis_rotations_are_consistent():
    assert np.allclose(rot_x(np.pi / 2) @ [0, 1, 0], [0, 0, 1], atol=1e-15)
    assert np.allclose(rot_y(np.pi / 2) @ [0, 0, 1], [1, 0, 0], atol=1e-15)
    assert np.allclose(rot_z(np.pi / 2) @ [1, 0, 0], [0, 1, 0], atol=1e-15)


def test_is_rotation_rejects_reflections_and_scale():
    assert is_rotation(np.eye(3))
    assert not is_rotation(np.diag([1.0, 1.0, -1.0]))
    assert not is_rotation(2.0 * np.eye(3))


def test_random_rotation_is_uniform_ish(rng):
    Rs = [random_rotation(rng) for _ in range(200)]
    for R in Rs:
        assert is_rotation(R, tol=1e-9)
    # z-axis images should cover both hemispheres
    z = np.array([R[:, 2] for R in Rs])
    assert (z[:, 2] > 0).mean() == pytest.approx(0.5, abs=0.15)
