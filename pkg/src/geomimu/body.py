"""Body models and motion sequences: loading, validation, resampling, posing.

A body is a kinematic tree of S rigid segments plus an optional skinned
template mesh. Skin weights bind vertices to skeleton joints; each segment
owns one or more joints (identity mapping in the common case). Motion gives
per-segment global positions and orientations per frame.
"""

from dataclasses import dataclass, field

import numpy as np

from . import formats
from .rotations import quat_normalize, quat_slerp, quat_to_matrix

# 23-segment full-body tree in mocap-suit convention, pelvis-rooted:
# trunk chain, neck/head, two arm chains off the upper trunk, two leg chains
# off the pelvis.
DEFAULT_SEGMENT_NAMES = (
    "Pelvis", "L5", "L3", "T12", "T8", "Neck", "Head",
    "RightShoulder", "RightUpperArm", "RightForearm", "RightHand",
    "LeftShoulder", "LeftUpperArm", "LeftForearm", "LeftHand",
    "RightUpperLeg", "RightLowerLeg", "RightFoot", "RightToe",
    "LeftUpperLeg", "LeftLowerLeg", "LeftFoot", "LeftToe",
)
DEFAULT_PARENT_INDEX = (-1, 0, 1, 2, 3, 4, 5, 4, 7, 8, 9, 4, 11, 12, 13, 0, 15, 16, 17, 0, 19, 20, 21)


class BodyError(ValueError):
    pass


@dataclass(frozen=True)
class BodyModel:
    """Kinematic tree + optional skinned template mesh.

    weight_vertex/weight_joint/weight_value hold the sparse skinning triples;
    segment_to_joints maps each segment to the joints it owns.
    """

    segment_names: tuple
    parent_index: np.ndarray  # (S,) int64, -1 at the root
    segment_to_joints: tuple  # per segment, tuple of joint indices
    rest_vertices: np.ndarray | None = None  # (V, 3) float64
    faces: np.ndarray | None = None  # (nF, 3) int64, CCW from outside
    weight_vertex: np.ndarray | None = None  # (n,) int64
    weight_joint: np.ndarray | None = None  # (n,) int64
    weight_value: np.ndarray | None = None  # (n,) float64
    bind_positions: np.ndarray | None = None  # (S, 3) float64
    bind_orientations: np.ndarray | None = None  # (S, 4) float64
    winding: str = "ccw"

    @property
    def segment_count(self) -> int:
        return len(self.segment_names)

    @property
    def vertex_count(self) -> int:
        return 0 if self.rest_vertices is None else self.rest_vertices.shape[0]

    @property
    def joint_count(self) -> int:
        n = max((j for js in self.segment_to_joints for j in js), default=-1) + 1
        if self.weight_joint is not None and len(self.weight_joint):
            n = max(n, int(self.weight_joint.max()) + 1)
        return n

    def joint_to_segment(self) -> dict:
        out = {}
        for s, js in enumerate(self.segment_to_joints):
            for j in js:
                out[j] = s
        return out

    def vertex_influences(self, vertex: int):
        """(joint, weight) pairs of one vertex, weight descending, joint ascending on ties."""
        if self.weight_vertex is None:
            raise BodyError("body has no skin weights")
        sel = self.weight_vertex == vertex
        joints = self.weight_joint[sel]
        values = self.weight_value[sel]
        order = np.lexsort((joints, -values))
        return list(zip(joints[order].tolist(), values[order].tolist()))

    def segment_weight_matrix(self) -> np.ndarray:
        """Dense (V, S) matrix of per-segment weights (joint weights summed)."""
        if self.weight_vertex is None:
            raise BodyError("body has no skin weights")
        j2s = self.joint_to_segment()
        W = np.zeros((self.vertex_count, self.segment_count), dtype=np.float64)
        for v, j, w in zip(self.weight_vertex, self.weight_joint, self.weight_value):
            s = j2s.get(int(j))
            if s is None:
                raise BodyError(f"skin weight references joint {int(j)} owned by no segment")
            W[int(v), s] += float(w)
        return W


@dataclass(frozen=True)
class MotionSequence:
    """Per-segment global trajectories; orientations are unit w-first quaternions."""

    rate: float
    positions: np.ndarray  # (F, S, 3) float64
    orientations: np.ndarray  # (F, S, 4) float64, unit, w >= 0
    posed_vertices: np.ndarray | None = None  # (F, V, 3) float64

    @property
    def frame_count(self) -> int:
        return self.positions.shape[0]

    @property
    def segment_count(self) -> int:
        return self.positions.shape[1]

    def rotation_matrices(self) -> np.ndarray:
        """(F, S, 3, 3) rotation matrices of the orientation quaternions."""
        return quat_to_matrix(self.orientations)


def _validate_tree(parent_index: np.ndarray) -> None:
    S = len(parent_index)
    roots = np.flatnonzero(parent_index < 0)
    if len(roots) != 1:
        raise BodyError(f"kinematic graph must have exactly one root, found {len(roots)}")
    for s in range(S):
        seen = set()
        cur = s
        while parent_index[cur] >= 0:
            if cur in seen:
                raise BodyError("kinematic graph is not a tree")
            seen.add(cur)
            cur = int(parent_index[cur])
            if cur >= S:
                raise BodyError(f"parent index {cur} out of range")


def _validate_body(body: BodyModel) -> None:
    _validate_tree(body.parent_index)
    if body.faces is not None and body.faces.size:
        if body.rest_vertices is None:
            raise BodyError("faces present without rest vertices")
        if int(body.faces.max()) >= body.vertex_count:
            raise BodyError("face index out of range")
        if int(body.faces.min()) < 0:
            raise BodyError("negative face index")
    if body.weight_vertex is not None and len(body.weight_vertex):
        if int(body.weight_vertex.max()) >= body.vertex_count:
            raise BodyError("skin weight vertex index out of range")
        sums = np.zeros(body.vertex_count, dtype=np.float64)
        np.add.at(sums, body.weight_vertex, body.weight_value)
        bad = np.flatnonzero(np.abs(sums - 1.0) > 1e-6)
        if len(bad):
            raise BodyError(
                f"skin weights of vertex {int(bad[0])} sum to {sums[bad[0]]:.8f}, expected 1"
            )
        if np.any(body.weight_value < 0.0) or np.any(body.weight_value > 1.0 + 1e-9):
            raise BodyError("skin weight outside [0, 1]")


def load_motion_container(path) -> tuple:
    """Read a GMC1 file into validated (BodyModel, MotionSequence).

    Quaternions are normalized and sign-canonicalized here; all structural
    invariants (single-root tree, weight sums, face index bounds) are
    enforced with distinct diagnostics.
    """
    raw = formats.read_gmc1(path)
    S = len(raw["segment_names"])
    parent = np.asarray(raw["parent_index"], dtype=np.int64)

    sw = raw["skin_weights"]
    weight_vertex = weight_joint = weight_value = None
    if sw is not None:
        weight_vertex = sw["vertex"].astype(np.int64)
        weight_joint = sw["joint"].astype(np.int64)
        weight_value = sw["weight"].astype(np.float64)

    bind_positions = bind_orientations = None
    if raw["bind_pose"] is not None:
        bp = raw["bind_pose"].astype(np.float64)
        bind_positions = bp[:, :3].copy()
        bind_orientations = quat_normalize(bp[:, 3:])

    body = BodyModel(
        segment_names=tuple(raw["segment_names"]),
        parent_index=parent,
        segment_to_joints=tuple(tuple(js) for js in raw["segment_to_joints"]),
        rest_vertices=None if raw["rest_vertices"] is None else raw["rest_vertices"].astype(np.float64),
        faces=None if raw["faces"] is None else raw["faces"].astype(np.int64),
        weight_vertex=weight_vertex,
        weight_joint=weight_joint,
        weight_value=weight_value,
        bind_positions=bind_positions,
        bind_orientations=bind_orientations,
        winding=raw["winding"],
    )
    _validate_body(body)

    positions = raw["positions"].astype(np.float64)
    if positions.shape[0] < 3:
        raise BodyError("motion needs at least 3 frames")
    if raw["rate"] <= 0:
        raise BodyError("rate must be positive")
    norms = np.linalg.norm(raw["orientations"].astype(np.float64), axis=-1)
    if np.any(norms == 0.0):
        raise BodyError("zero-norm orientation quaternion")
    motion = MotionSequence(
        rate=raw["rate"],
        positions=positions,
        orientations=quat_normalize(raw["orientations"].astype(np.float64)),
        posed_vertices=None
        if raw["posed_vertices"] is None
        else raw["posed_vertices"].astype(np.float64),
    )
    if motion.segment_count != S:
        raise BodyError("motion segment count does not match body")
    return body, motion


def kinematic_neighbors(body: BodyModel, segment: int):
    """(parent or None, children in ascending index order)."""
    S = body.segment_count
    if not 0 <= segment < S:
        raise BodyError(f"segment index {segment} out of range")
    p = int(body.parent_index[segment])
    children = [int(c) for c in np.flatnonzero(body.parent_index == segment)]
    return (None if p < 0 else p), children


def resample_motion(motion: MotionSequence, target_rate: float) -> MotionSequence:
    """Resample to target_rate: positions lerped, orientations slerped.

    Output frame k sits at source index k * rate/target; indices that land
    exactly on a source frame copy it bitwise, which makes resampling at the
    native rate the identity. Frame count covers the same time span:
    floor((F-1) * target/rate) + 1, with a hair of slack against float
    droop on exact ratios.
    """
    if target_rate <= 0:
        raise BodyError("target rate must be positive")
    F = motion.frame_count
    if F < 2:
        raise BodyError("cannot resample a single frame")
    S = motion.segment_count
    F_out = int(np.floor((F - 1) * (target_rate / motion.rate) + 1e-9)) + 1
    step = motion.rate / target_rate
    positions = np.empty((F_out, S, 3), dtype=np.float64)
    orientations = np.empty((F_out, S, 4), dtype=np.float64)
    for k in range(F_out):
        s = min(k * step, float(F - 1))
        i = min(int(np.floor(s)), F - 2)
        u = s - i
        if u == 0.0:
            positions[k] = motion.positions[i]
            orientations[k] = motion.orientations[i]
            continue
        positions[k] = (1.0 - u) * motion.positions[i] + u * motion.positions[i + 1]
        for seg in range(S):
            orientations[k, seg] = quat_slerp(
                motion.orientations[i, seg], motion.orientations[i + 1, seg], u
            )
    return MotionSequence(
        rate=float(target_rate),
        positions=positions,
        orientations=quat_normalize(orientations),
        posed_vertices=None,
    )


def _bind_pose(body: BodyModel, motion: MotionSequence):
    if body.bind_positions is not None:
        return body.bind_positions, body.bind_orientations
    return motion.positions[0], motion.orientations[0]


def lbs_affines(body: BodyModel, motion: MotionSequence, frames=None):
    """Per-frame, per-segment affine maps (A, b) taking rest space to pose.

    A_s = R_s(t) R_s(bind)^T and b_s = p_s(t) - A_s p_s(bind), so the
    identity pose maps every vertex to itself exactly.
    """
    bind_p, bind_q = _bind_pose(body, motion)
    R_bind = quat_to_matrix(bind_q)  # (S, 3, 3)
    if frames is None:
        frames = np.arange(motion.frame_count)
    frames = np.atleast_1d(np.asarray(frames, dtype=np.int64))
    quats = motion.orientations[frames]
    R_t = quat_to_matrix(quats)  # (f, S, 3, 3)
    A = np.einsum("fsij,skj->fsik", R_t, R_bind)
    # A pose bitwise equal to the bind pose must be the exact identity, not
    # R R^T rounded; patch before deriving b so b comes out exactly zero too.
    same = np.all(quats == bind_q[None, :, :], axis=-1)
    A[same] = np.eye(3)
    b = motion.positions[frames] - np.einsum("fsij,sj->fsi", A, bind_p)
    return A, b


def pose_mesh_lbs(body: BodyModel, motion: MotionSequence, frame: int) -> np.ndarray:
    """Skin the template mesh at one frame by blending segment transforms."""
    if body.rest_vertices is None or body.weight_vertex is None:
        raise BodyError("posing needs rest vertices and skin weights")
    if not 0 <= frame < motion.frame_count:
        raise BodyError(f"frame {frame} out of range")
    from ._kernels import lbs_transform

    W = body.segment_weight_matrix()  # (V, S)
    # Pack the (at most S) influences per vertex into fixed-width columns.
    m = max(int((W != 0).sum(axis=1).max()), 1)
    V = body.vertex_count
    widx = np.zeros((V, m), dtype=np.int64)
    wval = np.zeros((V, m), dtype=np.float64)
    for v in range(V):
        nz = np.flatnonzero(W[v])
        widx[v, : len(nz)] = nz
        wval[v, : len(nz)] = W[v, nz]
    A, b = lbs_affines(body, motion, frames=[frame])
    return lbs_transform(body.rest_vertices, wval, widx, A, b)[0]


def posed_vertices_all(body: BodyModel, motion: MotionSequence) -> np.ndarray:
    """(F, V, 3) posed mesh: stored vertices when present, otherwise skinned."""
    if motion.posed_vertices is not None:
        return motion.posed_vertices
    if body.rest_vertices is None or body.weight_vertex is None:
        raise BodyError("posing needs rest vertices and skin weights")
    from ._kernels import lbs_transform

    W = body.segment_weight_matrix()
    m = max(int((W != 0).sum(axis=1).max()), 1)
    V = body.vertex_count
    widx = np.zeros((V, m), dtype=np.int64)
    wval = np.zeros((V, m), dtype=np.float64)
    for v in range(V):
        nz = np.flatnonzero(W[v])
        widx[v, : len(nz)] = nz
        wval[v, : len(nz)] = W[v, nz]
    A, b = lbs_affines(body, motion)
    return lbs_transform(body.rest_vertices, wval, widx, A, b)
