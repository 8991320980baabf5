"""Candidate sensor placements on the body surface.

A placement is a (segment, vertex) pair carrying a right-handed local frame
[t, b, n] built from the mesh normal and the segment's anatomical axis, plus
a rigid offset from the segment origin measured in the segment frame.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .body import BodyModel, MotionSequence, kinematic_neighbors, posed_vertices_all
from .rotations import quat_to_matrix

# Below this projection length the axis is treated as parallel to the normal
# and the tangent falls back to a flagged basis-vector choice.
DEGENERATE_EPS = 1e-8


class PlacementError(ValueError):
    pass


class PlacementWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PlacementCandidate:
    segment: int
    vertex: int
    surface_frame: np.ndarray  # 3x3, columns [t, b, n]
    offset: np.ndarray  # (3,) meters, segment frame
    degenerate: bool


@dataclass(frozen=True)
class SegmentSurface:
    segment: int
    candidate_vertices: tuple
    centroid: np.ndarray
    anatomical_axis: np.ndarray


def select_candidate_vertices(body: BodyModel) -> dict:
    """Map each segment to the vertices it may carry a sensor on.

    A vertex belongs to segment i iff one of i's joints is among the top two
    nonzero skinning influences of the vertex (weight descending, joint index
    ascending on ties). A vertex can land on at most two segments. Segments
    that end up with no vertices are dropped with a warning.
    """
    if body.weight_vertex is None:
        raise PlacementError("candidate selection needs skin weights")
    j2s = body.joint_to_segment()
    per_segment: dict = {s: [] for s in range(body.segment_count)}
    order = np.lexsort((body.weight_joint, -body.weight_value, body.weight_vertex))
    wv = body.weight_vertex[order]
    wj = body.weight_joint[order]
    ww = body.weight_value[order]
    n = len(wv)
    start = 0
    while start < n:
        v = wv[start]
        end = start
        while end < n and wv[end] == v:
            end += 1
        segs = set()
        taken = 0
        for k in range(start, end):
            if ww[k] == 0.0:
                continue
            segs.add(j2s[int(wj[k])])
            taken += 1
            if taken == 2:
                break
        for s in segs:
            per_segment[s].append(int(v))
        start = end
    result = {}
    for s in range(body.segment_count):
        if per_segment[s]:
            result[s] = sorted(per_segment[s])
        else:
            warnings.warn(
                f"segment {s} ({body.segment_names[s]}) has no candidate vertices",
                PlacementWarning,
                stacklevel=2,
            )
    return result


def _segment_vertex_weights(body: BodyModel, segment: int) -> np.ndarray:
    """Per-vertex summed skinning weight of the segment's joints, (V,)."""
    joints = set(body.segment_to_joints[segment])
    sums = np.zeros(body.vertex_count, dtype=np.float64)
    for v, j, w in zip(body.weight_vertex, body.weight_joint, body.weight_value):
        if int(j) in joints:
            sums[int(v)] += float(w)
    return sums


def segment_centroid(body: BodyModel, segment: int, candidate_vertices) -> np.ndarray:
    """Skinning-weighted mean of the candidate rest vertices."""
    verts = list(candidate_vertices)
    if not verts:
        raise PlacementError("empty candidate list")
    w = _segment_vertex_weights(body, segment)[verts]
    pts = body.rest_vertices[verts]
    total = w.sum()
    if total <= 0.0:
        return pts.mean(axis=0)
    return (w[:, None] * pts).sum(axis=0) / total


def anatomical_axis(body: BodyModel, centroids: dict, segment: int) -> np.ndarray:
    """Unit direction along the segment: toward the nearest child centroid,
    or away from the nearest ancestor centroid for leaves."""
    c_i = centroids.get(segment)
    if c_i is None:
        raise PlacementError(f"axis undefined for segment {segment}: no centroid")
    parent, children = kinematic_neighbors(body, segment)
    scored = sorted(
        (float(np.linalg.norm(centroids[ch] - c_i)), ch) for ch in children if ch in centroids
    )
    if scored:
        d = centroids[scored[0][1]] - c_i
    else:
        anc = parent
        while anc is not None and anc not in centroids:
            anc, _ = kinematic_neighbors(body, anc)
        if anc is None:
            raise PlacementError(f"axis undefined for segment {segment}")
        d = c_i - centroids[anc]
    norm = np.linalg.norm(d)
    if norm < 1e-12:
        raise PlacementError(f"axis undefined for segment {segment}: coincident centroids")
    return d / norm


def vertex_normal(body: BodyModel, vertex: int) -> np.ndarray:
    """Area-weighted mean of incident-face normals (unnormalized cross
    products carry twice the face area, so summing them is the weighting)."""
    if body.faces is None or body.faces.size == 0:
        raise PlacementError(f"vertex {vertex}: no incident faces")
    tri = body.faces[np.any(body.faces == vertex, axis=1)]
    if tri.shape[0] == 0:
        raise PlacementError(f"vertex {vertex}: no incident faces")
    v = body.rest_vertices
    fn = np.cross(v[tri[:, 1]] - v[tri[:, 0]], v[tri[:, 2]] - v[tri[:, 0]])
    if body.winding == "cw":
        fn = -fn
    total = fn.sum(axis=0)
    norm = np.linalg.norm(total)
    if norm < 1e-12:
        raise PlacementError(f"vertex {vertex}: incident faces cancel, normal undefined")
    return total / norm


def tangent_direction(normal: np.ndarray, axis: np.ndarray):
    """(unit tangent, degenerate flag): the axis projected onto the tangent
    plane, or a flagged basis-vector fallback when axis is parallel to the
    normal. Projected twice so the tangent is orthogonal to machine level
    even when the first projection is tiny."""
    n = np.asarray(normal, dtype=np.float64)
    u = np.asarray(axis, dtype=np.float64)
    candidates = [(u, False), (np.array([1.0, 0.0, 0.0]), True),
                  (np.array([0.0, 1.0, 0.0]), True), (np.array([0.0, 0.0, 1.0]), True)]
    for vec, flagged in candidates:
        w = vec - (vec @ n) * n
        nw = np.linalg.norm(w)
        if nw >= DEGENERATE_EPS:
            t = w / nw
            t = t - (t @ n) * n
            return t / np.linalg.norm(t), flagged
    raise PlacementError("tangent undefined: normal is not unit length")


def surface_frame(normal: np.ndarray, axis: np.ndarray) -> np.ndarray:
    """Right-handed frame [t, b, n] as columns; b = n x t."""
    n = np.asarray(normal, dtype=np.float64)
    if abs(np.linalg.norm(n) - 1.0) > 1e-6:
        raise PlacementError("normal must be unit length")
    t, _ = tangent_direction(n, axis)
    b = np.cross(n, t)
    return np.column_stack([t, b, n])


def _offsets_from_posed(motion: MotionSequence, posed: np.ndarray, segment: int) -> np.ndarray:
    """Time-averaged segment-frame positions of every vertex, (V, 3)."""
    R = quat_to_matrix(motion.orientations[:, segment])  # (F, 3, 3)
    p = motion.positions[:, segment]  # (F, 3)
    rel = np.einsum("fij,fvi->fvj", R, posed - p[:, None, :])
    return rel.mean(axis=0)


def local_offset(motion: MotionSequence, body: BodyModel, segment: int, vertex: int) -> np.ndarray:
    """Mean over frames of R_i(t)^T (m_v(t) - p_i(t))."""
    posed = posed_vertices_all(body, motion)
    return _offsets_from_posed(motion, posed, segment)[vertex]


def build_segment_surfaces(body: BodyModel) -> dict:
    """SegmentSurface per segment that has candidates and a defined axis."""
    candidates = select_candidate_vertices(body)
    centroids = {s: segment_centroid(body, s, verts) for s, verts in candidates.items()}
    surfaces = {}
    for s, verts in candidates.items():
        try:
            axis = anatomical_axis(body, centroids, s)
        except PlacementError as exc:
            warnings.warn(str(exc), PlacementWarning, stacklevel=2)
            continue
        surfaces[s] = SegmentSurface(
            segment=s,
            candidate_vertices=tuple(verts),
            centroid=centroids[s],
            anatomical_axis=axis,
        )
    return surfaces


def enumerate_placements(body: BodyModel, motion: MotionSequence) -> list:
    """All candidates in (segment, vertex) order; deterministic on rerun."""
    surfaces = build_segment_surfaces(body)
    posed = posed_vertices_all(body, motion)
    out = []
    for s in sorted(surfaces):
        surf = surfaces[s]
        offsets = _offsets_from_posed(motion, posed, s)
        for v in surf.candidate_vertices:
            nrm = vertex_normal(body, v)
            t, degenerate = tangent_direction(nrm, surf.anatomical_axis)
            frame = np.column_stack([t, np.cross(nrm, t), nrm])
            out.append(
                PlacementCandidate(
                    segment=s,
                    vertex=v,
                    surface_frame=frame,
                    offset=offsets[v].copy(),
                    degenerate=degenerate,
                )
            )
    return out
