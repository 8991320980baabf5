"""Synthetic bodies and motions for tests, the verify suites, and demos.

Everything here is generated, deterministic, and small: chain bodies carry a
tetrahedron of surface vertices per segment so normals, skinning, and
placement enumeration all have something real to chew on.
"""

import numpy as np

from .body import BodyModel, MotionSequence
from .rotations import quat_normalize

# Outward-CCW unit tetrahedron.
TETRA_VERTS = np.array(
    [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]]
) / np.sqrt(3.0)
TETRA_FACES = np.array([[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]], dtype=np.int64)


def chain_body(segments: int = 2, spacing: float = 0.4, radius: float = 0.1) -> BodyModel:
    """A straight z-axis chain: segment s sits at (0, 0, s * spacing) and
    owns a small tetrahedron of fully bound surface vertices."""
    names = tuple(f"seg{s}" for s in range(segments))
    parents = np.array([-1] + list(range(segments - 1)), dtype=np.int64)
    verts = []
    faces = []
    wv, wj, ww = [], [], []
    for s in range(segments):
        center = np.array([0.0, 0.0, s * spacing])
        base = 4 * s
        verts.append(center + radius * TETRA_VERTS)
        faces.append(TETRA_FACES + base)
        for k in range(4):
            wv.append(base + k)
            wj.append(s)
            ww.append(1.0)
    return BodyModel(
        segment_names=names,
        parent_index=parents,
        segment_to_joints=tuple((s,) for s in range(segments)),
        rest_vertices=np.concatenate(verts, axis=0),
        faces=np.concatenate(faces, axis=0),
        weight_vertex=np.array(wv, dtype=np.int64),
        weight_joint=np.array(wj, dtype=np.int64),
        weight_value=np.array(ww, dtype=np.float64),
    )


def rest_positions(body: BodyModel, spacing: float = 0.4) -> np.ndarray:
    S = body.segment_count
    pos = np.zeros((S, 3))
    pos[:, 2] = spacing * np.arange(S)
    return pos


def constant_motion(body: BodyModel, frames: int = 60, rate: float = 60.0, spacing: float = 0.4) -> MotionSequence:
    """Every segment holds its rest pose with identity orientation."""
    S = body.segment_count
    positions = np.tile(rest_positions(body, spacing)[None], (frames, 1, 1))
    orientations = np.zeros((frames, S, 4))
    orientations[..., 0] = 1.0
    return MotionSequence(rate=rate, positions=positions, orientations=orientations)


def wiggling_motion(
    body: BodyModel,
    frames: int = 600,
    rate: float = 60.0,
    spacing: float = 0.4,
    amplitude: float = 0.05,
    seed: int = 7,
) -> MotionSequence:
    """Smooth per-segment sway: sinusoidal translation plus a slow z-axis
    twist with per-segment phase, gentle enough to sample cleanly."""
    rng = np.random.default_rng(seed)
    S = body.segment_count
    t = np.arange(frames) / rate
    base = rest_positions(body, spacing)
    positions = np.empty((frames, S, 3))
    orientations = np.empty((frames, S, 4))
    for s in range(S):
        phase = rng.uniform(0, 2 * np.pi, size=3)
        freq = rng.uniform(0.4, 1.2, size=3)
        for ax in range(3):
            positions[:, s, ax] = base[s, ax] + amplitude * np.sin(
                2 * np.pi * freq[ax] * t + phase[ax]
            )
        ang = 0.5 * np.sin(2 * np.pi * 0.5 * t + phase[0])
        orientations[:, s, 0] = np.cos(ang / 2)
        orientations[:, s, 1] = 0.0
        orientations[:, s, 2] = 0.0
        orientations[:, s, 3] = np.sin(ang / 2)
    return MotionSequence(rate=rate, positions=positions, orientations=quat_normalize(orientations))


def spinning_motion(
    body: BodyModel,
    omega: float = 2.0,
    frames: int = 120,
    rate: float = 60.0,
    spacing: float = 0.4,
) -> MotionSequence:
    """All segments spin in place about global z at a constant rate."""
    S = body.segment_count
    t = np.arange(frames) / rate
    positions = np.tile(rest_positions(body, spacing)[None], (frames, 1, 1))
    orientations = np.empty((frames, S, 4))
    half = omega * t / 2.0
    orientations[:, :, 0] = np.cos(half)[:, None]
    orientations[:, :, 1] = 0.0
    orientations[:, :, 2] = 0.0
    orientations[:, :, 3] = np.sin(half)[:, None]
    return MotionSequence(rate=rate, positions=positions, orientations=quat_normalize(orientations))


def save_demo_container(path, segments: int = 3, frames: int = 600, rate: float = 60.0, seed: int = 7) -> None:
    """Write a small self-contained GMC1 file: chain body + smooth motion."""
    from . import formats

    body = chain_body(segments)
    motion = wiggling_motion(body, frames=frames, rate=rate, seed=seed)
    triples = list(
        zip(body.weight_vertex.tolist(), body.weight_joint.tolist(), body.weight_value.tolist())
    )
    formats.write_gmc1(
        path,
        rate=motion.rate,
        segment_names=body.segment_names,
        parent_index=body.parent_index.tolist(),
        positions=motion.positions,
        orientations=motion.orientations,
        segment_to_joints=[list(js) for js in body.segment_to_joints],
        rest_vertices=body.rest_vertices,
        faces=body.faces,
        skin_weights=triples,
    )
