"""Pre-training data sampling: paired graph views, masking, shard export.

A graph window is a T x S x 6 tensor of per-segment sensor channels plus a
per-segment visibility flag. Two views of the same motion differ only in
their independently sampled placements and mounting rotations, which is the
contrast the downstream objectives rely on.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import formats
from .body import MotionSequence
from .imusim import (
    DEFAULT_IN_PLANE_RANGE,
    DEFAULT_TILT_RANGE,
    GRAVITY,
    NoisePrior,
    mounting_rotation,
    simulate_window,
)
from .rotations import is_rotation

MASK_MIN = 1
MASK_MAX = 5


class SamplerError(ValueError):
    pass


@dataclass(frozen=True)
class ViewSpec:
    """Per-segment placement choice and mounting rotation for one view."""

    candidates: tuple  # per segment, the chosen PlacementCandidate
    mounts: np.ndarray  # (S, 3, 3)
    noise_seeds: tuple  # per segment, int seed for noise injection


@dataclass(frozen=True)
class ViewConfig:
    in_plane_range: float = DEFAULT_IN_PLANE_RANGE
    tilt_range: float = DEFAULT_TILT_RANGE
    include_degenerate: bool = False
    gravity: np.ndarray = field(default_factory=lambda: GRAVITY.copy())
    prior: NoisePrior | None = None


@dataclass(frozen=True)
class GraphWindow:
    signal: np.ndarray  # (T, S, 6) float64
    visibility: np.ndarray  # (S,) bool
    view_id: str  # "A" | "B" | "single"
    window_id: str
    placements: tuple  # per segment, (segment, vertex)
    mounts: np.ndarray  # (S, 3, 3)

    @property
    def segment_count(self) -> int:
        return self.signal.shape[1]


def candidates_by_segment(candidates, include_degenerate: bool = False) -> dict:
    """Group a flat candidate list per segment, dropping degenerate frames
    unless asked otherwise."""
    grouped: dict = {}
    for cand in candidates:
        if cand.degenerate and not include_degenerate:
            continue
        grouped.setdefault(cand.segment, []).append(cand)
    return grouped


def sample_full_view(grouped: dict, rng: np.random.Generator, cfg: ViewConfig = ViewConfig()) -> ViewSpec:
    """Uniform placement choice + random mount per segment.

    Consumes, per segment in ascending order: one integer draw for the
    placement, three uniforms for the mount, one integer for the noise seed.
    """
    segments = sorted(grouped)
    if not segments:
        raise SamplerError("no segments with usable candidates")
    chosen = []
    mounts = np.empty((len(segments), 3, 3), dtype=np.float64)
    seeds = []
    for k, s in enumerate(segments):
        options = grouped[s]
        if not options:
            raise SamplerError(f"segment {s} has no usable candidate")
        chosen.append(options[int(rng.integers(len(options)))])
        mounts[k] = mounting_rotation(rng, cfg.in_plane_range, cfg.tilt_range)
        seeds.append(int(rng.integers(2**63)))
    return ViewSpec(candidates=tuple(chosen), mounts=mounts, noise_seeds=tuple(seeds))


def rotate_imu_signal(window: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """Rotate accel and gyro rows of a (T, 6) window by the same rotation."""
    delta = np.asarray(delta, dtype=np.float64)
    if not is_rotation(delta):
        raise SamplerError("delta is not a rotation matrix")
    window = np.asarray(window, dtype=np.float64)
    if np.array_equal(delta, np.eye(3)):
        return window.copy()
    out = np.empty_like(window)
    out[:, :3] = window[:, :3] @ delta.T
    out[:, 3:] = window[:, 3:] @ delta.T
    return out


def build_view(
    motion: MotionSequence,
    grouped: dict,
    cfg: ViewConfig,
    rng: np.random.Generator,
    view_id: str = "single",
    window_id: str = "w0",
) -> GraphWindow:
    """Simulate one full-body view; all S segments must have candidates."""
    S = motion.segment_count
    missing = [s for s in range(S) if s not in grouped or not grouped[s]]
    if missing:
        raise SamplerError(f"segments without usable candidates: {missing}")
    spec = sample_full_view(grouped, rng, cfg)
    T = motion.frame_count
    signal = np.empty((T, S, 6), dtype=np.float64)
    placements = []
    for k, cand in enumerate(spec.candidates):
        win = simulate_window(
            motion,
            cand,
            mount=spec.mounts[k],
            prior=cfg.prior,
            gravity=cfg.gravity,
            seed=spec.noise_seeds[k],
        )
        signal[:, cand.segment, :] = win.samples
        placements.append((cand.segment, cand.vertex))
    return GraphWindow(
        signal=signal,
        visibility=np.ones(S, dtype=bool),
        view_id=view_id,
        window_id=window_id,
        placements=tuple(placements),
        mounts=spec.mounts,
    )


def build_paired_views(
    motion: MotionSequence,
    grouped: dict,
    cfg: ViewConfig,
    rng: np.random.Generator,
    window_id: str = "w0",
) -> tuple:
    """Two independently sampled views of the same motion window.

    Each view consumes its own spawned child stream, so swapping the two
    children swaps the pair exactly.
    """
    rng_a, rng_b = rng.spawn(2)
    view_a = build_view(motion, grouped, cfg, rng_a, view_id="A", window_id=window_id)
    view_b = build_view(motion, grouped, cfg, rng_b, view_id="B", window_id=window_id)
    return view_a, view_b


def sample_visibility_mask(S: int, rng: np.random.Generator, k_min: int = MASK_MIN, k_max: int = MASK_MAX) -> np.ndarray:
    """Sorted visible-segment indices; count uniform on {k_min..min(k_max, S)}."""
    if S < 1:
        raise SamplerError("need at least one segment")
    hi = min(k_max, S)
    lo = min(k_min, hi)
    k = int(rng.integers(lo, hi + 1))
    return np.sort(rng.choice(S, size=k, replace=False)).astype(np.int64)


def apply_mask(window: GraphWindow, visible) -> GraphWindow:
    """Zero-fill invisible segments and set flags; visible data is untouched."""
    visible = np.asarray(sorted(set(int(v) for v in np.asarray(visible).ravel())), dtype=np.int64)
    S = window.segment_count
    if visible.size == 0:
        raise SamplerError("visible set must not be empty")
    if visible.min() < 0 or visible.max() >= S:
        raise SamplerError("visible segment index out of range")
    flags = np.zeros(S, dtype=bool)
    flags[visible] = True
    signal = window.signal.copy()
    signal[:, ~flags, :] = 0.0
    return replace(window, signal=signal, visibility=flags)


def export_pretraining_shard(pairs, path) -> int:
    """Write (GraphWindow A, GraphWindow B) tuples as a GPW1 shard."""
    pairs = list(pairs)
    if pairs:
        T, S = pairs[0][0].signal.shape[0], pairs[0][0].segment_count
    else:
        T, S = 0, 0
    records = []
    for a, b in pairs:
        meta = {
            "mounts_a": [m.tolist() for m in a.mounts],
            "mounts_b": [m.tolist() for m in b.mounts],
            "placements_a": [list(p) for p in a.placements],
            "placements_b": [list(p) for p in b.placements],
            "window_id": a.window_id,
        }
        records.append((meta, a.visibility, b.visibility, a.signal, b.signal))
    return formats.write_gpw1(path, window_len=T, segments=S, pairs=records)


def load_pretraining_shard(path) -> list:
    """Read a GPW1 shard back into GraphWindow pairs (f64 signal)."""
    raw = formats.read_gpw1(path)
    out = []
    for meta, vis_a, vis_b, ta, tb in raw["pairs"]:
        def mk(view_id, vis, tensor, mounts_key, plc_key):
            return GraphWindow(
                signal=tensor.astype(np.float64),
                visibility=vis.copy(),
                view_id=view_id,
                window_id=str(meta.get("window_id", "")),
                placements=tuple(tuple(p) for p in meta.get(plc_key, [])),
                mounts=np.asarray(meta.get(mounts_key, []), dtype=np.float64),
            )
        out.append(
            (
                mk("A", vis_a, ta, "mounts_a", "placements_a"),
                mk("B", vis_b, tb, "mounts_b", "placements_b"),
            )
        )
    return out


def slice_motion_windows(motion: MotionSequence, window_len: int, stride: int | None = None) -> list:
    """Cut a motion into fixed-length windows (non-overlapping by default).

    Windows shorter than window_len at the tail are dropped. Returns a list
    of MotionSequence slices sharing the source arrays.
    """
    if window_len < 3:
        raise SamplerError("window length must be at least 3 frames")
    stride = window_len if stride is None else int(stride)
    if stride < 1:
        raise SamplerError("stride must be positive")
    out = []
    F = motion.frame_count
    for start in range(0, F - window_len + 1, stride):
        out.append(
            MotionSequence(
                rate=motion.rate,
                positions=motion.positions[start : start + window_len],
                orientations=motion.orientations[start : start + window_len],
                posed_vertices=None
                if motion.posed_vertices is None
                else motion.posed_vertices[start : start + window_len],
            )
        )
    return out
