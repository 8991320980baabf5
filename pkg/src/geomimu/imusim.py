"""Virtual accelerometer/gyroscope synthesis and noise modeling.

Global frame is z-up with gravity (0, 0, -9.80665) m/s^2. A placed sensor's
world orientation is R_i(t) @ R_surf @ delta: segment orientation, then the
static surface frame, then the local mounting perturbation. Applying the
mount last is what makes a mounted reading exactly the local rotation of the
unmounted one, which the augmentation contract relies on.
"""

import json
from dataclasses import dataclass

import numpy as np

from .body import MotionSequence
from .placement import PlacementCandidate
from .rotations import matrix_to_rotvec, rot_x, rot_y, rot_z, rotation_angle

STANDARD_GRAVITY = 9.80665
GRAVITY = np.array([0.0, 0.0, -STANDARD_GRAVITY])

DEFAULT_IN_PLANE_RANGE = np.pi  # +-180 degrees about the normal
DEFAULT_TILT_RANGE = np.deg2rad(10.0)  # +-10 degrees about each tangent axis


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class SensorTrajectory:
    positions: np.ndarray  # (T, 3) meters, global
    orientations: np.ndarray  # (T, 3, 3) world-from-sensor rotations
    rate: float


@dataclass(frozen=True)
class ImuWindow:
    samples: np.ndarray  # (T, 6): ax, ay, az, gx, gy, gz
    rate: float
    placement: tuple  # (segment, vertex)
    mount_rotation: np.ndarray  # 3x3, local basis
    seed: int
    noise_prior_id: str | None = None


@dataclass(frozen=True)
class NoisePrior:
    accel_std: np.ndarray
    gyro_std: np.ndarray
    accel_bias: np.ndarray
    gyro_bias: np.ndarray
    source_id: str = ""

    def is_zero(self) -> bool:
        return not (
            np.any(self.accel_std) or np.any(self.gyro_std)
            or np.any(self.accel_bias) or np.any(self.gyro_bias)
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "accel_bias": list(map(float, self.accel_bias)),
                "accel_std": list(map(float, self.accel_std)),
                "gyro_bias": list(map(float, self.gyro_bias)),
                "gyro_std": list(map(float, self.gyro_std)),
                "source_id": self.source_id,
            },
            sort_keys=True,
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "NoisePrior":
        d = json.loads(text)
        prior = cls(
            accel_std=np.asarray(d["accel_std"], dtype=np.float64),
            gyro_std=np.asarray(d["gyro_std"], dtype=np.float64),
            accel_bias=np.asarray(d["accel_bias"], dtype=np.float64),
            gyro_bias=np.asarray(d["gyro_bias"], dtype=np.float64),
            source_id=d.get("source_id", ""),
        )
        if np.any(prior.accel_std < 0) or np.any(prior.gyro_std < 0):
            raise SimulationError("noise std must be non-negative")
        return prior

    @classmethod
    def zero(cls) -> "NoisePrior":
        z = np.zeros(3)
        return cls(z, z.copy(), z.copy(), z.copy(), source_id="zero")


@dataclass(frozen=True)
class QuietWindowConfig:
    gyro_gate: float = 0.02  # rad/s per-axis std below which a window is quiet
    accel_gate: float = 0.05  # m/s^2
    window_seconds: float = 1.0
    stride_seconds: float = 0.5


def derive_window_seed(run_seed: int, segment: int, vertex: int, window_index: int) -> int:
    """Stable per-window seed so parallel scheduling cannot change results."""
    ss = np.random.SeedSequence((int(run_seed), int(segment), int(vertex), int(window_index)))
    return int(ss.generate_state(1, np.uint64)[0])


def mounting_rotation(rng: np.random.Generator, in_plane_range: float, tilt_range: float) -> np.ndarray:
    """Random attachment error in the local [t, b, n] basis.

    Rot_n(theta) @ Rot_t(alpha) @ Rot_b(beta) with theta ~ U(+-in_plane) and
    alpha, beta ~ U(+-tilt). Three draws are consumed even at zero ranges so
    the stream stays aligned across configurations.
    """
    if in_plane_range < 0 or tilt_range < 0:
        raise SimulationError("rotation ranges must be non-negative")
    theta = rng.uniform(-in_plane_range, in_plane_range)
    alpha = rng.uniform(-tilt_range, tilt_range)
    beta = rng.uniform(-tilt_range, tilt_range)
    if theta == 0.0 and alpha == 0.0 and beta == 0.0:
        return np.eye(3)
    return rot_z(theta) @ rot_x(alpha) @ rot_y(beta)


def sensor_trajectory(
    motion: MotionSequence, cand: PlacementCandidate, mount: np.ndarray | None = None
) -> SensorTrajectory:
    """Rigid sensor path: p_i + R_i r and R_i @ R_surf @ mount per frame."""
    i = cand.segment
    R_i = motion.rotation_matrices()[:, i]  # (F, 3, 3)
    p = motion.positions[:, i] + np.einsum("fij,j->fi", R_i, cand.offset)
    R = R_i @ cand.surface_frame
    if mount is not None and not np.array_equal(mount, np.eye(3)):
        R = R @ mount
    return SensorTrajectory(positions=p, orientations=R, rate=motion.rate)


def _second_derivative(p: np.ndarray, rate: float) -> np.ndarray:
    """Central-difference acceleration with boundary rows copied inward."""
    T = p.shape[0]
    acc = np.empty_like(p)
    acc[1:-1] = (p[2:] - 2.0 * p[1:-1] + p[:-2]) * (rate * rate)
    acc[0] = acc[1]
    acc[-1] = acc[-2]
    return acc


def simulate_accelerometer(traj: SensorTrajectory, gravity: np.ndarray = GRAVITY) -> np.ndarray:
    """Specific force in the sensor frame: R^T (p_ddot - g), (T, 3)."""
    if traj.positions.shape[0] < 3:
        raise SimulationError("need at least 3 frames")
    pdd = _second_derivative(traj.positions, traj.rate)
    return np.einsum("tij,ti->tj", traj.orientations, pdd - gravity)


def simulate_gyroscope(traj: SensorTrajectory) -> np.ndarray:
    """Body-frame angular velocity, (T, 3).

    Central log-map difference: vee(Log(R(t-1)^T R(t+1))) * rate / 2, exact
    for constant-axis rotation and second-order accurate otherwise. The
    boundary rows copy the nearest interior estimate.
    """
    R = traj.orientations
    T = R.shape[0]
    if T < 3:
        raise SimulationError("need at least 3 frames")
    step = np.einsum("tji,tjk->tik", R[:-1], R[1:])  # R(t)^T R(t+1)
    if np.any(rotation_angle(step) >= np.pi - 1e-3):
        raise SimulationError("angular sampling aliased")
    rel = np.einsum("tji,tjk->tik", R[:-2], R[2:])  # R(t-1)^T R(t+1)
    omega = np.empty((T, 3), dtype=np.float64)
    omega[1:-1] = matrix_to_rotvec(rel) * (traj.rate / 2.0)
    # Bitwise-equal endpoint frames mean no rotation; force exact zero
    # instead of the rounding-level residue of R^T R.
    frozen = np.all(R[:-2] == R[2:], axis=(1, 2))
    omega[1:-1][frozen] = 0.0
    omega[0] = omega[1]
    omega[-1] = omega[-2]
    return omega


def estimate_noise_prior(
    stream: np.ndarray,
    rate: float,
    cfg: QuietWindowConfig = QuietWindowConfig(),
    source_id: str = "",
) -> NoisePrior:
    """Bias + white-noise prior from the quiet stretches of a real recording.

    1 s windows at 0.5 s stride; a window is quiet when every gyro axis std
    is under the gyro gate and every accel axis std under the accel gate.
    Std pools mean-removed quiet samples. Gyro bias is the mean of quiet
    means; accel bias subtracts the best-fit gravity vector from that mean,
    but only when the mean looks like gravity (magnitude >= g/2), so streams
    recorded in gravity-free or pre-compensated units pass through.
    """
    stream = np.asarray(stream, dtype=np.float64)
    if stream.ndim != 2 or stream.shape[1] != 6:
        raise SimulationError("stream must be (T, 6)")
    win = int(round(cfg.window_seconds * rate))
    stride = max(int(round(cfg.stride_seconds * rate)), 1)
    if win < 2 or stream.shape[0] < win:
        raise SimulationError("stream shorter than one quiet-window span")
    accel, gyro = stream[:, :3], stream[:, 3:]
    residuals: list = []
    means: list = []
    for start in range(0, stream.shape[0] - win + 1, stride):
        a = accel[start : start + win]
        g = gyro[start : start + win]
        if np.all(g.std(axis=0) < cfg.gyro_gate) and np.all(a.std(axis=0) < cfg.accel_gate):
            w = stream[start : start + win]
            m = w.mean(axis=0)
            means.append(m)
            residuals.append(w - m)
    if not residuals:
        raise SimulationError("no quiet segment found")
    pooled = np.concatenate(residuals, axis=0)
    std = pooled.std(axis=0)
    mean = np.mean(means, axis=0)
    accel_mean, gyro_bias = mean[:3], mean[3:]
    norm = np.linalg.norm(accel_mean)
    if norm >= STANDARD_GRAVITY / 2.0:
        accel_bias = accel_mean - STANDARD_GRAVITY * accel_mean / norm
    else:
        accel_bias = accel_mean
    return NoisePrior(
        accel_std=std[:3],
        gyro_std=std[3:],
        accel_bias=accel_bias,
        gyro_bias=gyro_bias,
        source_id=source_id,
    )


def apply_noise(window: ImuWindow, prior: NoisePrior, rng: np.random.Generator) -> ImuWindow:
    """Add constant bias plus white Gaussian noise; zero prior is a no-op.

    Accelerometer draws come first, then gyroscope, each (T, 3), so equal
    seeds give equal windows regardless of caller batching.
    """
    if prior.is_zero():
        return window
    T = window.samples.shape[0]
    noisy = window.samples.copy()
    noisy[:, :3] += prior.accel_bias + prior.accel_std * rng.standard_normal((T, 3))
    noisy[:, 3:] += prior.gyro_bias + prior.gyro_std * rng.standard_normal((T, 3))
    return ImuWindow(
        samples=noisy,
        rate=window.rate,
        placement=window.placement,
        mount_rotation=window.mount_rotation,
        seed=window.seed,
        noise_prior_id=prior.source_id or window.noise_prior_id,
    )


def simulate_window(
    motion: MotionSequence,
    cand: PlacementCandidate,
    mount: np.ndarray | None = None,
    prior: NoisePrior | None = None,
    gravity: np.ndarray = GRAVITY,
    seed: int = 0,
) -> ImuWindow:
    """Full synthesis for one placement: trajectory, accel, gyro, noise."""
    mount = np.eye(3) if mount is None else np.asarray(mount, dtype=np.float64)
    traj = sensor_trajectory(motion, cand, mount)
    accel = simulate_accelerometer(traj, gravity)
    gyro = simulate_gyroscope(traj)
    window = ImuWindow(
        samples=np.hstack([accel, gyro]),
        rate=motion.rate,
        placement=(cand.segment, cand.vertex),
        mount_rotation=mount,
        seed=int(seed),
        noise_prior_id=None,
    )
    if prior is not None and not prior.is_zero():
        window = apply_noise(window, prior, np.random.default_rng(int(seed)))
    return window
