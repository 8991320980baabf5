"""Executable invariant suites and independent naive oracles.

Each suite re-derives expected values by a second route (hand loops, closed
forms, Lloyd iterations) and compares the production implementations against
them on synthetic fixtures. The CLI exposes these as `geomimu verify`.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import fixtures, formats, objectives, placement, sampler, tokenizer
from .imusim import (
    GRAVITY,
    STANDARD_GRAVITY,
    NoisePrior,
    estimate_noise_prior,
    SensorTrajectory,
    simulate_accelerometer,
    simulate_gyroscope,
    simulate_window,
)
from .rotations import random_rotation, rot_z

SUITE_NAMES = ("kinematics", "frames", "masking", "losses", "pq", "formats")


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    measured: float
    tolerance: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: measured={self.measured:.3e} tolerance={self.tolerance:.3e}"


# ---------------------------------------------------------------------------
# Naive oracles: deliberately loop-based, no shared code with the production
# implementations they check.


def naive_seq_cos(p, t) -> float:
    p = np.asarray(p, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    total = 0.0
    for l in range(p.shape[0]):
        dot = 0.0
        np2 = 0.0
        nt2 = 0.0
        for i in range(p.shape[1]):
            dot += p[l, i] * t[l, i]
            np2 += p[l, i] * p[l, i]
            nt2 += t[l, i] * t[l, i]
        total += dot / (math.sqrt(np2) * math.sqrt(nt2))
    return total / p.shape[0]


def naive_infonce(preds, targets, tau: float) -> float:
    N = len(preds)
    total = 0.0
    for n in range(N):
        denom = 0.0
        for m in range(N):
            denom += math.exp(naive_seq_cos(preds[n], targets[m]) / tau)
        total += -math.log(math.exp(naive_seq_cos(preds[n], targets[n]) / tau) / denom)
    return total / N


def naive_mcvpcl(preds_ab, targets_b, preds_ba, targets_a, tau: float) -> float:
    return naive_infonce(preds_ab, targets_b, tau) + naive_infonce(preds_ba, targets_a, tau)


def naive_commitment(chunks, codes) -> float:
    chunks = np.asarray(chunks, dtype=np.float64)
    codes = np.asarray(codes, dtype=np.float64)
    T_, P, dim = chunks.shape
    total = 0.0
    for j in range(P):
        s = 0.0
        for l in range(T_):
            for i in range(dim):
                d = chunks[l, j, i] - codes[l, j, i]
                s += d * d
        total += (P / (T_ * (P * dim))) * s
    return total


def naive_smooth_l1(x, y) -> float:
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    total = 0.0
    for i in range(x.size):
        e = abs(x[i] - y[i])
        total += 0.5 * e * e if e < 1.0 else e - 0.5
    return total / x.size


def naive_itc(h_imu, h_text, tau: float) -> float:
    hi = np.asarray(h_imu, dtype=np.float64)
    ht = np.asarray(h_text, dtype=np.float64)
    N = hi.shape[0]
    total = 0.0
    for n in range(N):
        denom = sum(math.exp(float(hi[n] @ ht[m]) / tau) for m in range(N))
        total += -math.log(math.exp(float(hi[n] @ ht[n]) / tau) / denom)
    for n in range(N):
        denom = sum(math.exp(float(hi[m] @ ht[n]) / tau) for m in range(N))
        total += -math.log(math.exp(float(hi[n] @ ht[n]) / tau) / denom)
    return total / (2 * N)


def naive_label_contrastive(h, labels, tau: float) -> float:
    h = np.asarray(h, dtype=np.float64)
    N = h.shape[0]
    terms = []
    for n in range(N):
        pos = [m for m in range(N) if m != n and labels[m] == labels[n]]
        if not pos:
            continue
        denom = sum(math.exp(float(h[n] @ h[m]) / tau) for m in range(N) if m != n)
        acc = 0.0
        for p in pos:
            acc += -math.log(math.exp(float(h[n] @ h[p]) / tau) / denom)
        terms.append(acc / len(pos))
    return float(np.mean(terms)) if terms else 0.0


def naive_nearest(chunk, codebook) -> int:
    best = 0
    best_d = math.inf
    for k in range(codebook.shape[0]):
        d = 0.0
        for i in range(codebook.shape[1]):
            diff = chunk[i] - codebook[k, i]
            d += diff * diff
        if d < best_d:
            best_d = d
            best = k
    return best


def lloyd_kmeans(X: np.ndarray, K: int, rng: np.random.Generator, iters: int = 100) -> np.ndarray:
    """Plain Lloyd iterations with distance-weighted seeding."""
    n = X.shape[0]
    centers = np.empty((K, X.shape[1]))
    centers[0] = X[int(rng.integers(n))]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for k in range(1, K):
        centers[k] = X[int(rng.choice(n, p=d2 / d2.sum()))]
        d2 = np.minimum(d2, ((X - centers[k]) ** 2).sum(axis=1))
    for _ in range(iters):
        dist = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assign = dist.argmin(axis=1)
        new = centers.copy()
        for k in range(K):
            members = X[assign == k]
            if len(members):
                new[k] = members.mean(axis=0)
        if np.allclose(new, centers, atol=1e-12):
            centers = new
            break
        centers = new
    return centers


# ---------------------------------------------------------------------------
# Suites


def _check(name: str, measured: float, tolerance: float) -> CheckResult:
    return CheckResult(name=name, passed=bool(measured <= tolerance), measured=float(measured), tolerance=float(tolerance))


def suite_kinematics() -> list:
    out = []
    body = fixtures.chain_body(2)
    motion = fixtures.constant_motion(body, frames=60)
    cands = placement.enumerate_placements(body, motion)
    rng = np.random.default_rng(11)
    worst_a = 0.0
    worst_w = 0.0
    for cand in cands:
        for mount in [np.eye(3)] + [random_rotation(rng) for _ in range(3)]:
            win = simulate_window(motion, cand, mount=mount)
            worst_a = max(worst_a, float(np.abs(np.linalg.norm(win.samples[:, :3], axis=1) - STANDARD_GRAVITY).max()))
            worst_w = max(worst_w, float(np.abs(win.samples[:, 3:]).max()))
    out.append(_check("stationary accel magnitude", worst_a, 1e-6))
    out.append(_check("stationary gyro zero", worst_w, 0.0))

    # Free fall: quadratic drop, identity orientation; specific force is 0.
    T, rate = 60, 60.0
    t = np.arange(T) / rate
    pos = 0.5 * GRAVITY[None, :] * (t**2)[:, None]
    traj = SensorTrajectory(positions=pos, orientations=np.tile(np.eye(3), (T, 1, 1)), rate=rate)
    out.append(_check("free fall accel zero", float(np.abs(simulate_accelerometer(traj)).max()), 1e-6))

    # Unit circle at 2 rad/s, frame co-rotating: x channel reads -w^2 r.
    omega, rate, T = 2.0, 60.0, 121
    t = np.arange(T) / rate
    pos = np.stack([np.cos(omega * t), np.sin(omega * t), np.zeros(T)], axis=1)
    R = np.stack([rot_z(a) for a in omega * t])
    traj = SensorTrajectory(positions=pos, orientations=R, rate=rate)
    accel = simulate_accelerometer(traj)
    out.append(
        _check(
            "centripetal channel",
            float(np.abs(accel[:, 0] + omega * omega).max() / (omega * omega)),
            0.005,
        )
    )
    gyro = simulate_gyroscope(traj)
    out.append(_check("constant z-spin gyro", float(np.abs(gyro - np.array([0.0, 0.0, omega])).max()), 1e-9))

    # Mount equivariance against post-rotation of the identity-mount window.
    motion2 = fixtures.wiggling_motion(body, frames=90, seed=3)
    cands2 = placement.enumerate_placements(body, motion2)
    base = {c: simulate_window(motion2, cands2[c]) for c in range(len(cands2))}
    worst = 0.0
    for k in range(100):
        delta = random_rotation(rng)
        cand = cands2[k % len(cands2)]
        mounted = simulate_window(motion2, cand, mount=delta)
        rotated = sampler.rotate_imu_signal(base[k % len(cands2)].samples, delta.T)
        worst = max(worst, float(np.abs(mounted.samples - rotated).max()))
    out.append(_check("mount equivariance", worst, 1e-9))
    return out


def suite_frames() -> list:
    rng = np.random.default_rng(5)
    worst_orth = worst_det = worst_tn = worst_b = 0.0
    for i in range(1000):
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        if i % 20 == 0:
            # Near-degenerate: axis a hair off the normal direction.
            perp = np.cross(n, [1.0, 0.3, 0.2])
            perp /= np.linalg.norm(perp)
            u = n + 10.0 ** rng.uniform(-7.5, -6.5) * perp
        else:
            u = rng.normal(size=3)
        u /= np.linalg.norm(u)
        R = placement.surface_frame(n, u)
        worst_orth = max(worst_orth, float(np.abs(R.T @ R - np.eye(3)).max()))
        worst_det = max(worst_det, abs(float(np.linalg.det(R)) - 1.0))
        worst_tn = max(worst_tn, abs(float(R[:, 0] @ n)))
        worst_b = max(worst_b, float(np.abs(R[:, 1] - np.cross(n, R[:, 0])).max()))
    return [
        _check("frame orthonormality", worst_orth, 1e-9),
        _check("frame determinant", worst_det, 1e-9),
        _check("tangent in tangent plane", worst_tn, 1e-12),
        _check("binormal is n cross t", worst_b, 1e-12),
    ]


def suite_masking(draws: int = 100_000) -> list:
    rng = np.random.default_rng(17)
    S = 23
    counts = np.zeros(6, dtype=np.int64)
    bound_violation = 0
    for _ in range(draws):
        vis = sampler.sample_visibility_mask(S, rng)
        k = len(vis)
        if not (1 <= k <= 5) or vis.min() < 0 or vis.max() >= S or len(set(vis.tolist())) != k:
            bound_violation += 1
        counts[k] += 1
    chi = stats.chisquare(counts[1:6])
    p = float(chi.pvalue)
    return [
        CheckResult("mask count uniform (chi-square p)", p > 0.01, p, 0.01),
        _check("mask bounds violations", float(bound_violation), 0.0),
    ]


def _random_latents(rng, N, T_, d):
    return [rng.normal(size=(T_, d)) for _ in range(N)]


def _unit_rows(rng, N, d):
    x = rng.normal(size=(N, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def suite_losses(instances: int = 50) -> list:
    rng = np.random.default_rng(23)
    worst = {"mcvpcl": 0.0, "itc": 0.0, "commitment": 0.0, "smooth_l1": 0.0, "label": 0.0}
    for _ in range(instances):
        N = int(rng.integers(2, 17))
        T_, d = int(rng.integers(2, 6)), int(rng.integers(2, 9))
        tau = float(rng.uniform(0.05, 0.5))
        pab = _random_latents(rng, N, T_, d)
        tb = _random_latents(rng, N, T_, d)
        pba = _random_latents(rng, N, T_, d)
        ta = _random_latents(rng, N, T_, d)
        got = objectives.mcvpcl_loss(pab, tb, pba, ta, tau)
        worst["mcvpcl"] = max(worst["mcvpcl"], abs(got - naive_mcvpcl(pab, tb, pba, ta, tau)))

        hi = _unit_rows(rng, N, d)
        ht = _unit_rows(rng, N, d)
        worst["itc"] = max(worst["itc"], abs(objectives.itc_loss(hi, ht, tau) - naive_itc(hi, ht, tau)))

        P = int(rng.integers(1, 4))
        dim = int(rng.integers(1, 5))
        chunks = rng.normal(size=(T_, P, dim))
        codes = rng.normal(size=(T_, P, dim))
        worst["commitment"] = max(
            worst["commitment"], abs(objectives.commitment_loss(chunks, codes) - naive_commitment(chunks, codes))
        )

        x = rng.normal(size=(T_, d)) * 2
        y = rng.normal(size=(T_, d)) * 2
        worst["smooth_l1"] = max(worst["smooth_l1"], abs(objectives.smooth_l1(x, y) - naive_smooth_l1(x, y)))

        labels = [int(v) for v in rng.integers(0, 3, size=N)]
        worst["label"] = max(
            worst["label"],
            abs(objectives.label_contrastive_loss(hi, labels, tau) - naive_label_contrastive(hi, labels, tau)),
        )
    out = [_check(f"{k} vs naive oracle", v, 1e-10) for k, v in sorted(worst.items())]

    single = [rng.normal(size=(3, 4))]
    zero_mc = objectives.mcvpcl_loss(single, single, single, single, 0.1)
    zero_itc = objectives.itc_loss(_unit_rows(rng, 1, 4), _unit_rows(rng, 1, 4), 0.05)
    out.append(_check("N=1 losses exactly zero", abs(zero_mc) + abs(zero_itc), 0.0))

    hi = _unit_rows(rng, 8, 16)
    ht = _unit_rows(rng, 8, 16)
    swap_diff = abs(objectives.itc_loss(hi, ht, 0.05) - objectives.itc_loss(ht, hi, 0.05))
    out.append(_check("itc swap symmetry (bitwise)", swap_diff, 0.0))
    return out


def suite_pq() -> list:
    out = []
    rng = np.random.default_rng(31)
    worst = 0
    for _ in range(20):
        T_ = int(rng.integers(1, 17))
        P = int(rng.integers(1, 4))
        K = int(rng.integers(2, 65))
        dim = int(rng.integers(1, 9))
        books = tokenizer.Codebooks.empty(P, K, dim)
        books.codes[:] = rng.normal(size=(P, K, dim))
        # Force ties: duplicate a code so the lowest index must win.
        books.codes[:, K - 1] = books.codes[:, 0]
        latent = rng.normal(size=(T_, P * dim))
        if T_ > 2:
            latent[1] = books.codes[:, 0].reshape(-1)  # exact tie row
        idx, _ = tokenizer.quantize(latent, books)
        chunks = latent.reshape(T_, P, dim)
        for l in range(T_):
            for j in range(P):
                if idx[l, j] != naive_nearest(chunks[l, j], books.codes[j]):
                    worst += 1
    out.append(_check("quantize vs exhaustive oracle mismatches", float(worst), 0.0))

    mismatch = 0
    for _ in range(20):
        T_, P = int(rng.integers(1, 12)), int(rng.integers(1, 5))
        idx = rng.integers(0, 100, size=(T_, P))
        back = tokenizer.deinterleave_tokens(tokenizer.interleave_tokens(idx), P)
        if not np.array_equal(back, idx):
            mismatch += 1
    out.append(_check("interleave/deinterleave inverse", float(mismatch), 0.0))

    perp_err = 0.0
    for K in (4, 7, 100, 2048):
        perp_err = max(perp_err, abs(tokenizer.perplexity(np.full(K, 3, dtype=np.int64)) - K))
    out.append(_check("uniform perplexity equals K", perp_err, 0.0))

    centers_true = np.array([[0.0, 0.0], [5.0, 5.0], [-5.0, 4.0]])
    X = np.concatenate(
        [c + 0.3 * rng.normal(size=(200, 2)) for c in centers_true], axis=0
    )
    rng.shuffle(X)
    books, _ = tokenizer.fit_codebooks(
        [X], tokenizer.FitConfig(P=1, K=3, dim=2, decay=0.9, epochs=8, batch_size=64, seed=0)
    )
    lloyd = lloyd_kmeans(X, 3, np.random.default_rng(1))
    worst_c = 0.0
    for code in books.codes[0]:
        worst_c = max(worst_c, float(np.linalg.norm(lloyd - code, axis=1).min()))
    out.append(_check("EMA codebooks vs Lloyd centroids", worst_c, 0.05))

    window = sampler.GraphWindow(
        signal=rng.normal(size=(300, 3, 6)),
        visibility=np.ones(3, dtype=bool),
        view_id="single",
        window_id="w",
        placements=((0, 0), (1, 4), (2, 8)),
        mounts=np.tile(np.eye(3), (3, 1, 1)),
    )
    books2 = tokenizer.Codebooks.empty(2, 8, 4)
    books2.codes[:] = rng.normal(size=(2, 8, 4))
    rec = tokenizer.encode_window(window, books2)
    out.append(_check("300-frame window token count - 150", float(abs(len(rec["tokens"]) - 150)), 0.0))
    return out


def suite_formats(tmpdir=None) -> list:
    import tempfile
    from pathlib import Path

    out = []
    with tempfile.TemporaryDirectory() as td:
        base = Path(tmpdir or td)
        # GMC1
        p1, p2 = base / "a.gmc1", base / "a2.gmc1"
        fixtures.save_demo_container(p1, segments=2, frames=12)
        raw = formats.read_gmc1(p1)
        formats.write_gmc1(
            p2,
            rate=raw["rate"],
            segment_names=raw["segment_names"],
            parent_index=raw["parent_index"],
            positions=raw["positions"],
            orientations=raw["orientations"],
            segment_to_joints=raw["segment_to_joints"],
            rest_vertices=raw["rest_vertices"],
            faces=raw["faces"],
            skin_weights=raw["skin_weights"],
            winding=raw["winding"],
        )
        out.append(_check("GMC1 rewrite byte-identical", float(p1.read_bytes() != p2.read_bytes()), 0.0))

        rng = np.random.default_rng(41)
        g1, g2 = base / "w.giw1", base / "w2.giw1"
        wins = [({"segment": i, "vertex": 2 * i, "seed": 7}, rng.normal(size=(20, 6))) for i in range(3)]
        formats.write_giw1(g1, rate=60.0, window_len=20, windows=wins)
        got = formats.read_giw1(g1)
        formats.write_giw1(g2, rate=got["rate"], window_len=got["T"], windows=got["windows"])
        out.append(_check("GIW1 rewrite byte-identical", float(g1.read_bytes() != g2.read_bytes()), 0.0))

        s1, s2 = base / "p.gpw1", base / "p2.gpw1"
        pairs = []
        for i in range(2):
            vis = np.zeros(5, dtype=bool)
            vis[[0, i + 1]] = True
            pairs.append(
                ({"window_id": f"p{i}"}, vis, vis.copy(), rng.normal(size=(16, 5, 6)), rng.normal(size=(16, 5, 6)))
            )
        formats.write_gpw1(s1, window_len=16, segments=5, pairs=pairs)
        got = formats.read_gpw1(s1)
        formats.write_gpw1(s2, window_len=got["T"], segments=got["S"], pairs=got["pairs"])
        out.append(_check("GPW1 rewrite byte-identical", float(s1.read_bytes() != s2.read_bytes()), 0.0))

        c1, c2 = base / "b.gcb1", base / "b2.gcb1"
        formats.write_gcb1(c1, codes=rng.normal(size=(2, 4, 3)), decay=0.99, seed=3, train_log={"epochs": []})
        got = formats.read_gcb1(c1)
        formats.write_gcb1(c2, codes=got["codes"], decay=got["decay"], seed=got["seed"], train_log=got["train_log"])
        out.append(_check("GCB1 rewrite byte-identical", float(c1.read_bytes() != c2.read_bytes()), 0.0))

        t1, t2 = base / "t.jsonl", base / "t2.jsonl"
        recs = [{"window_id": f"w{i}", "visible_segments": [0, 2], "tokens": [1, 2, 3, 4]} for i in range(3)]
        formats.write_tokens_jsonl(t1, recs)
        formats.write_tokens_jsonl(t2, formats.read_tokens_jsonl(t1))
        out.append(_check("tokens rewrite byte-identical", float(t1.read_bytes() != t2.read_bytes()), 0.0))

    # Noise prior recovery on a generated bias + white stream.
    rng = np.random.default_rng(47)
    T, rate = 600, 60.0
    std_true = np.array([0.02, 0.02, 0.02, 0.004, 0.004, 0.004])
    bias_true = np.array([0.0, 0.0, 0.2, 0.01, -0.02, 0.015])
    stream = rng.normal(size=(T, 6)) * std_true + bias_true
    stream[:, 2] += STANDARD_GRAVITY  # resting accelerometer sees gravity
    prior = estimate_noise_prior(stream, rate)
    est_std = np.concatenate([prior.accel_std, prior.gyro_std])
    est_bias = np.concatenate([prior.accel_bias, prior.gyro_bias])
    out.append(_check("noise std within 10%", float(np.abs(est_std / std_true - 1.0).max()), 0.10))
    sigma_n = std_true * 3.0 / math.sqrt(T)  # every window of this stream is quiet
    out.append(
        _check(
            "noise bias within 3 sigma/sqrt(n)",
            float((np.abs(est_bias - bias_true) / sigma_n).max()),
            1.0,
        )
    )
    return out


def run_suite(name: str):
    """Run one suite (or 'all'); returns (results, all_passed)."""
    table = {
        "kinematics": suite_kinematics,
        "frames": suite_frames,
        "masking": suite_masking,
        "losses": suite_losses,
        "pq": suite_pq,
        "formats": suite_formats,
    }
    if name == "all":
        results = []
        for key in SUITE_NAMES:
            results.extend(table[key]())
    elif name in table:
        results = table[name]()
    else:
        raise ValueError(f"unknown suite '{name}' (choose from {', '.join(SUITE_NAMES)}, all)")
    return results, all(r.passed for r in results)
