"""Command-line pipeline entry point.

Subcommands cover the whole flow: placement enumeration, window simulation,
noise-prior estimation from real recordings, paired-view sampling, codebook
training / encoding / diagnostics, loss evaluation, and invariant suites.

Exit codes: 0 success, 1 validation error, 2 I/O error. Successful commands
print a machine-readable summary line "OK <command> key=value ...". Every
stochastic command requires an explicit --seed, and identical argv + inputs
produce byte-identical outputs (worker pools merge results in task order).
"""

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import formats, placement, sampler, tokenizer
from . import verify as verify_mod
from .body import load_motion_container, resample_motion
from .formats import FormatError
from .imusim import (
    NoisePrior,
    QuietWindowConfig,
    derive_window_seed,
    estimate_noise_prior,
    mounting_rotation,
    simulate_window,
)
from .placement import PlacementCandidate
from .sampler import ViewConfig

PROG = "geomimu"
VERSION = "0.1.0"
LOSS_NAMES = ("seq-cos", "infonce", "mcvpcl", "commitment", "smooth-l1", "itc", "label-contrastive")


class CliError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # usage problems (unknown flags, bad choices) must exit 1, not argparse's 2
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _require(value, flag: str):
    if value is None:
        raise CliError(f"missing {flag}")
    return value


def _require_seed(args) -> int:
    if args.seed is None:
        raise CliError("missing --seed")
    return int(args.seed)


def _guard_out(path, force: bool) -> Path:
    path = Path(path)
    if path.exists() and not force:
        raise CliError(f"output '{path}' exists (pass --force to overwrite)")
    return path


def _thread_count(args) -> int:
    n = getattr(args, "threads", None)
    if n is None:
        env = os.environ.get("GEOMIMU_THREADS", "").strip()
        if env:
            try:
                n = int(env)
            except ValueError:
                raise CliError(f"GEOMIMU_THREADS is not an integer: {env!r}")
    if n is None:
        n = os.cpu_count() or 1
    if n < 1:
        raise CliError("--threads must be at least 1")
    return n


def _load_body_motion(body_path, motion_path):
    body, motion = load_motion_container(body_path)
    if Path(motion_path).resolve() != Path(body_path).resolve():
        _, motion = load_motion_container(motion_path)
        if motion.segment_count != body.segment_count:
            raise CliError(
                f"motion has {motion.segment_count} segments but body has {body.segment_count}"
            )
    return body, motion


def _note(args, text: str):
    if getattr(args, "verbose", False):
        print(text, file=sys.stderr)


# ---------------------------------------------------------------------------
# placements


def _placement_record(cand: PlacementCandidate) -> dict:
    return {
        "degenerate": bool(cand.degenerate),
        "frame": [float(x) for x in cand.surface_frame.flatten(order="F")],
        "offset": [float(x) for x in cand.offset],
        "segment": int(cand.segment),
        "vertex": int(cand.vertex),
    }


def _candidate_from_record(rec: dict) -> PlacementCandidate:
    frame = np.asarray(rec["frame"], dtype=np.float64)
    if frame.size != 9:
        raise CliError("placement record 'frame' must hold 9 floats")
    return PlacementCandidate(
        segment=int(rec["segment"]),
        vertex=int(rec["vertex"]),
        surface_frame=frame.reshape((3, 3), order="F"),
        offset=np.asarray(rec["offset"], dtype=np.float64),
        degenerate=bool(rec.get("degenerate", False)),
    )


def cmd_placements(args) -> int:
    body_path = _require(args.body, "--body")
    motion_path = _require(args.motion, "--motion")
    out = _guard_out(_require(args.out, "--out"), args.force)
    body, motion = _load_body_motion(body_path, motion_path)
    cands = placement.enumerate_placements(body, motion)
    with open(out, "w", encoding="utf-8") as f:
        for cand in cands:
            f.write(json.dumps(_placement_record(cand), sort_keys=True, separators=(",", ":")))
            f.write("\n")
    print(f"OK placements candidates={len(cands)}")
    return 0


# ---------------------------------------------------------------------------
# simulate


def _load_candidates(args, body, motion) -> list:
    spec = _require(args.placements, "--placements")
    if spec == "all":
        return placement.enumerate_placements(body, motion)
    cands = []
    with open(spec, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                cands.append(_candidate_from_record(json.loads(line)))
    if not cands:
        raise CliError(f"no placement records in '{spec}'")
    return cands


def _load_prior(spec) -> NoisePrior | None:
    if spec is None or spec == "none":
        return None
    return NoisePrior.from_json(Path(spec).read_text(encoding="utf-8"))


def cmd_simulate(args) -> int:
    run_seed = _require_seed(args)
    body_path = _require(args.body, "--body")
    motion_path = _require(args.motion, "--motion")
    out = _guard_out(_require(args.out, "--out"), args.force)
    body, motion = _load_body_motion(body_path, motion_path)
    if args.rate is not None and float(args.rate) != motion.rate:
        motion = resample_motion(motion, float(args.rate))
    prior = _load_prior(args.noise)
    cands = _load_candidates(args, body, motion)
    windows = sampler.slice_motion_windows(motion, args.window_len, args.stride)
    if not windows:
        raise CliError(
            f"motion has {motion.frame_count} frames, shorter than --window-len {args.window_len}"
        )
    tasks = [(cand, w_idx, mw) for cand in cands for w_idx, mw in enumerate(windows)]

    def work(task):
        cand, w_idx, mw = task
        wseed = derive_window_seed(run_seed, cand.segment, cand.vertex, w_idx)
        win = simulate_window(mw, cand, prior=prior, seed=wseed)
        meta = {"segment": cand.segment, "vertex": cand.vertex, "window": w_idx, "seed": wseed}
        return meta, win.samples

    with ThreadPoolExecutor(max_workers=_thread_count(args)) as pool:
        records = list(pool.map(work, tasks))
    n = formats.write_giw1(out, rate=motion.rate, window_len=args.window_len, windows=records)
    if args.plot:
        plot = _guard_out(args.plot, args.force)
        _write_signal_svg(plot, records[0][1], motion.rate, title=str(records[0][0]))
        _note(args, f"wrote {plot}")
    print(f"OK simulate windows={n} candidates={len(cands)} rate={motion.rate:g}")
    return 0


def _write_signal_svg(path, samples, rate: float, title: str = "") -> None:
    samples = np.asarray(samples, dtype=np.float64)
    labels = ("ax", "ay", "az", "gx", "gy", "gz")
    T = samples.shape[0]
    width, row, pad = 840, 90, 12
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{6 * row + 18}">',
        f'<text x="{pad}" y="13" font-size="11" font-family="monospace">{title} T={T} rate={rate:g}Hz</text>',
    ]
    for c in range(6):
        col = samples[:, c]
        lo, hi = float(col.min()), float(col.max())
        span = (hi - lo) or 1.0
        y0 = 18 + c * row
        pts = " ".join(
            f"{pad + i * (width - 2 * pad) / max(T - 1, 1):.2f},"
            f"{y0 + row - pad - (col[i] - lo) / span * (row - 2 * pad):.2f}"
            for i in range(T)
        )
        parts.append(f'<polyline points="{pts}" fill="none" stroke="#3366cc" stroke-width="1"/>')
        parts.append(
            f'<text x="{pad}" y="{y0 + 12}" font-size="10" font-family="monospace">'
            f"{labels[c]} [{lo:.4g}, {hi:.4g}]</text>"
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts), encoding="utf-8")


# ---------------------------------------------------------------------------
# estimate-noise


def _read_stream_csv(path):
    text = Path(path).read_text(encoding="utf-8").strip().splitlines()
    if not text:
        raise CliError(f"empty stream file '{path}'")
    start = 1 if text[0].lstrip()[:1].isalpha() else 0
    rows = np.array([[float(v) for v in line.split(",")] for line in text[start:] if line.strip()])
    if rows.ndim != 2 or rows.shape[1] != 7:
        raise CliError("stream must have 7 columns: t,ax,ay,az,gx,gy,gz")
    if rows.shape[0] < 3:
        raise CliError("stream too short")
    dt = np.diff(rows[:, 0])
    if np.any(dt <= 0):
        raise CliError("timestamps must be strictly increasing")
    rate = 1.0 / float(np.median(dt))
    return rows[:, 1:7], rate


def cmd_estimate_noise(args) -> int:
    stream_path = _require(args.stream, "--stream")
    out = _guard_out(_require(args.out, "--out"), args.force)
    stream, rate = _read_stream_csv(stream_path)
    cfg = QuietWindowConfig(
        gyro_gate=args.gyro_gate,
        accel_gate=args.accel_gate,
        window_seconds=args.window_seconds,
        stride_seconds=args.stride_seconds,
    )
    prior = estimate_noise_prior(stream, rate, cfg, source_id=args.source_id or Path(stream_path).name)
    out.write_text(prior.to_json(), encoding="utf-8")
    print(f"OK estimate-noise samples={stream.shape[0]} rate={rate:g}")
    return 0


# ---------------------------------------------------------------------------
# sample-views


def _view_config(args, prior) -> ViewConfig:
    if not 1 <= args.mask_min <= args.mask_max:
        raise CliError("need 1 <= --mask-min <= --mask-max")
    return ViewConfig(
        in_plane_range=args.in_plane_range,
        tilt_range=args.tilt_range,
        include_degenerate=args.include_degenerate,
        prior=prior,
    )


def _pairs_from_simulation(args, cfg, run_seed: int) -> tuple:
    body, motion = _load_body_motion(_require(args.body, "--body"), _require(args.motion, "--motion"))
    if args.rate is not None and float(args.rate) != motion.rate:
        motion = resample_motion(motion, float(args.rate))
    cands = placement.enumerate_placements(body, motion)
    grouped = sampler.candidates_by_segment(cands, include_degenerate=cfg.include_degenerate)
    windows = sampler.slice_motion_windows(motion, args.window_len, args.stride)
    if not windows:
        raise CliError(
            f"motion has {motion.frame_count} frames, shorter than --window-len {args.window_len}"
        )
    S = motion.segment_count

    def work(i):
        ss = np.random.SeedSequence((run_seed, i))
        k_pair, k_mask_a, k_mask_b = ss.spawn(3)
        w = i % len(windows)
        a, b = sampler.build_paired_views(
            windows[w], grouped, cfg, np.random.default_rng(k_pair), window_id=f"p{i}w{w}"
        )
        vis_a = sampler.sample_visibility_mask(S, np.random.default_rng(k_mask_a), args.mask_min, args.mask_max)
        vis_b = sampler.sample_visibility_mask(S, np.random.default_rng(k_mask_b), args.mask_min, args.mask_max)
        return sampler.apply_mask(a, vis_a), sampler.apply_mask(b, vis_b)

    return work, S


def _pairs_from_archive(args, cfg, run_seed: int) -> tuple:
    arch = formats.read_giw1(args.giw)
    T = arch["T"]
    groups: dict = {}
    for meta, samples in arch["windows"]:
        key = (int(meta["window"]), int(meta["segment"]))
        groups.setdefault(key, []).append((int(meta["vertex"]), samples.astype(np.float64)))
    if not groups:
        raise CliError(f"archive '{args.giw}' holds no windows")
    win_ids = sorted({w for w, _ in groups})
    S = max(s for _, s in groups) + 1
    for w in win_ids:
        missing = [s for s in range(S) if (w, s) not in groups]
        if missing:
            raise CliError(f"archive window {w} lacks segments {missing}")

    def build(rng, view_id, window_id, w):
        signal = np.empty((T, S, 6), dtype=np.float64)
        placements, mounts = [], []
        for s in range(S):
            options = groups[(w, s)]
            vertex, samples = options[int(rng.integers(len(options)))]
            mount = mounting_rotation(rng, cfg.in_plane_range, cfg.tilt_range)
            # window(mount) == mount^T applied to the identity-mount rows
            signal[:, s, :] = sampler.rotate_imu_signal(samples, mount.T)
            placements.append((s, vertex))
            mounts.append(mount)
        return sampler.GraphWindow(
            signal=signal,
            visibility=np.ones(S, dtype=bool),
            view_id=view_id,
            window_id=window_id,
            placements=tuple(placements),
            mounts=np.stack(mounts),
        )

    def work(i):
        ss = np.random.SeedSequence((run_seed, i))
        k_a, k_b, k_mask_a, k_mask_b = ss.spawn(4)
        w = win_ids[i % len(win_ids)]
        a = build(np.random.default_rng(k_a), "A", f"p{i}w{w}", w)
        b = build(np.random.default_rng(k_b), "B", f"p{i}w{w}", w)
        vis_a = sampler.sample_visibility_mask(S, np.random.default_rng(k_mask_a), args.mask_min, args.mask_max)
        vis_b = sampler.sample_visibility_mask(S, np.random.default_rng(k_mask_b), args.mask_min, args.mask_max)
        return sampler.apply_mask(a, vis_a), sampler.apply_mask(b, vis_b)

    return work, S


def cmd_sample_views(args) -> int:
    run_seed = _require_seed(args)
    out = _guard_out(_require(args.out, "--out"), args.force)
    if args.pairs is None or args.pairs < 0:
        raise CliError("missing --pairs (must be >= 0)")
    cfg = _view_config(args, _load_prior(args.noise))
    if args.giw is not None and args.simulate:
        raise CliError("choose one of --giw or --simulate")
    if args.giw is not None:
        work, S = _pairs_from_archive(args, cfg, run_seed)
    elif args.simulate:
        work, S = _pairs_from_simulation(args, cfg, run_seed)
    else:
        raise CliError("need an input: --giw <archive> or --simulate with --body/--motion")
    with ThreadPoolExecutor(max_workers=_thread_count(args)) as pool:
        pairs = list(pool.map(work, range(args.pairs)))
    n = sampler.export_pretraining_shard(pairs, out)
    print(f"OK sample-views pairs={n} segments={S}")
    return 0


# ---------------------------------------------------------------------------
# pq


def _load_latent_file(path) -> list:
    path = Path(path)
    if path.suffix == ".npz":
        data = np.load(path, allow_pickle=False)
        return [np.asarray(data[k], dtype=np.float64) for k in sorted(data.files)]
    arr = np.load(path, allow_pickle=False)
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 2:
        return [arr]
    if arr.ndim == 3:
        return [arr[i] for i in range(arr.shape[0])]
    raise CliError(f"latents in '{path}' must be 2-D or 3-D, got shape {arr.shape}")


def _featurized_latents(shard_path, width: int) -> list:
    out = []
    for a, b in sampler.load_pretraining_shard(shard_path):
        out.append(tokenizer.reference_featurize(a, width))
        out.append(tokenizer.reference_featurize(b, width))
    if not out:
        raise CliError(f"shard '{shard_path}' holds no pairs")
    return out


def cmd_pq_train(args) -> int:
    run_seed = _require_seed(args)
    out = _guard_out(_require(args.out, "--out"), args.force)
    if (args.latents is None) == (args.featurize is None):
        raise CliError("need exactly one of --latents or --featurize")
    cfg = tokenizer.FitConfig(
        P=args.P,
        K=args.K,
        dim=args.dim,
        decay=args.decay,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=run_seed,
    )
    if args.latents is not None:
        latents = _load_latent_file(args.latents)
    else:
        latents = _featurized_latents(args.featurize, args.P * args.dim)
    books, log = tokenizer.fit_codebooks(latents, cfg)
    books.save(out, seed=run_seed, train_log=log)
    chunks = sum(arr.shape[0] for arr in latents)
    print(f"OK pq-train codebooks={books.P}x{books.K}x{books.dim} chunks={chunks} epochs={args.epochs}")
    return 0


def cmd_pq_encode(args) -> int:
    books = tokenizer.Codebooks.load(_require(args.books, "--books"))
    out = _guard_out(_require(args.out, "--out"), args.force)
    records = []
    for a, b in sampler.load_pretraining_shard(_require(args.pairs, "--pairs")):
        for view in (a, b):
            rec = tokenizer.encode_window(view, books)
            rec["window_id"] = f"{view.window_id}{view.view_id.lower()}"
            records.append(rec)
    n = formats.write_tokens_jsonl(out, records)
    print(f"OK pq-encode sequences={n} tokens_per_sequence={len(records[0]['tokens']) if records else 0}")
    return 0


def cmd_pq_stats(args) -> int:
    books = tokenizer.Codebooks.load(_require(args.books, "--books"))
    rows = formats.read_tokens_jsonl(_require(args.tokens, "--tokens"))
    hist = np.zeros((books.P, books.K), dtype=np.int64)
    sequences = []
    for row in rows:
        idx = tokenizer.deinterleave_tokens(row["tokens"], books.P)
        if idx.size and (idx.min() < 0 or idx.max() >= books.K):
            raise CliError(f"token out of range for K={books.K} in window '{row.get('window_id')}'")
        for j in range(books.P):
            hist[j] += np.bincount(idx[:, j], minlength=books.K)
        sequences.append(tuple(int(t) for t in row["tokens"]))
    report = tokenizer.codebook_diagnostics(hist, sequences)
    print(json.dumps(report, sort_keys=True, separators=(",", ":")))
    print(f"OK pq-stats sequences={len(sequences)} codebooks={books.P}")
    return 0


# ---------------------------------------------------------------------------
# loss


def _load_matrix(path, ndim=None) -> np.ndarray:
    arr = np.asarray(np.load(Path(path), allow_pickle=False), dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise CliError(f"'{path}' must be {ndim}-D, got shape {arr.shape}")
    return arr


def _load_latent_group(path) -> list:
    path = Path(path)
    if path.suffix == ".giw1":
        got = formats.read_giw1(path)
        return [w.astype(np.float64) for _, w in got["windows"]]
    if path.suffix == ".gpw1":
        got = formats.read_gpw1(path)
        T = got["T"]
        a = [ta.astype(np.float64).reshape(T, -1) for _, _, _, ta, _ in got["pairs"]]
        b = [tb.astype(np.float64).reshape(T, -1) for _, _, _, _, tb in got["pairs"]]
        return [a, b]
    return [_load_latent_file(path)]


def _latent_groups(paths) -> list:
    groups = []
    for p in paths:
        got = _load_latent_group(p)
        if got and isinstance(got[0], list):
            groups.extend(got)
        else:
            groups.extend([got])
    return groups


def cmd_loss(args) -> int:
    from . import objectives

    name = args.name
    inputs = args.inputs or []
    if not inputs:
        raise CliError("missing --inputs")
    tau = args.tau
    if name == "seq-cos":
        groups = _latent_groups(inputs)
        if len(groups) != 2 or len(groups[0]) != 1 or len(groups[1]) != 1:
            raise CliError("seq-cos needs exactly two single-sequence inputs")
        value = objectives.seq_cosine_similarity(groups[0][0], groups[1][0])
    elif name == "infonce":
        groups = _latent_groups(inputs)
        if len(groups) != 2:
            raise CliError("infonce needs two latent groups (predictions, targets)")
        value = objectives.infonce_cross_view(groups[0], groups[1], tau if tau is not None else 0.1)
    elif name == "mcvpcl":
        groups = _latent_groups(inputs)
        if len(groups) == 2:  # one shard: score its two views against each other
            groups = [groups[0], groups[1], groups[1], groups[0]]
        if len(groups) != 4:
            raise CliError("mcvpcl needs four latent groups (or one paired shard)")
        value = objectives.mcvpcl_loss(groups[0], groups[1], groups[2], groups[3], tau if tau is not None else 0.1)
    elif name == "commitment":
        if len(inputs) != 2:
            raise CliError("commitment needs two 3-D inputs (chunks, codes)")
        value = objectives.commitment_loss(_load_matrix(inputs[0], 3), _load_matrix(inputs[1], 3))
    elif name == "smooth-l1":
        if len(inputs) != 2:
            raise CliError("smooth-l1 needs two equal-shape inputs")
        value = objectives.smooth_l1(_load_matrix(inputs[0]), _load_matrix(inputs[1]))
    elif name == "itc":
        if len(inputs) != 2:
            raise CliError("itc needs two 2-D embedding matrices")
        value = objectives.itc_loss(
            _load_matrix(inputs[0], 2), _load_matrix(inputs[1], 2), tau if tau is not None else 0.05
        )
    elif name == "label-contrastive":
        if len(inputs) != 1 or args.labels is None:
            raise CliError("label-contrastive needs one 2-D input and --labels")
        labels = json.loads(args.labels)
        value = objectives.label_contrastive_loss(
            _load_matrix(inputs[0], 2), labels, tau if tau is not None else 0.05
        )
    else:  # unreachable: argparse restricts choices
        raise CliError(f"unknown loss '{name}'")
    print(f"{float(value):.12g}")
    print(f"OK loss name={name}")
    return 0


# ---------------------------------------------------------------------------
# verify


def cmd_verify(args) -> int:
    try:
        results, ok = verify_mod.run_suite(args.suite)
    except ValueError as e:
        raise CliError(str(e))
    for r in results:
        print(r.line())
    if not ok:
        return 1
    print(f"OK verify suite={args.suite} checks={len(results)}")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_common(p, *, seed=False, out=False, threads=False):
    if seed:
        p.add_argument("--seed", type=int, default=None, help="run seed (required)")
    if out:
        p.add_argument("--out", default=None, help="output path")
        p.add_argument("--force", action="store_true", help="allow overwriting --out")
    if threads:
        p.add_argument("--threads", type=int, default=None, help="worker pool size (default: GEOMIMU_THREADS or logical cores)")
    p.add_argument("-v", "--verbose", action="store_true", help="progress notes on stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog=PROG, description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"{PROG} {VERSION}")
    sub = parser.add_subparsers(dest="command", metavar="<command>")

    p = sub.add_parser("placements", parents=[], help="enumerate candidate sensor placements", prog=f"{PROG} placements")
    p.add_argument("--body", default=None, help="GMC1 container providing the mesh + skinning")
    p.add_argument("--motion", default=None, help="GMC1 container providing the motion")
    _add_common(p, out=True)
    p.set_defaults(func=cmd_placements)

    p = sub.add_parser("simulate", help="synthesize sensor windows into a GIW1 archive", prog=f"{PROG} simulate")
    p.add_argument("--body", default=None)
    p.add_argument("--motion", default=None)
    p.add_argument("--placements", default=None, help="'all' or a placements JSONL path")
    p.add_argument("--noise", default="none", help="'none' or a noise-prior JSON path")
    p.add_argument("--rate", type=float, default=None, help="resample the motion to this rate first")
    p.add_argument("--window-len", type=int, default=300, help="frames per stored window")
    p.add_argument("--stride", type=int, default=None, help="window stride (default: non-overlapping)")
    p.add_argument("--plot", default=None, help="write an SVG trace of the first window")
    _add_common(p, seed=True, out=True, threads=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate-noise", help="fit a noise prior from a real recording", prog=f"{PROG} estimate-noise")
    p.add_argument("--stream", default=None, help="CSV with columns t,ax,ay,az,gx,gy,gz")
    p.add_argument("--gyro-gate", type=float, default=QuietWindowConfig().gyro_gate, help="rad/s std gate for quiet windows")
    p.add_argument("--accel-gate", type=float, default=QuietWindowConfig().accel_gate, help="m/s^2 std gate for quiet windows")
    p.add_argument("--window-seconds", type=float, default=QuietWindowConfig().window_seconds)
    p.add_argument("--stride-seconds", type=float, default=QuietWindowConfig().stride_seconds)
    p.add_argument("--source-id", default=None, help="identifier stored in the prior (default: file name)")
    _add_common(p, out=True)
    p.set_defaults(func=cmd_estimate_noise)

    p = sub.add_parser("sample-views", help="export paired masked views as a GPW1 shard", prog=f"{PROG} sample-views")
    p.add_argument("--giw", default=None, help="draw windows from a GIW1 archive")
    p.add_argument("--simulate", action="store_true", help="simulate windows directly from --body/--motion")
    p.add_argument("--body", default=None)
    p.add_argument("--motion", default=None)
    p.add_argument("--pairs", type=int, default=None, help="number of view pairs to export")
    p.add_argument("--mask-min", type=int, default=1)
    p.add_argument("--mask-max", type=int, default=5)
    p.add_argument("--in-plane-range", type=float, default=ViewConfig().in_plane_range, help="mount yaw range, radians")
    p.add_argument("--tilt-range", type=float, default=ViewConfig().tilt_range, help="mount tilt range, radians")
    p.add_argument("--include-degenerate", action="store_true", help="keep degenerate-tangent candidates")
    p.add_argument("--noise", default="none", help="'none' or a noise-prior JSON path (simulate route)")
    p.add_argument("--rate", type=float, default=None)
    p.add_argument("--window-len", type=int, default=300)
    p.add_argument("--stride", type=int, default=None)
    _add_common(p, seed=True, out=True, threads=True)
    p.set_defaults(func=cmd_sample_views)

    pq = sub.add_parser("pq", help="codebook training, encoding, diagnostics", prog=f"{PROG} pq")
    pq_sub = pq.add_subparsers(dest="pq_command", metavar="<pq-command>")

    p = pq_sub.add_parser("train", help="fit product-quantizer codebooks", prog=f"{PROG} pq train")
    p.add_argument("--latents", default=None, help=".npy (n,width)/(N,T,width) or .npz of sequences")
    p.add_argument("--featurize", default=None, help="GPW1 shard to featurize instead of --latents")
    p.add_argument("--P", type=int, default=tokenizer.DEFAULT_P)
    p.add_argument("--K", type=int, default=tokenizer.DEFAULT_K)
    p.add_argument("--dim", type=int, default=tokenizer.DEFAULT_DIM)
    p.add_argument("--decay", type=float, default=tokenizer.DEFAULT_DECAY)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--batch-size", type=int, default=256)
    _add_common(p, seed=True, out=True)
    p.set_defaults(func=cmd_pq_train)

    p = pq_sub.add_parser("encode", help="tokenize a GPW1 shard", prog=f"{PROG} pq encode")
    p.add_argument("--books", default=None, help="GCB1 codebook file")
    p.add_argument("--pairs", default=None, help="GPW1 shard to encode")
    _add_common(p, out=True)
    p.set_defaults(func=cmd_pq_encode)

    p = pq_sub.add_parser("stats", help="codebook usage diagnostics over a token file", prog=f"{PROG} pq stats")
    p.add_argument("--books", default=None)
    p.add_argument("--tokens", default=None, help="token JSON Lines file")
    _add_common(p)
    p.set_defaults(func=cmd_pq_stats)

    p = sub.add_parser("loss", help="evaluate one training objective on saved arrays", prog=f"{PROG} loss")
    p.add_argument("name", choices=LOSS_NAMES)
    p.add_argument("--inputs", nargs="+", default=None, help=".npy/.npz/.giw1/.gpw1 inputs")
    p.add_argument("--tau", type=float, default=None, help="temperature (loss-specific default)")
    p.add_argument("--labels", default=None, help="JSON list of integer labels (label-contrastive)")
    _add_common(p)
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("verify", help="run executable invariant suites", prog=f"{PROG} verify")
    p.add_argument("--suite", default="all", choices=list(verify_mod.SUITE_NAMES) + ["all"])
    _add_common(p)
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code else 0
    if getattr(args, "func", None) is None:
        parser.print_usage(sys.stderr)
        print(f"{PROG}: error: missing command", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except CliError as e:
        print(f"{PROG}: error: {e}", file=sys.stderr)
        return 1
    except FormatError as e:
        print(f"{PROG}: error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"{PROG}: error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"{PROG}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
