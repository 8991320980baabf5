"""Product quantization of latent sequences into discrete token streams.

Each latent row splits into P contiguous chunks; chunk j is matched against
its own K-entry codebook by squared distance (ties to the lowest index).
Codebooks train by exponential-moving-average statistics with dead-code
refresh, a mini-batch k-means analogue. Tokens are the code indices
interleaved time-major, codebook-minor.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from . import formats
from ._kernels import nearest_codes
from .objectives import commitment_loss
from .sampler import GraphWindow

DEFAULT_P = 2
DEFAULT_K = 2048
DEFAULT_DIM = 64  # code vector size; latent width is P * dim
DEFAULT_DECAY = 0.99
EMA_EPSILON = 1e-5
DEAD_USAGE_FRACTION = 0.2
FEATURIZE_PROJECTION_SEED = 0x6D0_FEA7  # fixed: the featurizer is a pure function
TEMPORAL_POOL = 4


class TokenizerError(ValueError):
    pass


@dataclass
class Codebooks:
    codes: np.ndarray  # (P, K, dim) float64
    ema_counts: np.ndarray  # (P, K) float64
    ema_sums: np.ndarray  # (P, K, dim) float64
    decay: float = DEFAULT_DECAY

    @property
    def P(self) -> int:
        return self.codes.shape[0]

    @property
    def K(self) -> int:
        return self.codes.shape[1]

    @property
    def dim(self) -> int:
        return self.codes.shape[2]

    @property
    def width(self) -> int:
        return self.P * self.dim

    @classmethod
    def empty(cls, P: int, K: int, dim: int, decay: float = DEFAULT_DECAY) -> "Codebooks":
        return cls(
            codes=np.zeros((P, K, dim), dtype=np.float64),
            ema_counts=np.zeros((P, K), dtype=np.float64),
            ema_sums=np.zeros((P, K, dim), dtype=np.float64),
            decay=float(decay),
        )

    def save(self, path, seed: int = 0, train_log=None) -> None:
        formats.write_gcb1(path, codes=self.codes, decay=self.decay, seed=seed, train_log=train_log)

    @classmethod
    def load(cls, path) -> "Codebooks":
        raw = formats.read_gcb1(path)
        codes = raw["codes"].astype(np.float64)
        return cls(
            codes=codes,
            ema_counts=np.zeros(codes.shape[:2], dtype=np.float64),
            ema_sums=np.zeros_like(codes),
            decay=raw["decay"],
        )


# ---------------------------------------------------------------------------
# Featurization (deterministic stand-in for a learned encoder)


def _projection(feat_dim: int, width: int) -> np.ndarray:
    """Fixed semi-orthogonal (feat_dim, width) map, identical on every call."""
    rng = np.random.default_rng(FEATURIZE_PROJECTION_SEED)
    rows, cols = (feat_dim, width) if feat_dim >= width else (width, feat_dim)
    q, r = np.linalg.qr(rng.standard_normal((rows, cols)))
    # Fix the QR sign convention so the map does not depend on LAPACK's choice.
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    q = q * signs[None, :]
    return q if feat_dim >= width else q.T


def reference_featurize(window: GraphWindow, width: int = DEFAULT_P * DEFAULT_DIM) -> np.ndarray:
    """Deterministic (T', width) latent for a graph window; T' = ceil(T/4).

    Pools time by 4 (replicating the last frame when T is not a multiple),
    concatenates per-segment channel means and stds plus the visibility
    flags, and projects through a fixed seeded linear map. A stand-in for a
    trained encoder: zero input gives zero latent, equal windows give equal
    latents bit for bit.
    """
    sig = np.asarray(window.signal, dtype=np.float64)
    T, S, C = sig.shape
    pad = (-T) % TEMPORAL_POOL
    if pad:
        sig = np.concatenate([sig, np.repeat(sig[-1:], pad, axis=0)], axis=0)
    T_ = sig.shape[0] // TEMPORAL_POOL
    pooled = sig.reshape(T_, TEMPORAL_POOL, S, C)
    means = pooled.mean(axis=1).reshape(T_, S * C)
    stds = pooled.std(axis=1).reshape(T_, S * C)
    flags = np.broadcast_to(window.visibility.astype(np.float64), (T_, S))
    feats = np.concatenate([means, stds, flags], axis=1)  # (T', 13 S)
    return feats @ _projection(feats.shape[1], width)


# ---------------------------------------------------------------------------
# Quantization


def _chunks_of(latent: np.ndarray, books: Codebooks) -> np.ndarray:
    latent = np.asarray(latent, dtype=np.float64)
    if latent.ndim != 2 or latent.shape[1] != books.width:
        raise TokenizerError(
            f"latent width {latent.shape[-1] if latent.ndim == 2 else '?'} "
            f"does not match codebooks ({books.width})"
        )
    return latent.reshape(latent.shape[0], books.P, books.dim)


def quantize(latent: np.ndarray, books: Codebooks):
    """(indices (T', P), quantized (T', width)): nearest code per chunk."""
    chunks = _chunks_of(latent, books)
    T_ = chunks.shape[0]
    indices = np.empty((T_, books.P), dtype=np.int64)
    quantized = np.empty((T_, books.P, books.dim), dtype=np.float64)
    for j in range(books.P):
        idx = nearest_codes(chunks[:, j, :], books.codes[j])
        indices[:, j] = idx
        quantized[:, j, :] = books.codes[j][idx]
    return indices, quantized.reshape(T_, books.width)


def ema_update(books: Codebooks, chunks: np.ndarray, assignments: np.ndarray) -> Codebooks:
    """Fold one batch into the EMA statistics and refresh code estimates.

    chunks: (n, P, dim); assignments: (n, P). Codes come from Laplace-
    smoothed ratios (sums + eps * mean) / (counts + eps) so near-dead codes
    settle toward the codebook's data mean instead of blowing up.
    """
    chunks = np.asarray(chunks, dtype=np.float64)
    assignments = np.asarray(assignments, dtype=np.int64)
    d = books.decay
    for j in range(books.P):
        batch_counts = np.bincount(assignments[:, j], minlength=books.K).astype(np.float64)
        batch_sums = np.zeros((books.K, books.dim), dtype=np.float64)
        np.add.at(batch_sums, assignments[:, j], chunks[:, j, :])
        books.ema_counts[j] = d * books.ema_counts[j] + (1.0 - d) * batch_counts
        books.ema_sums[j] = d * books.ema_sums[j] + (1.0 - d) * batch_sums
        total = books.ema_counts[j].sum()
        mean = books.ema_sums[j].sum(axis=0) / total if total > 0 else np.zeros(books.dim)
        books.codes[j] = (books.ema_sums[j] + EMA_EPSILON * mean) / (
            books.ema_counts[j][:, None] + EMA_EPSILON
        )
    return books


def dead_code_refresh(books: Codebooks, chunks: np.ndarray, rng: np.random.Generator):
    """Replace codes whose usage is under 20% of the codebook mean with
    batch samples; reseed their stats at the threshold so they do not die
    again immediately. Returns (books, refreshed count)."""
    chunks = np.asarray(chunks, dtype=np.float64)
    refreshed = 0
    for j in range(books.P):
        usage = books.ema_counts[j]
        mean_usage = usage.mean()
        dead = np.flatnonzero(usage < DEAD_USAGE_FRACTION * mean_usage)
        if dead.size == 0:
            continue
        pool = chunks[:, j, :]
        if pool.shape[0] == 0:
            raise TokenizerError("dead codes present but the batch is empty")
        picks = rng.choice(pool.shape[0], size=dead.size, replace=dead.size > pool.shape[0])
        new_codes = pool[picks]
        books.codes[j][dead] = new_codes
        seed_count = DEAD_USAGE_FRACTION * mean_usage
        books.ema_counts[j][dead] = seed_count
        books.ema_sums[j][dead] = seed_count * new_codes
        refreshed += int(dead.size)
    return books, refreshed


def _kmeanspp_init(X: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    """Distance-weighted greedy seeding over the chunk pool."""
    n = X.shape[0]
    centers = np.empty((K, X.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centers[0] = X[first]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for k in range(1, K):
        total = d2.sum()
        if total <= 0.0:
            centers[k] = X[int(rng.integers(n))]
            continue
        probs = d2 / total
        pick = int(rng.choice(n, p=probs))
        centers[k] = X[pick]
        d2 = np.minimum(d2, ((X - centers[k]) ** 2).sum(axis=1))
    return centers


@dataclass(frozen=True)
class FitConfig:
    P: int = DEFAULT_P
    K: int = DEFAULT_K
    dim: int = DEFAULT_DIM
    decay: float = DEFAULT_DECAY
    epochs: int = 5
    batch_size: int = 256
    seed: int = 0


def fit_codebooks(latents, cfg: FitConfig = FitConfig()):
    """Train codebooks on a dataset of (T'_i, width) latent sequences.

    Mini-batch loop of quantize / ema_update / dead_code_refresh over
    shuffled chunks, deterministic under cfg.seed. Returns (Codebooks,
    training log) where the log holds per-epoch commitment loss and
    per-codebook perplexity.
    """
    latents = [np.asarray(z, dtype=np.float64) for z in latents]
    if not latents:
        raise TokenizerError("empty latent dataset")
    width = cfg.P * cfg.dim
    for z in latents:
        if z.ndim != 2 or z.shape[1] != width:
            raise TokenizerError(f"latent width must be {width}")
    data = np.concatenate(latents, axis=0)  # (n, width)
    n = data.shape[0]
    chunks = data.reshape(n, cfg.P, cfg.dim)
    rng = np.random.default_rng(cfg.seed)

    books = Codebooks.empty(cfg.P, cfg.K, cfg.dim, cfg.decay)
    if n < cfg.K:
        warnings.warn(
            f"dataset has {n} chunks per codebook, fewer than K={cfg.K}; "
            "seeding with replacement",
            stacklevel=2,
        )
        for j in range(cfg.P):
            picks = rng.integers(n, size=cfg.K)
            books.codes[j] = chunks[picks, j, :]
    else:
        for j in range(cfg.P):
            books.codes[j] = _kmeanspp_init(chunks[:, j, :], cfg.K, rng)
    # Seed the EMA stats at one count per code so early updates stay sane.
    books.ema_counts[:] = 1.0
    books.ema_sums[:] = books.codes.copy()

    log = {"epochs": []}
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = chunks[order[start : start + cfg.batch_size]]
            flat = batch.reshape(batch.shape[0], width)
            idx, _ = quantize(flat, books)
            ema_update(books, batch, idx)
            dead_code_refresh(books, batch, rng)
        idx, quantized = quantize(data, books)
        commit = commitment_loss(chunks, quantized.reshape(n, cfg.P, cfg.dim))
        perp = []
        for j in range(cfg.P):
            hist = np.bincount(idx[:, j], minlength=cfg.K)
            perp.append(perplexity(hist))
        log["epochs"].append({"commitment": commit, "perplexity": perp})
    return books, log


# ---------------------------------------------------------------------------
# Tokens


def interleave_tokens(indices: np.ndarray) -> list:
    """(T', P) -> flat list, time-major codebook-minor."""
    indices = np.asarray(indices, dtype=np.int64)
    if indices.ndim != 2:
        raise TokenizerError("indices must be (T', P)")
    return indices.reshape(-1).tolist()


def deinterleave_tokens(tokens, P: int) -> np.ndarray:
    tokens = np.asarray(list(tokens), dtype=np.int64)
    if P < 1 or tokens.size % P != 0:
        raise TokenizerError(f"token count {tokens.size} not divisible by P={P}")
    return tokens.reshape(-1, P)


def encode_window(window: GraphWindow, books: Codebooks) -> dict:
    """GraphWindow -> token record (featurize, quantize, interleave)."""
    latent = reference_featurize(window, books.width)
    idx, _ = quantize(latent, books)
    return {
        "window_id": window.window_id,
        "visible_segments": np.flatnonzero(window.visibility).tolist(),
        "tokens": interleave_tokens(idx),
    }


# ---------------------------------------------------------------------------
# Diagnostics


def perplexity(counts) -> float:
    """exp of the assignment-distribution entropy.

    A uniform histogram's perplexity is the number of used codes by
    definition; that case (and the single-code case) is returned directly
    rather than routed through exp(log(...)) rounding.
    """
    c = np.asarray(counts, dtype=np.int64)
    if np.any(c < 0):
        raise TokenizerError("negative histogram count")
    used = c[c > 0]
    total = int(used.sum())
    if total == 0:
        raise TokenizerError("empty histogram")
    if used.size == 1:
        return 1.0
    if np.all(used == used[0]):
        return float(used.size)
    cf = used.astype(np.float64)
    # H = log(total) - sum(c log c) / total, in nats
    H = np.log(float(total)) - float((cf * np.log(cf)).sum()) / float(total)
    return float(np.exp(H))


def codebook_diagnostics(histograms, token_sequences=None) -> dict:
    """Usage / dead-code / perplexity / top-mass per codebook, plus the
    exact duplicate rate of the token corpus when sequences are given."""
    histograms = np.atleast_2d(np.asarray(histograms, dtype=np.int64))
    report = {"codebooks": []}
    for hist in histograms:
        K = int(hist.shape[0])
        total = int(hist.sum())
        if total == 0:
            raise TokenizerError("empty assignment histogram")
        used = int((hist > 0).sum())
        p = np.sort(hist.astype(np.float64) / float(total))[::-1]
        report["codebooks"].append(
            {
                "K": K,
                "used": used,
                "usage_rate": used / K,
                "dead_ratio": (K - used) / K,
                "perplexity": perplexity(hist),
                "top1_mass": float(p[0]),
                "top10_mass": float(p[:10].sum()),
            }
        )
    if token_sequences is not None:
        seqs = [tuple(int(t) for t in s) for s in token_sequences]
        if not seqs:
            raise TokenizerError("empty token corpus")
        total = len(seqs)
        distinct = len(set(seqs))
        report["sequences"] = {
            "total": total,
            "distinct": distinct,
            "collision_rate": (total - distinct) / total,
        }
    return report
