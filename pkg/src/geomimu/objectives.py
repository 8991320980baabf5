"""Reference implementations of the training losses, exact and framework-free.

These are value-level oracles: no gradients, no batching tricks, softmax rows
stabilized by max subtraction (which cannot change the value). Latent
sequences are (T', d) float arrays; embedding batches are (N, d) with rows
unit-norm to 1e-6.

Default scalars used by the wider pipeline: encoder-side contrastive
temperature 0.1, narration-level temperature 0.05, contrastive loss weight
2.0, cross-entropy weight 1.0.
"""

import numpy as np

DEFAULT_TAU = 0.1
DEFAULT_TAU_ML = 0.05
CONTRASTIVE_WEIGHT = 2.0
CE_WEIGHT = 1.0


class ObjectiveError(ValueError):
    pass


def _as_latent(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ObjectiveError("latent sequence must be (T', d) with T', d >= 1")
    if not np.all(np.isfinite(a)):
        raise ObjectiveError("latent sequence has non-finite entries")
    return a


def _unit_batch(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ObjectiveError("embedding batch must be (N, d)")
    norms = np.linalg.norm(a, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-6):
        raise ObjectiveError("embedding rows must be unit-norm")
    return a


def seq_cosine_similarity(pred, target) -> float:
    """Mean over timesteps of the per-row cosine; identical rows read 1."""
    p = _as_latent(pred)
    t = _as_latent(target)
    if p.shape != t.shape:
        raise ObjectiveError(f"shape mismatch: {p.shape} vs {t.shape}")
    np_norm = np.linalg.norm(p, axis=1)
    nt_norm = np.linalg.norm(t, axis=1)
    if np.any(np_norm == 0.0) or np.any(nt_norm == 0.0):
        raise ObjectiveError("zero-norm timestep in cosine similarity")
    cos = np.clip(np.einsum("ld,ld->l", p, t) / (np_norm * nt_norm), -1.0, 1.0)
    # sqrt rounding keeps x.x/(|x||x|) a hair off 1; equal rows must read
    # exactly +-1 so degenerate self-similarity cases are crisp.
    same = np.all(p == t, axis=1)
    cos[same] = 1.0
    anti = np.all(p == -t, axis=1)
    cos[anti] = -1.0
    return float(cos.mean())


def _logsumexp(row: np.ndarray) -> float:
    m = row.max()
    return float(m + np.log(np.exp(row - m).sum()))


def infonce_cross_view(preds, targets, tau: float) -> float:
    """-(1/N) sum_n log softmax_m(s(pred_n, target_m)/tau) at m = n."""
    if tau <= 0:
        raise ObjectiveError("tau must be positive")
    preds = list(preds)
    targets = list(targets)
    if len(preds) != len(targets) or not preds:
        raise ObjectiveError("need equal, non-empty pred/target lists")
    N = len(preds)
    S = np.empty((N, N), dtype=np.float64)
    for n in range(N):
        for m in range(N):
            S[n, m] = seq_cosine_similarity(preds[n], targets[m])
    total = 0.0
    for n in range(N):
        row = S[n] / tau
        total += _logsumexp(row) - row[n]
    return total / N


def mcvpcl_loss(preds_ab, targets_b, preds_ba, targets_a, tau: float = DEFAULT_TAU) -> float:
    """Cross-view predictive contrast, both directions summed."""
    return infonce_cross_view(preds_ab, targets_b, tau) + infonce_cross_view(preds_ba, targets_a, tau)


def commitment_loss(chunks, codes) -> float:
    """Mean squared chunk-to-code gap, scaled so the value is invariant to
    sequence length: sum of squares times P / (T' * d_total)."""
    c = np.asarray(chunks, dtype=np.float64)
    e = np.asarray(codes, dtype=np.float64)
    if c.shape != e.shape:
        raise ObjectiveError(f"shape mismatch: {c.shape} vs {e.shape}")
    if c.ndim != 3:
        raise ObjectiveError("chunks must be (T', P, dim)")
    T_, P, dim = c.shape
    d_total = P * dim
    diff = c - e
    return float((diff * diff).sum() * (P / (T_ * d_total)))


def smooth_l1(x, y) -> float:
    """Mean Huber penalty with unit transition: 0.5 e^2 inside |e| < 1,
    |e| - 0.5 outside."""
    a = np.asarray(x, dtype=np.float64)
    b = np.asarray(y, dtype=np.float64)
    if a.shape != b.shape:
        raise ObjectiveError(f"shape mismatch: {a.shape} vs {b.shape}")
    e = np.abs(a - b)
    vals = np.where(e < 1.0, 0.5 * e * e, e - 0.5)
    return float(vals.mean())


def itc_loss(h_imu, h_text, tau_ml: float = DEFAULT_TAU_ML) -> float:
    """Symmetric paired-batch contrast averaged over both directions with
    the 1/(2N) factor."""
    if tau_ml <= 0:
        raise ObjectiveError("tau_ml must be positive")
    hi = _unit_batch(h_imu)
    ht = _unit_batch(h_text)
    if hi.shape != ht.shape:
        raise ObjectiveError(f"shape mismatch: {hi.shape} vs {ht.shape}")
    N = hi.shape[0]
    logits = (hi @ ht.T) / tau_ml
    total = 0.0
    # Row and column terms are paired per index: swapping the arguments
    # transposes the logits, which swaps the two addends of each pair, and
    # float addition commutes, so the swapped call returns the same bits.
    for n in range(N):
        row = _logsumexp(logits[n]) - logits[n, n]
        col = _logsumexp(logits[:, n]) - logits[n, n]
        total += row + col
    return total / (2 * N)


def label_contrastive_loss(h, labels, tau: float = DEFAULT_TAU_ML) -> float:
    """Supervised contrast: same-label examples are positives.

    Per anchor with at least one positive:
    -(1/|P|) sum_p log( exp(s_np/tau) / sum_{m != n} exp(s_nm/tau) ),
    averaged over such anchors; anchors without positives drop out. All
    labels distinct gives 0.
    """
    if tau <= 0:
        raise ObjectiveError("tau must be positive")
    hv = _unit_batch(h)
    labels = list(labels)
    N = hv.shape[0]
    if len(labels) != N:
        raise ObjectiveError("one label per row required")
    sims = hv @ hv.T
    terms = []
    for n in range(N):
        pos = [m for m in range(N) if m != n and labels[m] == labels[n]]
        if not pos:
            continue
        others = [m for m in range(N) if m != n]
        row = sims[n, others] / tau
        lse = _logsumexp(row)
        anchor = 0.0
        for p in pos:
            anchor += lse - sims[n, p] / tau
        terms.append(anchor / len(pos))
    if not terms:
        return 0.0
    return float(np.mean(terms))
