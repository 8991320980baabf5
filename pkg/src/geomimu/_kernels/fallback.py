"""Pure-numpy implementations of the hot kernels.

Same contracts as the compiled versions in ``_core``; the package picks one
set at import time. Both must produce identical results on identical input
(ties in nearest-code search break toward the lowest index in both).
"""

import numpy as np


def nearest_codes(x: np.ndarray, codebook: np.ndarray) -> np.ndarray:
    """Index of the nearest codebook row per input row, squared-L2 metric.

    x: (n, d) float64, codebook: (k, d) float64 -> (n,) int64. Ties go to the
    lowest index (np.argmin guarantees this).
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    c = np.ascontiguousarray(codebook, dtype=np.float64)
    if x.ndim != 2 or c.ndim != 2 or x.shape[1] != c.shape[1]:
        raise ValueError("nearest_codes: need (n, d) inputs and (k, d) codebook")
    # ||x - c||^2 = ||x||^2 - 2 x.c + ||c||^2; the ||x||^2 term is constant
    # per row and cannot change the argmin, so it is skipped.
    d2 = (c * c).sum(axis=1)[None, :] - 2.0 * (x @ c.T)
    return np.argmin(d2, axis=1).astype(np.int64)


def lbs_transform(
    rest: np.ndarray,
    weights: np.ndarray,
    joint_idx: np.ndarray,
    A: np.ndarray,
    b: np.ndarray,
) -> np.ndarray:
    """Blend per-joint affine maps onto rest vertices.

    rest: (V, 3); weights/joint_idx: (V, m) per-vertex influence weights and
    joint indices (weights may be zero-padded); A: (F, J, 3, 3), b: (F, J, 3).
    Returns (F, V, 3): for each frame, sum_m w[v,m] * (A[j] @ rest[v] + b[j]).
    """
    rest = np.ascontiguousarray(rest, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    joint_idx = np.ascontiguousarray(joint_idx, dtype=np.int64)
    A = np.ascontiguousarray(A, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    F = A.shape[0]
    V, m = weights.shape
    out = np.zeros((F, V, 3), dtype=np.float64)
    for col in range(m):
        w = weights[:, col]
        active = w != 0.0
        if not np.any(active):
            continue
        j = joint_idx[active, col]
        v = rest[active]
        Aj = A[:, j]
        # explicit mul/add chain, not einsum: same rounding order as the
        # compiled loop so both routes agree bit-for-bit
        moved = Aj[:, :, :, 0] * v[:, 0][None, :, None]
        moved = moved + Aj[:, :, :, 1] * v[:, 1][None, :, None]
        moved = moved + Aj[:, :, :, 2] * v[:, 2][None, :, None]
        moved = moved + b[:, j]
        out[:, active, :] += w[active][None, :, None] * moved
    return out
