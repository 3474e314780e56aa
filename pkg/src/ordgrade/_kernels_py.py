"""Pure-Python/numpy implementations of the hot kernels.

Used when the compiled ``_kernels`` extension is unavailable, and as the
reference side of the backend-agreement tests. Signatures match the
Cython module exactly.
"""

import numpy as np

FNV_OFFSET = 14695981039346656037
FNV_PRIME = 1099511628211
_MASK64 = (1 << 64) - 1


def emd_loss_grad(logits, gold, p_order, alpha, scale, floor, want_grad):
    """Per-row generalized CDF-EMD loss and its gradient w.r.t. the logits.

    loss_s = scale * (sum_i |x_i - y_i|**p_order) ** (alpha / p_order)
    where x is the cumulative softmax of row s and y the cumulative one-hot
    of ``gold[s]`` (0-based).
    """
    z = np.asarray(logits, dtype=np.float64)
    n, c = z.shape
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    q = e / e.sum(axis=1, keepdims=True)
    x = np.cumsum(q, axis=1)
    y = (np.arange(c)[None, :] >= np.asarray(gold)[:, None]).astype(np.float64)
    d = x - y
    d[:, -1] = 0.0  # both CDFs end at exactly 1; drop the rounding residue
    ad = np.abs(d)
    s = np.sum(ad**p_order, axis=1)
    loss = scale * s ** (alpha / p_order)
    if not want_grad:
        return loss, None

    # dL/dd_i = scale * alpha * S**(alpha/p - 1) * |d_i|**(p - 1) * sign(d_i)
    with np.errstate(divide="ignore", invalid="ignore"):
        outer = np.where(s > 0.0, scale * alpha * s ** (alpha / p_order - 1.0), 0.0)
        inner = np.where(ad > 0.0, np.maximum(ad, floor) ** (p_order - 1.0), 0.0)
    gd = outer[:, None] * inner * np.sign(d)
    # cumsum backward: reverse cumulative sum
    gq = np.cumsum(gd[:, ::-1], axis=1)[:, ::-1]
    grad = q * (gq - np.sum(q * gq, axis=1, keepdims=True))
    return loss, grad


def kendall_counts(x, y):
    """Return (concordant - discordant, pairs tied in x, pairs tied in y)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.shape[0]
    s = 0
    tx = 0
    ty = 0
    for i in range(n - 1):
        dx = np.sign(x[i + 1 :] - x[i])
        dy = np.sign(y[i + 1 :] - y[i])
        s += int(np.sum(dx * dy))
        tx += int(np.count_nonzero(dx == 0))
        ty += int(np.count_nonzero(dy == 0))
    return s, tx, ty


def fnv1a64(data):
    h = FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & _MASK64
    return h


def hash_tokens(tokens, out):
    """Add signed hashed counts of ``tokens`` (bytes) into ``out`` in place."""
    dim = out.shape[0]
    for tok in tokens:
        h = fnv1a64(tok)
        out[h % dim] += -1.0 if h >> 63 else 1.0
