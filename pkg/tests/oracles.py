"""Brute-force reference implementations used as independent test oracles.

Everything here is deliberately naive (nested loops, direct formulas) and
shares no code with the library paths it checks.
"""

from __future__ import annotations

import numpy as np


def conv2d_loops(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Exhaustive sliding-window cross-correlation, valid padding, stride 1."""
    b, c, h, w = x.shape
    f, _, kh, kw = kernel.shape
    out = np.zeros((b, f, h - kh + 1, w - kw + 1))
    for bi in range(b):
        for fi in range(f):
            for i in range(h - kh + 1):
                for j in range(w - kw + 1):
                    acc = 0.0
                    for ci in range(c):
                        for p in range(kh):
                            for q in range(kw):
                                acc += x[bi, ci, i + p, j + q] * kernel[fi, ci, p, q]
                    out[bi, fi, i, j] = acc + bias[fi]
    return out


def maxpool2d_loops(x: np.ndarray) -> np.ndarray:
    """Max over non-overlapping 2x2 windows; trailing odd row/column dropped."""
    b, c, h, w = x.shape
    h2, w2 = h // 2, w // 2
    out = np.zeros((b, c, h2, w2))
    for bi in range(b):
        for ci in range(c):
            for i in range(h2):
                for j in range(w2):
                    out[bi, ci, i, j] = x[bi, ci, 2 * i : 2 * i + 2, 2 * j : 2 * j + 2].max()
    return out


def dense_loops(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros((x.shape[0], w.shape[1]))
    for bi in range(x.shape[0]):
        for o in range(w.shape[1]):
            acc = 0.0
            for i in range(x.shape[1]):
                acc += x[bi, i] * w[i, o]
            out[bi, o] = acc + b[o]
    return out


def lcr_loss_loops(w: np.ndarray, centers: np.ndarray, neighbors: np.ndarray) -> float:
    """Mean over windows of || w @ neighbors[t] - centers[t] ||^2.

    w: (K,), centers: (M, D), neighbors: (M, K, D).
    """
    m, k, d = neighbors.shape
    total = 0.0
    for t in range(m):
        for di in range(d):
            pred = 0.0
            for ki in range(k):
                pred += w[ki] * neighbors[t, ki, di]
            diff = pred - centers[t, di]
            total += diff * diff
    return total / m


def window_scan(transitions, k: int):
    """All full K-neighborhoods inside one ordered transition list.

    A window is valid when the K/2 transitions on each side of the center
    exist inside the list and share the center's episode id with contiguous
    step indices. Returns (center_index, neighbor_indices) pairs.
    """
    half = k // 2
    out = []
    for i in range(len(transitions)):
        lo, hi = i - half, i + half
        if lo < 0 or hi >= len(transitions):
            continue
        seg = transitions[lo : hi + 1]
        if any(t.episode_id != seg[0].episode_id for t in seg):
            continue
        if any(seg[j + 1].step_index != seg[j].step_index + 1 for j in range(len(seg) - 1)):
            continue
        out.append((i, [j for j in range(lo, hi + 1) if j != i]))
    return out


def projected_gd_nnls(mats: np.ndarray, targets: np.ndarray, lr: float = 1e-3, steps: int = 200_000) -> np.ndarray:
    """Nonnegative least squares by projected plain gradient descent.

    Minimizes mean_t ||w @ mats[t] - targets[t]||^2 over w >= 0.
    mats: (M, K, D), targets: (M, D), returns w: (K,).
    """
    m = mats.shape[0]
    w = np.zeros(mats.shape[1])
    for _ in range(steps):
        grad = np.zeros_like(w)
        for t in range(m):
            grad += 2.0 * ((w @ mats[t] - targets[t]) @ mats[t].T)
        w = np.maximum(w - lr * grad / m, 0.0)
    return w
