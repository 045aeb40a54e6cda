"""Locally constrained representations: the auxiliary objective and its loop.

Every `batch_size` environment steps, the K-neighborhoods of the most recent
transitions are collected and the encoder (plus a shared nonnegative
coefficient row W) takes a few Adam steps on

    mean over windows T of  || W phi_nearest(T) - phi_T ||^2,

where phi_nearest(T) stacks the K neighbor representations row-wise. W is
re-drawn from Uniform(0, 1) at each invocation and clipped to >= 0 after
every step; the value head is never touched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nm
from .errors import ConfigError
from .replay import ReplayBuffer


@dataclass
class LcrConfig:
    k: int = 10
    batch_size: int = 5000
    gradient_steps: int = 100
    learning_rate: float = 1e-4
    reuse_w: bool = False  # ablation switch; default re-draws W per invocation

    def __post_init__(self):
        if self.k % 2 != 0 or self.k < 2:
            raise ConfigError(f"K must be even and >= 2, got {self.k}")
        if self.batch_size < self.k + 1:
            raise ConfigError(f"batch_size must be >= K+1, got {self.batch_size}")
        if self.gradient_steps < 1:
            raise ConfigError(f"gradient_steps must be >= 1, got {self.gradient_steps}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")


@dataclass
class LcrState:
    """Coefficient row carried across invocations only when reuse_w is set."""

    w: nm.Parameter | None = None


def init_w(k: int, rng: np.random.Generator) -> nm.Parameter:
    """W ~ Uniform(0, 1), shape 1 x K."""
    if k < 2:
        raise ConfigError(f"K must be >= 2, got {k}")
    return nm.Parameter(rng.uniform(0.0, 1.0, size=(1, k)))


def build_windows(buffer: ReplayBuffer, batch_size: int, k: int):
    """Full K-neighborhoods among the last `batch_size` transitions.

    Returns (center_state, [neighbor states in temporal order]) pairs for
    every center whose whole window fits inside the batch slice without
    crossing an episode seam. Can be empty.
    """
    if k % 2 != 0 or k < 2:
        raise ConfigError(f"K must be even and >= 2, got {k}")
    recent = buffer.last_window(batch_size)
    half = k // 2
    windows = []
    for i in range(half, len(recent) - half):
        seg = recent[i - half : i + half + 1]
        ep = seg[half].episode_id
        if any(t.episode_id != ep for t in seg):
            continue
        neighbors = [t.state for j, t in enumerate(seg) if j != half]
        windows.append((seg[half].state, neighbors))
    return windows


def _stack_unique(windows):
    """Stack the distinct observations once; windows become index arrays.

    Deduplicates first by object identity (buffer states are shared across
    adjacent windows), then by content, so the encoder forward touches each
    distinct observation exactly once.
    """
    by_id: dict[int, int] = {}
    by_content: dict[bytes, int] = {}
    rows: list[np.ndarray] = []

    def row_of(obs) -> int:
        key = id(obs)
        got = by_id.get(key)
        if got is not None:
            return got
        content = obs.tobytes()
        got = by_content.get(content)
        if got is None:
            got = len(rows)
            rows.append(obs)
            by_content[content] = got
        by_id[key] = got
        return got

    center_idx = np.empty(len(windows), dtype=np.intp)
    k = len(windows[0][1])
    neighbor_idx = np.empty((len(windows), k), dtype=np.intp)
    for t, (center, neighbors) in enumerate(windows):
        center_idx[t] = row_of(center)
        for j, obs in enumerate(neighbors):
            neighbor_idx[t, j] = row_of(obs)
    return np.stack(rows), center_idx, neighbor_idx


def _prediction_loss(phi: nm.Tensor, w: nm.Parameter, center_idx, neighbor_idx) -> nm.Tensor:
    m, k = neighbor_idx.shape
    d = phi.shape[1]
    centers = nm.take_rows(phi, center_idx)  # M x D
    # gather in K-major order so the W contraction is one plain matmul:
    # row (k, t) of the gather is phi[neighbor_idx[t, k]]
    neighbors = nm.take_rows(phi, neighbor_idx.T.reshape(-1))  # (K*M) x D
    predicted = nm.reshape(nm.matmul(w, nm.reshape(neighbors, (k, m * d))), (m, d))
    return nm.mul(nm.square(nm.sub(predicted, centers)).sum(), 1.0 / m)


class _EncoderForward:
    """Per-invocation forward plan over a fixed observation batch.

    The window states are constant across an invocation's gradient steps, so
    when the encoder starts with a convolution its im2col matrix is
    materialized once here and the first layer runs as a plain matmul
    (identical arithmetic, no per-step unfold).
    """

    def __init__(self, encoder: nm.Sequential, stacked: np.ndarray):
        self.encoder = encoder
        self.stacked = stacked
        self.lowered = None
        layers = encoder.layers
        if layers and isinstance(layers[0], nm.Conv2d) and stacked.ndim == 4:
            first = layers[0]
            cols, hp, wp = nm.im2col(stacked, first.kernel_size, first.kernel_size)
            self.lowered = (
                nm.Tensor(np.ascontiguousarray(cols)),
                first,
                (stacked.shape[0], hp, wp, first.out_channels),
                layers[1:],
            )

    def __call__(self) -> nm.Tensor:
        if self.lowered is None:
            return self.encoder(nm.Tensor(self.stacked))
        cols, first, (n, hp, wp, f), rest = self.lowered
        k_mat = nm.transpose(nm.reshape(first.weight, (f, -1)), (1, 0))
        y = nm.add(nm.matmul(cols, k_mat), first.bias)  # (N*H'*W', F) + per-channel bias
        y = nm.transpose(nm.reshape(y, (n, hp, wp, f)), (0, 3, 1, 2))
        for layer in rest:
            y = layer(y)
        return y


def lcr_loss(encoder, w: nm.Parameter, windows, train_encoder: bool = True) -> nm.Tensor:
    """Mean over windows of the squared prediction error ||W phi_nearest - phi||^2.

    Differentiable w.r.t. W and (unless train_encoder is False) the encoder
    parameters.
    """
    if not windows:
        raise ConfigError("lcr_loss needs at least one window")
    stacked, center_idx, neighbor_idx = _stack_unique(windows)
    if train_encoder:
        phi = encoder(nm.Tensor(stacked))
    else:
        with nm.no_grad():
            phi = encoder(nm.Tensor(stacked))
    return _prediction_loss(phi, w, center_idx, neighbor_idx)


def lcr_update(
    network,
    buffer: ReplayBuffer,
    config: LcrConfig,
    rng: np.random.Generator,
    state: LcrState | None = None,
    update_encoder: bool = True,
    probe=None,
) -> tuple[float, float] | None:
    """Run `gradient_steps` Adam steps of the constraint on the last batch.

    W is freshly drawn (unless the config reuses it across invocations) and
    clipped to >= 0 after every step. Optimizer moments are new per
    invocation. Only W and encoder parameters move; the head never does.
    Returns (first loss, last loss), or None when no full window exists.
    """
    windows = build_windows(buffer, config.batch_size, config.k)
    if not windows:
        return None
    if state is not None and config.reuse_w and state.w is not None:
        w = state.w
    else:
        w = init_w(config.k, rng)
    if state is not None:
        state.w = w
    params = [w] + (list(network.encoder_parameters()) if update_encoder else [])
    optimizer = nm.Adam(params, lr=config.learning_rate)

    stacked, center_idx, neighbor_idx = _stack_unique(windows)
    if update_encoder:
        forward = _EncoderForward(network.encoder, stacked)
    else:
        with nm.no_grad():  # frozen encoder: phi is constant across steps
            phi_const = network.encoder(nm.Tensor(stacked))
        forward = lambda: phi_const

    first = last = None
    for step in range(config.gradient_steps):
        loss = _prediction_loss(forward(), w, center_idx, neighbor_idx)
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        np.maximum(w.data, 0.0, out=w.data)
        assert w.data.min() >= 0.0
        last = loss.item()
        if first is None:
            first = last
        if probe is not None:
            probe(step, last, w)
    return first, last


def should_trigger(total_env_steps: int, batch_size: int) -> bool:
    """True exactly on every batch_size-th environment step."""
    return total_env_steps > 0 and total_env_steps % batch_size == 0
