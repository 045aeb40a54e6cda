"""DQN learner: encoder + value head, epsilon-greedy behavior, TD(0) training.

The network keeps an explicit parameter partition: TD training updates
encoder and head, while the representation constraint (see lcr.py) is only
ever allowed to touch the encoder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import numerics as nm
from .errors import ConfigError
from .replay import ReplayBuffer, Transition


@dataclass
class AgentConfig:
    gamma: float = 0.99
    learning_rate: float = 1e-3
    batch_size: int = 32
    start_epsilon: float = 1.0
    stop_epsilon: float = 1e-3
    epsilon_decay: float = 1e-3
    # copy_step / epsilon_decay tick per episode on grids, per env step on
    # classic control (Table-of-defaults units)
    copy_step: int = 5
    copy_unit: str = "episodes"
    epsilon_unit: str = "episodes"
    hidden_units: tuple = (64,)
    max_buffer_size: int = 10_000
    min_buffer_size: int = 1_000

    def __post_init__(self):
        self.hidden_units = tuple(self.hidden_units)
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma must be in [0, 1], got {self.gamma}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        for name in ("start_epsilon", "stop_epsilon"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {v}")
        if self.copy_step < 1:
            raise ConfigError(f"copy_step must be >= 1, got {self.copy_step}")
        if self.copy_unit not in ("episodes", "steps") or self.epsilon_unit not in ("episodes", "steps"):
            raise ConfigError("copy_unit/epsilon_unit must be 'episodes' or 'steps'")
        if self.batch_size < 1 or self.max_buffer_size < 1 or self.min_buffer_size < 1:
            raise ConfigError("batch and buffer sizes must be positive")


def grid_agent_config() -> AgentConfig:
    return AgentConfig()


def control_agent_config() -> AgentConfig:
    return AgentConfig(
        batch_size=64,
        copy_step=25,
        copy_unit="steps",
        epsilon_unit="steps",
        hidden_units=(32,),
        max_buffer_size=5_000,
        min_buffer_size=100,
    )


def epsilon_schedule(config: AgentConfig, tick: int) -> float:
    """stop + (start - stop) * exp(-decay * tick)."""
    if tick < 0:
        raise ConfigError(f"schedule tick must be >= 0, got {tick}")
    return config.stop_epsilon + (config.start_epsilon - config.stop_epsilon) * math.exp(
        -config.epsilon_decay * tick
    )


class QNetwork:
    """Encoder producing the representation phi, plus a dense value head."""

    def __init__(self, encoder: nm.Sequential, head: nm.Sequential, feature_dim: int):
        self.encoder = encoder
        self.head = head
        self.feature_dim = feature_dim

    def features(self, x) -> nm.Tensor:
        return self.encoder(x)

    def q_values(self, x) -> nm.Tensor:
        return self.head(self.encoder(x))

    def encoder_parameters(self):
        return self.encoder.parameters()

    def head_parameters(self):
        return self.head.parameters()

    def parameters(self):
        return self.encoder.parameters() + self.head.parameters()

    def named_parameters(self):
        return self.encoder.named_parameters("encoder.") + self.head.named_parameters("head.")

    def copy_weights_from(self, other: "QNetwork"):
        for mine, theirs in zip(self.parameters(), other.parameters()):
            np.copyto(mine.data, theirs.data)


def conv_encoder_spec(canvas: int) -> list[tuple[int, int, int]]:
    """(in_ch, out_ch, kernel) triples for the grid encoder at a canvas size.

    Three convolutions, the first two followed by 2x2 max-pooling; widths
    16/32/128 with 3x3 kernels where the map allows, shrinking the final
    kernel on small maps so the feature map stays positive. The wide last
    conv keeps the flattened representation large enough that the
    neighborhood constraint leaves task-relevant directions free.
    """
    spec = []
    spatial = canvas
    widths = [(4, 16), (16, 32), (32, 128)]
    for i, (cin, cout) in enumerate(widths):
        k = min(3, spatial)
        spec.append((cin, cout, k))
        spatial = spatial - k + 1
        if i < 2:
            spatial = spatial // 2  # pooled
        if spatial < 1:
            raise ConfigError(f"grid canvas {canvas} too small for the conv encoder")
    return spec


def build_grid_network(canvas: int, n_actions: int, rng: np.random.Generator) -> QNetwork:
    """conv(16) - pool - conv(32) - pool - conv(128), relu after each conv,
    flatten = phi, then dense(64) - relu - dense(n_actions).

    The pool runs before its relu: max commutes with relu, so the function
    is identical while the elementwise work shrinks fourfold.
    """
    spec = conv_encoder_spec(canvas)
    layers = []
    spatial = canvas
    for i, (cin, cout, k) in enumerate(spec):
        layers.append(nm.Conv2d(cin, cout, k, rng))
        spatial = spatial - k + 1
        if i < 2:
            layers.append(nm.MaxPool2d())
            spatial = spatial // 2
        layers.append(nm.ReLU())
    layers.append(nm.Flatten())
    feature_dim = spec[-1][1] * spatial * spatial
    assert feature_dim > 0
    encoder = nm.Sequential(*layers)
    head = nm.Sequential(nm.Dense(feature_dim, 64, rng), nm.ReLU(), nm.Dense(64, n_actions, rng))
    return QNetwork(encoder, head, feature_dim)


def build_mlp_network(obs_dim: int, n_actions: int, hidden: int, rng: np.random.Generator) -> QNetwork:
    """Two hidden layers of `hidden` units; phi is the second activation."""
    encoder = nm.Sequential(
        nm.Dense(obs_dim, hidden, rng), nm.ReLU(), nm.Dense(hidden, hidden, rng), nm.ReLU()
    )
    head = nm.Sequential(nm.Dense(hidden, n_actions, rng))
    return QNetwork(encoder, head, hidden)


def build_network(env, config: AgentConfig, rng: np.random.Generator) -> QNetwork:
    shape = env.observation_shape
    if len(shape) == 3:
        return build_grid_network(shape[1], env.n_actions, rng)
    return build_mlp_network(shape[0], env.n_actions, config.hidden_units[-1], rng)


class DQNAgent:
    """Online/target Q-networks with Adam on the mean squared TD error."""

    def __init__(self, env, config: AgentConfig, rng: np.random.Generator):
        self.config = config
        self.n_actions = env.n_actions
        self.online = build_network(env, config, rng)
        self.target = build_network(env, config, rng)
        self.target.copy_weights_from(self.online)
        self.optimizer = nm.Adam(self.online.parameters(), lr=config.learning_rate)

    def act(self, obs: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
        """Epsilon-greedy; greedy ties resolve to the lowest action index."""
        if rng.random() < epsilon:
            return int(rng.integers(self.n_actions))
        with nm.no_grad():
            q = self.online.q_values(nm.Tensor(obs[None]))
        return int(np.argmax(q.data[0]))

    def td_loss(self, batch: list[Transition]) -> nm.Tensor:
        """Mean over the batch of (r + gamma * (1-term) * max_a Q_target - Q_online)^2.

        The bootstrap target is a constant; gradient flows only through the
        online network.
        """
        states = np.stack([t.state for t in batch])
        next_states = np.stack([t.next_state for t in batch])
        actions = np.array([t.action for t in batch])
        rewards = np.array([t.reward for t in batch])
        terminated = np.array([t.terminated for t in batch], dtype=np.float64)
        with nm.no_grad():
            next_q = self.target.q_values(nm.Tensor(next_states)).data.max(axis=1)
        targets = rewards + self.config.gamma * (1.0 - terminated) * next_q
        q = self.online.q_values(nm.Tensor(states))
        mask = np.zeros((len(batch), self.n_actions))
        mask[np.arange(len(batch)), actions] = 1.0
        chosen = nm.mul(q, mask).sum(axis=1)
        return nm.square(nm.sub(chosen, nm.Tensor(targets))).mean()

    def train_step(self, buffer: ReplayBuffer, rng: np.random.Generator) -> float | None:
        """One Adam step on a uniform minibatch; None while the buffer warms up."""
        if not buffer.ready:
            return None
        batch = buffer.sample_uniform(rng, self.config.batch_size)
        loss = self.td_loss(batch)
        self.optimizer.zero_grad()
        loss.backward()
        self.optimizer.step()
        return loss.item()

    def sync_target(self):
        self.target.copy_weights_from(self.online)
