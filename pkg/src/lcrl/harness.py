"""Experiment driver: seeded run loop, metrics CSV, sweeps, model checkpoints.

One RunConfig fully determines every emitted byte. Each run r of an
experiment derives three independent RNG streams (environment, agent, lcr)
from (master_seed + r), so toggling the representation constraint never
perturbs environment randomness. Metrics are one CSV row per episode,
flushed as they are produced; model weights are saved per run in a small
versioned binary format (shape table + row-major float64 payload).
"""

from __future__ import annotations

import dataclasses
import io
import struct
from dataclasses import dataclass
from multiprocessing import get_context
from pathlib import Path

import numpy as np
import yaml

from . import numerics as nm
from .agent import AgentConfig, DQNAgent, control_agent_config, epsilon_schedule, grid_agent_config
from .envs import is_grid, make_env
from .errors import ConfigError
from .lcr import LcrConfig, LcrState, lcr_update, should_trigger
from .replay import ReplayBuffer, Transition

METRICS_FIELDS = (
    "run_id",
    "seed",
    "episode",
    "total_env_steps",
    "episode_return",
    "epsilon",
    "mean_td_loss",
    "lcr_loss_first",
    "lcr_loss_last",
)

SWEEPABLE = ("gradient_steps", "k", "lcr_learning_rate", "lcr_batch_size")


@dataclass
class MetricsRow:
    run_id: int
    seed: int
    episode: int
    total_env_steps: int
    episode_return: float
    epsilon: float
    mean_td_loss: float | None
    lcr_loss_first: float | None  # None outside episodes with an LCR invocation
    lcr_loss_last: float | None

    def to_csv(self) -> str:
        def fmt(v):
            # repr of a builtin float is the shortest exact round-trip form
            return "" if v is None else repr(float(v)) if isinstance(v, float) else str(v)

        return ",".join(fmt(getattr(self, f)) for f in METRICS_FIELDS)

    @classmethod
    def from_csv(cls, line: str) -> "MetricsRow":
        parts = line.rstrip("\n").split(",")
        if len(parts) != len(METRICS_FIELDS):
            raise ConfigError(f"metrics row has {len(parts)} fields, expected {len(METRICS_FIELDS)}")
        return cls(
            run_id=int(parts[0]),
            seed=int(parts[1]),
            episode=int(parts[2]),
            total_env_steps=int(parts[3]),
            episode_return=float(parts[4]),
            epsilon=float(parts[5]),
            mean_td_loss=float(parts[6]) if parts[6] else None,
            lcr_loss_first=float(parts[7]) if parts[7] else None,
            lcr_loss_last=float(parts[8]) if parts[8] else None,
        )


@dataclass
class RunConfig:
    env: str
    episodes: int
    runs: int = 1
    master_seed: int = 0
    out_dir: str = "results"
    agent: AgentConfig = None
    lcr: LcrConfig | None = None  # absent -> pure DQN baseline
    workers: int = 1

    def __post_init__(self):
        if self.agent is None:
            self.agent = grid_agent_config() if is_grid(self.env) else control_agent_config()
        if self.episodes < 1 or self.runs < 1:
            raise ConfigError("episodes and runs must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        make_env(self.env)  # validates the name

    def to_dict(self) -> dict:
        out = {
            "env": self.env,
            "episodes": self.episodes,
            "runs": self.runs,
            "master_seed": self.master_seed,
            "out_dir": self.out_dir,
            "workers": self.workers,
            "agent": dataclasses.asdict(self.agent),
        }
        out["agent"]["hidden_units"] = list(self.agent.hidden_units)
        if self.lcr is not None:
            out["lcr"] = dataclasses.asdict(self.lcr)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        if "env" not in data or "episodes" not in data:
            raise ConfigError("config needs at least 'env' and 'episodes'")
        if "agent" in data and data["agent"] is not None:
            try:
                data["agent"] = AgentConfig(**data["agent"])
            except TypeError as e:
                raise ConfigError(f"bad 'agent' section: {e}") from None
        if "lcr" in data and data["lcr"] is not None:
            try:
                data["lcr"] = LcrConfig(**data["lcr"])
            except TypeError as e:
                raise ConfigError(f"bad 'lcr' section: {e}") from None
        return cls(**data)


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: cannot parse config: {e}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a mapping of sections")
    try:
        return RunConfig.from_dict(data)
    except ConfigError as e:
        raise ConfigError(f"{path}: {e}") from None


def save_config(config: RunConfig, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(config.to_dict(), fh, sort_keys=True)


def run_streams(master_seed: int, run_id: int):
    """(env, agent, lcr) generators for one run, independent of each other."""
    return [
        np.random.default_rng(np.random.SeedSequence((master_seed + run_id, k)))
        for k in range(3)
    ]


def run_single(config: RunConfig, run_id: int, lcr_probe=None, row_sink=None):
    """Execute one seeded run; returns (rows, agent, lcr_invocations).

    `row_sink`, when given, receives each MetricsRow as it is produced
    (incremental flushing); `lcr_probe` is forwarded to every lcr_update
    call (used by assert-instrumented acceptance runs).
    """
    env_rng, agent_rng, lcr_rng = run_streams(config.master_seed, run_id)
    seed = config.master_seed + run_id
    env = make_env(config.env)
    agent = DQNAgent(env, config.agent, agent_rng)
    buffer = ReplayBuffer(config.agent.max_buffer_size, config.agent.min_buffer_size)
    lcr_state = LcrState()
    per_episode_eps = config.agent.epsilon_unit == "episodes"
    per_episode_copy = config.agent.copy_unit == "episodes"

    rows = []
    t = 0
    episode_id = 0
    lcr_invocations = 0
    for episode in range(config.episodes):
        obs = env.reset(env_rng)
        episode_return = 0.0
        td_losses = []
        lcr_first = lcr_last = None
        epsilon = epsilon_schedule(config.agent, episode if per_episode_eps else t)
        step_index = 0
        while True:
            if not per_episode_eps:
                epsilon = epsilon_schedule(config.agent, t)
            action = agent.act(obs, epsilon, agent_rng)
            result = env.step(action)
            buffer.push(
                Transition(obs, action, result.reward, result.observation,
                           result.terminated, episode_id, step_index)
            )
            obs = result.observation
            episode_return += result.reward
            t += 1
            step_index += 1
            loss = agent.train_step(buffer, agent_rng)
            if loss is not None:
                td_losses.append(loss)
            if not per_episode_copy and t % config.agent.copy_step == 0:
                agent.sync_target()
            if config.lcr is not None and should_trigger(t, config.lcr.batch_size):
                out = lcr_update(agent.online, buffer, config.lcr, lcr_rng,
                                 state=lcr_state, probe=lcr_probe)
                if out is not None:
                    lcr_invocations += 1
                    lcr_first, lcr_last = out
            if result.done:
                break
        if per_episode_copy and (episode + 1) % config.agent.copy_step == 0:
            agent.sync_target()
        row = MetricsRow(
            run_id=run_id,
            seed=seed,
            episode=episode,
            total_env_steps=t,
            episode_return=episode_return,
            epsilon=epsilon,
            mean_td_loss=float(np.mean(td_losses)) if td_losses else None,
            lcr_loss_first=lcr_first,
            lcr_loss_last=lcr_last,
        )
        rows.append(row)
        if row_sink is not None:
            row_sink(row)
        episode_id += 1
    return rows, agent, lcr_invocations


def _run_worker(args):
    config_dict, run_id = args
    config = RunConfig.from_dict(config_dict)
    rows, agent, invocations = run_single(config, run_id)
    buf = io.BytesIO()
    _write_checkpoint_stream(buf, agent.online.named_parameters())
    return run_id, rows, buf.getvalue(), invocations


def run_experiment(config: RunConfig, out_dir=None, metrics_name: str = "metrics.csv"):
    """Run all seeds of one experiment; returns the metrics CSV path.

    Also writes one `model_run<r>.bin` checkpoint per run next to the CSV.
    With config.workers > 1, runs execute in parallel worker processes and
    rows are written grouped by run in run order (still deterministic).
    """
    out = Path(out_dir if out_dir is not None else config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics_path = out / metrics_name
    with open(metrics_path, "w", newline="") as fh:
        fh.write(",".join(METRICS_FIELDS) + "\n")

        def sink(row):
            fh.write(row.to_csv() + "\n")
            fh.flush()

        if config.workers > 1 and config.runs > 1:
            ctx = get_context("fork")
            payload = config.to_dict()
            with ctx.Pool(processes=min(config.workers, config.runs)) as pool:
                for run_id, rows, ckpt, _ in pool.imap(
                    _run_worker, [(payload, r) for r in range(config.runs)]
                ):
                    for row in rows:
                        fh.write(row.to_csv() + "\n")
                    fh.flush()
                    (out / f"model_run{run_id}.bin").write_bytes(ckpt)
        else:
            for run_id in range(config.runs):
                _, agent, _ = run_single(config, run_id, row_sink=sink)
                save_checkpoint(out / f"model_run{run_id}.bin", agent.online.named_parameters())
    return metrics_path


def run_sweep(config: RunConfig, param: str, values, out_dir=None):
    """One run_experiment per value of an LCR hyperparameter.

    Filenames encode the swept value: metrics_<param>_<value>.csv.
    """
    if param not in SWEEPABLE:
        raise ConfigError(f"unknown sweep parameter {param!r}; expected one of {SWEEPABLE}")
    if config.lcr is None:
        raise ConfigError("sweep needs a config with an lcr section")
    if len(values) != len(set(values)):
        raise ConfigError("sweep values must be distinct")
    field = {"gradient_steps": "gradient_steps", "k": "k",
             "lcr_learning_rate": "learning_rate", "lcr_batch_size": "batch_size"}[param]
    paths = []
    for value in values:
        lcr_kwargs = dataclasses.asdict(config.lcr)
        lcr_kwargs[field] = type(lcr_kwargs[field])(value)
        sub = dataclasses.replace(config, lcr=LcrConfig(**lcr_kwargs))
        name = f"metrics_{param}_{value}.csv"
        paths.append(run_experiment(sub, out_dir=out_dir, metrics_name=name))
    return paths


# -- representation dumps ---------------------------------------------------------


def dump_representations(network, env_name: str, n_trajectories: int, seed: int, path):
    """Roll out a uniform-random policy and record phi for every visited state.

    The action and environment streams depend only on `seed`, so dumps from
    different models visit the exact same states. CSV columns:
    trajectory_id, step, phi_1..phi_D.
    """
    env = make_env(env_name)
    ss = np.random.SeedSequence(seed)
    env_rng, action_rng = [np.random.default_rng(c) for c in ss.spawn(2)]
    d = network.feature_dim
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n_rows = 0
    with open(path, "w", newline="") as fh:
        fh.write("trajectory_id,step," + ",".join(f"phi_{i + 1}" for i in range(d)) + "\n")
        for traj in range(n_trajectories):
            obs = env.reset(env_rng)
            step = 0
            while True:
                with nm.no_grad():
                    phi = network.features(nm.Tensor(obs[None])).data[0]
                fh.write(f"{traj},{step},")
                fh.write(",".join(repr(float(v)) for v in phi) + "\n")
                n_rows += 1
                result = env.step(int(action_rng.integers(env.n_actions)))
                obs = result.observation
                step += 1
                if result.done:
                    break
    return path, n_rows


def load_representation_dump(path) -> np.ndarray:
    """Phi matrix (rows x D) from a dump CSV."""
    data = np.genfromtxt(path, delimiter=",", skip_header=1)
    if data.ndim == 1:
        data = data[None]
    return data[:, 2:]


# -- checkpoints --------------------------------------------------------------------

CHECKPOINT_MAGIC = b"LCRLCKPT"
CHECKPOINT_VERSION = 1


def _write_checkpoint_stream(fh, named_params) -> None:
    named_params = list(named_params)
    fh.write(CHECKPOINT_MAGIC)
    fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(named_params)))
    for name, p in named_params:
        encoded = name.encode()
        fh.write(struct.pack("<H", len(encoded)))
        fh.write(encoded)
        fh.write(struct.pack("<B", p.data.ndim))
        fh.write(struct.pack(f"<{p.data.ndim}I", *p.data.shape))
    for _, p in named_params:
        fh.write(np.ascontiguousarray(p.data).tobytes())


def save_checkpoint(path, named_params) -> None:
    with open(path, "wb") as fh:
        _write_checkpoint_stream(fh, named_params)


def load_checkpoint(path, network) -> None:
    """Load weights into `network`; names and shapes must match exactly."""
    raw = Path(path).read_bytes()
    if raw[:8] != CHECKPOINT_MAGIC:
        raise ConfigError(f"{path}: not a model checkpoint")
    version, count = struct.unpack_from("<II", raw, 8)
    if version != CHECKPOINT_VERSION:
        raise ConfigError(f"{path}: unsupported checkpoint version {version}")
    offset = 16
    table = []
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", raw, offset)
        offset += 2
        name = raw[offset : offset + name_len].decode()
        offset += name_len
        (ndim,) = struct.unpack_from("<B", raw, offset)
        offset += 1
        shape = struct.unpack_from(f"<{ndim}I", raw, offset)
        offset += 4 * ndim
        table.append((name, shape))
    params = network.named_parameters()
    if [(n, p.data.shape) for n, p in params] != [(n, tuple(s)) for n, s in table]:
        raise ConfigError(f"{path}: checkpoint shape table does not match the network")
    for _, p in params:
        n = p.data.size
        p.data[...] = np.frombuffer(raw, dtype=np.float64, count=n, offset=offset).reshape(p.data.shape)
        offset += 8 * n


def build_network_for_config(config: RunConfig, seed_run: int = 0):
    """Fresh network with the architecture a run of this config would use."""
    _, agent_rng, _ = run_streams(config.master_seed, seed_run)
    env = make_env(config.env)
    agent = DQNAgent(env, config.agent, agent_rng)
    return agent.online
