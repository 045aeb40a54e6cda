"""DQN agent tests: policy, schedule, TD loss oracle, training sanity."""

import math

import numpy as np
import pytest
from scipy import stats

from lcrl import numerics as nm
from lcrl.agent import (
    AgentConfig,
    DQNAgent,
    build_grid_network,
    build_mlp_network,
    control_agent_config,
    conv_encoder_spec,
    epsilon_schedule,
    grid_agent_config,
)
from lcrl.envs import make_env
from lcrl.errors import ConfigError
from lcrl.replay import ReplayBuffer, Transition


def rng(seed=0):
    return np.random.default_rng(seed)


def make_agent(env_name="acrobot", seed=0, **overrides):
    env = make_env(env_name)
    base = grid_agent_config() if env_name in ("random_goal", "four_rooms") else control_agent_config()
    cfg = AgentConfig(**{**base.__dict__, **overrides})
    return env, DQNAgent(env, cfg, rng(seed))


def force_constant_q(agent, q_values):
    """Zero every weight and set the output bias so Q(s, .) == q_values."""
    for p in agent.online.parameters():
        p.data[:] = 0.0
    agent.online.head.layers[-1].bias.data[:] = q_values
    agent.sync_target()


def transition(state, action, reward, next_state, terminated):
    return Transition(np.asarray(state, dtype=np.float64), action, reward,
                      np.asarray(next_state, dtype=np.float64), terminated, 0, 0)


# -- configs / schedule -----------------------------------------------------------


def test_config_validation():
    with pytest.raises(ConfigError):
        AgentConfig(gamma=1.5)
    with pytest.raises(ConfigError):
        AgentConfig(learning_rate=0.0)
    with pytest.raises(ConfigError):
        AgentConfig(start_epsilon=2.0)
    with pytest.raises(ConfigError):
        AgentConfig(copy_step=0)
    with pytest.raises(ConfigError):
        AgentConfig(copy_unit="minutes")


def test_epsilon_schedule_endpoints():
    cfg = grid_agent_config()
    assert epsilon_schedule(cfg, 0) == pytest.approx(1.0)
    assert epsilon_schedule(cfg, 10_000_000) == pytest.approx(1e-3)


def test_epsilon_schedule_closed_form_at_1000():
    cfg = grid_agent_config()
    expected = 1e-3 + (1.0 - 1e-3) * math.exp(-1.0)
    assert epsilon_schedule(cfg, 1000) == pytest.approx(expected, rel=1e-12)
    assert epsilon_schedule(cfg, 1000) == pytest.approx(0.3685, abs=1e-4)


def test_epsilon_schedule_rejects_negative():
    with pytest.raises(ConfigError):
        epsilon_schedule(grid_agent_config(), -1)


# -- act ---------------------------------------------------------------------------


def test_act_uniform_when_epsilon_one():
    env, agent = make_agent("acrobot", seed=1)
    obs = env.reset(rng(2))
    r = rng(3)
    counts = np.bincount([agent.act(obs, 1.0, r) for _ in range(6000)], minlength=3)
    expected = 6000 / 3
    chi2 = ((counts - expected) ** 2 / expected).sum()
    assert chi2 < stats.chi2.ppf(0.999, 2)


def test_act_greedy_argmax():
    env, agent = make_agent("acrobot", seed=4)
    force_constant_q(agent, [0.1, 0.9, 0.3])
    obs = env.reset(rng(5))
    assert agent.act(obs, 0.0, rng(6)) == 1


def test_act_greedy_tie_picks_lowest_index():
    env, agent = make_agent("acrobot", seed=7)
    force_constant_q(agent, [0.4, 0.4, 0.4])
    obs = env.reset(rng(8))
    assert agent.act(obs, 0.0, rng(9)) == 0


def test_greedy_invariant_under_positive_scaling():
    env, agent = make_agent("cartpole", seed=10)
    out_layer = agent.online.head.layers[-1]
    r = rng(11)
    observations = [env.reset(r) for _ in range(10)]
    before = [agent.act(o, 0.0, rng(1)) for o in observations]
    out_layer.weight.data *= 3.7
    out_layer.bias.data *= 3.7
    after = [agent.act(o, 0.0, rng(1)) for o in observations]
    assert before == after


# -- td_loss -------------------------------------------------------------------------


def test_td_loss_terminal_unit_reward():
    env, agent = make_agent("cartpole", seed=12)
    force_constant_q(agent, [0.0, 0.0])
    batch = [transition(np.zeros(4), 0, 1.0, np.zeros(4), True)]
    assert agent.td_loss(batch).item() == pytest.approx(1.0)


def test_td_loss_zero_at_fixed_point():
    env, agent = make_agent("cartpole", seed=13)
    force_constant_q(agent, [0.5, 0.5])
    r = 0.5 - agent.config.gamma * 0.5  # makes target exactly Q(s, a)
    batch = [transition(np.zeros(4), 1, r, np.ones(4), False)]
    assert agent.td_loss(batch).item() == pytest.approx(0.0, abs=1e-15)


def test_td_loss_matches_per_transition_oracle():
    env, agent = make_agent("acrobot", seed=14)
    r = rng(15)
    batch = [
        transition(r.normal(size=6), int(r.integers(3)), float(r.normal()), r.normal(size=6), bool(r.integers(2)))
        for _ in range(16)
    ]
    loss = agent.td_loss(batch).item()
    with nm.no_grad():
        per = []
        for t in batch:
            qt = agent.target.q_values(nm.Tensor(t.next_state[None])).data[0].max()
            y = t.reward + agent.config.gamma * (0.0 if t.terminated else qt)
            q = agent.online.q_values(nm.Tensor(t.state[None])).data[0, t.action]
            per.append((q - y) ** 2)
    assert loss == pytest.approx(float(np.mean(per)), rel=1e-12)


def test_td_loss_gamma_zero_reduces_to_reward_regression():
    env, agent = make_agent("cartpole", seed=16, gamma=0.0)
    agent.sync_target()
    r = rng(17)
    batch = [transition(r.normal(size=4), int(r.integers(2)), float(r.normal()), r.normal(size=4), False) for _ in range(8)]
    loss = agent.td_loss(batch).item()
    with nm.no_grad():
        per = [
            (agent.online.q_values(nm.Tensor(t.state[None])).data[0, t.action] - t.reward) ** 2
            for t in batch
        ]
    assert loss == pytest.approx(float(np.mean(per)), rel=1e-12)


def test_td_loss_gradient_reaches_encoder_and_head_only_online():
    env, agent = make_agent("cartpole", seed=18)
    r = rng(19)
    batch = [transition(r.normal(size=4), 0, 1.0, r.normal(size=4), False) for _ in range(4)]
    loss = agent.td_loss(batch)
    agent.optimizer.zero_grad()
    loss.backward()
    assert any(np.abs(p.grad).max() > 0 for p in agent.online.encoder_parameters())
    assert any(np.abs(p.grad).max() > 0 for p in agent.online.head_parameters())
    for p in agent.target.parameters():
        assert np.abs(p.grad).max() == 0.0


# -- training ---------------------------------------------------------------------


def test_loss_decreases_on_frozen_minibatch():
    env, agent = make_agent("cartpole", seed=20)
    r = rng(21)
    batch = [transition(r.normal(size=4), int(r.integers(2)), float(r.normal()), r.normal(size=4), True) for _ in range(32)]
    first = agent.td_loss(batch).item()
    for _ in range(100):
        loss = agent.td_loss(batch)
        agent.optimizer.zero_grad()
        loss.backward()
        agent.optimizer.step()
    last = agent.td_loss(batch).item()
    assert last < first * 0.5


def test_q_converges_to_zero_in_absorbing_mdp():
    # every transition is terminal with zero reward, so the TD target is
    # exactly 0 and Q must regress toward it
    env, agent = make_agent("cartpole", seed=22)
    r = rng(23)
    states = r.normal(size=(64, 4))
    buf = ReplayBuffer(capacity=200, min_size=1)
    for i, s in enumerate(states):
        for a in range(2):
            buf.push(transition(s, a, 0.0, states[(i + 1) % 64], True))
    with nm.no_grad():
        q0 = np.abs(agent.online.q_values(nm.Tensor(states)).data).max()
    for step in range(600):
        agent.train_step(buf, r)
        if (step + 1) % 25 == 0:
            agent.sync_target()
    with nm.no_grad():
        q1 = np.abs(agent.online.q_values(nm.Tensor(states)).data).max()
    assert q1 < 0.1 * q0


def test_training_deterministic_given_seed():
    snapshots = []
    for _ in range(2):
        env, agent = make_agent("cartpole", seed=24)
        r = rng(25)
        buf = ReplayBuffer(capacity=500, min_size=1)
        obs = env.reset(r)
        for _ in range(150):
            a = agent.act(obs, 0.3, r)
            res = env.step(a)
            buf.push(transition(obs, a, res.reward, res.observation, res.terminated))
            obs = env.reset(r) if res.done else res.observation
            agent.train_step(buf, r)
        snapshots.append(np.concatenate([p.data.ravel() for p in agent.online.parameters()]))
    assert (snapshots[0] == snapshots[1]).all()


def test_train_step_noop_until_buffer_ready():
    env, agent = make_agent("cartpole", seed=26)
    buf = ReplayBuffer(capacity=100, min_size=50)
    buf.push(transition(np.zeros(4), 0, 0.0, np.zeros(4), False))
    assert agent.train_step(buf, rng(27)) is None


# -- target sync --------------------------------------------------------------------


def test_sync_target_bit_copy():
    env, agent = make_agent("cartpole", seed=28)
    r = rng(29)
    batch = [transition(r.normal(size=4), 0, 1.0, r.normal(size=4), False) for _ in range(8)]
    for _ in range(10):
        loss = agent.td_loss(batch)
        agent.optimizer.zero_grad()
        loss.backward()
        agent.optimizer.step()
    obs = r.normal(size=(5, 4))
    with nm.no_grad():
        assert (agent.online.q_values(nm.Tensor(obs)).data != agent.target.q_values(nm.Tensor(obs)).data).any()
    agent.sync_target()
    with nm.no_grad():
        a = agent.online.q_values(nm.Tensor(obs)).data
        b = agent.target.q_values(nm.Tensor(obs)).data
    assert (a == b).all()


def test_target_equals_online_at_init():
    env, agent = make_agent("cartpole", seed=30)
    obs = rng(31).normal(size=(4, 4))
    with nm.no_grad():
        a = agent.online.q_values(nm.Tensor(obs)).data
        b = agent.target.q_values(nm.Tensor(obs)).data
    assert (a == b).all()


# -- architectures ------------------------------------------------------------------


def test_grid_network_feature_dims():
    # random_goal: 8x8 interior -> 10x10 canvas -> phi = 128
    net = build_grid_network(10, 3, rng(32))
    assert net.feature_dim == 128
    obs = rng(33).random(size=(2, 4, 10, 10))
    with nm.no_grad():
        assert net.features(nm.Tensor(obs)).shape == (2, 128)
        assert net.q_values(nm.Tensor(obs)).shape == (2, 3)
    # four_rooms: 9x9 interior -> 11x11 canvas
    net11 = build_grid_network(11, 3, rng(34))
    assert net11.feature_dim == 128


def test_conv_spec_topology():
    # 3 convolutions, widths 16/32/32, first two pooled
    spec = conv_encoder_spec(10)
    assert [(cin, cout) for cin, cout, _ in spec] == [(4, 16), (16, 32), (32, 128)]
    assert [k for _, _, k in spec] == [3, 3, 1]
    with pytest.raises(ConfigError):
        conv_encoder_spec(4)


def test_mlp_network_feature_dim():
    net = build_mlp_network(4, 2, 32, rng(35))
    assert net.feature_dim == 32
    obs = rng(36).normal(size=(3, 4))
    with nm.no_grad():
        assert net.features(nm.Tensor(obs)).shape == (3, 32)
        assert net.q_values(nm.Tensor(obs)).shape == (3, 2)


def test_parameter_partition_is_disjoint_and_complete():
    env, agent = make_agent("cartpole", seed=37)
    enc = {id(p) for p in agent.online.encoder_parameters()}
    head = {id(p) for p in agent.online.head_parameters()}
    assert not enc & head
    assert enc | head == {id(p) for p in agent.online.parameters()}
