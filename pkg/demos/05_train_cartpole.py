"""End-to-end: a short CartPole experiment with and without the constraint.

Runs two small seeded experiments through the harness (a real run uses the
checked-in configs and the CLI; see the README), then dumps representations
from the trained models. Takes a couple of minutes.
"""

import numpy as np

from lcrl.agent import AgentConfig
from lcrl.harness import (
    MetricsRow,
    RunConfig,
    build_network_for_config,
    dump_representations,
    load_checkpoint,
    run_experiment,
)
from lcrl.lcr import LcrConfig

agent = AgentConfig(
    batch_size=64,
    copy_step=25,
    copy_unit="steps",
    epsilon_unit="steps",
    hidden_units=(32,),
    max_buffer_size=5000,
    min_buffer_size=100,
)

base = RunConfig(env="cartpole", episodes=150, runs=1, master_seed=3,
                 agent=agent, out_dir="results/demo_cartpole_dqn")
with_lcr = RunConfig(env="cartpole", episodes=150, runs=1, master_seed=3,
                     agent=agent, out_dir="results/demo_cartpole_lcr",
                     lcr=LcrConfig(k=10, batch_size=2000, gradient_steps=50,
                                   learning_rate=1e-4))

for label, config in (("DQN", base), ("DQN+LCR", with_lcr)):
    path = run_experiment(config)
    rows = [MetricsRow.from_csv(l) for l in path.read_text().splitlines()[1:]]
    returns = np.array([r.episode_return for r in rows])
    print(f"{label:8s} mean return last 50 episodes: {returns[-50:].mean():6.1f}  ({path})")

# identical random trajectories through both trained encoders
for label, config in (("DQN", base), ("DQN+LCR", with_lcr)):
    network = build_network_for_config(config)
    load_checkpoint(f"{config.out_dir}/model_run0.bin", network)
    dump_path, n = dump_representations(network, "cartpole", n_trajectories=5,
                                        seed=123, path=f"{config.out_dir}/repr.csv")
    phi = np.genfromtxt(dump_path, delimiter=",", skip_header=1)[:, 2:]
    spread = np.linalg.norm(phi - phi.mean(axis=0), axis=1).mean()
    print(f"{label:8s} representation spread over {n} shared states: {spread:.3f}")

print("\nplot the learning curves with:")
print("  lcrplot curves results/demo_cartpole_dqn/metrics.csv "
      "results/demo_cartpole_lcr/metrics.csv --labels DQN,DQN+LCR "
      "--smooth 20 --out results/demo_curves.png")
