"""Walk each environment a few steps and show what the agent sees.

Grid observations are 4-channel images over the walled canvas (walls, goal,
agent position, direction value at the agent cell); classic control exposes
the physical state vector.
"""

import numpy as np

from lcrl.envs import FORWARD, TURN_RIGHT, make_env

rng = np.random.default_rng(7)


def render_grid(obs):
    """ASCII view: # wall, G goal, > v < ^ agent by direction."""
    arrows = ">v<^"
    n = obs.shape[1]
    lines = []
    for r in range(n):
        row = ""
        for c in range(n):
            if obs[2, r, c] == 1.0:
                row += arrows[round(obs[3, r, c] * 3)]
            elif obs[1, r, c] == 1.0:
                row += "G"
            elif obs[0, r, c] == 1.0:
                row += "#"
            else:
                row += "."
        lines.append(row)
    return "\n".join(lines)


for name in ("random_goal", "four_rooms"):
    env = make_env(name)
    obs = env.reset(rng)
    print(f"== {name}: {env.config.size}x{env.config.size} interior, "
          f"truncates at {env.max_steps} steps")
    print(render_grid(obs))
    ret = 0.0
    for action in (FORWARD, FORWARD, TURN_RIGHT, FORWARD):
        result = env.step(action)
        ret += result.reward
    print(f"after 4 steps: return {ret:+.2f}\n{render_grid(result.observation)}\n")

env = make_env("cartpole")
obs = env.reset(rng)
print("== cartpole: state (x, x_dot, theta, theta_dot)")
for _ in range(3):
    result = env.step(1)
    print("  ", np.array2string(result.observation, precision=4))

env = make_env("acrobot")
obs = env.reset(rng)
print("== acrobot: observation (cos t1, sin t1, cos t2, sin t2, w1, w2)")
for torque in (0, 2, 2):
    result = env.step(torque)
    print("  ", np.array2string(result.observation, precision=3))
