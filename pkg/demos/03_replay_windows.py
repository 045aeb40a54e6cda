"""How the replay buffer serves K-neighborhoods to the representation loss.

Windows never cross episode seams, and the contiguous batch slice handed to
the constraint is exactly the most recent `batch` transitions.
"""

import numpy as np

from lcrl.lcr import build_windows, should_trigger
from lcrl.replay import ReplayBuffer, Transition

buf = ReplayBuffer(capacity=50)
for episode, length in enumerate((7, 5)):
    for step in range(length):
        obs = np.array([float(episode), float(step)])
        buf.push(Transition(obs, 0, -0.01, obs, step == length - 1, episode, step))

print(f"buffer holds {len(buf)} transitions over 2 episodes (7 + 5 steps)")

g = buf.pushes - 9  # a mid-buffer center, global index
window = buf.neighbor_window(g, k=4)
center = buf.get(g)
print(f"center (ep {center.episode_id}, step {center.step_index}) neighbors:",
      [(t.episode_id, t.step_index) for t in window])

edge = buf.neighbor_window(buf.pushes - 1, k=4)
print("newest transition has no right context ->", edge)

windows = build_windows(buf, batch_size=12, k=4)
print(f"\nbuild_windows over the last 12 transitions: {len(windows)} full windows")
for center_state, neighbors in windows:
    print(f"  center ep{int(center_state[0])} step{int(center_state[1])} "
          f"<- steps {[int(n[1]) for n in neighbors]}")

print("\ntrigger fires every `batch` env steps:",
      [t for t in range(1, 25) if should_trigger(t, 8)])
