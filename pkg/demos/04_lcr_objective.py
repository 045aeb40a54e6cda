"""The locally constrained representation objective on synthetic data.

Each state representation should be reconstructable as a nonnegative linear
combination of its K temporal neighbors. With the encoder frozen the
objective is a nonnegative least squares in W; a few projected Adam steps
land close to the optimum.
"""

import numpy as np

from lcrl import numerics as nm
from lcrl.lcr import init_w, lcr_loss

rng = np.random.default_rng(1)
identity_encoder = nm.Sequential()  # representations given directly

# states drift slowly along a trajectory, so neighbors predict the center well
k, d = 4, 6
trajectory = np.cumsum(rng.normal(scale=0.1, size=(20, d)), axis=0)
windows = []
for t in range(2, 18):
    neighbors = [trajectory[t - 2], trajectory[t - 1], trajectory[t + 1], trajectory[t + 2]]
    windows.append((trajectory[t], neighbors))

w = init_w(k, rng)
print("initial W:", np.round(w.data[0], 3))
print("initial loss:", lcr_loss(identity_encoder, w, windows).item())

optimizer = nm.Adam([w], lr=5e-3)
for step in range(2000):
    loss = lcr_loss(identity_encoder, w, windows, train_encoder=False)
    optimizer.zero_grad()
    loss.backward()
    optimizer.step()
    np.maximum(w.data, 0.0, out=w.data)  # the nonnegativity clip

print("fitted W:", np.round(w.data[0], 3), "(sums to", round(w.data.sum(), 3), ")")
print("final loss:", lcr_loss(identity_encoder, w, windows).item())
print("note: neighbors of a smooth trajectory reconstruct the center almost")
print("exactly, so the fitted coefficients act like an interpolation kernel")
