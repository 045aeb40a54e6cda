"""A quick tour of the autodiff core.

Builds a tiny network by hand, backpropagates a scalar loss, and checks one
gradient against central finite differences.
"""

import numpy as np

from lcrl import numerics as nm

rng = np.random.default_rng(0)

# tensors record how they were produced; backward() fills Parameter.grad
x = nm.Tensor(rng.normal(size=(4, 3)))
layer = nm.Dense(3, 2, rng)
loss = nm.square(layer(x)).mean()
loss.backward()
print("loss:", loss.item())
print("dL/dbias:", layer.bias.grad)

# finite-difference check of one weight entry
eps = 1e-5
w = layer.weight.data
analytic = layer.weight.grad[0, 0]
w[0, 0] += eps
hi = nm.square(layer(x)).mean().item()
w[0, 0] -= 2 * eps
lo = nm.square(layer(x)).mean().item()
w[0, 0] += eps
numeric = (hi - lo) / (2 * eps)
print(f"dL/dW[0,0]: analytic {analytic:.10f}, finite-diff {numeric:.10f}")

# convolution + pooling on an image-like batch
img = nm.Tensor(rng.normal(size=(2, 1, 6, 6)))
conv = nm.Conv2d(1, 4, 3, rng)
pooled = nm.maxpool2d(conv(img))
print("conv->pool output shape:", pooled.shape)

# two backward passes accumulate: grads double without zero_grad
p = nm.Parameter(np.ones((2, 2)))
for _ in range(2):
    nm.square(nm.matmul(nm.Tensor(np.ones((1, 2))), p)).sum().backward()
print("accumulated grad after two backward passes:\n", p.grad)

# optimizers consume .grad
opt = nm.Adam([p], lr=0.1)
opt.step()
print("parameter after one Adam step:\n", p.data)
