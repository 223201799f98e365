"""Reverse-mode autodiff on a tiny graph, then a finite-difference check."""

import numpy as np

from mctasnet import ops
from mctasnet.gradcheck import finite_diff_check
from mctasnet.tensor import Tensor, precision

rng = np.random.default_rng(0)

# a 2-channel signal through a dilated depthwise conv, gLN and a sigmoid
x = Tensor(rng.standard_normal((2, 12)), requires_grad=True)
w = Tensor(rng.standard_normal((2, 1, 3)), requires_grad=True)
gamma = Tensor(np.ones((2, 1)), requires_grad=True)
beta = Tensor(np.zeros((2, 1)), requires_grad=True)

h = ops.conv1d(x, w, dilation=2, groups=2)
h = ops.global_layer_norm(h, gamma, beta)
loss = ops.sum(ops.sigmoid(h))
loss.backward()

print("loss           ", loss.item())
print("dtype (default)", x.dtype)
print("grad wrt w     ", w.grad.ravel().round(4))

# the same graph in float64, against central differences
def f(x, w, gamma, beta):
    h = ops.conv1d(x, w, dilation=2, groups=2)
    return ops.sum(ops.sigmoid(ops.global_layer_norm(h, gamma, beta)))

err = finite_diff_check(f, [x.data, w.data, gamma.data, beta.data])
print("worst relative gradient error", f"{err:.2e}")

# 64-bit everywhere inside a precision block
with precision(np.float64):
    print("dtype inside precision(float64):", Tensor([1.0]).dtype)
