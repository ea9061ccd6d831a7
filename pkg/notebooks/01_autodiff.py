# %% [markdown]
# # Tape autodiff and finite-difference checks
#
# Every model in the package runs on a small float64 tape. Each primitive
# records its inputs during the forward pass; `Tape.backward` walks the
# records in reverse and returns a gradient table keyed by tensor.

# %%
import numpy as np

from mmsumm.autodiff import PRIMITIVES, Tape, Tensor, grad_check, ops
from mmsumm.autodiff.probes import primitive_suite

print(sorted(PRIMITIVES))

# %% [markdown]
# A two-layer network and its gradient with respect to the first weight.

# %%
rng = np.random.default_rng(0)
x = Tensor(rng.normal(size=(4, 3)))
w1 = Tensor(rng.normal(size=(3, 5)), requires_grad=True)
w2 = Tensor(rng.normal(size=(5, 2)), requires_grad=True)

with Tape() as tape:
    h = ops.tanh(ops.matmul(x, w1))
    loss = ops.cross_entropy(ops.matmul(h, w2), [0, 1, 1, 0])
grads = tape.backward(loss)
print("loss", loss.item())
print("d loss / d w1\n", grads[w1].round(4))

# %% [markdown]
# `grad_check` compares the tape against central differences and reports
# the largest relative error.

# %%
def net(w1, w2):
    h = ops.tanh(ops.matmul(x, w1))
    return ops.cross_entropy(ops.matmul(h, w2), [0, 1, 1, 0])


print("max rel. error", grad_check(net, [w1.data, w2.data], h=1e-5))

# %% [markdown]
# The same check over every registered primitive, ten random points each.

# %%
suite = primitive_suite(points=10)
for name, err in sorted(suite.items(), key=lambda kv: -kv[1])[:5]:
    print(f"{name:14s} {err:.2e}")
print("worst", max(suite.values()))
