# %% [markdown]
# # Local training: gradients, SGD with momentum, proximal term

# %%
import numpy as np

from fedcross.data import make_synthetic
from fedcross.models import MlpArchitecture, TrainerConfig, evaluate, init_params, local_train, loss_and_grad

arch = MlpArchitecture((8, 16, 3))
print("parameters:", arch.param_count)

# %% [markdown]
# Central finite differences agree with the analytic gradient.

# %%
rng = np.random.default_rng(0)
p = 0.5 * rng.standard_normal(arch.param_count)
x, y = rng.standard_normal((10, 8)), rng.integers(0, 3, 10)
_, g = loss_and_grad(p, arch, x, y)
eps = 1e-5
fd = np.array([
    (loss_and_grad(p + eps * e, arch, x, y)[0] - loss_and_grad(p - eps * e, arch, x, y)[0]) / (2 * eps)
    for e in np.eye(arch.param_count)
])
print("max abs difference:", np.abs(g - fd).max())

# %% [markdown]
# Five local epochs on one client's data, with and without a strong pull
# toward an anchor model.

# %%
shard = make_synthetic(3, 8, 40, 3.0, seed=1)
w0 = init_params(arch, 0)
anchor = init_params(arch, 1)
for mu in (0.0, 1.0, 50.0):
    w = local_train(w0, arch, shard, TrainerConfig(proximal_mu=mu), anchor=anchor, rng=np.random.default_rng(0))
    acc, loss = evaluate(w, arch, shard)
    print(f"mu={mu:5}: train acc {acc:.3f}, loss {loss:.3f}, |w - anchor| {np.linalg.norm(w - anchor):.3f}")
