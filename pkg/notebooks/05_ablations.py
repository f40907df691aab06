# %% [markdown]
# # Ablations: alpha, selection rule, acceleration

# %%
import itertools

import numpy as np

from fedcross.aggregation import AlphaPolicy, SelectionStrategy
from fedcross.cli import DataSpec, prepare_data
from fedcross.models import MlpArchitecture
from fedcross.simulation import SimConfig, run

data = DataSpec(num_classes=10, dim=32, per_class=500, class_sep=2.0)
arch = MlpArchitecture((32, 64, 10))
ROUNDS = 40


def final(**kw):
    cfg = SimConfig(arch=arch, rounds=ROUNDS, beta=0.1, eval_every=10, master_seed=0, **kw)
    train, test, plan = prepare_data(cfg, data)
    return run(cfg, train, test, plan)


# %% [markdown]
# Host weight alpha against selection rule. Larger alpha keeps the middleware
# models further apart; the pool spread shows this directly.

# %%
for kind, alpha in itertools.product(("in_order", "highest", "lowest"), (0.5, 0.9, 0.99, 0.999)):
    log = final(strategy=SelectionStrategy(kind), alpha_policy=AlphaPolicy(alpha=alpha))
    spread = max(np.linalg.norm(a - b) for a, b in itertools.combinations(log.pool, 2))
    print(f"{kind:9} alpha={alpha:<6} acc {log.final_accuracy():.3f}  pool spread {spread:.2f}")

# %% [markdown]
# Acceleration: propeller models (two in-order guests, alpha_start), then a
# linear alpha ramp, against the plain schedule.

# %%
for accel in ("none", "pm", "da", "pm-da"):
    log = final(accel=accel)
    print(f"{accel:6}", [f"{m.global_accuracy:.3f}" for m in log.evaluated_rounds()],
          [round(m.alpha_used, 3) for m in log.rounds[::10]])
