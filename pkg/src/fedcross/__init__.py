"""Deterministic simulator for FedCross multi-model cross-aggregation.

The package keeps a pool of middleware models, trains each on one sampled
client per round, blends every trained model with a collaborator chosen by
round-robin order or parameter similarity, and reports the pool mean as the
global model. FedAvg and FedProx baselines share the same data, trainer and
random streams.
"""

from .aggregation import (
    AlphaPolicy,
    SelectionStrategy,
    co_model_select,
    cross_aggr,
    dynamic_alpha,
    fedavg_aggr,
    global_model,
    propeller_aggr,
)
from .data import Dataset, PartitionPlan, load_csv, make_synthetic, partition_dirichlet, partition_iid, train_test_split
from .errors import *  # noqa: F401,F403
from .models import MlpArchitecture, TrainerConfig, evaluate, init_params, local_train, loss_and_grad
from .params import cosine_similarity, lin_comb, mean_of
from .simulation import (
    MetricsLog,
    RoundMetrics,
    SimConfig,
    count_communication,
    run,
    run_fedavg,
    run_fedcross,
    run_fedprox,
    select_clients,
    shuffle_dispatch,
)

__version__ = "0.1.0"
