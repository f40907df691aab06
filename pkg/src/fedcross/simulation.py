"""Round loops for FedCross and the FedAvg / FedProx baselines.

All randomness comes from :mod:`fedcross.rng` streams keyed by round and
client id, and worker results are stored by pool slot, so a run is
bit-reproducible for any ``workers`` value.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import rng as rngs
from .aggregation import (
    AlphaPolicy,
    SelectionStrategy,
    cross_aggr,
    dynamic_alpha,
    fedavg_aggr,
    global_model,
    propeller_aggr,
    propeller_partners,
    select_all,
)
from .data import Dataset, PartitionPlan
from .errors import ConfigError, NumericError
from .models import MlpArchitecture, TrainerConfig, evaluate, init_params, local_train

METHODS = ("fedcross", "fedavg", "fedprox")
ACCEL_MODES = ("none", "pm", "da", "pm-da")
BYTES_PER_PARAM = 8


@dataclass(frozen=True)
class SimConfig:
    arch: MlpArchitecture
    method: str = "fedcross"
    rounds: int = 200
    num_clients: int = 50
    participation: float = 0.10
    strategy: SelectionStrategy = field(default_factory=SelectionStrategy)
    alpha_policy: AlphaPolicy = field(default_factory=AlphaPolicy)
    accel: str = "none"
    pm_rounds: Optional[int] = None
    da_rounds: Optional[int] = None
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    partition: str = "dirichlet"
    beta: float = 0.5
    min_per_client: int = 10
    master_seed: int = 0
    eval_every: int = 1
    record_timing: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.accel not in ACCEL_MODES:
            raise ConfigError(f"accel must be one of {ACCEL_MODES}, got {self.accel!r}")
        if self.partition not in ("iid", "dirichlet"):
            raise ConfigError("partition must be 'iid' or 'dirichlet'")
        if self.rounds < 0:
            raise ConfigError("rounds must be >= 0")
        if self.num_clients < 1:
            raise ConfigError("num_clients must be >= 1")
        if not 0 < self.participation <= 1:
            raise ConfigError("participation must be in (0, 1]")
        if self.eval_every < 1:
            raise ConfigError("eval_every must be >= 1")
        if self.method == "fedcross" and self.k < 2:
            raise ConfigError(
                f"fedcross needs at least 2 participating clients, got K={self.k}"
            )
        if self.master_seed < 0:
            raise ConfigError("master_seed must be non-negative")
        defaults = {"none": (0, 0), "pm": (20, 0), "da": (0, 20), "pm-da": (10, 10)}[self.accel]
        pm = defaults[0] if self.pm_rounds is None else self.pm_rounds
        da = defaults[1] if self.da_rounds is None else self.da_rounds
        if pm < 0 or da < 0:
            raise ConfigError("pm_rounds and da_rounds must be >= 0")
        object.__setattr__(self, "pm_rounds", pm)
        object.__setattr__(self, "da_rounds", da)

    @property
    def local_trainer(self) -> TrainerConfig:
        """Trainer settings for clients; only FedProx keeps the proximal term."""
        if self.method == "fedprox" or self.trainer.proximal_mu == 0:
            return self.trainer
        return replace(self.trainer, proximal_mu=0.0)

    @property
    def k(self) -> int:
        """Clients sampled per round: N * participation rounded half up, at least 1."""
        return max(1, int(math.floor(self.num_clients * self.participation + 0.5)))


@dataclass
class RoundMetrics:
    round: int  # rounds completed, 1-based
    clients: tuple[int, ...]
    bytes_down: int
    bytes_up: int
    alpha_used: Optional[float] = None
    global_accuracy: Optional[float] = None
    global_loss: Optional[float] = None
    mw_acc_mean: Optional[float] = None
    mw_acc_min: Optional[float] = None
    mw_acc_max: Optional[float] = None
    elapsed_ms: int = 0

    @property
    def evaluated(self) -> bool:
        return self.global_accuracy is not None


@dataclass
class MetricsLog:
    config: SimConfig
    rounds: list[RoundMetrics]
    final_model: np.ndarray
    pool: Optional[list[np.ndarray]] = None

    @property
    def method(self) -> str:
        return self.config.method

    def evaluated_rounds(self) -> list[RoundMetrics]:
        return [m for m in self.rounds if m.evaluated]

    def final_accuracy(self) -> float:
        ev = self.evaluated_rounds()
        if not ev:
            raise ValueError("no evaluated rounds in this log")
        return ev[-1].global_accuracy

    def accuracy_at(self, round_no: int) -> float:
        for m in self.rounds:
            if m.round == round_no and m.evaluated:
                return m.global_accuracy
        raise KeyError(f"round {round_no} was not evaluated")


def select_clients(n: int, k: int, rng: np.random.Generator) -> list[int]:
    """``k`` distinct client ids drawn uniformly from ``range(n)``."""
    if not 1 <= k <= n:
        raise ConfigError(f"cannot select {k} of {n} clients")
    return [int(c) for c in rng.choice(n, size=k, replace=False)]


def shuffle_dispatch(selected, rng: np.random.Generator) -> list:
    """Uniformly random reordering of ``selected``."""
    selected = list(selected)
    return [selected[i] for i in rng.permutation(len(selected))]


def count_communication(k: int, param_count: int) -> tuple[int, int]:
    """(bytes down, bytes up) for one round: one model each way per participating client."""
    b = k * param_count * BYTES_PER_PARAM
    return b, b


def round_schedule(r: int, cfg: SimConfig) -> tuple[float, bool]:
    """(alpha, use propeller guests) for 0-based round ``r`` under the acceleration mode.

    Propeller rounds come first and use ``alpha_start``; dynamic-alpha rounds
    follow and ramp linearly from ``alpha_start`` to ``alpha``.
    """
    pol = cfg.alpha_policy
    pm = cfg.pm_rounds if cfg.accel in ("pm", "pm-da") else 0
    da = cfg.da_rounds if cfg.accel in ("da", "pm-da") else 0
    if r < pm:
        return pol.alpha_start, True
    if r < pm + da:
        ramp = AlphaPolicy("dynamic-linear", pol.alpha, pol.alpha_start, da)
        return dynamic_alpha(r - pm, ramp), False
    return dynamic_alpha(r - pm - da, pol), False


def _initial_model(cfg: SimConfig) -> np.ndarray:
    return init_params(cfg.arch, rngs.stream(cfg.master_seed, "init"))


def _check_plan(cfg: SimConfig, plan: PartitionPlan) -> None:
    if plan.num_clients != cfg.num_clients:
        raise ConfigError(f"plan has {plan.num_clients} clients but config says {cfg.num_clients}")


def _train_round(cfg, train, plan, r, starts, clients, anchor, workers):
    def job(slot):
        cid = clients[slot]
        try:
            return local_train(
                starts[slot],
                cfg.arch,
                plan.shard(train, cid),
                cfg.local_trainer,
                anchor=anchor,
                rng=rngs.stream(cfg.master_seed, "train", r, cid),
            )
        except NumericError as exc:
            raise NumericError(f"round {r + 1}, model {slot} (client {cid}): {exc}") from exc

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            # map() yields in submission order, i.e. by slot
            return list(pool.map(job, range(len(clients))))
    return [job(s) for s in range(len(clients))]


def _should_eval(cfg: SimConfig, r: int) -> bool:
    return (r + 1) % cfg.eval_every == 0 or r == cfg.rounds - 1


def run_fedcross(cfg: SimConfig, train: Dataset, test: Dataset, plan: PartitionPlan, workers: int = 1) -> MetricsLog:
    """Train ``K`` middleware models with cross-aggregation.

    Each round: sample ``K`` clients, shuffle them, train pool model ``i`` on
    client ``i`` of the shuffled list, then blend every trained model with a
    collaborator picked from the trained pool. The global model (pool mean)
    is only built when a round is evaluated and never feeds back.
    """
    if cfg.method != "fedcross":
        raise ConfigError("run_fedcross called with a non-fedcross config")
    _check_plan(cfg, plan)
    k = cfg.k
    w0 = _initial_model(cfg)
    pool = [w0.copy() for _ in range(k)]
    log: list[RoundMetrics] = []
    down, up = count_communication(k, cfg.arch.param_count)

    for r in range(cfg.rounds):
        t0 = time.perf_counter()
        clients = select_clients(cfg.num_clients, k, rngs.stream(cfg.master_seed, "sampling", r))
        clients = shuffle_dispatch(clients, rngs.stream(cfg.master_seed, "shuffle", r))
        pool = _train_round(cfg, train, plan, r, pool, clients, None, workers)

        alpha, propeller = round_schedule(r, cfg)
        if propeller:
            pairs = [propeller_partners(i, r, k) for i in range(k)]
            new_pool = [propeller_aggr(pool[i], [pool[a], pool[b]], alpha) for i, (a, b) in enumerate(pairs)]
        else:
            partners = select_all(r, pool, cfg.strategy)
            new_pool = [cross_aggr(pool[i], pool[j], alpha) for i, j in enumerate(partners)]
        pool = new_pool

        m = RoundMetrics(round=r + 1, clients=tuple(clients), bytes_down=down, bytes_up=up, alpha_used=alpha)
        if _should_eval(cfg, r):
            m.global_accuracy, m.global_loss = evaluate(global_model(pool), cfg.arch, test)
            accs = [evaluate(w, cfg.arch, test)[0] for w in pool]
            m.mw_acc_mean, m.mw_acc_min, m.mw_acc_max = float(np.mean(accs)), min(accs), max(accs)
        if cfg.record_timing:
            m.elapsed_ms = int(round((time.perf_counter() - t0) * 1000))
        log.append(m)

    return MetricsLog(cfg, log, global_model(pool), pool)


def _run_central(cfg, train, test, plan, workers, proximal):
    _check_plan(cfg, plan)
    k = cfg.k
    w = _initial_model(cfg)
    sizes = plan.sizes()
    log: list[RoundMetrics] = []
    down, up = count_communication(k, cfg.arch.param_count)
    for r in range(cfg.rounds):
        t0 = time.perf_counter()
        clients = select_clients(cfg.num_clients, k, rngs.stream(cfg.master_seed, "sampling", r))
        anchor = w if proximal and cfg.trainer.proximal_mu > 0 else None
        trained = _train_round(cfg, train, plan, r, [w] * k, clients, anchor, workers)
        w = fedavg_aggr(trained, [sizes[c] for c in clients])
        m = RoundMetrics(round=r + 1, clients=tuple(clients), bytes_down=down, bytes_up=up)
        if _should_eval(cfg, r):
            m.global_accuracy, m.global_loss = evaluate(w, cfg.arch, test)
        if cfg.record_timing:
            m.elapsed_ms = int(round((time.perf_counter() - t0) * 1000))
        log.append(m)
    return MetricsLog(cfg, log, w)


def run_fedavg(cfg: SimConfig, train: Dataset, test: Dataset, plan: PartitionPlan, workers: int = 1) -> MetricsLog:
    """Classic FedAvg: one global model, sample-size weighted averaging."""
    return _run_central(cfg, train, test, plan, workers, proximal=False)


def run_fedprox(cfg: SimConfig, train: Dataset, test: Dataset, plan: PartitionPlan, workers: int = 1) -> MetricsLog:
    """FedAvg whose clients add ``(mu/2)|w - w_global|^2`` to their loss."""
    return _run_central(cfg, train, test, plan, workers, proximal=True)


RUNNERS = {"fedcross": run_fedcross, "fedavg": run_fedavg, "fedprox": run_fedprox}


def run(cfg: SimConfig, train: Dataset, test: Dataset, plan: PartitionPlan, workers: int = 1) -> MetricsLog:
    return RUNNERS[cfg.method](cfg, train, test, plan, workers)
