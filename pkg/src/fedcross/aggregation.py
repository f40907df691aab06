"""Multi-model cross-aggregation and FedAvg averaging.

FedCross keeps ``K`` middleware models. After local training, each model
(the host) picks one collaborator (the guest) from the pool and is replaced
by ``alpha * host + (1 - alpha) * guest``. The deployable global model is the
plain mean of the pool.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, DimensionError, PoolTooSmallError
from .params import SIMILARITY_VARIANTS, cosine_similarity, lin_comb, mean_of

SELECTION_KINDS = ("in_order", "highest", "lowest")
ALPHA_KINDS = ("fixed", "dynamic-linear")


@dataclass(frozen=True)
class SelectionStrategy:
    kind: str = "lowest"
    similarity_variant: str = "standard"

    def __post_init__(self):
        if self.kind not in SELECTION_KINDS:
            raise ConfigError(f"selection must be one of {SELECTION_KINDS}, got {self.kind!r}")
        if self.similarity_variant not in SIMILARITY_VARIANTS:
            raise ConfigError(f"similarity must be one of {SIMILARITY_VARIANTS}")


@dataclass(frozen=True)
class AlphaPolicy:
    kind: str = "fixed"
    alpha: float = 0.99
    alpha_start: float = 0.5
    warmup_rounds: int = 20

    def __post_init__(self):
        if self.kind not in ALPHA_KINDS:
            raise ConfigError(f"alpha policy must be one of {ALPHA_KINDS}")
        check_alpha(self.alpha, "alpha")
        check_alpha(self.alpha_start, "alpha_start")
        if self.alpha_start > self.alpha:
            raise ConfigError("alpha_start must not exceed alpha")
        if self.warmup_rounds < 1:
            raise ConfigError("warmup_rounds must be >= 1")


def check_alpha(alpha: float, name: str = "alpha") -> float:
    if not 0.5 <= alpha < 1.0:
        raise ConfigError(f"{name} must be in [0.5, 1.0), got {alpha}")
    return alpha


def similarity_matrix(pool: Sequence[np.ndarray], variant: str = "standard") -> np.ndarray:
    """All pairwise similarities; the diagonal is left as NaN."""
    k = len(pool)
    sims = np.full((k, k), np.nan)
    for a in range(k):
        for b in range(a + 1, k):
            sims[a, b] = sims[b, a] = cosine_similarity(pool[a], pool[b], variant)
    return sims


def in_order_partner(i: int, r: int, k: int) -> int:
    """Collaborator of model ``i`` in round ``r`` under round-robin order (0-based)."""
    if k < 2:
        raise PoolTooSmallError("need at least two models to pick a collaborator")
    return (i + (r % (k - 1)) + 1) % k


def _pick(row: np.ndarray, i: int, highest: bool) -> int:
    best = None
    for j, s in enumerate(row):
        if j == i:
            continue
        # strict comparison keeps the smallest index on ties
        if best is None or (s > row[best] if highest else s < row[best]):
            best = j
    return best


def co_model_select(
    i: int,
    r: int,
    pool: Sequence[np.ndarray],
    strategy: SelectionStrategy,
    sims: np.ndarray | None = None,
) -> int:
    """Index of the collaborator for host ``i`` in round ``r``; never ``i`` itself.

    ``sims`` may carry a precomputed :func:`similarity_matrix` of the pool.
    """
    k = len(pool)
    if k < 2:
        raise PoolTooSmallError(f"pool of {k} model(s) has no collaborator")
    if not 0 <= i < k:
        raise IndexError(f"host index {i} outside pool of {k}")
    if strategy.kind == "in_order":
        return in_order_partner(i, r, k)
    if sims is None:
        row = np.array(
            [np.nan if j == i else cosine_similarity(pool[i], pool[j], strategy.similarity_variant) for j in range(k)]
        )
    else:
        row = sims[i]
    return _pick(row, i, highest=strategy.kind == "highest")


def select_all(r: int, pool: Sequence[np.ndarray], strategy: SelectionStrategy) -> list[int]:
    """Collaborator for every host, using one similarity matrix for the round."""
    sims = None if strategy.kind == "in_order" else similarity_matrix(pool, strategy.similarity_variant)
    return [co_model_select(i, r, pool, strategy, sims) for i in range(len(pool))]


def _pull(host, guest):
    host = np.asarray(host, dtype=np.float64)
    guest = np.asarray(guest, dtype=np.float64)
    if host.shape != guest.shape:
        raise DimensionError(f"length mismatch: {host.size} vs {guest.size}")
    return host, guest - host


def cross_aggr(host: np.ndarray, guest: np.ndarray, alpha: float) -> np.ndarray:
    """``alpha * host + (1 - alpha) * guest``.

    Evaluated as ``host + (1 - alpha) * (guest - host)`` so that a pool of
    identical models is reproduced bit for bit.
    """
    check_alpha(alpha)
    host, delta = _pull(host, guest)
    return lin_comb(1.0, host, 1.0 - alpha, delta)


def propeller_aggr(host: np.ndarray, guests: Sequence[np.ndarray], alpha: float) -> np.ndarray:
    """Host weight ``alpha``, the remaining ``1 - alpha`` split evenly over two guests."""
    check_alpha(alpha)
    if len(guests) != 2:
        raise ConfigError(f"propeller aggregation takes exactly 2 guests, got {len(guests)}")
    half = (1.0 - alpha) / 2.0
    host, d1 = _pull(host, guests[0])
    _, d2 = _pull(host, guests[1])
    return lin_comb(1.0, host, half, lin_comb(1.0, d1, 1.0, d2))


def propeller_partners(i: int, r: int, k: int) -> tuple[int, int]:
    """Two round-robin guests for host ``i``: this round's and next round's in-order partner.

    With ``k == 2`` there is only one other model and it fills both slots.
    """
    return in_order_partner(i, r, k), in_order_partner(i, r + 1, k)


def dynamic_alpha(r: int, policy: AlphaPolicy) -> float:
    if policy.kind == "fixed":
        return policy.alpha
    frac = min(r / policy.warmup_rounds, 1.0)
    if frac >= 1.0:
        return policy.alpha
    return policy.alpha_start + (policy.alpha - policy.alpha_start) * frac


def fedavg_aggr(models: Sequence[np.ndarray], weights: Sequence[float]) -> np.ndarray:
    """Weighted mean, weights normalised to sum to one."""
    if len(models) != len(weights):
        raise DimensionError(f"{len(models)} models but {len(weights)} weights")
    w = np.asarray(weights, dtype=np.float64)
    if np.any(w < 0) or not w.sum() > 0:
        raise ConfigError("aggregation weights must be non-negative with a positive sum")
    if np.all(w == w[0]):
        return mean_of(models)
    w = w / w.sum()
    out = np.zeros_like(np.asarray(models[0], dtype=np.float64))
    for m, wi in zip(models, w):
        out = lin_comb(1.0, out, wi, m)
    return out


def global_model(pool: Sequence[np.ndarray]) -> np.ndarray:
    """Deployment model: uniform mean of the middleware pool."""
    return mean_of(pool)
