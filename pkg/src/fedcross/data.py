"""Datasets and client partitioning.

Synthetic Gaussian blobs stand in for image benchmarks; real data can be read
from a CSV file. Partitioners split sample indices across simulated clients,
either uniformly (IID) or with per-class Dirichlet proportions (non-IID).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, EmptyClientError, InputFormatError, PartitionError


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) int64
    num_classes: int

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
            raise ConfigError(f"features {x.shape} and labels {y.shape} do not line up")
        if x.shape[0] < 1:
            raise ConfigError("a dataset needs at least one sample")
        if self.num_classes < 1 or y.min() < 0 or y.max() >= self.num_classes:
            raise ConfigError(f"labels must lie in [0, {self.num_classes})")
        if not np.all(np.isfinite(x)):
            raise ConfigError("features contain NaN or infinity")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.num_classes)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)


@dataclass(frozen=True)
class PartitionPlan:
    assignments: tuple[np.ndarray, ...]

    @property
    def num_clients(self) -> int:
        return len(self.assignments)

    def sizes(self) -> np.ndarray:
        return np.array([len(a) for a in self.assignments], dtype=np.int64)

    def shard(self, ds: Dataset, client: int) -> Dataset:
        idx = self.assignments[client]
        if len(idx) == 0:
            raise EmptyClientError(f"client {client} holds no samples")
        return ds.subset(idx)

    def validate(self, n: int, min_per_client: int = 1) -> None:
        """Raise ``PartitionError`` if the plan breaks disjointness, range or size rules."""
        allidx = np.concatenate(self.assignments) if self.assignments else np.array([], np.int64)
        if allidx.size and (allidx.min() < 0 or allidx.max() >= n):
            raise PartitionError("partition references an index outside the dataset")
        if np.unique(allidx).size != allidx.size:
            raise PartitionError("client index lists overlap")
        if self.sizes().min(initial=min_per_client) < min_per_client:
            raise PartitionError(f"a client has fewer than {min_per_client} samples")


def make_synthetic(num_classes: int, dim: int, per_class: int, class_sep: float, seed: int) -> Dataset:
    """Gaussian blobs with unit covariance, one per class.

    Class means are drawn uniformly on the sphere of radius ``class_sep``.
    Samples are ordered class by class.
    """
    if num_classes < 2 or dim < 1 or per_class < 1 or not class_sep > 0:
        raise ConfigError(
            "make_synthetic needs num_classes >= 2, dim >= 1, per_class >= 1 and class_sep > 0"
        )
    rng = np.random.default_rng(seed)
    means = rng.standard_normal((num_classes, dim))
    norms = np.linalg.norm(means, axis=1, keepdims=True)
    # a zero draw has probability 0 but would divide by zero
    norms[norms == 0] = 1.0
    means = class_sep * means / norms
    labels = np.repeat(np.arange(num_classes), per_class)
    features = means[labels] + rng.standard_normal((labels.size, dim))
    return Dataset(features, labels, num_classes)


def train_test_split(ds: Dataset, test_fraction: float = 0.2, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Stratified split; each class contributes ``round(test_fraction * count)`` test samples."""
    if not 0 < test_fraction < 1:
        raise ConfigError("test_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for c in range(ds.num_classes):
        idx = np.flatnonzero(ds.labels == c)
        rng.shuffle(idx)
        k = int(np.floor(test_fraction * idx.size + 0.5))
        test_idx.append(idx[:k])
        train_idx.append(idx[k:])
    train_idx = np.sort(np.concatenate(train_idx))
    test_idx = np.sort(np.concatenate(test_idx))
    if train_idx.size == 0 or test_idx.size == 0:
        raise ConfigError("dataset too small for the requested test split")
    return ds.subset(train_idx), ds.subset(test_idx)


def largest_remainder(total: int, proportions: np.ndarray) -> np.ndarray:
    """Integer counts summing to ``total`` that follow ``proportions``.

    Floors first, then hands the leftover units to the largest fractional
    parts (ties go to the lower index).
    """
    p = np.asarray(proportions, dtype=np.float64)
    raw = p / p.sum() * total
    counts = np.floor(raw).astype(np.int64)
    short = total - int(counts.sum())
    if short > 0:
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:short]] += 1
    return counts


def partition_iid(ds: Dataset, num_clients: int, seed: int) -> PartitionPlan:
    """Shuffle, then cut into ``num_clients`` contiguous pieces whose sizes differ by at most one."""
    n = len(ds)
    if num_clients < 1 or num_clients > n:
        raise ConfigError(f"cannot split {n} samples across {num_clients} clients")
    perm = np.random.default_rng(seed).permutation(n)
    return PartitionPlan(tuple(np.sort(part) for part in np.array_split(perm, num_clients)))


def partition_dirichlet(
    ds: Dataset,
    num_clients: int,
    beta: float,
    min_per_client: int = 10,
    seed: int = 0,
    max_attempts: int = 1000,
) -> PartitionPlan:
    """Non-IID split where each class is spread over clients by ``p ~ Dir(beta)``.

    The whole plan is redrawn until every client holds at least
    ``min_per_client`` samples.
    """
    if not beta > 0:
        raise ConfigError("beta must be positive")
    if num_clients < 1:
        raise ConfigError("num_clients must be at least 1")
    n = len(ds)
    if n < num_clients * min_per_client:
        raise ConfigError(
            f"{n} samples cannot give {num_clients} clients {min_per_client} samples each"
        )
    rng = np.random.default_rng(seed)
    by_class = [np.flatnonzero(ds.labels == c) for c in range(ds.num_classes)]
    for _ in range(max_attempts):
        parts: list[list[np.ndarray]] = [[] for _ in range(num_clients)]
        for idx in by_class:
            if idx.size == 0:
                continue
            g = rng.gamma(beta, size=num_clients)
            if g.sum() <= 0:
                # every gamma draw underflowed; pick one client uniformly
                g = np.zeros(num_clients)
                g[rng.integers(num_clients)] = 1.0
            counts = largest_remainder(idx.size, g)
            shuffled = rng.permutation(idx)
            bounds = np.concatenate(([0], np.cumsum(counts)))
            for k in range(num_clients):
                parts[k].append(shuffled[bounds[k] : bounds[k + 1]])
        plan = PartitionPlan(tuple(np.sort(np.concatenate(p)) for p in parts))
        if plan.sizes().min() >= min_per_client:
            return plan
    raise PartitionError(
        f"no partition with >= {min_per_client} samples per client after {max_attempts} attempts"
    )


def load_csv(path, header: bool = False, delimiter: str = ",") -> Dataset:
    """Read rows of ``d`` feature columns followed by one integer label.

    The number of classes is taken as the largest label plus one.
    """
    rows: list[list[float]] = []
    labels: list[int] = []
    width = None
    with open(Path(path), newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        for rowno, row in enumerate(reader, start=1):
            if header and rowno == 1:
                continue
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < 2:
                raise InputFormatError("need at least one feature and a label", rowno)
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise InputFormatError(f"expected {width} columns, found {len(row)}", rowno)
            try:
                feats = [float(cell) for cell in row[:-1]]
            except ValueError as exc:
                raise InputFormatError(f"bad feature value ({exc})", rowno) from None
            try:
                lab = float(row[-1])
            except ValueError:
                raise InputFormatError(f"bad label {row[-1]!r}", rowno) from None
            if lab != int(lab):
                raise InputFormatError(f"label {row[-1]!r} is not an integer", rowno)
            if lab < 0:
                raise InputFormatError(f"negative label {int(lab)}", rowno)
            if not all(np.isfinite(feats)):
                raise InputFormatError("non-finite feature value", rowno)
            rows.append(feats)
            labels.append(int(lab))
    if not rows:
        raise InputFormatError("file contains no data rows")
    y = np.array(labels, dtype=np.int64)
    return Dataset(np.array(rows, dtype=np.float64), y, int(y.max()) + 1)
