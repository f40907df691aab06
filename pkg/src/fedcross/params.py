"""Flat parameter-vector algebra.

A parameter vector is a 1-D ``float64`` numpy array holding every weight and
bias of a model. Functions here never modify their inputs and always check
that their outputs are finite.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import DimensionError, EmptyPoolError, NumericError, UndefinedSimilarityError

SIMILARITY_VARIANTS = ("standard", "paper-eq5")


def as_params(values) -> np.ndarray:
    """Copy ``values`` into a read-only 1-D float64 parameter vector."""
    arr = np.array(values, dtype=np.float64).reshape(-1)
    check_finite(arr)
    arr.setflags(write=False)
    return arr


def check_finite(x: np.ndarray, what: str = "parameter vector") -> np.ndarray:
    if not np.all(np.isfinite(x)):
        bad = int(np.flatnonzero(~np.isfinite(x))[0])
        raise NumericError(f"{what} has a non-finite entry at index {bad}")
    return x


def _same_len(x: np.ndarray, y: np.ndarray) -> None:
    if x.shape != y.shape:
        raise DimensionError(f"length mismatch: {x.size} vs {y.size}")


def lin_comb(a: float, x: np.ndarray, b: float, y: np.ndarray) -> np.ndarray:
    """Return ``a*x + b*y``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _same_len(x, y)
    with np.errstate(over="ignore", invalid="ignore"):
        out = a * x + b * y
    return check_finite(out, "linear combination")


def cosine_similarity(x: np.ndarray, y: np.ndarray, variant: str = "standard") -> float:
    """Similarity of two parameter vectors.

    ``standard`` is the usual cosine, dot / (|x| * |y|), bounded in [-1, 1].
    ``paper-eq5`` divides the dot product by the *sum* of the two norms
    instead, which is not scale invariant and does not peak at ``x == y``.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _same_len(x, y)
    nx = float(np.linalg.norm(x))
    ny = float(np.linalg.norm(y))
    if nx == 0.0 or ny == 0.0:
        raise UndefinedSimilarityError("similarity is undefined for an all-zero vector")
    dot = float(np.dot(x, y))
    if variant == "standard":
        # clip guards against |cos| creeping past 1 by rounding
        return float(np.clip(dot / (nx * ny), -1.0, 1.0))
    if variant == "paper-eq5":
        return dot / (nx + ny)
    raise ValueError(f"unknown similarity variant {variant!r}")


def mean_of(models: Sequence[np.ndarray]) -> np.ndarray:
    """Elementwise mean of equally sized vectors."""
    if len(models) == 0:
        raise EmptyPoolError("cannot average an empty list of models")
    first = np.asarray(models[0], dtype=np.float64)
    acc = np.zeros_like(first)
    for m in models:
        m = np.asarray(m, dtype=np.float64)
        _same_len(first, m)
        acc += m
    return check_finite(acc / len(models), "mean model")
