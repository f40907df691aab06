"""Small differentiable classifiers and the client-side trainer.

Models are multilayer perceptrons over a flat parameter vector; a network
with no hidden layer is plain softmax regression. The layout is, for each
layer in order, the ``in x out`` weight matrix (row-major) followed by the
``out`` biases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import ConfigError, DimensionError, EmptyClientError, NumericError
from .params import check_finite

ACTIVATIONS = ("relu", "tanh")


@dataclass(frozen=True)
class MlpArchitecture:
    layer_sizes: tuple[int, ...]
    activation: str = "relu"

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2 or min(sizes) < 1:
            raise ConfigError(f"layer_sizes needs >= 2 positive entries, got {list(sizes)}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"activation must be one of {ACTIVATIONS}")
        object.__setattr__(self, "layer_sizes", sizes)

    @property
    def param_count(self) -> int:
        s = self.layer_sizes
        return sum((s[i] + 1) * s[i + 1] for i in range(len(s) - 1))

    @property
    def num_classes(self) -> int:
        return self.layer_sizes[-1]

    def unpack(self, params: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        """Split ``params`` into (weight, bias) views per layer."""
        if params.shape != (self.param_count,):
            raise DimensionError(
                f"expected {self.param_count} parameters for {list(self.layer_sizes)}, got {params.size}"
            )
        out = []
        off = 0
        for fan_in, fan_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            w = params[off : off + fan_in * fan_out].reshape(fan_in, fan_out)
            off += fan_in * fan_out
            b = params[off : off + fan_out]
            off += fan_out
            out.append((w, b))
        return out

    def describe(self) -> str:
        return ",".join(map(str, self.layer_sizes)) + ":" + self.activation

    @classmethod
    def parse(cls, text: str) -> "MlpArchitecture":
        sizes, _, act = text.strip().partition(":")
        try:
            layers = tuple(int(s) for s in sizes.split(","))
        except ValueError:
            raise ConfigError(f"bad architecture descriptor {text!r}") from None
        return cls(layers, act or "relu")


@dataclass(frozen=True)
class TrainerConfig:
    epochs: int = 5
    batch_size: int = 50
    lr: float = 0.01
    momentum: float = 0.5
    proximal_mu: float = 0.0

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        # lr == 0 is allowed as an explicit no-op trainer
        if not self.lr >= 0:
            raise ConfigError("lr must be non-negative")
        if not 0 <= self.momentum < 1:
            raise ConfigError("momentum must be in [0, 1)")
        if not self.proximal_mu >= 0:
            raise ConfigError("proximal_mu must be non-negative")


def init_params(arch: MlpArchitecture, seed) -> np.ndarray:
    """Weights ~ N(0, 1/fan_in), biases zero.

    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    chunks = []
    for fan_in, fan_out in zip(arch.layer_sizes[:-1], arch.layer_sizes[1:]):
        chunks.append(rng.standard_normal(fan_in * fan_out) / np.sqrt(fan_in))
        chunks.append(np.zeros(fan_out))
    return np.concatenate(chunks)


def _act(z, kind):
    return np.maximum(z, 0.0) if kind == "relu" else np.tanh(z)


def _act_grad(z, a, kind):
    return (z > 0).astype(np.float64) if kind == "relu" else 1.0 - a * a


def forward(params: np.ndarray, arch: MlpArchitecture, x: np.ndarray) -> np.ndarray:
    """Logits for a batch of inputs."""
    layers = arch.unpack(np.asarray(params, dtype=np.float64))
    h = np.asarray(x, dtype=np.float64)
    for k, (w, b) in enumerate(layers):
        h = h @ w + b
        if k < len(layers) - 1:
            h = _act(h, arch.activation)
    return h


def _log_softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def loss_and_grad(params: np.ndarray, arch: MlpArchitecture, x: np.ndarray, y: np.ndarray):
    """Mean cross-entropy over the batch and its exact gradient."""
    params = np.asarray(params, dtype=np.float64)
    layers = arch.unpack(params)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n = y.shape[0]
    if n == 0:
        raise EmptyClientError("loss_and_grad needs a non-empty batch")
    if x.shape != (n, arch.layer_sizes[0]):
        raise DimensionError(f"batch features {x.shape} do not match input size {arch.layer_sizes[0]}")

    pre, post = [], [x]
    h = x
    for k, (w, b) in enumerate(layers):
        z = h @ w + b
        pre.append(z)
        h = _act(z, arch.activation) if k < len(layers) - 1 else z
        post.append(h)

    logp = _log_softmax(post[-1])
    loss = -float(logp[np.arange(n), y].mean())
    if not np.isfinite(loss):
        raise NumericError("cross-entropy loss is not finite")

    delta = np.exp(logp)
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grads = []
    for k in range(len(layers) - 1, -1, -1):
        w, _ = layers[k]
        grads.append((post[k].T @ delta, delta.sum(axis=0)))
        if k > 0:
            delta = (delta @ w.T) * _act_grad(pre[k - 1], post[k], arch.activation)
    grads.reverse()
    flat = np.concatenate([np.concatenate((gw.ravel(), gb)) for gw, gb in grads])
    return loss, flat


def local_train(
    start: np.ndarray,
    arch: MlpArchitecture,
    shard: Dataset,
    cfg: TrainerConfig,
    anchor: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Mini-batch SGD with classical momentum, starting from ``start``.

    Each epoch visits the shard in a fresh random order, keeping the final
    short batch. With ``cfg.proximal_mu > 0`` every step adds
    ``mu * (w - anchor)`` to the gradient. Velocity starts at zero on every
    call. ``start`` is not modified.
    """
    if len(shard) == 0:
        raise EmptyClientError("client shard is empty")
    w = np.array(start, dtype=np.float64)
    if w.shape != (arch.param_count,):
        raise DimensionError(f"start vector has {w.size} entries, expected {arch.param_count}")
    prox = cfg.proximal_mu > 0
    if prox:
        if anchor is None:
            raise ConfigError("proximal_mu > 0 needs an anchor model")
        anchor = np.asarray(anchor, dtype=np.float64)
        if anchor.shape != w.shape:
            raise DimensionError("anchor length does not match the model")
    if rng is None:
        rng = np.random.default_rng(0)

    x, y = shard.features, shard.labels
    n = len(shard)
    vel = np.zeros_like(w)
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            _, g = loss_and_grad(w, arch, x[idx], y[idx])
            if prox:
                g += cfg.proximal_mu * (w - anchor)
            vel = cfg.momentum * vel - cfg.lr * g
            w += vel
    return check_finite(w, "locally trained model")


def evaluate(params: np.ndarray, arch: MlpArchitecture, ds: Dataset) -> tuple[float, float]:
    """(accuracy, mean cross-entropy) on ``ds``; argmax ties go to the lowest class."""
    logits = forward(params, arch, ds.features)
    pred = np.argmax(logits, axis=1)
    acc = float(np.mean(pred == ds.labels))
    logp = _log_softmax(logits)
    loss = -float(logp[np.arange(len(ds)), ds.labels].mean())
    return acc, loss
