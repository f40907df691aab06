"""Experiment files, sweeps and result persistence.

An experiment file is YAML. Every key is optional::

    method: fedcross          # fedcross | fedavg | fedprox
    rounds: 200
    num_clients: 50
    participation: 0.10
    eval_every: 10
    seed: 0
    selection: lowest         # in_order | highest | lowest
    similarity: standard      # standard | paper-eq5
    alpha: 0.99
    alpha_policy: {kind: fixed, alpha_start: 0.5, warmup_rounds: 20}
    accel: none               # none | pm | da | pm-da
    pm_rounds: 10
    da_rounds: 10
    trainer: {epochs: 5, batch_size: 50, lr: 0.01, momentum: 0.5, proximal_mu: 0.01}
    model: {hidden: [64], activation: relu}
    data: {source: synthetic, num_classes: 10, dim: 32, per_class: 500,
           class_sep: 4.0, test_fraction: 0.2}
    partition: {kind: dirichlet, beta: 0.5, min_per_client: 10}
    sweep: {seeds: [0, 1, 2], methods: [fedcross, fedavg], alphas: [0.99], strategies: [lowest]}
    output: results

Command-line flags override file values, which override built-in defaults.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import logging
import statistics
import struct
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from . import rng as rngs
from .aggregation import AlphaPolicy, SelectionStrategy
from .data import Dataset, load_csv, make_synthetic, partition_dirichlet, partition_iid, train_test_split
from .errors import ConfigError, FedCrossError, InputFormatError
from .models import MlpArchitecture, TrainerConfig
from .simulation import MetricsLog, SimConfig, run

log = logging.getLogger("fedcross")

CSV_COLUMNS = (
    "round", "method", "alpha", "strategy", "global_accuracy", "global_loss",
    "mw_acc_mean", "mw_acc_min", "mw_acc_max", "bytes_down", "bytes_up", "elapsed_ms",
)  # fmt: skip

EXIT_OK, EXIT_CONFIG, EXIT_RUN = 0, 1, 2

_TOP_KEYS = {
    "method", "rounds", "num_clients", "participation", "eval_every", "seed", "selection",
    "similarity", "alpha", "alpha_policy", "accel", "pm_rounds", "da_rounds", "trainer",
    "model", "data", "partition", "sweep", "output", "record_timing",
}  # fmt: skip
_SECTION_KEYS = {
    "alpha_policy": {"kind", "alpha_start", "warmup_rounds"},
    "trainer": {"epochs", "batch_size", "lr", "momentum", "proximal_mu"},
    "model": {"hidden", "activation"},
    "data": {"source", "num_classes", "dim", "per_class", "class_sep", "seed", "path", "header", "test_fraction"},
    "partition": {"kind", "beta", "min_per_client"},
    "sweep": {"seeds", "methods", "alphas", "strategies"},
}


@dataclass(frozen=True)
class DataSpec:
    source: str = "synthetic"
    num_classes: int = 10
    dim: int = 32
    per_class: int = 500
    class_sep: float = 4.0
    seed: int | None = None  # None: follow the run's master seed
    path: str | None = None
    header: bool = False
    test_fraction: float = 0.2


@dataclass
class ExperimentFile:
    base: SimConfig
    data: DataSpec = field(default_factory=DataSpec)
    hidden: tuple[int, ...] = (64,)
    activation: str = "relu"
    seeds: list[int] = field(default_factory=lambda: [0])
    methods: list[str] = field(default_factory=lambda: ["fedcross"])
    alphas: list[float] = field(default_factory=lambda: [0.99])
    strategies: list[str] = field(default_factory=lambda: ["lowest"])
    output: Path = Path("results")

    def points(self) -> list[SimConfig]:
        """One validated config per point of the sweep cross-product."""
        out = []
        for method, alpha, strat, seed in itertools.product(self.methods, self.alphas, self.strategies, self.seeds):
            try:
                policy = replace(self.base.alpha_policy, alpha=alpha)
                strategy = replace(self.base.strategy, kind=strat)
                out.append(replace(self.base, method=method, alpha_policy=policy, strategy=strategy, master_seed=seed))
            except ConfigError as exc:
                raise ConfigError(f"sweep point method={method} alpha={alpha} selection={strat} seed={seed}: {exc}")
        return out


class _UniqueKeyLoader(yaml.SafeLoader):
    pass


def _construct_mapping(loader, node, deep=False):
    seen = set()
    for key_node, _ in node.value:
        key = loader.construct_object(key_node, deep=deep)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} (line {key_node.start_mark.line + 1})")
        seen.add(key)
    return loader.construct_mapping(node, deep)


_UniqueKeyLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)


def _section(raw: dict, name: str) -> dict:
    sec = raw.get(name) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"{name}: expected a mapping")
    unknown = set(sec) - _SECTION_KEYS[name]
    if unknown:
        raise ConfigError(f"unknown key {name}.{sorted(unknown)[0]}")
    return sec


def _typed(value, kind, key):
    try:
        if kind is int:
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError
            return int(value)
        if kind is float:
            if isinstance(value, bool):
                raise ValueError
            return float(value)
        if kind is bool:
            if not isinstance(value, bool):
                raise ValueError
            return value
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected {kind.__name__}, got {value!r}") from None


def _as_list(value, kind, key):
    values = value if isinstance(value, list) else [value]
    if not values:
        raise ConfigError(f"{key}: sweep axis must not be empty")
    return [_typed(v, kind, key) for v in values]


def build_experiment(raw: dict, overrides: dict | None = None) -> ExperimentFile:
    """Turn a parsed mapping (plus flag overrides) into a validated experiment."""
    raw = dict(raw or {})
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown key {sorted(unknown)[0]}")
    overrides = overrides or {}

    def get(key, kind, default):
        if overrides.get(key) is not None:
            return _typed(overrides[key], kind, key)
        if raw.get(key) is not None:
            return _typed(raw[key], kind, key)
        return default

    def checked(key, build):
        try:
            return build()
        except ConfigError as exc:
            raise ConfigError(f"{key}: {exc}") from None

    ap = _section(raw, "alpha_policy")
    tr = _section(raw, "trainer")
    md = _section(raw, "model")
    da = _section(raw, "data")
    pa = _section(raw, "partition")
    sw = _section(raw, "sweep")

    alpha = get("alpha", float, 0.99)
    policy = checked("alpha", lambda: AlphaPolicy(
        kind=_typed(ap.get("kind", "fixed"), str, "alpha_policy.kind"),
        alpha=alpha,
        alpha_start=_typed(ap.get("alpha_start", 0.5), float, "alpha_policy.alpha_start"),
        warmup_rounds=_typed(ap.get("warmup_rounds", 20), int, "alpha_policy.warmup_rounds"),
    ))  # fmt: skip
    strategy = checked("selection", lambda: SelectionStrategy(
        kind=get("selection", str, "lowest"), similarity_variant=get("similarity", str, "standard")
    ))  # fmt: skip
    trainer = checked("trainer", lambda: TrainerConfig(
        epochs=_typed(tr.get("epochs", 5), int, "trainer.epochs"),
        batch_size=_typed(tr.get("batch_size", 50), int, "trainer.batch_size"),
        lr=_typed(tr.get("lr", 0.01), float, "trainer.lr"),
        momentum=_typed(tr.get("momentum", 0.5), float, "trainer.momentum"),
        proximal_mu=_typed(tr.get("proximal_mu", 0.01), float, "trainer.proximal_mu"),
    ))  # fmt: skip
    data = checked("data", lambda: DataSpec(
        source=_typed(da.get("source", "synthetic"), str, "data.source"),
        num_classes=_typed(da.get("num_classes", 10), int, "data.num_classes"),
        dim=_typed(da.get("dim", 32), int, "data.dim"),
        per_class=_typed(da.get("per_class", 500), int, "data.per_class"),
        class_sep=_typed(da.get("class_sep", 4.0), float, "data.class_sep"),
        seed=None if da.get("seed") is None else _typed(da["seed"], int, "data.seed"),
        path=None if da.get("path") is None else str(da["path"]),
        header=_typed(da.get("header", False), bool, "data.header"),
        test_fraction=_typed(da.get("test_fraction", 0.2), float, "data.test_fraction"),
    ))  # fmt: skip
    if data.source not in ("synthetic", "csv"):
        raise ConfigError("data.source must be 'synthetic' or 'csv'")
    if data.source == "csv" and not data.path:
        raise ConfigError("data.path is required when data.source is csv")
    if not 0 < data.test_fraction < 1:
        raise ConfigError("data.test_fraction must be in (0, 1)")

    hidden = md.get("hidden", [64])
    hidden = tuple(_as_list(hidden, int, "model.hidden")) if hidden not in ([], None) else ()
    activation = _typed(md.get("activation", "relu"), str, "model.activation")
    if data.source == "csv":
        try:
            peek = load_csv(data.path, header=data.header)
        except OSError as exc:
            raise ConfigError(f"data.path: {exc}") from None
        dim, ncls = peek.dim, peek.num_classes
    else:
        dim, ncls = data.dim, data.num_classes
    arch = checked("model", lambda: MlpArchitecture((dim, *hidden, ncls), activation))

    part_kind = _typed(pa.get("kind", "dirichlet"), str, "partition.kind")
    if overrides.get("iid"):
        part_kind = "iid"
    beta = _typed(pa.get("beta", 0.5), float, "partition.beta")
    if overrides.get("beta") is not None:
        part_kind, beta = "dirichlet", _typed(overrides["beta"], float, "beta")
    if not beta > 0:
        raise ConfigError("partition.beta must be positive")

    base = checked("config", lambda: SimConfig(
        arch=arch,
        method=get("method", str, "fedcross"),
        rounds=get("rounds", int, 200),
        num_clients=get("num_clients", int, 50),
        participation=get("participation", float, 0.10),
        strategy=strategy,
        alpha_policy=policy,
        accel=get("accel", str, "none"),
        pm_rounds=get("pm_rounds", int, None),
        da_rounds=get("da_rounds", int, None),
        trainer=trainer,
        partition=part_kind,
        beta=beta,
        min_per_client=_typed(pa.get("min_per_client", 10), int, "partition.min_per_client"),
        master_seed=get("seed", int, 0),
        eval_every=get("eval_every", int, 1),
        record_timing=get("record_timing", bool, True),
    ))  # fmt: skip

    def axis(key, kind, flag, current):
        if overrides.get(flag) is not None:
            return [current]
        return _as_list(sw[key], kind, f"sweep.{key}") if key in sw else [current]

    exp = ExperimentFile(
        base=base,
        data=data,
        hidden=hidden,
        activation=activation,
        seeds=axis("seeds", int, "seed", base.master_seed),
        methods=axis("methods", str, "method", base.method),
        alphas=axis("alphas", float, "alpha", base.alpha_policy.alpha),
        strategies=axis("strategies", str, "selection", base.strategy.kind),
        output=Path(overrides.get("out") or raw.get("output") or "results"),
    )
    exp.points()  # validate every sweep point now rather than mid-sweep
    return exp


def parse_config(path, overrides: dict | None = None) -> ExperimentFile:
    """Read a YAML experiment file; unknown or duplicate keys raise ``ConfigError``."""
    if path is None:
        return build_experiment({}, overrides)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        raw = yaml.load(text, Loader=_UniqueKeyLoader)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from None
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError("config must be a mapping at the top level")
    return build_experiment(raw or {}, overrides)


def prepare_data(cfg: SimConfig, spec: DataSpec) -> tuple[Dataset, Dataset, object]:
    """Build (train, test, partition plan) for one run."""
    seed = cfg.master_seed if spec.seed is None else spec.seed
    if spec.source == "csv":
        ds = load_csv(spec.path, header=spec.header)
    else:
        ds = make_synthetic(spec.num_classes, spec.dim, spec.per_class, spec.class_sep, seed)
    train, test = train_test_split(ds, spec.test_fraction, rngs.stream(seed, "split"))
    part_rng = rngs.stream(cfg.master_seed, "partition")
    if cfg.partition == "iid":
        plan = partition_iid(train, cfg.num_clients, part_rng)
    else:
        plan = partition_dirichlet(train, cfg.num_clients, cfg.beta, cfg.min_per_client, part_rng)
    return train, test, plan


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_metrics(log: MetricsLog, path) -> None:
    """Write evaluated rounds as CSV, one row per evaluation."""
    cfg = log.config
    strategy = cfg.strategy.kind if cfg.method == "fedcross" else ""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for m in log.evaluated_rounds():
            w.writerow([_fmt(v) for v in (
                m.round, cfg.method, m.alpha_used, strategy, m.global_accuracy, m.global_loss,
                m.mw_acc_mean, m.mw_acc_min, m.mw_acc_max, m.bytes_down, m.bytes_up, m.elapsed_ms,
            )])  # fmt: skip


def emit_model(params: np.ndarray, arch: MlpArchitecture, path) -> None:
    """Binary model file.

    Layout: one ASCII line ``fedcross-model <sizes>:<activation>\\n``, then the
    parameter count as a little-endian uint64, then the parameters as
    little-endian float64.
    """
    params = np.asarray(params, dtype=np.float64)
    with open(path, "wb") as fh:
        fh.write(f"fedcross-model {arch.describe()}\n".encode("ascii"))
        fh.write(struct.pack("<Q", params.size))
        fh.write(params.astype("<f8").tobytes())


def load_model(path) -> tuple[np.ndarray, MlpArchitecture]:
    with open(path, "rb") as fh:
        line = fh.readline().decode("ascii", errors="replace").rstrip("\n")
        magic, _, desc = line.partition(" ")
        if magic != "fedcross-model":
            raise InputFormatError("not a fedcross model file")
        arch = MlpArchitecture.parse(desc)
        head = fh.read(8)
        if len(head) != 8:
            raise InputFormatError("truncated length header")
        (n,) = struct.unpack("<Q", head)
        body = fh.read()
    if len(body) != 8 * n:
        raise InputFormatError(f"expected {n} parameters, file holds {len(body) // 8}")
    params = np.frombuffer(body, dtype="<f8").astype(np.float64)
    if n != arch.param_count:
        raise InputFormatError(f"{n} parameters do not fit architecture {desc}")
    return params, arch


def point_name(cfg: SimConfig) -> str:
    if cfg.method == "fedcross":
        return f"{cfg.method}_a{cfg.alpha_policy.alpha:g}_{cfg.strategy.kind}_s{cfg.master_seed}"
    return f"{cfg.method}_s{cfg.master_seed}"


def _run_point(args):
    cfg, spec, outdir, workers = args
    name = point_name(cfg)
    try:
        train, test, plan = prepare_data(cfg, spec)
        result = run(cfg, train, test, plan, workers=workers)
        emit_metrics(result, outdir / f"{name}.csv")
        emit_model(result.final_model, cfg.arch, outdir / f"{name}.model")
        return name, result.final_accuracy() if result.rounds else None, None
    except (FedCrossError, OSError, ArithmeticError) as exc:
        return name, None, f"{type(exc).__name__}: {exc}"


def summarize(rows: list[tuple[SimConfig, float | None]]) -> list[dict]:
    """Mean and std of final accuracy across seeds for each (method, alpha, strategy)."""
    groups: dict[tuple, list[float]] = {}
    for cfg, acc in rows:
        if acc is None:
            continue
        key = (cfg.method, cfg.alpha_policy.alpha if cfg.method == "fedcross" else None,
               cfg.strategy.kind if cfg.method == "fedcross" else None)  # fmt: skip
        groups.setdefault(key, []).append(acc)
    out = []
    for (method, alpha, strat), accs in groups.items():
        out.append({
            "method": method, "alpha": alpha, "strategy": strat, "n_seeds": len(accs),
            "mean_accuracy": statistics.fmean(accs),
            "std_accuracy": statistics.stdev(accs) if len(accs) > 1 else 0.0,
        })  # fmt: skip
    return out


def run_experiments(exp: ExperimentFile, workers: int = 1, parallel: int = 1) -> int:
    """Run every sweep point, write per-point files and ``summary.csv``; return an exit code."""
    exp.output.mkdir(parents=True, exist_ok=True)
    points = exp.points()
    seen: dict[str, SimConfig] = {}
    for cfg in points:
        seen.setdefault(point_name(cfg), cfg)  # baselines ignore alpha/strategy axes
    points = list(seen.values())
    jobs = [(cfg, exp.data, exp.output, workers) for cfg in points]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as ex:
            results = list(ex.map(_run_point, jobs))
    else:
        results = [_run_point(j) for j in jobs]

    failed = 0
    rows = []
    for cfg, (name, acc, err) in zip(points, results):
        if err:
            failed += 1
            log.error("%s failed: %s", name, err)
        else:
            log.info("%s final accuracy %s", name, "n/a" if acc is None else f"{acc:.4f}")
        rows.append((cfg, acc))

    summary = summarize(rows)
    with open(exp.output / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["method", "alpha", "strategy", "n_seeds", "mean_accuracy", "std_accuracy"],
                           lineterminator="\n")  # fmt: skip
        w.writeheader()
        for row in summary:
            w.writerow({k: _fmt(v) for k, v in row.items()})
    for row in summary:
        label = row["method"] if row["alpha"] is None else f"{row['method']} a={row['alpha']:g} {row['strategy']}"
        print(f"{label:<32} {100 * row['mean_accuracy']:6.2f} +- {100 * row['std_accuracy']:.2f}  (n={row['n_seeds']})")
    return EXIT_RUN if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="fedcross",
        description="Simulate FedCross, FedAvg and FedProx on synthetic or CSV data.",
        epilog="Precedence: command-line flags > config file > built-in defaults. "
        "A flag that sets a sweep axis (--method, --alpha, --selection, --seed) pins that axis to one value.",
    )
    p.add_argument("--config", help="YAML experiment file")
    p.add_argument("--method", choices=["fedcross", "fedavg", "fedprox"])
    p.add_argument("--rounds", type=int)
    p.add_argument("--clients", type=int, dest="num_clients", help="total number of clients N")
    p.add_argument("--participation", type=float, help="fraction of clients sampled per round")
    p.add_argument("--alpha", type=float, help="host weight in cross-aggregation, in [0.5, 1)")
    p.add_argument("--selection", choices=["in_order", "highest", "lowest"])
    part = p.add_mutually_exclusive_group()
    part.add_argument("--beta", type=float, help="Dirichlet concentration for non-IID partitioning")
    part.add_argument("--iid", action="store_true", default=None, help="IID partitioning")
    p.add_argument("--accel", choices=["none", "pm", "da", "pm-da"])
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--eval-every", type=int, dest="eval_every")
    p.add_argument("--workers", type=int, default=1, help="threads for local training within a round")
    p.add_argument("--parallel", type=int, default=1, help="processes for running sweep points")
    p.add_argument("--no-timing", action="store_false", dest="record_timing", default=None,
                   help="write elapsed_ms as 0 so repeated runs give byte-identical CSVs")  # fmt: skip
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    overrides = {k: v for k, v in vars(args).items() if k not in ("config", "workers", "parallel", "verbose")}
    try:
        exp = parse_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run_experiments(exp, workers=args.workers, parallel=args.parallel)


if __name__ == "__main__":
    sys.exit(main())
