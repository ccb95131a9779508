"""Experiment harness: JSON configs, deterministic runs, policy benchmarks.

A run is fully determined by (config, seed): the seed is split into
independent child seeds for the stream, extractor init, negative sampling
and the memory policy, so repeated runs write byte-identical artifacts.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .kernels import AffineCosine, ExponentialTemp, Kernel, normalize
from .memory import ActiveMemory, POLICIES
from .metrics import (
    MetricsRow,
    ProbeConfig,
    class_entropy,
    dominant_fraction,
    inter_class_similarity,
    intra_class_variance,
    linear_probe,
    write_metrics_csv,
)
from .streams import Dominant, GaussianPairStream, LongTail, StreamConfig
from .trainer import (
    FeatureExtractor,
    TrainState,
    TrainerConfig,
    save_checkpoint,
    train_step,
)

__all__ = [
    "CONFIG_VERSION",
    "ConfigError",
    "ExperimentConfig",
    "RunResult",
    "bench_policies",
    "default_config_dict",
    "export_embeddings",
    "load_config",
    "parse_config",
    "run_experiment",
]

CONFIG_VERSION = 1


class ConfigError(ValueError):
    """Invalid experiment config; message names the offending field."""


@dataclass
class EvalConfig:
    cadence: int = 50
    eval_per_class: int = 40
    probe_train_per_class: int = 40
    probe_test_per_class: int = 40
    probe_steps: int = 200

    def __post_init__(self) -> None:
        for name in (
            "cadence",
            "eval_per_class",
            "probe_train_per_class",
            "probe_test_per_class",
            "probe_steps",
        ):
            if getattr(self, name) < 1:
                raise ConfigError(f"eval.{name}: must be >= 1")


@dataclass
class MemoryConfig:
    capacity: int = 256
    policy: str = "duel"
    kernel: dict = field(default_factory=lambda: {"form": "affine"})
    guarded: bool = False

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise ConfigError("memory.capacity: must be >= 1")
        if self.policy not in POLICIES:
            raise ConfigError(
                f"memory.policy: unknown policy {self.policy!r}; "
                f"expected one of {POLICIES}"
            )
        self.make_kernel()  # validates

    def make_kernel(self) -> Kernel:
        form = self.kernel.get("form")
        if form == "affine":
            extra = set(self.kernel) - {"form"}
            if extra:
                raise ConfigError(f"memory.kernel: unknown fields {sorted(extra)}")
            return AffineCosine()
        if form == "exp":
            extra = set(self.kernel) - {"form", "tau"}
            if extra:
                raise ConfigError(f"memory.kernel: unknown fields {sorted(extra)}")
            tau = self.kernel.get("tau")
            if not isinstance(tau, (int, float)) or not tau > 0:
                raise ConfigError("memory.kernel.tau: must be a number > 0")
            return ExponentialTemp(tau=float(tau))
        raise ConfigError(
            f"memory.kernel.form: expected 'affine' or 'exp', got {form!r}"
        )


@dataclass
class ExperimentConfig:
    stream: StreamConfig
    trainer: TrainerConfig
    memory: MemoryConfig
    eval: EvalConfig
    out_dir: str = "runs"
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)

    def __post_init__(self) -> None:
        if len(self.seeds) == 0:
            raise ConfigError("seeds: must list at least one seed")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds: trial seeds must be distinct")

    def to_dict(self) -> dict:
        imb = self.stream.imbalance
        if isinstance(imb, Dominant):
            imbalance = {"kind": "dominant", "rho_max": imb.rho_max}
        else:
            imbalance = {"kind": "longtail", "ratio": imb.ratio}
        return {
            "version": CONFIG_VERSION,
            "stream": {
                "n_classes": self.stream.n_classes,
                "d_in": self.stream.d_in,
                "separation": self.stream.separation,
                "sigma": self.stream.sigma,
                "sigma_aug": self.stream.sigma_aug,
                "imbalance": imbalance,
            },
            "trainer": {
                "batch_size": self.trainer.batch_size,
                "tau": self.trainer.tau,
                "epsilon": self.trainer.epsilon,
                "negative_source": self.trainer.negative_source,
                "memory_neg_count": self.trainer.memory_neg_count,
                "momentum": self.trainer.momentum,
                "lr": self.trainer.lr,
                "optimizer": self.trainer.optimizer,
                "beta1": self.trainer.beta1,
                "beta2": self.trainer.beta2,
                "delta": self.trainer.delta,
                "steps": self.trainer.steps,
                "d_out": self.trainer.d_out,
                "hidden": self.trainer.hidden,
            },
            "memory": {
                "capacity": self.memory.capacity,
                "policy": self.memory.policy,
                "kernel": dict(self.memory.kernel),
                "guarded": self.memory.guarded,
            },
            "eval": {
                "cadence": self.eval.cadence,
                "eval_per_class": self.eval.eval_per_class,
                "probe_train_per_class": self.eval.probe_train_per_class,
                "probe_test_per_class": self.eval.probe_test_per_class,
                "probe_steps": self.eval.probe_steps,
            },
            "out_dir": self.out_dir,
            "seeds": list(self.seeds),
        }


def default_config_dict() -> dict:
    """The desk-scale defaults as a plain JSON-ready dict."""
    return ExperimentConfig(
        stream=StreamConfig(),
        trainer=TrainerConfig(),
        memory=MemoryConfig(),
        eval=EvalConfig(),
    ).to_dict()


def _require_keys(section: dict, allowed: set[str], path: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown fields {sorted(unknown)}")


def _get_number(section: dict, key: str, path: str, default):
    value = section.get(key, default)
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigError(f"{path}.{key}: expected a number")
    return value


def _get_int(section: dict, key: str, path: str, default):
    value = section.get(key, default)
    if not isinstance(value, int) or isinstance(value, bool):
        raise ConfigError(f"{path}.{key}: expected an integer")
    return value


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate a config dict; unknown fields anywhere are rejected."""
    if not isinstance(raw, dict):
        raise ConfigError("config: expected a JSON object")
    _require_keys(
        raw,
        {"version", "stream", "trainer", "memory", "eval", "out_dir", "seeds"},
        "config",
    )
    if raw.get("version") != CONFIG_VERSION:
        raise ConfigError(
            f"version: expected {CONFIG_VERSION}, got {raw.get('version')!r}"
        )

    s = raw.get("stream", {})
    _require_keys(
        s,
        {"n_classes", "d_in", "separation", "sigma", "sigma_aug", "imbalance"},
        "stream",
    )
    imb_raw = s.get("imbalance", {"kind": "dominant", "rho_max": 0.75})
    if not isinstance(imb_raw, dict):
        raise ConfigError("stream.imbalance: expected an object")
    kind = imb_raw.get("kind")
    if kind == "dominant":
        _require_keys(imb_raw, {"kind", "rho_max"}, "stream.imbalance")
        imbalance = Dominant(_get_number(imb_raw, "rho_max", "stream.imbalance", 0.75))
    elif kind == "longtail":
        _require_keys(imb_raw, {"kind", "ratio"}, "stream.imbalance")
        imbalance = LongTail(_get_number(imb_raw, "ratio", "stream.imbalance", 10.0))
    else:
        raise ConfigError(
            f"stream.imbalance.kind: expected 'dominant' or 'longtail', got {kind!r}"
        )
    try:
        stream = StreamConfig(
            n_classes=_get_int(s, "n_classes", "stream", 10),
            d_in=_get_int(s, "d_in", "stream", 32),
            separation=float(_get_number(s, "separation", "stream", 1.0)),
            sigma=float(_get_number(s, "sigma", "stream", 0.35)),
            sigma_aug=float(_get_number(s, "sigma_aug", "stream", 0.35)),
            imbalance=imbalance,
        )
    except ValueError as exc:
        raise ConfigError(f"stream: {exc}") from exc

    t = raw.get("trainer", {})
    _require_keys(
        t,
        {
            "batch_size",
            "tau",
            "epsilon",
            "negative_source",
            "memory_neg_count",
            "momentum",
            "lr",
            "optimizer",
            "beta1",
            "beta2",
            "delta",
            "steps",
            "d_out",
            "hidden",
        },
        "trainer",
    )
    momentum = t.get("momentum", 0.9)
    if momentum is not None and (
        not isinstance(momentum, (int, float)) or isinstance(momentum, bool)
    ):
        raise ConfigError("trainer.momentum: expected a number or null")
    source = t.get("negative_source", "mixed")
    if not isinstance(source, str):
        raise ConfigError("trainer.negative_source: expected a string")
    optimizer = t.get("optimizer", "adam")
    if not isinstance(optimizer, str):
        raise ConfigError("trainer.optimizer: expected a string")
    hidden = t.get("hidden", None)
    if hidden is not None and (not isinstance(hidden, int) or isinstance(hidden, bool)):
        raise ConfigError("trainer.hidden: expected an integer or null")
    try:
        trainer = TrainerConfig(
            batch_size=_get_int(t, "batch_size", "trainer", 64),
            tau=float(_get_number(t, "tau", "trainer", 0.5)),
            epsilon=float(_get_number(t, "epsilon", "trainer", 1.0)),
            negative_source=source,
            memory_neg_count=_get_int(t, "memory_neg_count", "trainer", 128),
            momentum=None if momentum is None else float(momentum),
            lr=float(_get_number(t, "lr", "trainer", 0.01)),
            optimizer=optimizer,
            beta1=float(_get_number(t, "beta1", "trainer", 0.9)),
            beta2=float(_get_number(t, "beta2", "trainer", 0.999)),
            delta=float(_get_number(t, "delta", "trainer", 1e-8)),
            steps=_get_int(t, "steps", "trainer", 800),
            d_out=_get_int(t, "d_out", "trainer", 16),
            hidden=hidden,
        )
    except ValueError as exc:
        raise ConfigError(f"trainer: {exc}") from exc

    m = raw.get("memory", {})
    _require_keys(m, {"capacity", "policy", "kernel", "guarded"}, "memory")
    policy = m.get("policy", "duel")
    if not isinstance(policy, str):
        raise ConfigError("memory.policy: expected a string")
    kernel = m.get("kernel", {"form": "affine"})
    if not isinstance(kernel, dict):
        raise ConfigError("memory.kernel: expected an object")
    guarded = m.get("guarded", False)
    if not isinstance(guarded, bool):
        raise ConfigError("memory.guarded: expected a boolean")
    memory = MemoryConfig(
        capacity=_get_int(m, "capacity", "memory", 256),
        policy=policy,
        kernel=kernel,
        guarded=guarded,
    )

    e = raw.get("eval", {})
    _require_keys(
        e,
        {
            "cadence",
            "eval_per_class",
            "probe_train_per_class",
            "probe_test_per_class",
            "probe_steps",
        },
        "eval",
    )
    eval_cfg = EvalConfig(
        cadence=_get_int(e, "cadence", "eval", 50),
        eval_per_class=_get_int(e, "eval_per_class", "eval", 40),
        probe_train_per_class=_get_int(e, "probe_train_per_class", "eval", 40),
        probe_test_per_class=_get_int(e, "probe_test_per_class", "eval", 40),
        probe_steps=_get_int(e, "probe_steps", "eval", 200),
    )

    out_dir = raw.get("out_dir", "runs")
    if not isinstance(out_dir, str):
        raise ConfigError("out_dir: expected a string")
    seeds = raw.get("seeds", [0, 1, 2, 3, 4])
    if (
        not isinstance(seeds, list)
        or not seeds
        or not all(isinstance(x, int) and not isinstance(x, bool) for x in seeds)
    ):
        raise ConfigError("seeds: expected a nonempty list of integers")

    return ExperimentConfig(
        stream=stream,
        trainer=trainer,
        memory=memory,
        eval=eval_cfg,
        out_dir=out_dir,
        seeds=tuple(seeds),
    )


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON ({exc})") from exc
    return parse_config(raw)


# -- running ------------------------------------------------------------------


@dataclass
class RunResult:
    seed: int
    out_dir: str
    rows: list[MetricsRow]
    final: MetricsRow

    @property
    def probe_acc(self) -> float:
        return self.final.probe_acc


def _child_seeds(seed: int, n: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(n)


def run_experiment(
    cfg: ExperimentConfig, seed: int, out_dir: str | None = None
) -> RunResult:
    """Train on the configured stream and write run artifacts.

    Writes config.json, metrics.csv, a mid-run and a final memory snapshot,
    and checkpoint.npz into out_dir. Byte-identical for identical
    (config, seed).
    """
    ss_stream, ss_init, ss_neg, ss_mem, ss_eval = _child_seeds(seed, 5)

    stream_cfg = StreamConfig(
        n_classes=cfg.stream.n_classes,
        d_in=cfg.stream.d_in,
        separation=cfg.stream.separation,
        sigma=cfg.stream.sigma,
        sigma_aug=cfg.stream.sigma_aug,
        imbalance=cfg.stream.imbalance,
        seed=seed,
    )
    stream = GaussianPairStream(
        stream_cfg, seed=np.random.default_rng(ss_stream).integers(2**31)
    )

    extractor = FeatureExtractor(
        cfg.stream.d_in,
        cfg.trainer.d_out,
        hidden=cfg.trainer.hidden,
        seed=np.random.default_rng(ss_init).integers(2**31),
    )
    memory = ActiveMemory(
        cfg.memory.capacity,
        cfg.trainer.d_out,
        cfg.memory.make_kernel(),
        cfg.memory.policy,
        seed=np.random.default_rng(ss_mem).integers(2**31),
    )
    trainer_cfg = TrainerConfig(
        batch_size=cfg.trainer.batch_size,
        tau=cfg.trainer.tau,
        epsilon=cfg.trainer.epsilon,
        negative_source=cfg.trainer.negative_source,
        memory_neg_count=cfg.trainer.memory_neg_count,
        momentum=cfg.trainer.momentum,
        lr=cfg.trainer.lr,
        optimizer=cfg.trainer.optimizer,
        beta1=cfg.trainer.beta1,
        beta2=cfg.trainer.beta2,
        delta=cfg.trainer.delta,
        steps=cfg.trainer.steps,
        seed=int(np.random.default_rng(ss_neg).integers(2**31)),
    )
    state = TrainState.create(
        trainer_cfg, extractor, memory, guarded_memory=cfg.memory.guarded
    )

    # Seed the memory so memory negatives exist from the first step.
    X0, _, y0 = stream.sample_batch(cfg.trainer.batch_size)
    init_extractor = state.key_extractor or state.extractor
    memory.push_batch(normalize(init_extractor.forward(X0)), y0)

    eval_rng = np.random.default_rng(ss_eval)
    eval_X, eval_y = stream.sample_balanced(cfg.eval.eval_per_class, eval_rng)
    probe_train_X, probe_train_y = stream.sample_balanced(
        cfg.eval.probe_train_per_class, eval_rng
    )
    probe_test_X, probe_test_y = stream.sample_balanced(
        cfg.eval.probe_test_per_class, eval_rng
    )

    if out_dir is None:
        out_dir = os.path.join(cfg.out_dir, f"seed{seed}")
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.json"), "w") as fh:
        json.dump({**cfg.to_dict(), "seed": seed}, fh, indent=2, sort_keys=True)
        fh.write("\n")

    probe_cfg = ProbeConfig(steps=cfg.eval.probe_steps)
    rows: list[MetricsRow] = []
    mid_step = max(1, cfg.trainer.steps // 2)
    for _ in range(cfg.trainer.steps):
        X, Xp, labels = stream.sample_batch(cfg.trainer.batch_size)
        report = train_step(state, X, Xp, labels)
        if report.step == mid_step:
            memory.snapshot_csv(
                os.path.join(out_dir, f"memory_step{report.step:06d}.csv")
            )
        if report.step % cfg.eval.cadence == 0 or report.step == cfg.trainer.steps:
            Zeval = state.extractor.forward(eval_X)
            is_final = report.step == cfg.trainer.steps
            probe_acc = None
            if is_final:
                probe_acc = linear_probe(
                    state.extractor.forward(probe_train_X),
                    probe_train_y,
                    state.extractor.forward(probe_test_X),
                    probe_test_y,
                    probe_cfg,
                )
            rows.append(
                MetricsRow(
                    step=report.step,
                    loss=report.loss,
                    lr=report.lr,
                    class_entropy=class_entropy(memory.labels),
                    v_intra=intra_class_variance(Zeval, eval_y),
                    s_inter=inter_class_similarity(Zeval, eval_y),
                    mean_mem_distinct=memory.mean_distinctiveness(),
                    dominant_frac=dominant_fraction(memory.labels),
                    probe_acc=probe_acc,
                )
            )

    write_metrics_csv(os.path.join(out_dir, "metrics.csv"), rows)
    memory.snapshot_csv(
        os.path.join(out_dir, f"memory_step{cfg.trainer.steps:06d}.csv")
    )
    save_checkpoint(
        os.path.join(out_dir, "checkpoint.npz"),
        state,
        experiment_config={**cfg.to_dict(), "seed": seed},
    )
    return RunResult(seed=seed, out_dir=out_dir, rows=rows, final=rows[-1])


# -- benchmarking -------------------------------------------------------------

BENCH_FIELDS = (
    "policy",
    "seed",
    "class_entropy",
    "v_intra",
    "s_inter",
    "dominant_frac",
    "probe_acc",
)


def bench_policies(
    cfg: ExperimentConfig,
    policies: list[str],
    out_dir: str | None = None,
) -> list[dict]:
    """Run every (policy, seed) cell and tabulate final metrics.

    Returns per-cell rows followed by one seed-averaged summary row per
    policy (seed column 'mean'). Writes bench.csv under out_dir.
    """
    for policy in policies:
        if policy not in POLICIES:
            raise ConfigError(f"policies: unknown policy {policy!r}")
    if out_dir is None:
        out_dir = cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)

    rows: list[dict] = []
    for policy in policies:
        per_seed = []
        for seed in cfg.seeds:
            run_cfg = ExperimentConfig(
                stream=cfg.stream,
                trainer=cfg.trainer,
                memory=MemoryConfig(
                    capacity=cfg.memory.capacity,
                    policy=policy,
                    kernel=dict(cfg.memory.kernel),
                    guarded=cfg.memory.guarded,
                ),
                eval=cfg.eval,
                out_dir=cfg.out_dir,
                seeds=cfg.seeds,
            )
            result = run_experiment(
                run_cfg, seed, os.path.join(out_dir, f"{policy}_seed{seed}")
            )
            final = result.final
            row = {
                "policy": policy,
                "seed": seed,
                "class_entropy": final.class_entropy,
                "v_intra": final.v_intra,
                "s_inter": final.s_inter,
                "dominant_frac": final.dominant_frac,
                "probe_acc": final.probe_acc,
            }
            per_seed.append(row)
            rows.append(row)
        mean_row = {"policy": policy, "seed": "mean"}
        for key in BENCH_FIELDS[2:]:
            mean_row[key] = float(np.mean([r[key] for r in per_seed]))
        rows.append(mean_row)

    with open(os.path.join(out_dir, "bench.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(BENCH_FIELDS)
        for row in rows:
            writer.writerow(
                [row["policy"], row["seed"]]
                + [repr(float(row[k])) for k in BENCH_FIELDS[2:]]
            )
    return rows


def export_embeddings(ckpt_path, out_path, per_class: int = 100) -> int:
    """Embed a balanced sample from the checkpoint's stream and write CSV.

    per_class=0 writes a header-only file. Returns the number of rows.
    """
    from .streams import write_embedding_csv
    from .trainer import load_checkpoint

    state, exp_cfg = load_checkpoint(ckpt_path)
    if exp_cfg is None:
        raise ValueError("checkpoint carries no experiment config to sample from")
    cfg = parse_config({k: v for k, v in exp_cfg.items() if k != "seed"})
    seed = exp_cfg.get("seed", 0)
    stream_cfg = StreamConfig(
        n_classes=cfg.stream.n_classes,
        d_in=cfg.stream.d_in,
        separation=cfg.stream.separation,
        sigma=cfg.stream.sigma,
        sigma_aug=cfg.stream.sigma_aug,
        imbalance=cfg.stream.imbalance,
        seed=seed,
    )
    stream = GaussianPairStream(stream_cfg)
    if per_class == 0:
        write_embedding_csv(
            out_path, np.zeros((0, state.extractor.d_out)), labels=None
        )
        return 0
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xE8BED]))
    X, y = stream.sample_balanced(per_class, rng)
    Z = normalize(state.extractor.forward(X))
    write_embedding_csv(out_path, Z, labels=y)
    return Z.shape[0]
