"""Contrastive trainer with manual analytic gradients.

The feature extractor is a linear map or a one-hidden-layer tanh network
whose output is projected onto the unit sphere. Training minimizes an
InfoNCE objective with a tunable positive-term weight epsilon in the
denominator:

    L = -log( e^{s+/tau} / (epsilon * e^{s+/tau} + sum_k e^{s_k/tau}) )

Negatives come from the batch (the other anchors), from the memory
(stop-gradient constants), or both. All gradients are closed-form,
including the unit-sphere projection Jacobian (I - z z^T)/|u|, and are
validated against central finite differences in the test suite.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import normalize
from .memory import ActiveMemory, EvictionEvent, guarded_update

__all__ = [
    "FeatureExtractor",
    "NEGATIVE_SOURCES",
    "StepReport",
    "TrainState",
    "TrainerConfig",
    "batched_infonce",
    "cosine_lr",
    "infonce_grad",
    "infonce_loss",
    "load_checkpoint",
    "momentum_update",
    "numerical_gradient",
    "save_checkpoint",
    "train_step",
]

NEGATIVE_SOURCES = ("batch_only", "memory_only", "mixed")

CHECKPOINT_VERSION = 1


@dataclass
class TrainerConfig:
    batch_size: int = 64
    tau: float = 0.5
    epsilon: float = 1.0
    negative_source: str = "mixed"
    memory_neg_count: int = 128
    momentum: float | None = 0.9
    lr: float = 0.01
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    delta: float = 1e-8
    steps: int = 800
    seed: int = 0
    d_out: int = 16
    hidden: int | None = None

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.d_out < 1:
            raise ValueError("d_out must be >= 1")
        if self.hidden is not None and self.hidden < 1:
            raise ValueError("hidden must be >= 1 when given")
        if self.negative_source not in NEGATIVE_SOURCES:
            raise ValueError(
                f"negative_source must be one of {NEGATIVE_SOURCES}"
            )
        if self.negative_source != "memory_only" and self.batch_size < 2:
            raise ValueError("batch negatives need batch_size >= 2")
        if not self.tau > 0:
            raise ValueError("tau must be > 0")
        if not 0 <= self.epsilon <= 1:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.negative_source != "batch_only" and self.memory_neg_count < 1:
            raise ValueError("memory_neg_count must be >= 1")
        if self.momentum is not None and not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1) or be None")
        if self.lr < 0:
            raise ValueError("lr must be >= 0")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError("optimizer must be 'sgd' or 'adam'")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("adam betas must lie in [0, 1)")
        if not self.delta > 0:
            raise ValueError("delta must be > 0")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")


class FeatureExtractor:
    """x -> g(x)/|g(x)| with g affine or affine-tanh-affine."""

    def __init__(self, d_in: int, d_out: int, hidden: int | None = None, seed: int = 0):
        if d_in < 1 or d_out < 1:
            raise ValueError("d_in and d_out must be >= 1")
        if hidden is not None and hidden < 1:
            raise ValueError("hidden must be >= 1 when given")
        self.d_in = d_in
        self.d_out = d_out
        self.hidden = hidden
        rng = np.random.default_rng(seed)
        if hidden is None:
            self.params = {
                "W": rng.normal(0.0, 1.0 / math.sqrt(d_in), (d_out, d_in)),
                "b": np.zeros(d_out),
            }
        else:
            self.params = {
                "W1": rng.normal(0.0, 1.0 / math.sqrt(d_in), (hidden, d_in)),
                "b1": np.zeros(hidden),
                "W2": rng.normal(0.0, 1.0 / math.sqrt(hidden), (d_out, hidden)),
                "b2": np.zeros(d_out),
            }

    def clone(self) -> "FeatureExtractor":
        twin = FeatureExtractor(self.d_in, self.d_out, self.hidden)
        twin.params = {k: v.copy() for k, v in self.params.items()}
        return twin

    def forward_cached(self, X: np.ndarray):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if self.hidden is None:
            U = X @ self.params["W"].T + self.params["b"]
            H = None
        else:
            H = np.tanh(X @ self.params["W1"].T + self.params["b1"])
            U = H @ self.params["W2"].T + self.params["b2"]
        norms = np.linalg.norm(U, axis=1, keepdims=True)
        if np.any(norms == 0.0):
            raise ValueError("extractor produced a zero vector; cannot normalize")
        Z = U / norms
        return Z, {"X": X, "H": H, "Z": Z, "norms": norms}

    def forward(self, X: np.ndarray) -> np.ndarray:
        return self.forward_cached(X)[0]

    def backward(self, cache: dict, dZ: np.ndarray) -> dict:
        """Gradients of a scalar loss given dL/dZ at the cached forward."""
        Z, norms, X = cache["Z"], cache["norms"], cache["X"]
        # Unit-sphere projection: dU = (dZ - (z . dZ) z) / |u| per row.
        dU = (dZ - (Z * dZ).sum(axis=1, keepdims=True) * Z) / norms
        if self.hidden is None:
            return {"W": dU.T @ X, "b": dU.sum(axis=0)}
        H = cache["H"]
        dH = dU @ self.params["W2"]
        dA = dH * (1.0 - H * H)
        return {
            "W1": dA.T @ X,
            "b1": dA.sum(axis=0),
            "W2": dU.T @ H,
            "b2": dU.sum(axis=0),
        }


def momentum_update(key_params: dict, query_params: dict, m: float) -> None:
    """key <- m * key + (1 - m) * query, in place. m=1 leaves key frozen."""
    if not 0 <= m <= 1:
        raise ValueError("momentum must lie in [0, 1]")
    for k in key_params:
        key_params[k] *= m
        key_params[k] += (1.0 - m) * query_params[k]


def cosine_lr(step: int, total_steps: int, lr0: float) -> float:
    """Half-cosine decay from lr0 at step 0 to 0 at step = total_steps."""
    if total_steps < 1:
        raise ValueError("total_steps must be >= 1")
    if not 0 <= step <= total_steps:
        raise ValueError("step must lie in [0, total_steps]")
    return lr0 * (1.0 + math.cos(math.pi * step / total_steps)) / 2.0


def infonce_loss(
    anchor: np.ndarray,
    positive: np.ndarray,
    negatives: np.ndarray,
    tau: float,
    epsilon: float,
) -> float:
    """Single-sample loss; negatives is a nonempty (n, z) array."""
    negatives = np.atleast_2d(np.asarray(negatives, dtype=np.float64))
    if negatives.shape[0] == 0:
        raise ValueError("negatives must be nonempty")
    if not tau > 0:
        raise ValueError("tau must be > 0")
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    lp = float(np.dot(anchor, positive)) / tau
    ln = (negatives @ anchor) / tau
    m = max(float(ln.max()), lp) if epsilon > 0 else float(ln.max())
    denom = epsilon * math.exp(lp - m) + float(np.exp(ln - m).sum())
    return -lp + m + math.log(denom)


def batched_infonce(
    Z: np.ndarray,
    P: np.ndarray,
    mem_negs: np.ndarray | None,
    tau: float,
    epsilon: float,
    source: str,
    positives_trainable: bool,
):
    """Mean loss over the batch plus gradients w.r.t. Z (and P if trainable).

    Batch negatives for anchor i are the other anchors Z[j != i]; their
    gradient contributions flow both through anchor i's loss and through
    every loss where Z[i] itself served as a negative. Memory negatives are
    constants.
    """
    B = Z.shape[0]
    if source not in NEGATIVE_SOURCES:
        raise ValueError(f"unknown negative source {source!r}")
    use_batch = source in ("batch_only", "mixed")
    use_mem = source in ("memory_only", "mixed")
    if use_batch and B < 2:
        raise ValueError("batch negatives need at least 2 anchors")
    if use_mem and (mem_negs is None or mem_negs.shape[0] == 0):
        raise ValueError("memory negatives requested but none provided")

    lp = (Z * P).sum(axis=1) / tau
    m = lp.copy() if epsilon > 0 else np.full(B, -np.inf)
    Lb = Eb = Lm = Em = None
    if use_batch:
        Lb = (Z @ Z.T) / tau
        np.fill_diagonal(Lb, -np.inf)
        m = np.maximum(m, Lb.max(axis=1))
    if use_mem:
        Lm = (Z @ mem_negs.T) / tau
        m = np.maximum(m, Lm.max(axis=1))

    denom = np.zeros(B)
    Ep = np.exp(lp - m)
    if epsilon > 0:
        denom += epsilon * Ep
    if use_batch:
        Eb = np.exp(Lb - m[:, None])
        denom += Eb.sum(axis=1)
    if use_mem:
        Em = np.exp(Lm - m[:, None])
        denom += Em.sum(axis=1)

    losses = -lp + m + np.log(denom)
    loss = float(losses.mean())

    scale = 1.0 / (B * tau)
    w_pos = (epsilon * Ep / denom) - 1.0
    dZ = scale * w_pos[:, None] * P
    if use_batch:
        Wb = Eb / denom[:, None]
        dZ += scale * (Wb @ Z + Wb.T @ Z)
    if use_mem:
        Wm = Em / denom[:, None]
        dZ += scale * (Wm @ mem_negs)
    dP = scale * w_pos[:, None] * Z if positives_trainable else None
    return loss, dZ, dP


@dataclass
class StepReport:
    step: int
    loss: float
    lr: float
    events: list[EvictionEvent] = field(default_factory=list)
    memory_update_applied: bool = True


@dataclass
class TrainState:
    config: TrainerConfig
    extractor: FeatureExtractor
    key_extractor: FeatureExtractor | None
    memory: ActiveMemory
    rng: np.random.Generator
    step: int = 0
    adam_m: dict | None = None
    adam_v: dict | None = None
    adam_t: int = 0
    guarded_memory: bool = False

    @classmethod
    def create(
        cls,
        config: TrainerConfig,
        extractor: FeatureExtractor,
        memory: ActiveMemory,
        guarded_memory: bool = False,
    ) -> "TrainState":
        key = extractor.clone() if config.momentum is not None else None
        state = cls(
            config=config,
            extractor=extractor,
            key_extractor=key,
            memory=memory,
            rng=np.random.default_rng(config.seed),
            guarded_memory=guarded_memory,
        )
        if config.optimizer == "adam":
            state.adam_m = {k: np.zeros_like(v) for k, v in extractor.params.items()}
            state.adam_v = {k: np.zeros_like(v) for k, v in extractor.params.items()}
        return state


def _apply_gradients(state: TrainState, grads: dict, lr: float) -> None:
    cfg = state.config
    params = state.extractor.params
    if cfg.optimizer == "sgd":
        for k in params:
            params[k] -= lr * grads[k]
        return
    state.adam_t += 1
    t = state.adam_t
    for k in params:
        state.adam_m[k] = cfg.beta1 * state.adam_m[k] + (1 - cfg.beta1) * grads[k]
        state.adam_v[k] = cfg.beta2 * state.adam_v[k] + (1 - cfg.beta2) * grads[k] ** 2
        m_hat = state.adam_m[k] / (1 - cfg.beta1**t)
        v_hat = state.adam_v[k] / (1 - cfg.beta2**t)
        params[k] -= lr * m_hat / (np.sqrt(v_hat) + cfg.delta)


def _embed_loss_grads(
    extractor: FeatureExtractor,
    key_extractor: FeatureExtractor | None,
    X: np.ndarray,
    X_pos: np.ndarray,
    mem_negs: np.ndarray | None,
    tau: float,
    epsilon: float,
    source: str,
) -> tuple[float, dict, np.ndarray, np.ndarray]:
    """(loss, grads, anchor embeddings, embeddings to push into memory)."""
    Z, cache_a = extractor.forward_cached(X)
    if key_extractor is not None:
        P = key_extractor.forward(X_pos)
        push_emb = key_extractor.forward(X)
        loss, dZ, _ = batched_infonce(
            Z, P, mem_negs, tau, epsilon, source, positives_trainable=False
        )
        grads = extractor.backward(cache_a, dZ)
    else:
        P, cache_p = extractor.forward_cached(X_pos)
        push_emb = Z
        loss, dZ, dP = batched_infonce(
            Z, P, mem_negs, tau, epsilon, source, positives_trainable=True
        )
        grads = extractor.backward(cache_a, dZ)
        grads_p = extractor.backward(cache_p, dP)
        grads = {k: grads[k] + grads_p[k] for k in grads}
    return loss, grads, Z, push_emb


def infonce_grad(
    extractor: FeatureExtractor,
    X: np.ndarray,
    X_pos: np.ndarray,
    negatives: np.ndarray | None,
    config: TrainerConfig,
    key_extractor: FeatureExtractor | None = None,
) -> tuple[float, dict]:
    """Mean InfoNCE loss over the batch and its gradient w.r.t. extractor
    parameters.

    negatives are memory embeddings and act as constants (stop-gradient).
    Positives contribute gradients only when key_extractor is None, i.e.
    when they are embedded by the trainable extractor itself.
    """
    loss, grads, _, _ = _embed_loss_grads(
        extractor,
        key_extractor,
        X,
        X_pos,
        negatives,
        config.tau,
        config.epsilon,
        config.negative_source,
    )
    return loss, grads


def train_step(
    state: TrainState,
    X: np.ndarray,
    X_pos: np.ndarray,
    labels: np.ndarray | None = None,
) -> StepReport:
    """One optimization step plus the memory update for this batch.

    Anchors are embedded by the query extractor; positives, and the
    embeddings pushed into memory, go through the key extractor when
    momentum is configured. Pushed embeddings are the ones computed in this
    forward pass, before the parameter updates.
    """
    cfg = state.config
    lr = cosine_lr(state.step, cfg.steps, cfg.lr)

    mem_negs = None
    if cfg.negative_source in ("memory_only", "mixed"):
        mem_negs = state.memory.sample_negatives(cfg.memory_neg_count, state.rng)

    loss, grads, _, push_emb = _embed_loss_grads(
        state.extractor,
        state.key_extractor,
        X,
        X_pos,
        mem_negs,
        cfg.tau,
        cfg.epsilon,
        cfg.negative_source,
    )
    _apply_gradients(state, grads, lr)
    if state.key_extractor is not None:
        momentum_update(state.key_extractor.params, state.extractor.params, cfg.momentum)

    # Renormalize defensively: float drift in the forward leaves norms at
    # 1 +- 1e-16, but the memory enforces unit norm at 1e-9.
    push_emb = normalize(push_emb)
    applied = True
    if state.guarded_memory:
        events, applied = guarded_update(
            state.memory, push_emb, labels, push_emb, labels
        )
    else:
        events = state.memory.push_batch(push_emb, labels)

    state.step += 1
    return StepReport(state.step, loss, lr, events, applied)


def numerical_gradient(loss_fn, params: dict, h: float = 1e-5) -> dict:
    """Central finite differences of loss_fn() w.r.t. params, in place."""
    grads = {}
    for k, value in params.items():
        g = np.zeros_like(value)
        flat = value.reshape(-1)
        gflat = g.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + h
            up = loss_fn()
            flat[idx] = orig - h
            down = loss_fn()
            flat[idx] = orig
            gflat[idx] = (up - down) / (2.0 * h)
        grads[k] = g
    return grads


# -- checkpointing ----------------------------------------------------------


def _rng_state_json(rng: np.random.Generator) -> str:
    return json.dumps(rng.bit_generator.state)


def _rng_from_json(text: str) -> np.random.Generator:
    rng = np.random.default_rng()
    rng.bit_generator.state = json.loads(text)
    return rng


def save_checkpoint(path, state: TrainState, experiment_config: dict | None = None) -> None:
    """Dump architecture, parameters, optimizer moments, memory and RNG state."""
    cfg = state.config
    meta = {
        "version": CHECKPOINT_VERSION,
        "trainer": {
            "batch_size": cfg.batch_size,
            "tau": cfg.tau,
            "epsilon": cfg.epsilon,
            "negative_source": cfg.negative_source,
            "memory_neg_count": cfg.memory_neg_count,
            "momentum": cfg.momentum,
            "lr": cfg.lr,
            "optimizer": cfg.optimizer,
            "beta1": cfg.beta1,
            "beta2": cfg.beta2,
            "delta": cfg.delta,
            "steps": cfg.steps,
            "seed": cfg.seed,
            "d_out": cfg.d_out,
            "hidden": cfg.hidden,
        },
        "arch": {
            "d_in": state.extractor.d_in,
            "d_out": state.extractor.d_out,
            "hidden": state.extractor.hidden,
        },
        "memory": {
            "capacity": state.memory.capacity,
            "dim": state.memory.dim,
            "policy": state.memory.policy,
            "count": state.memory.size,
            "seen": state.memory._seen,
            "kernel": _kernel_to_dict(state.memory.kernel),
            "rng": state.memory.rng.bit_generator.state,
        },
        "step": state.step,
        "adam_t": state.adam_t,
        "guarded_memory": state.guarded_memory,
        "rng": state.rng.bit_generator.state,
        "experiment_config": experiment_config,
    }
    arrays = {}
    for k, v in state.extractor.params.items():
        arrays[f"q.{k}"] = v
    if state.key_extractor is not None:
        for k, v in state.key_extractor.params.items():
            arrays[f"k.{k}"] = v
    if state.adam_m is not None:
        for k, v in state.adam_m.items():
            arrays[f"am.{k}"] = v
        for k, v in state.adam_v.items():
            arrays[f"av.{k}"] = v
    arrays["mem.emb"] = state.memory._emb
    arrays["mem.labels"] = state.memory._labels
    arrays["mem.steps"] = state.memory._steps
    arrays["mem.scores"] = state.memory._scores
    arrays["meta"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def _kernel_to_dict(kernel) -> dict:
    from .kernels import AffineCosine, ExponentialTemp, LabelOracle

    if isinstance(kernel, AffineCosine):
        return {"form": "affine"}
    if isinstance(kernel, ExponentialTemp):
        return {"form": "exp", "tau": kernel.tau}
    if isinstance(kernel, LabelOracle):
        return {"form": "oracle"}
    raise ValueError(f"unknown kernel {kernel!r}")


def _kernel_from_dict(d: dict):
    from .kernels import AffineCosine, ExponentialTemp, LabelOracle

    form = d["form"]
    if form == "affine":
        return AffineCosine()
    if form == "exp":
        return ExponentialTemp(tau=d["tau"])
    if form == "oracle":
        return LabelOracle()
    raise ValueError(f"unknown kernel form {form!r}")


def load_checkpoint(path) -> tuple[TrainState, dict | None]:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        if meta["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta['version']}")
        cfg = TrainerConfig(**meta["trainer"])
        arch = meta["arch"]
        extractor = FeatureExtractor(arch["d_in"], arch["d_out"], arch["hidden"])
        extractor.params = {
            k[2:]: data[k].copy() for k in data.files if k.startswith("q.")
        }
        key = None
        key_params = {k[2:]: data[k].copy() for k in data.files if k.startswith("k.")}
        if key_params:
            key = FeatureExtractor(arch["d_in"], arch["d_out"], arch["hidden"])
            key.params = key_params

        mem_meta = meta["memory"]
        memory = ActiveMemory(
            mem_meta["capacity"],
            mem_meta["dim"],
            _kernel_from_dict(mem_meta["kernel"]),
            mem_meta["policy"],
        )
        memory._emb = data["mem.emb"].copy()
        memory._labels = data["mem.labels"].copy()
        memory._steps = data["mem.steps"].copy()
        memory._scores = data["mem.scores"].copy()
        memory._count = mem_meta["count"]
        memory._seen = mem_meta["seen"]
        memory.rng.bit_generator.state = mem_meta["rng"]

        state = TrainState(
            config=cfg,
            extractor=extractor,
            key_extractor=key,
            memory=memory,
            rng=_rng_from_json(json.dumps(meta["rng"])),
            step=meta["step"],
            adam_t=meta["adam_t"],
            guarded_memory=meta["guarded_memory"],
        )
        if cfg.optimizer == "adam":
            state.adam_m = {
                k[3:]: data[k].copy() for k in data.files if k.startswith("am.")
            }
            state.adam_v = {
                k[3:]: data[k].copy() for k in data.files if k.startswith("av.")
            }
        return state, meta["experiment_config"]
