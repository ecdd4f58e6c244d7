"""End-to-end training loop: sample, embed, normalize, distances, mine/weigh/loss, backprop, Adam."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import TrainingAborted
from .evaluation import RetrievalReport, recall_at_k
from .geometry import distance_backward, l2_normalize, l2_normalize_backward, pairwise_distances
from .mining import Sampler, SamplerConfig
from .model import Adam, MlpEmbedder
from .objective import Objective, evaluate, make_plan

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelConfig:
    hidden_dims: tuple = (64,)
    head_dim: int = 16
    fusion: bool = False
    lr_scale: dict = field(default_factory=dict)


@dataclass(frozen=True)
class TrainConfig:
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    objective: Objective = field(default_factory=Objective)
    model: ModelConfig = field(default_factory=ModelConfig)
    epochs: int = 1
    steps_per_epoch: int = 20
    lr: float = 1e-5
    seed: int = 0
    freeze_layers_for_epochs: int = 0
    eval_ks: tuple = (1, 2, 4, 8)


@dataclass
class TrainHistory:
    losses: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)   # [{"epoch": e, "recall_at": {...}}]
    epoch_seconds: list = field(default_factory=list)

    def history_csv(self) -> str:
        rows = ["step,loss"] + [f"{i + 1},{v:.17g}" for i, v in enumerate(self.losses)]
        return "\n".join(rows) + "\n"

    def smoothed(self, window=20):
        """Trailing moving average (shorter window at the start)."""
        x = np.asarray(self.losses, dtype=np.float64)
        c = np.concatenate([[0.0], np.cumsum(x)])
        idx = np.arange(1, x.size + 1)
        lo = np.maximum(idx - window, 0)
        return (c[idx] - c[lo]) / (idx - lo)


@dataclass(frozen=True)
class StepOutput:
    loss: float
    grads: dict
    active: int


def build_model(config: TrainConfig, input_dim) -> MlpEmbedder:
    mc = config.model
    return MlpEmbedder(input_dim, mc.hidden_dims, mc.head_dim, mc.fusion, seed=config.seed,
                       lr_scale=mc.lr_scale)


def embed_normalized(model: MlpEmbedder, features):
    return l2_normalize(model.embed(features))[0]


def evaluate_model(model: MlpEmbedder, dataset: Dataset, ks=(1, 2, 4, 8)) -> RetrievalReport:
    return recall_at_k(embed_normalized(model, dataset.features), dataset.labels, ks)


def compute_gradients(model: MlpEmbedder, features, labels, objective: Objective) -> StepOutput:
    """Forward, loss and full backward pass for one batch, without updating anything."""
    raw, cache = model.forward(features)
    z, ncache = l2_normalize(raw)
    d = pairwise_distances(z)
    if not np.isfinite(d).all():
        # mining comparisons drop NaN pairs, which would hide the problem as a zero loss
        raise TrainingAborted("non-finite embedding distances",
                              {"loss": "nan", "labels": np.asarray(labels).tolist()})
    result = evaluate(objective, d, make_plan(objective, d, labels))
    if not np.isfinite(result.value):
        raise TrainingAborted(f"non-finite loss {result.value}",
                              {"loss": repr(result.value), "labels": np.asarray(labels).tolist()})
    grad_z = distance_backward(result.grad, z, d)
    grad_raw = l2_normalize_backward(grad_z, ncache)
    return StepOutput(result.value, model.backward(cache, grad_raw), result.active)


def train_step(model: MlpEmbedder, optimizer: Adam, batch, config: TrainConfig, frozen=()):
    """Embed, mine, weigh, backprop and apply Adam for ``batch = (features, labels)``; in place."""
    features, labels = batch
    out = compute_gradients(model, features, labels, config.objective)
    optimizer.step(model.params, out.grads, lr_scale=model.scale_for, frozen=frozen)
    return out.loss, model


def train(config: TrainConfig, dataset: Dataset, eval_set: Dataset | None = None,
          model: MlpEmbedder | None = None):
    """Run ``epochs * steps_per_epoch`` PK (or random) batches and return (model, history).

    With ``eval_set`` a Recall@K snapshot is recorded before training (epoch 0)
    and after every epoch.
    """
    if model is None:
        model = build_model(config, dataset.features.shape[1])
    sampler = Sampler(dataset.labels, config.sampler)
    optimizer = Adam(lr=config.lr)
    history = TrainHistory()
    trunk = tuple(k for k in model.params if k.startswith("trunk."))

    def snapshot(epoch):
        if eval_set is not None:
            rep = evaluate_model(model, eval_set, config.eval_ks)
            history.snapshots.append({"epoch": epoch, **rep.to_dict()})

    snapshot(0)
    step = 0
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        frozen = trunk if epoch < config.freeze_layers_for_epochs else ()
        for _ in range(config.steps_per_epoch):
            rows = next(sampler)
            step += 1
            try:
                loss, model = train_step(model, optimizer,
                                         (dataset.features[rows], dataset.labels[rows]),
                                         config, frozen=frozen)
            except TrainingAborted as exc:
                exc.diagnostic.update({"step": step, "epoch": epoch + 1, "rows": rows.tolist()})
                raise
            history.losses.append(loss)
        history.epoch_seconds.append(time.perf_counter() - t0)
        log.debug("epoch %d mean loss %.6f", epoch + 1,
                  np.mean(history.losses[-config.steps_per_epoch:]) if config.steps_per_epoch else 0)
        snapshot(epoch + 1)
    return model, history
