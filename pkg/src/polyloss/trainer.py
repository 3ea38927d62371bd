"""Deterministic mini-batch SGD for linear classifiers under any loss spec.

The tracked diagnostic is the mean target probability ``pt``, overall and per
class, evaluated on the full training set every ``eval_every`` steps.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import Sequence

import numpy as np

from polyloss import activations as A
from polyloss import losses as L
from polyloss.series import gradient_fraction
from polyloss.synthdata import Dataset, generate, make_rng

log = logging.getLogger(__name__)

LINEAR_SOFTMAX = "linear-softmax"
LINEAR_SIGMOID = "linear-sigmoid"
MODELS = (LINEAR_SOFTMAX, LINEAR_SIGMOID)

OPTIMIZER_PARAMS = ("learning_rate", "weight_decay", "batch_size", "steps", "smoothing",
                    "alpha_balance", "seed", "dataset_seed")
LOSS_PARAMS = ("eps1", "eps2", "gamma", "n", "alpha")


@dataclass(frozen=True)
class TrainConfig:
    loss: L.LossSpec = field(default_factory=lambda: L.LossSpec(L.CE))
    dataset: dict = field(default_factory=lambda: {"generator": "blobs"})
    dataset_seed: int = 0
    model: str = LINEAR_SOFTMAX
    learning_rate: float = 0.1
    weight_decay: float = 1e-4
    batch_size: int = 32
    steps: int = 2000
    eval_every: int = 100
    seed: int = 0
    smoothing: float = 0.0
    alpha_balance: float | None = None
    test_fraction: float = 0.2

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; expected one of {MODELS}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not self.weight_decay >= 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")
        for name in ("batch_size", "steps", "eval_every"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value}")
        if not 0 <= self.test_fraction < 1:
            raise ValueError(f"test_fraction must lie in [0, 1), got {self.test_fraction}")
        if self.smoothing and self.model != LINEAR_SOFTMAX:
            raise ValueError("label smoothing needs the linear-softmax model")
        if self.alpha_balance is not None and self.model != LINEAR_SIGMOID:
            raise ValueError("alpha_balance needs the linear-sigmoid model")
        # builds the batch kind once so incompatible loss/head pairs fail early
        A.LabeledBatch(np.zeros((1, 2)), np.array([[1.0, 0.0]]), self.batch_kind, self.smoothing)
        if self.batch_kind == A.SMOOTHED and self.loss.family not in A.SMOOTHED_FAMILIES:
            raise ValueError(f"loss family {self.loss.family!r} is not defined on smoothed targets")

    @property
    def batch_kind(self) -> str:
        if self.model == LINEAR_SIGMOID:
            return A.SIGMOID
        return A.SMOOTHED if self.smoothing else A.SOFTMAX

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["loss"] = self.loss.to_dict()
        d["dataset"] = dict(self.dataset)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config fields: {sorted(extra)}")
        if "loss" in d and not isinstance(d["loss"], L.LossSpec):
            d["loss"] = L.LossSpec.from_dict(d["loss"])
        return cls(**d)

    def with_param(self, name: str, value) -> "TrainConfig":
        if name in LOSS_PARAMS:
            return replace(self, loss=self.loss.with_param(name, value))
        if name in OPTIMIZER_PARAMS:
            return replace(self, **{name: value})
        raise ValueError(f"unknown sweep parameter {name!r}; expected one of "
                         f"{', '.join(LOSS_PARAMS + OPTIMIZER_PARAMS)}")


class TrainingDiverged(RuntimeError):
    """Raised when the loss or the weights stop being finite."""

    def __init__(self, diagnostic: dict):
        super().__init__(f"training diverged at step {diagnostic['step']}")
        self.diagnostic = diagnostic


@dataclass
class RunRecord:
    config: TrainConfig
    per_eval: list[dict]
    final: dict
    wall_time: float = 0.0
    warnings: list[str] = field(default_factory=list)

    def to_dict(self, include_wall_time: bool = False) -> dict:
        d = {"config": self.config.to_dict(), "per_eval": self.per_eval,
             "final": self.final, "warnings": list(self.warnings)}
        if include_wall_time:
            d["wall_time"] = self.wall_time
        return d


class LinearModel:
    """Weights ``W`` [d, k] and bias ``b`` [k], zero-initialised."""

    def __init__(self, d: int, k: int):
        self.W = np.zeros((d, k))
        self.b = np.zeros(k)

    def logits(self, x: np.ndarray) -> np.ndarray:
        return x @ self.W + self.b

    def sgd_step(self, x, grad_z, lr: float, weight_decay: float) -> None:
        gW = x.T @ grad_z
        gb = grad_z.sum(axis=0)
        # w <- w - lr * (grad + wd * w), written so that zero data gradient
        # scales the weights by exactly (1 - lr * wd)
        # overflow is caught by the finiteness check in train()
        with np.errstate(over="ignore", invalid="ignore"):
            if weight_decay:
                shrink = 1.0 - lr * weight_decay
                self.W *= shrink
                self.b *= shrink
            self.W -= lr * gW
            self.b -= lr * gb


def _make_batch(cfg: TrainConfig, logits: np.ndarray, y: np.ndarray) -> A.LabeledBatch:
    return A.LabeledBatch.from_classes(logits, y, cfg.batch_kind, cfg.smoothing)


def target_pt(cfg: TrainConfig, logits: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-example probability of the true class (the confidence diagnostic)."""
    rows = np.arange(len(y))
    if cfg.model == LINEAR_SIGMOID:
        return L.clamp_pt(A.sigmoid(logits[rows, y]))
    return L.clamp_pt(A.softmax(logits)[rows, y])


def evaluate(cfg: TrainConfig, model: LinearModel, data: Dataset) -> dict:
    logits = model.logits(data.features)
    y = data.labels
    batch = _make_batch(cfg, logits, y)
    pt = target_pt(cfg, logits, y)
    per_class = []
    for c in range(data.num_classes):
        mask = y == c
        per_class.append(float(pt[mask].mean()) if mask.any() else float("nan"))
    return {
        "train_loss": A.mean_loss(batch, cfg.loss, cfg.alpha_balance),
        "train_accuracy": float(np.mean(np.argmax(logits, axis=1) == y)),
        "mean_pt_overall": float(pt.mean()),
        "mean_pt_per_class": per_class,
        "gradient_fraction_first_term": float(np.mean(gradient_fraction(pt, 1))),
    }


def _accuracy(model: LinearModel, data: Dataset) -> float | None:
    if len(data.labels) == 0:
        return None
    return float(np.mean(np.argmax(model.logits(data.features), axis=1) == data.labels))


def train(cfg: TrainConfig) -> RunRecord:
    """Run seeded mini-batch SGD and record diagnostics."""
    start = time.perf_counter()
    data = generate(cfg.dataset, cfg.dataset_seed)
    train_set, test_set = data.split(cfg.test_fraction, cfg.dataset_seed)
    x, y = train_set.features, train_set.labels
    n = len(y)
    model = LinearModel(x.shape[1], data.num_classes)
    rng = make_rng(cfg.seed)
    batch_size = min(cfg.batch_size, n)

    per_eval = [{"step": 0, **evaluate(cfg, model, train_set)}]
    order = rng.permutation(n)
    cursor = 0
    for step in range(1, cfg.steps + 1):
        if cursor + batch_size > n:
            order = rng.permutation(n)
            cursor = 0
        idx = order[cursor:cursor + batch_size]
        cursor += batch_size
        xb = x[idx]
        batch = _make_batch(cfg, model.logits(xb), y[idx])
        batch_loss = A.mean_loss(batch, cfg.loss, cfg.alpha_balance)
        if not np.isfinite(batch_loss):
            raise TrainingDiverged(_diagnostic(cfg, step, batch_loss, model))
        model.sgd_step(xb, A.grad_logits(batch, cfg.loss, cfg.alpha_balance),
                       cfg.learning_rate, cfg.weight_decay)
        if not (np.all(np.isfinite(model.W)) and np.all(np.isfinite(model.b))):
            raise TrainingDiverged(_diagnostic(cfg, step, batch_loss, model))
        if step % cfg.eval_every == 0 or step == cfg.steps:
            metrics = evaluate(cfg, model, train_set)
            if not np.isfinite(metrics["train_loss"]):
                raise TrainingDiverged(_diagnostic(cfg, step, metrics["train_loss"], model))
            per_eval.append({"step": step, **metrics})

    last = per_eval[-1]
    final = {
        "train_accuracy": last["train_accuracy"],
        "train_loss": last["train_loss"],
        "mean_pt_overall": last["mean_pt_overall"],
        "mean_pt_per_class": last["mean_pt_per_class"],
        "test_accuracy": _accuracy(model, test_set),
        "class_counts": train_set.class_counts,
        "weights": model.W.tolist(),
        "bias": model.b.tolist(),
    }
    record = RunRecord(cfg, per_eval, final, time.perf_counter() - start, list(cfg.loss.warnings))
    log.debug("trained %s in %.2fs", cfg.loss.family, record.wall_time)
    return record


def _diagnostic(cfg: TrainConfig, step: int, loss_value: float, model: LinearModel) -> dict:
    return {
        "step": step,
        "loss": float(loss_value),
        "weight_norm": float(np.linalg.norm(model.W)),
        "bias_norm": float(np.linalg.norm(model.b)),
        "config": cfg.to_dict(),
    }


def sweep_configs(base: TrainConfig, parameter: str, values: Sequence) -> list[TrainConfig]:
    """One config per value; run ``i`` uses training seed ``base.seed ^ i``."""
    configs = []
    for i, value in enumerate(values):
        cfg = base.with_param(parameter, value)
        if parameter != "seed":
            cfg = replace(cfg, seed=base.seed ^ i)
        configs.append(cfg)
    return configs


def sweep(base: TrainConfig, parameter: str, values: Sequence, jobs: int = 1) -> list[RunRecord]:
    configs = sweep_configs(base, parameter, values)
    if jobs > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(train, configs))
    return [train(cfg) for cfg in configs]


def imbalance_report(record: RunRecord) -> list[dict]:
    """Majority vs minority mean ``pt`` at every eval point of a binary run."""
    counts = record.final["class_counts"]
    if len(counts) != 2:
        raise ValueError(f"imbalance report needs a binary run, got {len(counts)} classes")
    major = int(np.argmax(counts))
    minor = 1 - major
    rows = []
    for e in record.per_eval:
        pts = e["mean_pt_per_class"]
        rows.append({"step": e["step"], "mean_pt_majority": pts[major],
                     "mean_pt_minority": pts[minor], "gap": pts[major] - pts[minor]})
    return rows
