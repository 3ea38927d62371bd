"""From logits and labels to ``pt``, per-example losses, and logit gradients.

Three batch kinds are supported:

* ``softmax``: one-hot targets, ``pt`` is the softmax probability of the target.
* ``softmax-smoothed``: one-hot targets mixed with the uniform distribution;
  CE is taken against the smoothed distribution and ``1 - pt`` is
  ``sum(smooth_labels * (1 - softmax))``.
* ``sigmoid``: independent binary targets per class,
  ``pt = y * sigmoid(z) + (1 - y) * (1 - sigmoid(z))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from polyloss import losses as L

SOFTMAX = "softmax"
SMOOTHED = "softmax-smoothed"
SIGMOID = "sigmoid"
KINDS = (SOFTMAX, SMOOTHED, SIGMOID)

DEFAULT_SMOOTHING = 0.1
DEFAULT_GAMMA = 2.0
DEFAULT_ALPHA_BALANCE = 0.25

# only CE-type losses have a defined meaning on smoothed targets
SMOOTHED_FAMILIES = (L.CE, L.POLY1_CE)


@dataclass
class LabeledBatch:
    logits: np.ndarray
    labels: np.ndarray
    kind: str = SOFTMAX
    smoothing: float = 0.0

    def __post_init__(self):
        self.logits = np.atleast_2d(np.asarray(self.logits, dtype=np.float64))
        self.labels = np.atleast_2d(np.asarray(self.labels, dtype=np.float64))
        if self.kind not in KINDS:
            raise ValueError(f"unknown batch kind {self.kind!r}")
        if self.logits.shape != self.labels.shape:
            raise ValueError(f"logits {self.logits.shape} and labels {self.labels.shape} differ in shape")
        if not np.all(np.isfinite(self.logits)):
            raise ValueError("logits must be finite")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise ValueError("labels must be 0/1 (one-hot or multi-label)")
        if self.kind != SIGMOID and not np.all(self.labels.sum(axis=1) == 1):
            raise ValueError("softmax labels must be one-hot rows")
        if self.kind == SMOOTHED and not 0 <= self.smoothing < 1:
            raise ValueError(f"smoothing must lie in [0, 1), got {self.smoothing}")

    @classmethod
    def from_classes(cls, logits, classes, kind: str = SOFTMAX, smoothing: float = 0.0):
        logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
        labels = np.zeros_like(logits)
        labels[np.arange(len(logits)), np.asarray(classes, dtype=int)] = 1.0
        return cls(logits, labels, kind, smoothing)

    @property
    def num_classes(self) -> int:
        return self.logits.shape[1]

    def target_distribution(self) -> np.ndarray:
        if self.kind == SMOOTHED:
            return self.labels * (1 - self.smoothing) + self.smoothing / self.num_classes
        return self.labels


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ValueError("softmax input must be finite")
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    # split by sign so exp never overflows
    ez = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + ez), ez / (1.0 + ez))


def one_minus_pt(batch: LabeledBatch) -> np.ndarray:
    """``1 - pt`` per example for softmax kinds (smoothing-aware)."""
    if batch.kind == SIGMOID:
        return 1.0 - pt_all(batch)
    s = softmax(batch.logits)
    if batch.kind == SMOOTHED:
        return np.sum(batch.target_distribution() * (1.0 - s), axis=-1)
    return 1.0 - np.sum(batch.labels * s, axis=-1)


def pt_all(batch: LabeledBatch) -> np.ndarray:
    """``pt`` for every row: shape [batch] (softmax) or [batch, classes] (sigmoid)."""
    if batch.kind == SIGMOID:
        p = sigmoid(batch.logits)
        y = batch.labels
        return L.clamp_pt(y * p + (1 - y) * (1 - p))
    if batch.kind == SMOOTHED:
        return L.clamp_pt(1.0 - one_minus_pt(batch))
    return L.clamp_pt(np.sum(batch.labels * softmax(batch.logits), axis=-1))


def pt_of(batch: LabeledBatch, row: int):
    if not -len(batch.logits) <= row < len(batch.logits):
        raise IndexError(f"row {row} out of range for batch of {len(batch.logits)}")
    out = pt_all(batch)[row]
    return out if np.ndim(out) else float(out)


def cross_entropy(batch: LabeledBatch) -> np.ndarray:
    """CE against the (possibly smoothed) target distribution, per example."""
    return -np.sum(batch.target_distribution() * log_softmax(batch.logits), axis=-1)


def poly1_ce_batch(batch: LabeledBatch, eps1: float) -> np.ndarray:
    """CE plus ``eps1 * (1 - pt)`` per example (softmax kinds only)."""
    if batch.kind == SIGMOID:
        raise ValueError("poly1_ce_batch needs a softmax batch")
    if not eps1 >= -1:
        raise ValueError(f"eps1 must be >= -1, got {eps1}")
    return cross_entropy(batch) + eps1 * one_minus_pt(batch)


def balance_weights(labels, alpha_balance: float) -> np.ndarray:
    if not 0 < alpha_balance < 1:
        raise ValueError(f"alpha_balance must lie in (0, 1), got {alpha_balance}")
    labels = np.asarray(labels, dtype=np.float64)
    return labels * alpha_balance + (1 - labels) * (1 - alpha_balance)


def poly1_fl_batch(batch: LabeledBatch, eps1: float, gamma: float = DEFAULT_GAMMA,
                   alpha_balance: float | None = None) -> np.ndarray:
    """Per-example, per-class focal loss plus ``eps1 * (1 - pt)**(gamma + 1)``.

    With ``alpha_balance`` both terms are scaled by the class-balance weight.
    The result is unreduced, shape [batch, classes].
    """
    if batch.kind != SIGMOID:
        raise ValueError("poly1_fl_batch needs a sigmoid batch")
    if not eps1 >= -1:
        raise ValueError(f"eps1 must be >= -1, got {eps1}")
    pt = pt_all(batch)
    fl = L.focal_loss(pt, gamma)
    extra = eps1 * np.power(1.0 - pt, gamma + 1)
    if alpha_balance is None:
        return fl + extra
    w = balance_weights(batch.labels, alpha_balance)
    return w * fl + extra * w


def _check_pair(batch: LabeledBatch, spec: L.LossSpec):
    if batch.kind == SMOOTHED and spec.family not in SMOOTHED_FAMILIES:
        raise ValueError(f"loss family {spec.family!r} is not defined on smoothed targets")


def batch_losses(batch: LabeledBatch, spec: L.LossSpec,
                 alpha_balance: float | None = None) -> np.ndarray:
    """Per-example loss (sigmoid: summed over classes), unreduced over the batch."""
    _check_pair(batch, spec)
    if batch.kind == SMOOTHED:
        eps1 = spec.eps1 if spec.family == L.POLY1_CE else 0.0
        return poly1_ce_batch(batch, eps1)
    per = L.loss(spec, pt_all(batch))
    if batch.kind == SIGMOID:
        if alpha_balance is not None:
            per = per * balance_weights(batch.labels, alpha_balance)
        return per.sum(axis=-1)
    return per


def mean_loss(batch: LabeledBatch, spec: L.LossSpec, alpha_balance: float | None = None) -> float:
    return float(np.mean(batch_losses(batch, spec, alpha_balance)))


def grad_logits(batch: LabeledBatch, spec: L.LossSpec,
                alpha_balance: float | None = None) -> np.ndarray:
    """Analytic gradient of :func:`mean_loss` with respect to the logits."""
    _check_pair(batch, spec)
    m = len(batch.logits)
    if batch.kind == SMOOTHED:
        q = batch.target_distribution()
        s = softmax(batch.logits)
        g = s - q
        if spec.family == L.POLY1_CE:
            # d/dz_k of -(q . s) is -s_k (q_k - q . s)
            qs = np.sum(q * s, axis=-1, keepdims=True)
            g = g - spec.eps1 * s * (q - qs)
        return g / m
    if batch.kind == SIGMOID:
        p = sigmoid(batch.logits)
        y = batch.labels
        pt = pt_all(batch)
        dpt_dz = (2 * y - 1) * p * (1 - p)
        g = L.loss_grad_pt(spec, pt) * dpt_dz
        if alpha_balance is not None:
            g = g * balance_weights(y, alpha_balance)
        return g / m
    s = softmax(batch.logits)
    pt = pt_all(batch)
    dl_dpt = L.loss_grad_pt(spec, pt)
    # dpt/dz_k = pt (y_k - s_k)
    return (dl_dpt * pt)[:, None] * (batch.labels - s) / m
