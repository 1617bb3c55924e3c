"""Class-weighted training loop and gradient checking.

Training is full-batch: every epoch accumulates the loss over all batches
(the batches partition the training windows), takes one optimizer step
and records the epoch loss.  The optimizer keeps per-parameter first and
second moment estimates with a fixed step size, so runs are deterministic
given the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import DivergenceError, ShapeError
from . import autodiff as ad
from .autodiff import Tensor
from .batching import GraphBatch
from .models import (
    Hyperparams,
    ModelParams,
    fit_input_standardization,
    forward,
    init_params,
)

ABSENT_CLASS_WEIGHT_CAP = 100.0


def class_weights_from_labels(labels: np.ndarray) -> tuple[float, float]:
    """Inverse-frequency weights n_total / (2 * n_class), capped at 100
    for a class absent from the data."""
    labels = np.asarray(labels)
    total = labels.size
    weights = []
    for cls in (0, 1):
        count = int((labels == cls).sum())
        weights.append(total / (2.0 * count) if count else ABSENT_CLASS_WEIGHT_CAP)
    return (weights[0], weights[1])


def weighted_loss_sum(scores: Tensor, labels: np.ndarray, class_weights) -> Tensor:
    """Sum over nodes of w[y] * cross_entropy(softmax(scores), y)."""
    w0, w1 = class_weights
    if w0 <= 0 or w1 <= 0:
        raise ShapeError("class weights must be positive")
    labels = np.asarray(labels)
    if scores.shape[0] != labels.size:
        raise ShapeError(f"{scores.shape[0]} score rows for {labels.size} labels")
    onehot = np.zeros(scores.shape)
    onehot[np.arange(labels.size), labels] = 1.0
    per_node_w = np.where(labels == 1, w1, w0)
    logp = ad.log_softmax(scores, axis=1)
    picked = ad.tensor_sum(logp * Tensor(onehot), axis=1)
    return -ad.tensor_sum(picked * Tensor(per_node_w))


def weighted_loss(scores: Tensor, labels: np.ndarray, class_weights) -> Tensor:
    """Mean over nodes of the class-weighted cross entropy."""
    n = np.asarray(labels).size
    return weighted_loss_sum(scores, labels, class_weights) * (1.0 / n)


@dataclass(slots=True)
class Adam:
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    _m: dict[str, np.ndarray] = field(default_factory=dict)
    _v: dict[str, np.ndarray] = field(default_factory=dict)
    _t: int = 0

    def step(self, tensors: dict[str, Tensor]) -> None:
        self._t += 1
        for name, t in tensors.items():
            g = t.grad
            if g is None:
                continue
            m = self._m.setdefault(name, np.zeros_like(t.data))
            v = self._v.setdefault(name, np.zeros_like(t.data))
            m += (1 - self.beta1) * (g - m)
            v += (1 - self.beta2) * (g * g - v)
            m_hat = m / (1 - self.beta1**self._t)
            v_hat = v / (1 - self.beta2**self._t)
            t.data -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass(slots=True)
class TrainReport:
    losses: list[float]
    params: ModelParams
    split: str
    seed: int


def train(
    kind: str,
    batches: list[GraphBatch],
    hyper: Hyperparams,
    seed: int,
    split: str = "",
) -> TrainReport:
    """Fit a model of `kind` on the given batches.

    Class weights default to inverse frequency over the training labels.
    Raises :class:`DivergenceError` (naming the epoch) if the loss goes
    non-finite.
    """
    if not batches:
        raise ShapeError("need at least one training batch")
    all_labels = np.concatenate([b.labels for b in batches])
    weights = hyper.class_weights or class_weights_from_labels(all_labels)
    hyper = replace(hyper, class_weights=weights)
    params = init_params(kind, hyper, seed)
    fit_input_standardization(params, batches)
    optimizer = Adam(learning_rate=hyper.learning_rate)
    n_total = int(all_labels.size)
    losses: list[float] = []
    for epoch in range(hyper.epochs):
        for t in params.tensors.values():
            t.zero_grad()
        loss = None
        for batch in batches:
            part = weighted_loss_sum(forward(params, batch), batch.labels, weights)
            loss = part if loss is None else loss + part
        loss = loss * (1.0 / n_total)
        value = loss.item()
        if not np.isfinite(value):
            raise DivergenceError(epoch)
        loss.backward()
        optimizer.step(params.tensors)
        losses.append(value)
    return TrainReport(losses=losses, params=params, split=split, seed=seed)


def grad_check(
    kind: str, params: ModelParams, batch: GraphBatch, h: float = 1e-5
) -> float:
    """Max relative error of reverse-mode vs central finite differences.

    Checks the gradient of the equal-weight loss with respect to every
    parameter element.  Small graphs only; cost is two forwards per
    element.
    """
    weights = (1.0, 1.0)

    def loss_value() -> float:
        return weighted_loss(forward(params, batch), batch.labels, weights).item()

    for t in params.tensors.values():
        t.zero_grad()
    loss = weighted_loss(forward(params, batch), batch.labels, weights)
    loss.backward()
    analytic = {name: t.grad.copy() for name, t in params.tensors.items()}

    worst = 0.0
    for name, t in params.tensors.items():
        flat = t.data.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            up = loss_value()
            flat[i] = keep - h
            down = loss_value()
            flat[i] = keep
            numeric = (up - down) / (2 * h)
            a = analytic[name].reshape(-1)[i]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-6)
            worst = max(worst, err)
    return worst
