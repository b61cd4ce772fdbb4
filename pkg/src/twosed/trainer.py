"""Desk-scale training of the deterministic networks with a softmax head."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .data import Dataset
from .errors import DivergedError, ShapeError
from .netmodel import STREAM_DATA, ModelSpec, ParamVector, rng_for, sample_params

__all__ = ["TrainConfig", "LossCurve", "Adam", "train", "cross_entropy", "network_loss_and_grad"]


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 10
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    n_train: int | None = None

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")


@dataclass
class LossCurve:
    losses: list = field(default_factory=list)
    accuracy: float = float("nan")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "mean_loss"])
        for e, v in enumerate(self.losses, start=1):
            w.writerow([e, f"{v:.17g}"])
        w.writerow(["accuracy", f"{self.accuracy:.17g}"])
        return buf.getvalue()


class Adam:
    """Adam with bias correction on a flat parameter vector."""

    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = self.v = None
        self.t = 0

    def step(self, params, grad):
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def cross_entropy(logits, labels):
    """Mean softmax cross-entropy and its gradient with respect to the logits."""
    lse = logsumexp(logits, axis=1)
    n = len(labels)
    loss = float(np.mean(lse - logits[np.arange(n), labels]))
    p = np.exp(logits - lse[:, None])
    p[np.arange(n), labels] -= 1.0
    return loss, p / n


def network_loss_and_grad(spec: ModelSpec, theta: ParamVector, x, labels):
    """Deterministic forward pass, cross-entropy loss, flat parameter gradient."""
    caches, h = [], x
    for blk, th in zip(spec.blocks, theta.slices):
        h, c = blk.forward(th, h)
        caches.append(c)
    loss, g = cross_entropy(h, labels)
    grads = [None] * len(spec.blocks)
    for j in range(len(spec.blocks) - 1, -1, -1):
        grads[j], g = spec.blocks[j].backward(theta.slices[j], caches[j], g, per_sample=False)
    return loss, np.concatenate(grads), h


def train(spec: ModelSpec, ds: Dataset, cfg: TrainConfig) -> LossCurve:
    """Adam on softmax cross-entropy; returns per-epoch mean training loss.

    Initial weights come from the fan-in scheme keyed by ``cfg.seed``;
    batches are reshuffled every epoch from a generator keyed by
    ``(cfg.seed, epoch)``.
    """
    if spec.output_shape != (ds.n_classes,):
        raise ShapeError(f"model outputs {spec.output_shape}, dataset has {ds.n_classes} classes")
    x, y = ds.inputs, ds.labels
    if cfg.n_train is not None and cfg.n_train < len(y):
        perm = rng_for(cfg.seed, STREAM_DATA, 1).permutation(len(y))[: cfg.n_train]
        x, y = x[perm], y[perm]
    theta = sample_params(spec, cfg.seed)
    flat = theta.flat
    opt = Adam(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    curve = LossCurve()
    n = len(y)
    for epoch in range(cfg.epochs):
        order = rng_for(cfg.seed, STREAM_DATA, 2, epoch).permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start: start + cfg.batch_size]
            loss, grad, _ = network_loss_and_grad(spec, ParamVector.from_flat(spec, flat), x[idx], y[idx])
            if not np.isfinite(loss):
                raise DivergedError(epoch + 1, b + 1)
            total += loss * len(idx)
            flat = opt.step(flat, grad)
        curve.losses.append(total / n)
    _, _, logits = network_loss_and_grad(spec, ParamVector.from_flat(spec, flat), x, y)
    curve.accuracy = float(np.mean(np.argmax(logits, axis=1) == y))
    return curve
