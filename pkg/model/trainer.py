"""
trainer.py - Supervised training of materialized models.

Exact noiseless simulation, softmax cross-entropy on the logits, Adam with
L2 weight decay and a per-epoch cosine learning rate that reaches zero at
the end of the run.

Gradients are chained through the node graph: each node contributes a
parameter-shift Jacobian with respect to its template angles and to the
RY angles pi*o that encode its parents' outputs, and the output gradient
is pushed back in reverse topological order.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from tqdm import tqdm

from arch.encoders import data_encoder_ops, intermediate_encoder_ops
from model.design import DATA, Model
from model.inference import ExecutionPlan, head, plan_model
from qsim import batch
from settings import (
    ADAM_BETAS, ADAM_EPS, INTERMEDIATE_ANGLE_SCALE, NODE_QUBITS,
    TRAIN_BATCH_SIZE, TRAIN_EPOCHS, TRAIN_LR, TRAIN_WEIGHT_DECAY,
)
from utils.helpers import cross_entropy

log = logging.getLogger("splitq.train")


class EmptyDataset(ValueError):
    """Training set without samples."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = TRAIN_EPOCHS
    batch_size: int = TRAIN_BATCH_SIZE
    lr: float = TRAIN_LR
    weight_decay: float = TRAIN_WEIGHT_DECAY
    schedule: str = "cosine"
    train_samples: int | None = None      # use only the first N samples

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError(f"epochs and batch_size must be positive: {self}")
        if self.schedule not in ("cosine", "constant"):
            raise ValueError(f"unknown schedule {self.schedule!r}")


def cosine_lr(base: float, epoch: int, epochs: int) -> float:
    """base * (1 + cos(pi * epoch / epochs)) / 2."""
    return base * 0.5 * (1.0 + math.cos(math.pi * epoch / epochs))


class Adam:
    """Adam on a dict of parameter arrays; weight decay is added to the gradient."""

    def __init__(self, betas=ADAM_BETAS, eps=ADAM_EPS, weight_decay=0.0):
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.m: dict = {}
        self.v: dict = {}
        self.t = 0

    def step(self, params: dict, grads: dict, lr: float) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for k, p in params.items():
            g = grads[k] + self.weight_decay * p
            m = self.m.get(k, np.zeros_like(p))
            v = self.v.get(k, np.zeros_like(p))
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            self.m[k], self.v[k] = m, v
            m_hat = m / (1 - b1 ** self.t)
            v_hat = v / (1 - b2 ** self.t)
            p -= lr * m_hat / (np.sqrt(v_hat) + self.eps)


def plan_loss_and_grad(plan: ExecutionPlan, features: np.ndarray,
                       labels: np.ndarray) -> tuple[float, dict[int, np.ndarray]]:
    """Mean cross-entropy over the batch and d loss / d params per node."""
    size = features.shape[0]
    data_ops = data_encoder_ops(features)
    outputs: dict[int, np.ndarray] = {}
    tapes = {}

    for n in plan.nodes:
        ops, parents = [], []
        for seg in n.segments:
            if seg == DATA:
                ops.extend(data_ops)
            else:
                parents.append((seg, len(ops)))
                ops.extend(intermediate_encoder_ops([outputs[seg]]))
        start = len(ops)
        ops.extend(batch.from_circuit(n.body))
        body_idx = [start + i for i in n.body.rotation_indices]
        enc_idx = [first + q for _, first in parents for q in range(NODE_QUBITS)]
        values, jac = batch.expectations_and_jacobian(NODE_QUBITS, ops, size, body_idx + enc_idx)
        outputs[n.node] = values
        tapes[n.node] = (jac, parents, len(body_idx))

    loss, dlogits = cross_entropy(head(plan, outputs), labels)

    upstream = {n.node: np.zeros((size, NODE_QUBITS)) for n in plan.nodes}
    for s in plan.outputs:
        upstream[s][:, :plan.n_classes] += dlogits / len(plan.outputs)

    grads = {}
    for n in reversed(plan.nodes):
        jac, parents, n_body = tapes[n.node]
        contrib = np.einsum("bq,bqk->bk", upstream[n.node], jac)
        grads[n.node] = contrib[:, :n_body].sum(axis=0)
        for i, (parent, _) in enumerate(parents):
            cols = slice(n_body + NODE_QUBITS * i, n_body + NODE_QUBITS * (i + 1))
            upstream[parent] += INTERMEDIATE_ANGLE_SCALE * contrib[:, cols]
    return loss, grads


def loss_and_grad(model: Model, features: np.ndarray, labels: np.ndarray):
    return plan_loss_and_grad(plan_model(model), np.atleast_2d(features), np.asarray(labels))


def dataset_loss(model: Model, dataset) -> float:
    loss, _ = loss_and_grad(model, dataset.features, dataset.labels)
    return loss


class Trainer:
    """Runs one training job; `history` keeps the mean loss of every epoch."""

    def __init__(self, config: TrainConfig | None = None, seed: int = 0, progress: bool = False):
        self.config = config or TrainConfig()
        self.seed = seed
        self.progress = progress
        self.history: list[float] = []
        self.lrs: list[float] = []

    def lr_at(self, epoch: int) -> float:
        if self.config.schedule == "constant":
            return self.config.lr
        return cosine_lr(self.config.lr, epoch, self.config.epochs)

    def fit(self, model: Model, dataset) -> Model:
        cfg = self.config
        features, labels = dataset.features, dataset.labels
        if cfg.train_samples is not None:
            features, labels = features[:cfg.train_samples], labels[:cfg.train_samples]
        if len(labels) == 0:
            raise EmptyDataset("training set is empty")
        if np.any(labels < 0) or np.any(labels >= model.n_classes):
            raise ValueError(f"labels outside [0, {model.n_classes})")

        trained = model.copy()
        rng = np.random.default_rng(self.seed)
        opt = Adam(weight_decay=cfg.weight_decay)
        epochs = range(cfg.epochs)
        if self.progress:
            epochs = tqdm(epochs, desc="train", unit="epoch", leave=False)

        for epoch in epochs:
            lr = self.lr_at(epoch)
            self.lrs.append(lr)
            order = rng.permutation(len(labels))
            losses = []
            for first in range(0, len(order), cfg.batch_size):
                idx = order[first:first + cfg.batch_size]
                loss, grads = loss_and_grad(trained, features[idx], labels[idx])
                opt.step(trained.params, grads, lr)
                losses.append(loss * len(idx))
            self.history.append(float(sum(losses) / len(order)))
            log.debug("epoch %d lr=%.2e loss=%.4f", epoch, lr, self.history[-1])
        return trained


def train(model: Model, trainset, config: TrainConfig | None = None, seed: int = 0) -> Model:
    """Trained copy of `model`; the input model is left untouched."""
    return Trainer(config, seed).fit(model, trainset)
