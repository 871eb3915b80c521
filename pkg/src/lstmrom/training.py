"""Minibatch Adam training loop with early stopping, shared by both surrogates."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .seeding import seed_sequence  # noqa: F401  (re-exported)
from .nn import Adam, GradientTape, NonFiniteError, Tensor, backward, clip_by_global_norm

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    n_epochs: int = 1000
    patience: int | None = 50
    lr: float = 1e-3
    dim_batch: int = 32
    alpha: float = 0.2
    val_batch: int = 2048
    clip_norm: float | None = None  # global gradient-norm bound
    lr_decay: float = 1.0  # learning rate multiplied by this after every epoch


@dataclass
class History:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int | None = None
    stopped_early: bool = False

    @property
    def n_epochs(self) -> int:
        return len(self.train_loss)

    def to_dict(self) -> dict:
        return {
            "train_loss": list(self.train_loss),
            "val_loss": list(self.val_loss),
            "best_epoch": self.best_epoch,
            "stopped_early": self.stopped_early,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "History":
        return cls(list(d["train_loss"]), list(d["val_loss"]), d.get("best_epoch"), d.get("stopped_early", False))


# batch_loss(index_array) -> scalar Tensor recorded on the active tape
BatchLoss = Callable[[np.ndarray], Tensor]


def fit(params: Sequence[Tensor], batch_loss: BatchLoss, train_idx: np.ndarray, val_idx: np.ndarray,
        cfg: TrainConfig, rng: np.random.Generator, stage: str = "train") -> History:
    """Train ``params`` in place and leave them at the best validation loss seen.

    With ``patience=None`` every epoch runs; the best weights are restored either way.
    """
    params = list(params)
    opt = Adam(params, lr=cfg.lr)
    hist = History()
    best = math.inf
    best_values = [p.value for p in params]
    since_best = 0
    train_idx = np.asarray(train_idx)
    val_idx = np.asarray(val_idx)
    for epoch in range(cfg.n_epochs):
        order = rng.permutation(train_idx)
        total, count = 0.0, 0
        for start in range(0, order.size, cfg.dim_batch):
            sel = order[start : start + cfg.dim_batch]
            with GradientTape() as tape:
                loss = batch_loss(sel)
            lv = float(loss.value)
            if not math.isfinite(lv):
                raise NonFiniteError(f"{stage}: non-finite training loss at epoch {epoch + 1}, batch starting {start}")
            try:
                grads = backward(tape, loss, params)
                if cfg.clip_norm is not None:
                    grads = clip_by_global_norm(grads, cfg.clip_norm)
                opt.step(grads)
            except NonFiniteError as exc:
                raise NonFiniteError(f"{stage}: epoch {epoch + 1}: {exc}") from exc
            total += lv * sel.size
            count += sel.size
        hist.train_loss.append(total / count)
        opt.lr *= cfg.lr_decay
        val = evaluate_loss(batch_loss, val_idx if val_idx.size else train_idx, cfg.val_batch)
        if not math.isfinite(val):
            raise NonFiniteError(f"{stage}: non-finite validation loss at epoch {epoch + 1}")
        hist.val_loss.append(val)
        if val < best:
            best, since_best = val, 0
            best_values = [p.value for p in params]  # Adam replaces arrays, so references suffice
            hist.best_epoch = epoch + 1
        else:
            since_best += 1
        if (epoch + 1) % 100 == 0:
            log.info("%s epoch %d train %.3e val %.3e best %.3e", stage, epoch + 1, hist.train_loss[-1], val, best)
        if cfg.patience is not None and since_best >= cfg.patience:
            hist.stopped_early = True
            break
    for p, v in zip(params, best_values):
        p.value = v
    return hist


def evaluate_loss(batch_loss: BatchLoss, idx: np.ndarray, chunk: int) -> float:
    """Sample-weighted mean loss over ``idx`` evaluated without recording."""
    total = 0.0
    for start in range(0, idx.size, chunk):
        sel = idx[start : start + chunk]
        total += float(batch_loss(sel).value) * sel.size
    return total / idx.size

