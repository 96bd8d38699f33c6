"""Mini-batch Adam training and RMSE evaluation for :mod:`tsadv.models`."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, asdict
from typing import Callable

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .models import ForecastModel
from .optim import AdamState, adam_step, clip_gradients
from .rng import stream

log = logging.getLogger(__name__)


class TrainingDiverged(FloatingPointError):
    def __init__(self, epoch: int, batch: int, detail: str = "non-finite loss"):
        self.epoch = epoch
        self.batch = batch
        super().__init__(f"{detail} at epoch {epoch}, batch {batch}")


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    lr: float = 1e-3
    seed: int = 0
    clip: float | None = None
    patience: int | None = 10
    restore_best: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.clip is not None and self.clip <= 0:
            raise ValueError("clip threshold must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class History:
    initial_train_rmse: float = float("nan")
    train_rmse: list[float] = field(default_factory=list)
    val_rmse: list[float] = field(default_factory=list)
    batch_loss: list[float] = field(default_factory=list)
    best_epoch: int = -1
    skipped_batches: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def batch_loss(model: ForecastModel, X, y, train_mode: bool = False,
               rng: np.random.Generator | None = None) -> Tensor:
    """Mean squared error of the model over one batch."""
    pred = model.forward(ad.as_tensor(X), train_mode, rng)
    return ad.mse(pred, ad.as_tensor(np.asarray(y, dtype=np.float64).reshape(pred.shape)))


def loss_and_grads(model: ForecastModel, X, y, rng: np.random.Generator | None,
                   train_mode: bool = True) -> tuple[float, list[np.ndarray]]:
    params = model.parameters()
    with ad.Tape() as tape:
        loss = batch_loss(model, X, y, train_mode, rng)
    grads = ad.backward(tape, loss)
    return float(loss.data), [grads[p] for p in params]


def rmse(pred: np.ndarray, target: np.ndarray) -> float:
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    target = np.asarray(target, dtype=np.float64).reshape(-1)
    if pred.size == 0:
        raise ValueError("cannot compute RMSE of an empty set")
    if pred.shape != target.shape:
        raise ad.ShapeError("rmse", pred.shape, target.shape)
    return float(np.sqrt(np.mean((pred - target) ** 2)))


def evaluate(model: ForecastModel, dataset) -> float:
    """RMSE over every predicted scalar of ``dataset`` (all L outputs for sequences)."""
    if len(dataset) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    return rmse(model.predict(dataset.inputs), dataset.targets)


# (model, X, y, rng_factory) -> (loss, grads). rng_factory(label="dropout") returns the
# batch's stream for that label; calling it again replays the same draws.
GradientFn = Callable[[ForecastModel, np.ndarray, np.ndarray, Callable[[], np.random.Generator]],
                      tuple[float, list[np.ndarray] | None]]


def standard_gradients(model, X, y, rng_factory):
    return loss_and_grads(model, X, y, rng_factory())


def train(model: ForecastModel, dataset, val, cfg: TrainConfig,
          gradient_fn: GradientFn = standard_gradients,
          max_skip_fraction: float | None = None) -> tuple[ForecastModel, History]:
    """Fit ``model`` in place by minimizing batch MSE with Adam.

    ``gradient_fn`` lets adversarial training substitute its own gradient
    computation; returning ``None`` grads skips the batch. Every stochastic
    draw is keyed on (seed, epoch, batch), so runs replay bit for bit.
    """
    n = len(dataset)
    if n == 0:
        raise ValueError("training set is empty")
    params = model.parameters()
    state = AdamState.for_params([p.data for p in params], lr=cfg.lr)
    hist = History(initial_train_rmse=evaluate(model, dataset))
    best = (np.inf, model.get_arrays(), -1)
    since_best = 0
    total_batches = 0
    X_all, y_all = dataset.inputs, dataset.targets

    for epoch in range(cfg.epochs):
        order = stream(cfg.seed, "shuffle", epoch).permutation(n)
        epoch_loss = 0.0
        for b, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            total_batches += 1

            def rng_factory(label="dropout", epoch=epoch, b=b):
                return stream(cfg.seed, label, epoch, b)

            loss, grads = gradient_fn(model, X_all[idx], y_all[idx], rng_factory)
            if grads is None:
                hist.skipped_batches += 1
                continue
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
                raise TrainingDiverged(epoch, b)
            if cfg.clip is not None:
                grads = clip_gradients(grads, cfg.clip)
            new, state = adam_step([p.data for p in params], grads, state)
            for p, a in zip(params, new):
                p.data = a
            epoch_loss += loss * len(idx)

        if max_skip_fraction is not None and hist.skipped_batches > max_skip_fraction * total_batches:
            raise TrainingDiverged(epoch, -1, f"{hist.skipped_batches} of {total_batches} batches skipped")
        hist.batch_loss.append(epoch_loss / n)
        tr = evaluate(model, dataset)
        if not np.isfinite(tr):
            raise TrainingDiverged(epoch, -1, "non-finite train RMSE")
        hist.train_rmse.append(tr)
        monitor = tr
        if val is not None and len(val):
            monitor = evaluate(model, val)
            hist.val_rmse.append(monitor)
        if monitor < best[0]:
            best = (monitor, model.get_arrays(), epoch)
            since_best = 0
        else:
            since_best += 1
            if cfg.patience is not None and since_best >= cfg.patience:
                log.info("early stop at epoch %d (best %d)", epoch, best[2])
                break

    hist.best_epoch = best[2]
    if cfg.restore_best and best[2] >= 0:
        model.set_arrays(best[1])
    return model, hist
