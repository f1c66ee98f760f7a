"""Epoch loop: fresh synthetic batch per epoch, Adam + L2, plateau LR decay, early stopping."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericalError, ParameterError
from .loss import LOSSES
from .optim import CONTINUE, DECAY_LR, STOP, Adam, PlateauTracker

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    batch_size: int = 4096
    minibatch_size: int | None = None
    lr_init: float = 0.01
    lr_decay_factor: float = 10.0
    lr_patience: int = 50
    early_stop_patience: int = 150
    l2: float = 1e-4
    esn0_range_db: tuple[float, float] = (0.0, 12.0)
    max_epochs: int = 5000
    seed: int = 0
    loss: str = "lbce"

    def __post_init__(self):
        self.esn0_range_db = tuple(float(v) for v in self.esn0_range_db)
        if self.batch_size < 1 or self.max_epochs < 0:
            raise ParameterError("batch_size must be >= 1 and max_epochs >= 0")
        if self.lr_init < 0 or self.l2 < 0 or self.lr_decay_factor <= 0:
            raise ParameterError("learning rate, decay factor and l2 must be non-negative")
        if not 0 < self.lr_patience < self.early_stop_patience:
            raise ParameterError("need 0 < lr_patience < early_stop_patience")
        if self.loss not in LOSSES:
            raise ParameterError(f"unknown loss {self.loss!r}")
        lo, hi = self.esn0_range_db
        if hi < lo:
            raise ParameterError("esn0 range must be increasing")


@dataclass
class TrainResult:
    model: object
    history: list[float] = field(default_factory=list)
    lr_history: list[float] = field(default_factory=list)
    best_epoch: int = -1
    best_loss: float = math.inf
    stopped_early: bool = False


def train(model, generator, cfg: TrainConfig, progress=None) -> TrainResult:
    """Fit ``model`` on batches drawn from ``generator(batch_size, rng)``.

    ``generator`` returns ``(inputs, targets)``; one call per epoch. The
    returned model is a copy of the parameters from the lowest-loss epoch,
    in inference mode. ``progress`` is an optional ``callback(epoch, loss, lr)``.
    """
    loss_fn = LOSSES[cfg.loss]
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(lr=cfg.lr_init, l2=cfg.l2)
    tracker = PlateauTracker(cfg.lr_patience, cfg.early_stop_patience)
    mb = cfg.minibatch_size or cfg.batch_size
    result = TrainResult(model=model.copy().eval())
    lr = cfg.lr_init
    model.train()
    t0 = time.perf_counter()
    for epoch in range(cfg.max_epochs):
        inputs, targets = generator(cfg.batch_size, rng)
        total = 0.0
        for start in range(0, cfg.batch_size, mb):
            x = inputs[start:start + mb]
            y = targets[start:start + mb]
            model.zero_grad()
            out = model.forward(x, train=True)
            loss, grad = loss_fn(out, y)
            if not math.isfinite(loss):
                raise NumericalError(f"non-finite loss {loss} at epoch {epoch}")
            model.backward(grad)
            opt.lr = lr
            opt.step(model)
            total += loss * len(x)
        epoch_loss = total / cfg.batch_size
        result.history.append(epoch_loss)
        result.lr_history.append(lr)
        if epoch_loss < result.best_loss:
            result.best_loss = epoch_loss
            result.best_epoch = epoch
            result.model = model.copy().eval()
        if progress is not None:
            progress(epoch, epoch_loss, lr)
        if epoch % 50 == 0:
            log.info("epoch %d loss %.5f lr %.2g (%.1fs)", epoch, epoch_loss, lr, time.perf_counter() - t0)
        action = tracker.update(epoch_loss)
        if action == STOP:
            result.stopped_early = True
            break
        if action == DECAY_LR:
            lr /= cfg.lr_decay_factor
    model.eval()
    return result
