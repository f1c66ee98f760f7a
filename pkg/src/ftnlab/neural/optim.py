"""Adam with L2 weight penalty, and plateau-driven learning-rate decay / early stopping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class Adam:
    """Bias-corrected Adam. ``l2`` adds ``l2 * w`` to the gradient of every weight tensor
    (biases and normalization parameters are not penalized)."""

    def __init__(self, lr=0.01, l2=0.0, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.l2 = lr, l2
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, model):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, layer, key in model.param_refs():
            w = layer.params[key]
            g = layer.grads[key]
            if self.l2 and key == "weight":
                g = g + self.l2 * w
            m = self.m.get(name)
            if m is None:
                m = self.m[name] = np.zeros_like(w)
                self.v[name] = np.zeros_like(w)
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            update = (self.lr / c1) * m / (np.sqrt(v / c2) + self.eps)
            layer.params[key] = (w - update).astype(w.dtype)


def adam_step(model, optimizer: Adam, lr: float | None = None, l2: float | None = None):
    """Apply one optimizer step with the gradients currently stored in ``model``."""
    if lr is not None:
        optimizer.lr = lr
    if l2 is not None:
        optimizer.l2 = l2
    optimizer.step(model)


CONTINUE, DECAY_LR, STOP = "continue", "decay_lr", "stop"


@dataclass
class PlateauTracker:
    lr_patience: int = 50
    stop_patience: int = 150
    min_rel_improvement: float = 1e-4
    best: float = float("inf")
    since_best: int = 0
    since_decay: int = 0

    def update(self, loss: float) -> str:
        if loss < self.best * (1.0 - self.min_rel_improvement) or self.best == float("inf"):
            self.best = loss
            self.since_best = self.since_decay = 0
            return CONTINUE
        self.since_best += 1
        self.since_decay += 1
        if self.since_best >= self.stop_patience:
            return STOP
        if self.since_decay >= self.lr_patience:
            self.since_decay = 0
            return DECAY_LR
        return CONTINUE


def lr_schedule_and_stop(history, cfg) -> str:
    """Action after the last epoch of ``history`` (replays the whole history)."""
    tracker = PlateauTracker(cfg.lr_patience, cfg.early_stop_patience)
    action = CONTINUE
    for loss in history:
        action = tracker.update(float(loss))
    return action
