"""Finite-difference verification of every layer's backward pass."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layers import BatchNorm, Conv1D, Dense, LeakyReLU, Residual
from .loss import lbce_loss


@dataclass
class CheckResult:
    name: str
    max_rel_error: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.threshold


def rel_error(analytic, numeric, floor=1e-4):
    """Largest elementwise ``|a - n| / max(|a|, |n|, floor * scale)``.

    ``scale`` is the tensor's largest magnitude (at least 1); the floor stops
    entries whose true gradient is zero from dividing rounding noise by zero.
    """
    a, n = np.asarray(analytic), np.asarray(numeric)
    scale = max(1.0, float(np.max(np.abs(a), initial=0.0)), float(np.max(np.abs(n), initial=0.0)))
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor * scale)
    return float(np.max(np.abs(a - n) / denom))


def numeric_grad(f, x, step=1e-5, order=2):
    """Central differences of scalar ``f`` w.r.t. array ``x`` (perturbed in place).

    ``order=4`` uses the five-point stencil.
    """
    grad = np.zeros_like(x)
    flat, gflat = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        if order == 2:
            flat[i] = orig + step; fp = f()
            flat[i] = orig - step; fm = f()
            gflat[i] = (fp - fm) / (2 * step)
        else:
            vals = []
            for k in (2, 1, -1, -2):
                flat[i] = orig + k * step
                vals.append(f())
            gflat[i] = (-vals[0] + 8 * vals[1] - 8 * vals[2] + vals[3]) / (12 * step)
        flat[i] = orig
    return grad


def check_layer(name, layer, x, train=True, step=1e-5, order=2, threshold=1e-5, seed=0):
    """Compare analytic input/parameter gradients of ``sum(r * layer(x))`` with finite differences."""
    out = layer.forward(x, train)
    # projection weights must not be correlated with the input
    r = np.random.default_rng(seed + 7919).standard_normal(out.shape)

    def f():
        return float(np.sum(r * layer.forward(x, train)))

    layer.zero_grad()
    layer.forward(x, train)
    gx = layer.backward(r)
    analytic = {"input": gx}
    for pname, owner, key in layer.named_params():
        analytic[pname] = owner.grads[key].copy()

    worst = rel_error(gx, numeric_grad(f, x, step, order))
    for pname, owner, key in layer.named_params():
        num = numeric_grad(f, owner.params[key], step, order)
        worst = max(worst, rel_error(analytic[pname], num))
    return CheckResult(name, worst, threshold)


def check_lbce(step=1e-5, order=2, threshold=1e-5, seed=0):
    rng = np.random.default_rng(seed)
    llr = rng.normal(0, 3, size=(4, 6, 2))
    bits = rng.integers(0, 2, size=llr.shape)
    _, grad = lbce_loss(llr, bits)
    num = numeric_grad(lambda: lbce_loss(llr, bits)[0], llr, step, order)
    return CheckResult("lbce", rel_error(grad, num), threshold)


def default_suite(precision="standard", factories=None, seed=0):
    """Run the check for every layer kind; returns a list of :class:`CheckResult`.

    ``precision="high"`` switches to the five-point stencil and a 1e-7
    threshold. ``factories`` maps a layer name to a zero-argument builder and
    overrides the defaults (used to inject deliberately broken layers).
    """
    order, threshold, step = (4, 1e-7, 1e-3) if precision == "high" else (2, 1e-5, 1e-5)
    rng = np.random.default_rng(seed)
    f64 = np.float64
    x = rng.standard_normal((4, 8, 2))
    x_far = x + np.sign(x) * 0.1  # keep LReLU inputs away from the kink

    builders = {
        "conv1d": lambda: Conv1D(2, 5, 3, rng=np.random.default_rng(seed + 1), dtype=f64),
        "batchnorm": lambda: _bn(seed),
        "lrelu": lambda: LeakyReLU(0.1),
        "dense": lambda: Dense(2, 3, rng=np.random.default_rng(seed + 2), dtype=f64),
        "residual": lambda: Residual([Conv1D(2, 2, 3, rng=np.random.default_rng(seed + 3), dtype=f64),
                                      _bn(seed + 4, 2)]),
    }
    builders.update(factories or {})
    inputs = {"lrelu": x_far}
    results = [check_layer(name, build(), inputs.get(name, x).copy(), train=True,
                           step=step, order=order, threshold=threshold, seed=seed)
               for name, build in builders.items()]
    results.append(check_lbce(step, order, threshold, seed))
    return results


def _bn(seed, channels=2):
    layer = BatchNorm(channels, dtype=np.float64)
    rng = np.random.default_rng(seed + 10)
    layer.params["gamma"] = rng.uniform(0.5, 1.5, channels)
    layer.params["beta"] = rng.normal(size=channels)
    layer.zero_grad()
    return layer
