"""Training losses. Each returns ``(scalar loss, gradient w.r.t. the prediction)``."""

import numpy as np

from ..errors import ParameterError


def lbce_loss(llrs, labels):
    """Mean binary cross-entropy with logits for LLRs in the ``ln P(0)/P(1)`` convention.

    Per entry the loss is ``ln(1 + e^-llr)`` for bit 0 and ``ln(1 + e^llr)``
    for bit 1. With ``z = -llr`` (the logit of bit 1) this is the usual
    ``max(z, 0) - z b + ln(1 + e^-|z|)``, which cannot overflow.
    """
    llrs = np.asarray(llrs)
    labels = np.asarray(labels)
    if llrs.shape != labels.shape:
        raise ParameterError(f"LLR shape {llrs.shape} != label shape {labels.shape}")
    z = -llrs  # logit of bit 1
    b = labels.astype(llrs.dtype)
    per = np.maximum(z, 0) - z * b + np.log1p(np.exp(-np.abs(z)))
    loss = per.mean()
    sig = 0.5 * (1.0 + np.tanh(0.5 * z))  # sigmoid(z), overflow-free
    grad_z = (sig - b) / llrs.size
    return float(loss), (-grad_z).astype(llrs.dtype)


def mse_loss(pred, target):
    pred = np.asarray(pred)
    target = np.asarray(target, dtype=pred.dtype)
    if pred.shape != target.shape:
        raise ParameterError(f"prediction shape {pred.shape} != target shape {target.shape}")
    diff = pred - target
    return float((diff * diff).mean()), (2.0 / diff.size) * diff


LOSSES = {"lbce": lbce_loss, "mse": mse_loss}
