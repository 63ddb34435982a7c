"""Sequence losses. Each returns the scalar loss and its gradient w.r.t. the predictions."""

import numpy as np

from .errors import DimensionError


def _mask(mask, shape):
    if mask is None:
        return np.ones(shape)
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != shape:
        raise DimensionError(f"mask shape {mask.shape} != {shape}")
    return mask


def log_softmax(logits):
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def cross_entropy_grad(logits, targets, mask=None):
    """Mean cross entropy (nats) over masked positions, and d loss / d logits.

    ``logits`` is (..., K); ``targets`` holds integer class ids with the
    shape of ``logits[..., 0]``.
    """
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets)
    if targets.shape != logits.shape[:-1]:
        raise DimensionError(f"targets {targets.shape} do not match logits {logits.shape}")
    m = _mask(mask, targets.shape)
    count = m.sum()
    if count == 0:
        return 0.0, np.zeros_like(logits)
    logp = log_softmax(logits)
    picked = np.take_along_axis(logp, targets[..., None].astype(np.intp), axis=-1)[..., 0]
    loss = -np.sum(picked * m) / count
    grad = np.exp(logp)
    np.put_along_axis(grad, targets[..., None].astype(np.intp),
                      np.take_along_axis(grad, targets[..., None].astype(np.intp), axis=-1) - 1.0, axis=-1)
    grad *= (m / count)[..., None]
    return float(loss), grad


def cross_entropy_sequence(logits, targets, mask=None):
    return cross_entropy_grad(logits, targets, mask)[0]


def mse_grad(pred, target, mask=None):
    """Squared error averaged over features and masked positions."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DimensionError(f"prediction {pred.shape} vs target {target.shape}")
    m = _mask(mask, pred.shape[:-1])
    denom = m.sum() * pred.shape[-1]
    if denom == 0:
        return 0.0, np.zeros_like(pred)
    diff = (pred - target) * m[..., None]
    return float(np.sum(diff * diff) / denom), 2.0 * diff / denom


def mse_sequence(pred, target, mask=None):
    return mse_grad(pred, target, mask)[0]


LOSSES = {"ce": cross_entropy_grad, "mse": mse_grad}
