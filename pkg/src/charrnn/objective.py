"""Sparse categorical cross-entropy and the RMSprop update.

Loss is reported in nats per predicted character: the mean over all batch*L
positions of -log softmax(logits)[target], computed through log-sum-exp so
probabilities are never exponentiated and re-logged.

RMSprop follows the classic running-average form

    V <- rho * V + (1 - rho) * g^2
    w <- w - alpha * g / sqrt(V + eps)

Some write-ups print a variant with the learning rate divided into the
accumulator and no alpha in the step; that form is dimensionally inconsistent
and is not what this module implements.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import LabelError, OptimizerError


@dataclass(frozen=True)
class LossReport:
    mean_loss: float  # nats per character
    count: int        # number of predicted positions


def _check_targets(targets: np.ndarray, vocab: int):
    if targets.size and (targets.min() < 0 or targets.max() >= vocab):
        flat = targets.reshape(-1)
        pos = int(np.argmax((flat < 0) | (flat >= vocab)))
        raise LabelError(
            f"target {int(flat[pos])} at flat position {pos} outside [0, {vocab})"
        )


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def ce_loss(logits: np.ndarray, targets: np.ndarray) -> LossReport:
    """Mean negative log-likelihood of the integer targets.

    logits has classes on the last axis; targets matches the leading axes.
    """
    targets = np.asarray(targets, dtype=np.int64)
    _check_targets(targets, logits.shape[-1])
    logp = _log_softmax(logits)
    picked = np.take_along_axis(logp, targets[..., None], axis=-1)
    return LossReport(mean_loss=float(-picked.mean()), count=int(targets.size))


def ce_grad(logits: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """d mean-loss / d logits = (softmax - one_hot) / N per position."""
    targets = np.asarray(targets, dtype=np.int64)
    _check_targets(targets, logits.shape[-1])
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    grad = e / e.sum(axis=-1, keepdims=True)
    np.put_along_axis(
        grad, targets[..., None],
        np.take_along_axis(grad, targets[..., None], axis=-1) - 1.0, axis=-1,
    )
    grad /= targets.size
    return grad


@dataclass
class RmspropState:
    """Per-parameter squared-gradient accumulators plus hyperparameters."""

    v: dict[str, np.ndarray]
    alpha: float = 1e-3
    rho: float = 0.9
    epsilon: float = 1e-7

    @classmethod
    def for_params(cls, params: dict[str, np.ndarray], alpha: float = 1e-3,
                   rho: float = 0.9, epsilon: float = 1e-7) -> "RmspropState":
        return cls(
            v={name: np.zeros_like(p) for name, p in params.items()},
            alpha=alpha, rho=rho, epsilon=epsilon,
        )


def rmsprop_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
                 state: RmspropState) -> None:
    """One in-place update of every parameter and its accumulator."""
    for name, p in params.items():
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise OptimizerError(f"non-finite gradient for {name}")
        v = state.v[name]
        v *= state.rho
        v += (1.0 - state.rho) * g * g
        p -= state.alpha * g / np.sqrt(v + state.epsilon)
