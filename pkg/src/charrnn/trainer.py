"""Epoch loop, metrics recording, and history CSV export.

Each epoch reshuffles the sequence pairs with shuffle_seed + epoch, then for
every batch runs forward, loss, backward, global-norm clipping, and one
RMSprop step. Wall time per step is the monotonic clock around that compute
(data preparation excluded), averaged per epoch and reported in milliseconds.
"""

from __future__ import annotations

import csv
import math
import os
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .corpus import CorpusPlan, build_vocab, load_corpus, make_sequences, shuffle_batches
from .exceptions import ConfigError, HistoryFormatError, TrainingError
from .model import Model, ModelConfig, build_model, save_checkpoint
from .numerics import Rng
from .objective import RmspropState, ce_grad, ce_loss, rmsprop_step


@dataclass(frozen=True)
class TrainPlan:
    epochs: int = 75
    lr: float = 1e-3
    clip_norm: float = 5.0
    shuffle_seed: int = 0
    dropout_seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.clip_norm <= 0:
            raise ConfigError(f"clip_norm must be positive, got {self.clip_norm}")


@dataclass(frozen=True)
class HistoryRow:
    epoch: int
    mean_loss: float   # nats per character
    ms_per_step: float


def clip_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients jointly so their Euclidean norm is <= max_norm.

    Returns the pre-clip norm. Mutates the gradient arrays in place.
    """
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


def train_epoch(model: Model, batches, plan: TrainPlan, opt_state: RmspropState,
                dropout_rng: Rng) -> tuple[float, float]:
    """One pass over the batches. Returns (mean loss, mean ms per step)."""
    if not batches:
        raise TrainingError("train_epoch needs at least one batch")
    losses = []
    seconds = []
    params = model.params()
    for k, batch in enumerate(batches):
        t0 = time.perf_counter()
        logits, tape = model.forward(batch.inputs, train=True, dropout_rng=dropout_rng)
        report = ce_loss(logits, batch.targets)
        if not math.isfinite(report.mean_loss):
            raise TrainingError(
                f"non-finite loss {report.mean_loss!r} at batch {k}; aborting epoch"
            )
        grads = model.backward(tape, ce_grad(logits, batch.targets))
        clip_global_norm(grads, plan.clip_norm)
        rmsprop_step(params, grads, opt_state)
        seconds.append(time.perf_counter() - t0)
        losses.append(report.mean_loss)
    return float(np.mean(losses)), 1000.0 * float(np.mean(seconds))


def train(corpus_path, config: ModelConfig, plan: TrainPlan,
          ckpt_path=None, history_path=None,
          progress: Callable[[HistoryRow], None] | None = None
          ) -> tuple[Model, list[HistoryRow]]:
    """Full training run from a corpus file.

    Writes the checkpoint and history CSV when paths are given (both
    atomically, so a failed run never leaves partial files). Returns the
    trained model and one history row per epoch.
    """
    text = load_corpus(corpus_path)
    vocab = build_vocab(text)
    if vocab.size != config.vocab_size:
        raise ConfigError(
            f"corpus has {vocab.size} distinct characters but config.vocab_size "
            f"is {config.vocab_size}"
        )
    pairs = make_sequences(vocab.encode(text),
                           CorpusPlan(config.seq_len, config.batch_size, plan.shuffle_seed))
    model = build_model(config, vocab)
    opt_state = RmspropState.for_params(model.params(), alpha=plan.lr)
    dropout_rng = Rng(plan.dropout_seed)
    history: list[HistoryRow] = []
    for epoch in range(1, plan.epochs + 1):
        cplan = CorpusPlan(config.seq_len, config.batch_size, plan.shuffle_seed + epoch)
        batches = shuffle_batches(pairs, cplan, Rng(cplan.shuffle_seed))
        mean_loss, ms_per_step = train_epoch(model, batches, plan, opt_state, dropout_rng)
        row = HistoryRow(epoch=epoch, mean_loss=mean_loss, ms_per_step=ms_per_step)
        history.append(row)
        if progress is not None:
            progress(row)
    if ckpt_path is not None:
        save_checkpoint(model, ckpt_path)
    if history_path is not None:
        export_history(history, history_path)
    return model, history


def export_history(history: list[HistoryRow], path) -> None:
    """CSV with header epoch,mean_loss,ms_per_step, one row per epoch.

    Floats are written with repr, so parsing the file recovers them exactly.
    The file is written atomically.
    """
    if not history:
        raise TrainingError("refusing to export an empty history")
    last = 0
    for row in history:
        if row.epoch <= last:
            raise TrainingError(f"history epochs not strictly increasing at {row.epoch}")
        last = row.epoch
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write("epoch,mean_loss,ms_per_step\n")
            for row in history:
                f.write(f"{row.epoch},{row.mean_loss!r},{row.ms_per_step!r}\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def parse_history(path) -> list[HistoryRow]:
    """Inverse of export_history; raises HistoryFormatError with a line number."""
    rows = []
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ["epoch", "mean_loss", "ms_per_step"]:
            raise HistoryFormatError(f"{path}: line 1: bad header {header!r}")
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            try:
                rows.append(HistoryRow(int(rec[0]), float(rec[1]), float(rec[2])))
            except (ValueError, IndexError) as exc:
                raise HistoryFormatError(f"{path}: line {lineno}: {exc}") from exc
    if not rows:
        raise HistoryFormatError(f"{path}: no data rows")
    return rows
