"""Training loop with early stopping, evaluation metrics, and the
checkpoint file format.

Checkpoints are versioned binary files: magic ``HCEC``, little-endian u32
version, a length-prefixed JSON metadata block (config, dimensions,
epoch, best dev accuracy), then length-prefixed UTF-8 parameter names
each followed by its (rows, cols) and row-major little-endian float64
payload. Loading reproduces forward outputs bitwise.
"""

from __future__ import annotations

import json
import struct
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import Config
from .data import Sample, iter_batches, make_batch
from .errors import ConfigError, FormatError
from .model import ModelDims, dims_from_samples, forward_sample, init_params
from .optim import AdamState, adam_step
from .rng import stream
from .tensor import Tape, Tensor, add, backward, scale, zero_grads

CHECKPOINT_MAGIC = b"HCEC"
CHECKPOINT_VERSION = 1


@dataclass
class Metrics:
    """Binary classification metrics with the incongruent class (label 1)
    as the positive class."""

    accuracy: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int, tn: int) -> "Metrics":
        total = tp + fp + fn + tn
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        return cls(accuracy=(tp + tn) / total if total else 0.0,
                   precision=precision, recall=recall, f1=f1,
                   tp=tp, fp=fp, fn=fn, tn=tn)

    def to_dict(self) -> dict:
        return {"accuracy": self.accuracy, "precision": self.precision,
                "recall": self.recall, "f1": self.f1,
                "tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


@dataclass
class Checkpoint:
    params: dict[str, Tensor]
    config: Config
    dims: ModelDims
    epoch: int
    best_dev_accuracy: float

    def save(self, path) -> None:
        save_checkpoint(self, path)

    @classmethod
    def load(cls, path) -> "Checkpoint":
        return load_checkpoint(path)


def predict(params: dict[str, Tensor], sample: Sample, config: Config,
            dims: ModelDims) -> int:
    """Deterministic inference (dropout off): argmax class."""
    result = forward_sample(params, sample, config, dims, training=False)
    return int(np.argmax(result.probs.data[0]))


def evaluate(params: dict[str, Tensor], samples: list[Sample], config: Config,
             dims: ModelDims) -> Metrics:
    if not samples:
        raise ConfigError("evaluate needs a non-empty dataset")
    tp = fp = fn = tn = 0
    for sample in samples:
        pred = predict(params, sample, config, dims)
        if sample.label == 1:
            tp, fn = (tp + 1, fn) if pred == 1 else (tp, fn + 1)
        else:
            fp, tn = (fp + 1, tn) if pred == 1 else (fp, tn + 1)
    return Metrics.from_counts(tp, fp, fn, tn)


def evaluate_checkpoint(checkpoint: Checkpoint, samples: list[Sample]) -> Metrics:
    return evaluate(checkpoint.params, samples, checkpoint.config, checkpoint.dims)


def _snapshot(params: dict[str, Tensor]) -> dict[str, Tensor]:
    return {name: Tensor(p.data.copy(), requires_grad=True) for name, p in params.items()}


def train(config: Config, train_samples: list[Sample], dev_samples: list[Sample],
          log_stream=None) -> Checkpoint:
    """Shuffled mini-batch training with dev-accuracy early stopping.

    Keeps the best dev-accuracy parameters (ties go to the earlier epoch)
    and stops once ``early_stop_patience`` consecutive epochs bring no
    improvement, or at ``max_epochs``. One JSON object per epoch goes to
    ``log_stream`` (default: stdout); the log is deterministic for a fixed
    (config, seed, data) triple.
    """
    config.validate()
    if not train_samples:
        raise ConfigError("training set is empty")
    if not dev_samples:
        raise ConfigError("dev set is empty")
    if log_stream is None:
        log_stream = sys.stdout

    dims = dims_from_samples(train_samples, config)
    params = init_params(config, dims)
    adam = AdamState.for_params(params, lr=config.lr, weight_decay=config.weight_decay)

    best_params = _snapshot(params)
    best_accuracy = -1.0
    best_epoch = 0
    stall = 0
    global_step = 0

    for epoch in range(1, config.max_epochs + 1):
        shuffle_rng = stream(config.seed, "shuffle", epoch)
        total_loss = 0.0
        seen = 0
        for indices in iter_batches(len(train_samples), config.batch_size, shuffle_rng):
            batch = make_batch(train_samples, indices)
            global_step += 1
            zero_grads(params)
            with Tape() as tape:
                batch_loss = None
                for sample in batch:
                    loss = forward_sample(params, sample, config, dims,
                                          training=True, step=global_step).loss
                    batch_loss = loss if batch_loss is None else add(batch_loss, loss)
                batch_loss = scale(batch_loss, 1.0 / len(batch))
            backward(tape, batch_loss)
            adam_step(params, adam)
            total_loss += batch_loss.item() * len(batch)
            seen += len(batch)
        train_loss = total_loss / seen

        dev_metrics = evaluate(params, dev_samples, config, dims)
        improved = dev_metrics.accuracy > best_accuracy
        if improved:
            best_accuracy = dev_metrics.accuracy
            best_epoch = epoch
            best_params = _snapshot(params)
            stall = 0
        else:
            stall += 1

        log_stream.write(json.dumps({
            "epoch": epoch,
            "train_loss": train_loss,
            "dev_accuracy": dev_metrics.accuracy,
            "dev_precision": dev_metrics.precision,
            "dev_recall": dev_metrics.recall,
            "dev_f1": dev_metrics.f1,
            "improved": improved,
            "best_epoch": best_epoch,
        }, sort_keys=True) + "\n")

        if stall >= config.early_stop_patience:
            break

    return Checkpoint(params=best_params, config=config, dims=dims,
                      epoch=best_epoch, best_dev_accuracy=best_accuracy)


# ---------------------------------------------------------------------------
# checkpoint I/O


def save_checkpoint(checkpoint: Checkpoint, path) -> None:
    meta = json.dumps({
        "config": checkpoint.config.to_dict(),
        "dims": checkpoint.dims.to_dict(),
        "epoch": checkpoint.epoch,
        "best_dev_accuracy": checkpoint.best_dev_accuracy,
    }, sort_keys=True).encode()
    chunks = [CHECKPOINT_MAGIC, struct.pack("<I", CHECKPOINT_VERSION),
              struct.pack("<I", len(meta)), meta,
              struct.pack("<I", len(checkpoint.params))]
    for name, p in checkpoint.params.items():
        key = name.encode()
        rows, cols = p.data.shape
        chunks.append(struct.pack("<H", len(key)))
        chunks.append(key)
        chunks.append(struct.pack("<II", rows, cols))
        chunks.append(p.data.astype("<f8").tobytes(order="C"))
    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path) -> Checkpoint:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read checkpoint {path}: {exc}") from exc
    if raw[:4] != CHECKPOINT_MAGIC:
        raise FormatError(f"bad checkpoint magic: {raw[:4]!r}")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"unsupported checkpoint version: {version}")
    (meta_len,) = struct.unpack_from("<I", raw, 8)
    pos = 12
    meta = json.loads(raw[pos:pos + meta_len].decode())
    pos += meta_len
    (param_count,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    params: dict[str, Tensor] = {}
    for _ in range(param_count):
        (key_len,) = struct.unpack_from("<H", raw, pos)
        pos += 2
        name = raw[pos:pos + key_len].decode()
        pos += key_len
        rows, cols = struct.unpack_from("<II", raw, pos)
        pos += 8
        nbytes = rows * cols * 8
        if pos + nbytes > len(raw):
            raise FormatError(
                f"checkpoint truncated: parameter {name!r} needs bytes "
                f"[{pos}, {pos + nbytes}) but file ends at {len(raw)}"
            )
        arr = np.frombuffer(raw, dtype="<f8", count=rows * cols, offset=pos).reshape(rows, cols)
        pos += nbytes
        params[name] = Tensor(arr.copy(), requires_grad=True)
    return Checkpoint(
        params=params,
        config=Config.from_dict(meta["config"]),
        dims=ModelDims.from_dict(meta["dims"]),
        epoch=int(meta["epoch"]),
        best_dev_accuracy=float(meta["best_dev_accuracy"]),
    )
