"""Two-phase optimization and checkpointing.

Phase one trains one plain autoencoder per view, independently, full batch,
with early stopping on the best loss seen. Phase two trains the full model
on the joint objective; when it starts from pretrained weights the encoder
stacks are frozen and only decoders, attention parameters, shortcut
projections and the self-expression matrix move. Training is always full
batch: the self-expression matrix couples all samples, so there is no
meaningful mini-batch.

Checkpoint file layout (all integers little-endian):

    8 bytes   magic ``AMVDSN01``
    8 bytes   unsigned header length
    header    UTF-8 JSON: tensor names/shapes/byte offsets, config snapshot,
              epoch, loss-term history
    blob      contiguous little-endian float64 tensor data in header order

Run logs are append-only CSV lines ``epoch,total,selfexpr,recon,reg_C,reg_W``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import model as model_mod
from .errors import CheckpointError, ConfigError, NumericError
from .model import ModelConfig, ModelParams
from .optim import AdamState, adam_step, sgd_step

__all__ = [
    "TrainConfig",
    "Checkpoint",
    "PretrainResult",
    "pretrain",
    "train",
    "save_checkpoint",
    "load_checkpoint",
]

MAGIC = b"AMVDSN01"

LOG_FIELDS = ("total", "selfexpr", "recon", "reg_C", "reg_W")


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    max_epochs: int = 200
    pretrain_patience: int = 200
    pretrain_max_epochs: int = 2000
    optimizer: str = "adam"
    freeze_encoders: bool = True
    log_every: int = 1

    def validate(self):
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.max_epochs < 1 or self.pretrain_max_epochs < 1:
            raise ConfigError("epoch budgets must be >= 1")
        if self.pretrain_patience < 1:
            raise ConfigError("pretrain_patience must be >= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")
        if self.log_every < 1:
            raise ConfigError("log_every must be >= 1")
        return self

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d).validate()


@dataclass
class Checkpoint:
    """Config snapshot plus named tensors, epoch counter and loss history."""

    config: dict
    tensors: dict
    epoch: int
    history: list = field(default_factory=list)

    def model_config(self):
        return ModelConfig.from_dict(self.config["model"])

    def model_params(self):
        return ModelParams(self.tensors)


@dataclass
class PretrainResult:
    """Best-loss per-view autoencoder weights plus per-view loss histories."""

    weights: dict
    histories: list

    def checkpoint(self, model_config, train_config):
        epochs = max(len(h) for h in self.histories)
        cfg = {
            "kind": "pretrain",
            "model": model_config.to_dict(),
            "train": train_config.to_dict(),
        }
        history = [h[-1] for h in self.histories]
        return Checkpoint(config=cfg, tensors=dict(self.weights), epoch=epochs, history=history)


class _RunLog:
    def __init__(self, path, log_every):
        self.fh = None if path is None else open(path, "w", encoding="utf-8", newline="\n")
        self.log_every = log_every

    def write(self, epoch, terms, last=False):
        if self.fh is None:
            return
        if epoch % self.log_every == 0 or last:
            values = ",".join(repr(float(terms[k])) for k in LOG_FIELDS)
            self.fh.write(f"{epoch},{values}\n")

    def close(self):
        if self.fh is not None:
            self.fh.close()


def _check_finite(terms, where):
    for key in LOG_FIELDS:
        if not np.isfinite(terms[key]):
            raise NumericError(f"non-finite '{key}' loss term {where}")


def _make_optimizer(train_config):
    if train_config.optimizer == "adam":
        state = AdamState(lr=train_config.learning_rate)

        def step(p, g):
            adam_step(p, g, state)

    else:

        def step(p, g):
            sgd_step(p, g, train_config.learning_rate)

    return step


def pretrain(dataset, model_config, train_config):
    """Train one plain autoencoder per view; returns best-loss weights.

    Views are optimized independently and sequentially. A view stops early
    once its best loss has not improved for ``pretrain_patience`` epochs, and
    in any case at ``pretrain_max_epochs``.
    """
    model_config.validate()
    train_config.validate()
    dataset.validate()
    if dataset.view_dims != list(model_config.view_dims):
        raise ConfigError(
            f"dataset dims {dataset.view_dims} do not match config {list(model_config.view_dims)}"
        )
    weights = {}
    histories = []
    for v in range(model_config.n_views):
        tensors = model_mod.init_pretrain_params(model_config, v)
        step = _make_optimizer(train_config)
        best_loss = np.inf
        best = {k: w.copy() for k, w in tensors.items()}
        stale = 0
        history = []
        for epoch in range(1, train_config.pretrain_max_epochs + 1):
            terms, grads = model_mod.pretrain_loss_and_gradients(tensors, model_config, v, dataset)
            if not np.isfinite(terms["total"]):
                raise NumericError(f"non-finite pretrain loss for view {v} at epoch {epoch}")
            history.append({"epoch": epoch, **terms})
            if terms["total"] < best_loss:
                best_loss = terms["total"]
                best = {k: w.copy() for k, w in tensors.items()}
                stale = 0
            else:
                stale += 1
                if stale >= train_config.pretrain_patience:
                    break
            step(tensors, grads)
        weights.update(best)
        histories.append(history)
    return PretrainResult(weights=weights, histories=histories)


def train(dataset, model_config, train_config, init=None, trainable_names=None, log_path=None):
    """Full-batch optimization of the joint objective.

    ``init`` is either None (train from scratch) or a dict of pretrained
    encoder/decoder tensors (the fine-tuned mode); in the latter case, when
    ``freeze_encoders`` is set, encoder blocks receive no updates. Runs for
    exactly ``max_epochs`` epochs (no early stopping) and returns the final
    checkpoint with the per-epoch loss-term history.
    """
    model_config.validate()
    train_config.validate()
    dataset.validate()
    if dataset.view_dims != list(model_config.view_dims):
        raise ConfigError(
            f"dataset dims {dataset.view_dims} do not match config {list(model_config.view_dims)}"
        )
    params = model_mod.init_params(model_config, dataset.n_samples)
    frozen = set()
    if init is not None:
        expected = set(model_mod.encoder_weight_names(model_config))
        expected |= set(model_mod.decoder_weight_names(model_config))
        for name, value in init.items():
            if name not in expected:
                raise ConfigError(f"unexpected pretrained tensor '{name}'")
            if params[name].shape != value.shape:
                raise ConfigError(
                    f"pretrained tensor '{name}' has shape {value.shape}, "
                    f"config expects {params[name].shape}"
                )
            params[name] = value.copy()
        if train_config.freeze_encoders:
            frozen = set(model_mod.encoder_weight_names(model_config))
    trainable = set(params.names()) - frozen
    if trainable_names is not None:
        trainable &= set(trainable_names)
    step = _make_optimizer(train_config)
    log = _RunLog(log_path, train_config.log_every)
    history = []
    try:
        epoch = 0
        for epoch in range(1, train_config.max_epochs + 1):
            terms, grads = model_mod.loss_and_gradients(params, model_config, dataset, trainable)
            _check_finite(terms, f"at epoch {epoch}")
            history.append({"epoch": epoch, **terms})
            log.write(epoch, terms, last=epoch == train_config.max_epochs)
            subset = {name: params[name] for name in trainable}
            step(subset, {name: grads[name] for name in trainable})
            for name, value in subset.items():
                params[name] = value
    finally:
        log.close()
    cfg = {
        "kind": "model",
        "model": model_config.to_dict(),
        "train": train_config.to_dict(),
        "n_samples": dataset.n_samples,
    }
    return Checkpoint(config=cfg, tensors=dict(params.tensors), epoch=epoch, history=history)


# ---------------------------------------------------------------------------
# checkpoint serialization


def save_checkpoint(ckpt, path):
    """Write a checkpoint; tensor bytes are exact, so reloading reproduces
    forward passes bit for bit."""
    names = list(ckpt.tensors)
    entries = []
    offset = 0
    for name in names:
        arr = np.ascontiguousarray(ckpt.tensors[name], dtype=np.float64)
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.nbytes
    header = json.dumps(
        {
            "config": ckpt.config,
            "epoch": ckpt.epoch,
            "history": ckpt.history,
            "tensors": entries,
        },
        sort_keys=True,
    ).encode("utf-8")
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for name in names:
            fh.write(np.ascontiguousarray(ckpt.tensors[name], dtype="<f8").tobytes())
    return path


def load_checkpoint(path):
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < len(MAGIC) + 8:
        raise CheckpointError(f"truncated checkpoint: {path} has only {len(raw)} bytes")
    if raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError(
            f"version mismatch: {path} starts with {raw[:len(MAGIC)]!r}, expected {MAGIC!r}"
        )
    (header_len,) = struct.unpack("<Q", raw[len(MAGIC) : len(MAGIC) + 8])
    body = raw[len(MAGIC) + 8 :]
    if len(body) < header_len:
        raise CheckpointError(f"truncated checkpoint: header of {path} is incomplete")
    try:
        header = json.loads(body[:header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable checkpoint header in {path}: {exc}") from None
    if (
        not isinstance(header, dict)
        or not isinstance(header.get("tensors"), list)
        or "config" not in header
        or "epoch" not in header
    ):
        raise CheckpointError(f"malformed checkpoint header in {path}")
    for entry in header["tensors"]:
        if (
            not isinstance(entry, dict)
            or not isinstance(entry.get("name"), str)
            or not isinstance(entry.get("offset"), int)
            or not isinstance(entry.get("shape"), list)
            or not all(isinstance(d, int) and d >= 0 for d in entry["shape"])
        ):
            raise CheckpointError(f"malformed tensor entry in checkpoint header of {path}")
    blob = body[header_len:]
    expected = 0
    for entry in header["tensors"]:
        if entry["offset"] != expected:
            raise CheckpointError(
                f"shape inconsistency in {path}: tensor '{entry['name']}' declares "
                f"offset {entry['offset']}, expected {expected}"
            )
        expected += int(np.prod(entry["shape"], dtype=np.int64)) * 8
    if len(blob) != expected:
        kind = "truncated checkpoint" if len(blob) < expected else "shape inconsistency"
        raise CheckpointError(
            f"{kind}: {path} carries {len(blob)} tensor bytes, header declares {expected}"
        )
    tensors = {}
    for entry in header["tensors"]:
        size = int(np.prod(entry["shape"], dtype=np.int64))
        start = entry["offset"]
        flat = np.frombuffer(blob, dtype="<f8", count=size, offset=start)
        tensors[entry["name"]] = flat.astype(np.float64).reshape(entry["shape"])
    return Checkpoint(
        config=header["config"],
        tensors=tensors,
        epoch=header["epoch"],
        history=header.get("history", []),
    )
