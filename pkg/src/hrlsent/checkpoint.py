"""Versioned binary checkpoint container.

Layout (all integers little-endian)::

    8 bytes   magic b"HRLSCKPT"
    uint32    format version
    uint64    header length H
    H bytes   UTF-8 JSON header (sorted keys, compact separators)
    ...       raw array blobs, in header order, each C-contiguous little-endian

The header holds the config, vocabulary, aspect keyword lists, stage flags,
epoch and optimizer-step counters, reward history, the RNG bit-generator
state, and an index of ``{name, dtype, shape, offset, nbytes}`` per array
(offsets are relative to the first blob byte).  Nothing time-dependent is
stored, so saving the same state twice gives identical bytes.
"""

from __future__ import annotations

import dataclasses
import json
import struct

import numpy as np

from .config import Config
from .embeddings import Vocab
from .errors import FormatError
from .model import HRLModel
from .trainer import EpochLog, Trainer

MAGIC = b"HRLSCKPT"
VERSION = 1
_PREFIX = struct.Struct("<8sIQ")


def _header(trainer: Trainer) -> tuple[dict, list[np.ndarray]]:
    model = trainer.model
    index, blobs, offset = [], [], 0
    for name in sorted(model.params):
        arr = np.ascontiguousarray(model.params[name])
        arr = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        index.append({"name": name, "dtype": arr.dtype.str, "shape": list(arr.shape),
                      "offset": offset, "nbytes": arr.nbytes})
        blobs.append(arr)
        offset += arr.nbytes
    header = {
        "config": model.config.to_dict(),
        "vocab": model.vocab.itos,
        "aspects": model.aspects,
        "stages": model.stages,
        "counters": model.counters,
        "epochs": trainer.epochs,
        "optimizer_steps": trainer.optimizer_steps,
        "history": [dataclasses.asdict(e) for e in trainer.history],
        "rng": trainer.rng.bit_generator.state,
        "arrays": index,
    }
    return header, blobs


def dumps(trainer: Trainer) -> bytes:
    header, blobs = _header(trainer)
    raw = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return b"".join([_PREFIX.pack(MAGIC, VERSION, len(raw)), raw] + [b.tobytes() for b in blobs])


def save_checkpoint(path, trainer: Trainer) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(trainer))


def loads(data: bytes) -> Trainer:
    if len(data) < _PREFIX.size:
        raise FormatError("checkpoint is truncated")
    magic, version, hlen = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise FormatError("not a checkpoint file (bad magic)")
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    start = _PREFIX.size + hlen
    if len(data) < start:
        raise FormatError("checkpoint header is truncated")
    try:
        header = json.loads(data[_PREFIX.size:start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"corrupt checkpoint header: {exc}") from exc

    config = Config.from_dict(header["config"])
    vocab = Vocab(header["vocab"][1:])
    rng = np.random.default_rng()
    rng.bit_generator.state = header["rng"]
    model = HRLModel(config, vocab, header["aspects"], np.random.default_rng(0))
    for entry in header["arrays"]:
        name = entry["name"]
        lo = start + entry["offset"]
        hi = lo + entry["nbytes"]
        if hi > len(data):
            raise FormatError(f"array {name!r} is truncated")
        arr = np.frombuffer(data[lo:hi], dtype=np.dtype(entry["dtype"])).reshape(entry["shape"])
        if name not in model.params:
            raise FormatError(f"unknown parameter {name!r}")
        if model.params[name].shape != arr.shape:
            raise FormatError(f"parameter {name!r} has shape {arr.shape}, config implies "
                              f"{model.params[name].shape}")
        model.params[name] = arr.astype(model.params[name].dtype)
    model.refresh_aspect_vectors()
    model.stages.update(header["stages"])
    model.counters.update(header["counters"])

    trainer = Trainer(model, rng)
    trainer.epochs.update(header["epochs"])
    trainer.optimizer_steps.update(header["optimizer_steps"])
    trainer.history = [EpochLog(**e) for e in header["history"]]
    return trainer


def load_checkpoint(path) -> Trainer:
    with open(path, "rb") as fh:
        return loads(fh.read())
