"""JSON checkpoints: versioned header, shape table, row-major values."""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from ..errors import DataError
from .model import ModelConfig, ModelParams
from .training import MinMaxScaler, TrainedModel

FORMAT = "leakcast-checkpoint"
VERSION = 1


def to_dict(model):
    return {
        "format": FORMAT,
        "version": VERSION,
        "config": dataclasses.asdict(model.cfg),
        "scaler": {"lo": model.scaler.lo, "hi": model.scaler.hi},
        "shapes": {name: list(v.shape) for name, v in model.params.items()},
        "values": {name: v.ravel(order="C").tolist() for name, v in model.params.items()},
        "loss_curve": list(model.loss_curve),
    }


def from_dict(doc):
    if doc.get("format") != FORMAT:
        raise DataError("not a leakcast checkpoint")
    if doc.get("version") != VERSION:
        raise DataError(f"checkpoint version {doc.get('version')} is not supported (expected {VERSION})")
    cfg = ModelConfig(**doc["config"])
    arrays = {}
    for name, shape in doc["shapes"].items():
        arrays[name] = np.asarray(doc["values"][name], dtype=float).reshape(shape)
    return TrainedModel(cfg=cfg, params=ModelParams(**arrays),
                        scaler=MinMaxScaler(**doc["scaler"]), loss_curve=doc.get("loss_curve", []))


def save(model, path):
    Path(path).write_text(json.dumps(to_dict(model)))


def load(path):
    path = Path(path)
    if not path.is_file():
        raise DataError(f"checkpoint not found: {path}")
    return from_dict(json.loads(path.read_text()))
