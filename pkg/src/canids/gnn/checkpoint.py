"""Self-describing binary model checkpoints.

Layout: 8-byte magic, u32 little-endian format version, u32 little-endian
header length, a UTF-8 JSON header (model kind, hyperparameters, feature
settings, seed and the ordered parameter names/shapes), then the raw
float64 little-endian parameter payload in header order.  Floats are
stored bit-for-bit, so save/load round-trips exactly.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ..errors import CheckpointError
from ..features import FeatureConfig
from .autodiff import Tensor
from .models import MODEL_KINDS, Hyperparams, ModelParams

MAGIC = b"CANIDSCK"
VERSION = 1


def save_checkpoint(params: ModelParams, features: FeatureConfig, path: str | Path) -> None:
    names = list(params.tensors)
    header = {
        "model": params.kind,
        "seed": params.seed,
        "hyperparams": asdict(params.hyper),
        "features": asdict(features),
        "input_mean": [float(v) for v in params.input_mean],
        "input_scale": [float(v) for v in params.input_scale],
        "params": [[name, list(params.tensors[name].shape)] for name in names],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(blob)))
        fh.write(blob)
        for name in names:
            fh.write(params.tensors[name].data.astype("<f8", copy=False).tobytes(order="C"))


def load_checkpoint(path: str | Path) -> tuple[ModelParams, FeatureConfig]:
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a model checkpoint")
    version, header_len = struct.unpack("<II", raw[8:16])
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    if len(raw) < 16 + header_len:
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(raw[16 : 16 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header: {exc}") from exc

    kind = header.get("model")
    if kind not in MODEL_KINDS:
        raise CheckpointError(f"{path}: unknown model kind {kind!r}")
    hyper_dict = dict(header["hyperparams"])
    if hyper_dict.get("class_weights") is not None:
        hyper_dict["class_weights"] = tuple(hyper_dict["class_weights"])
    hyper = Hyperparams(**hyper_dict)
    features = FeatureConfig(**header["features"])

    tensors: dict[str, Tensor] = {}
    offset = 16 + header_len
    for name, shape in header["params"]:
        count = int(np.prod(shape)) if shape else 1
        end = offset + 8 * count
        if end > len(raw):
            raise CheckpointError(f"{path}: truncated payload at parameter {name}")
        data = np.frombuffer(raw[offset:end], dtype="<f8").reshape(shape).copy()
        tensors[name] = Tensor(data, requires_grad=True)
        offset = end
    if offset != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - offset} trailing bytes")
    params = ModelParams(
        kind=kind,
        hyper=hyper,
        seed=int(header["seed"]),
        tensors=tensors,
        input_mean=np.asarray(header["input_mean"], dtype=np.float64),
        input_scale=np.asarray(header["input_scale"], dtype=np.float64),
    )
    return params, features
