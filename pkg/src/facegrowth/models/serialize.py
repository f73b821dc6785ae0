"""Model dump format.

A dump is a numpy ``.npz`` archive. The entry ``__header__`` holds UTF-8 JSON
with ``format``, ``version``, the model name, seed, width, metadata and the
estimator's scalar parameters; every other entry is a parameter array
(``scaler.mean``, ``scaler.scale`` and estimator-specific names).
"""
from __future__ import annotations

import io
import json
from pathlib import Path

import numpy as np

from . import ESTIMATORS, ModelError, ModelSpec, TrainedModel
from .preprocessing import Standardizer

FORMAT = "facegrowth-model"
VERSION = 1


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def dumps(model: TrainedModel) -> bytes:
    params, arrays = model.estimator.state()
    header = {"format": FORMAT, "version": VERSION, "model": model.spec.name, "seed": model.seed,
              "width": model.width, "metadata": _jsonable(model.metadata), "params": _jsonable(params)}
    payload = {"__header__": np.frombuffer(json.dumps(header, sort_keys=True).encode(), dtype=np.uint8),
               "scaler.mean": model.scaler.mean, "scaler.scale": model.scaler.scale}
    for k, v in arrays.items():
        payload[f"est.{k}"] = np.asarray(v)
    buf = io.BytesIO()
    np.savez(buf, **payload)
    return buf.getvalue()


def loads(data: bytes) -> TrainedModel:
    with np.load(io.BytesIO(data), allow_pickle=False) as z:
        if "__header__" not in z.files:
            raise ModelError("not a model dump: missing header")
        header = json.loads(bytes(z["__header__"]).decode())
        if header.get("format") != FORMAT:
            raise ModelError(f"unexpected format {header.get('format')!r}")
        if header.get("version") != VERSION:
            raise ModelError(f"unsupported model dump version {header.get('version')}")
        arrays = {k[4:]: z[k] for k in z.files if k.startswith("est.")}
        scaler = Standardizer(z["scaler.mean"], z["scaler.scale"])
    spec = ModelSpec.parse(header["model"])
    est = ESTIMATORS[spec.family].from_state(header["params"], arrays)
    return TrainedModel(spec, est, scaler, int(header["width"]), int(header["seed"]), header["metadata"])


def dump(model: TrainedModel, path) -> None:
    Path(path).write_bytes(dumps(model))


def load(path) -> TrainedModel:
    return loads(Path(path).read_bytes())
