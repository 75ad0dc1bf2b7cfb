"""Single-file model bundles.

Layout (all little-endian)::

    b"FLNCYMDL"            8-byte magic
    uint16 version
    uint32 header_len
    header                 UTF-8 JSON: kind, n_features, hyperparameters,
                           standardizer flag, array table (name/dtype/shape)
    array payloads         raw bytes, in array-table order

The JSON is written with sorted keys so identical models give identical files.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import ModelFormatError, PredictError
from .forest import ForestModel, Tree
from .mlp import MlpModel
from .pipeline import FittedPipeline
from .standardize import Standardizer
from .svm import PairMachine, SvmModel

MAGIC = b"FLNCYMDL"
VERSION = 1


def _svm_parts(m: SvmModel):
    params = {
        "C": m.C, "gamma": m.gamma, "tol": m.tol, "seed": m.seed,
        "pairs": [[p.positive, p.negative, int(p.support.shape[0]), p.bias, p.kkt_gap, p.n_iter]
                  for p in m.machines],
    }
    d = m.n_features
    arrays = {
        "support": np.concatenate([p.support for p in m.machines]).reshape(-1, d),
        "coef": np.concatenate([p.coef for p in m.machines]),
    }
    return params, arrays


def _svm_build(params, arrays, classes, d):
    machines, start = [], 0
    for pos, neg, n_sv, bias, gap, n_iter in params["pairs"]:
        sl = slice(start, start + n_sv)
        coef = arrays["coef"][sl]
        machines.append(PairMachine(pos, neg, arrays["support"][sl], coef, bias,
                                    np.abs(coef), gap, n_iter))
        start += n_sv
    return SvmModel(classes, machines, params["C"], params["gamma"], params["tol"],
                    params["seed"], d)


def _rf_parts(m: ForestModel):
    params = {"seed": m.seed, "max_features": m.max_features, "bootstrap": m.bootstrap,
              "n_nodes": [t.n_nodes for t in m.trees]}
    arrays = {name: np.concatenate([getattr(t, name) for t in m.trees])
              for name in ("feature", "threshold", "left", "right", "counts")}
    return params, arrays


def _rf_build(params, arrays, classes, d):
    trees, start = [], 0
    for n in params["n_nodes"]:
        sl = slice(start, start + n)
        trees.append(Tree(*(arrays[k][sl] for k in ("feature", "threshold", "left", "right", "counts"))))
        start += n
    return ForestModel(classes, trees, params["seed"], d, params["max_features"], params["bootstrap"])


def _mlp_parts(m: MlpModel):
    params = {"hidden": list(m.hidden), "seed": m.seed, "initial_loss": m.initial_loss,
              "loss_history": m.loss_history}
    return params, {f"p{i}": p for i, p in enumerate(m.params)}


def _mlp_build(params, arrays, classes, d):
    weights = [arrays[f"p{i}"] for i in range(len(arrays))]
    return MlpModel(classes, weights, tuple(params["hidden"]), d, params["loss_history"],
                    params["initial_loss"], params["seed"])


_CODECS = {"svm": (_svm_parts, _svm_build), "rf": (_rf_parts, _rf_build),
           "mlp": (_mlp_parts, _mlp_build)}


def dumps(pipe: FittedPipeline) -> bytes:
    model = pipe.model
    params, arrays = _CODECS[model.kind][0](model)
    if pipe.standardizer is not None:
        arrays["std_means"] = pipe.standardizer.means
        arrays["std_stds"] = pipe.standardizer.stds
    table, blobs = [], []
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        table.append({"name": name, "dtype": le.dtype.str, "shape": list(arr.shape)})
        blobs.append(le.tobytes())
    header = {
        "kind": model.kind,
        "n_features": model.n_features,
        "classes": [int(c) for c in model.classes],
        "standardized": pipe.standardizer is not None,
        "params": params,
        "meta": pipe.meta,
        "arrays": table,
    }
    hjson = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    return MAGIC + struct.pack("<HI", VERSION, len(hjson)) + hjson + b"".join(blobs)


def loads(data: bytes, expected_dim: Optional[int] = None) -> FittedPipeline:
    if data[:8] != MAGIC:
        raise ModelFormatError("not a model file (bad magic)")
    try:
        version, hlen = struct.unpack_from("<HI", data, 8)
        header = json.loads(data[14:14 + hlen])
    except (struct.error, ValueError) as exc:
        raise ModelFormatError(f"corrupt model header: {exc}") from exc
    if version != VERSION:
        raise ModelFormatError(f"unsupported model format version {version}")
    kind = header.get("kind")
    if kind not in _CODECS:
        raise ModelFormatError(f"unknown model kind {kind!r}")
    d = header["n_features"]
    if expected_dim is not None and expected_dim != d:
        raise PredictError(f"model was trained on {d} features, data has {expected_dim}")

    arrays, pos = {}, 14 + hlen
    for spec in header["arrays"]:
        dt = np.dtype(spec["dtype"])
        count = int(np.prod(spec["shape"], dtype=np.int64))
        end = pos + count * dt.itemsize
        if end > len(data):
            raise ModelFormatError(f"model file truncated in array {spec['name']!r}")
        arrays[spec["name"]] = np.frombuffer(data[pos:end], dtype=dt).reshape(spec["shape"]).copy()
        pos = end
    std = None
    if header["standardized"]:
        std = Standardizer(arrays.pop("std_means"), arrays.pop("std_stds"))
    classes = np.array(header["classes"], dtype=np.int64)
    model = _CODECS[kind][1](header["params"], arrays, classes, d)
    return FittedPipeline(model, std, header.get("meta", {}))


def save_model(path, pipe: FittedPipeline) -> None:
    Path(path).write_bytes(dumps(pipe))


def load_model(path, expected_dim: Optional[int] = None) -> FittedPipeline:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ModelFormatError(f"{path}: {exc.strerror or exc}") from exc
    return loads(data, expected_dim)
