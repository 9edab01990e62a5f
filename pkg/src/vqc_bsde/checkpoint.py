"""Checkpoint container shared by the MLP and the VQC.

A checkpoint is a NumPy ``.npz`` archive holding

    meta           0-d unicode array: JSON with format version, model metadata
                   (kind, dim, trainable names, architecture, seeds) and the
                   caller's extra fields
    param/<name>   every model tensor, float64, with its shape
    head/offset, head/scale, head/param   the y0 parametrization (optional)
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .approximators import MLP, Approximator, ZeroControl
from .quantum import VqcModel
from .solver import TrainableHead

FORMAT_VERSION = 1


def save_checkpoint(path, approx: Approximator, head: TrainableHead | None = None,
                    extra: dict | None = None) -> Path:
    path = Path(path)
    meta = {"format_version": FORMAT_VERSION, "model": approx.metadata(), "extra": extra or {}}
    arrays = {f"param/{name}": np.asarray(value, dtype=float)
              for name, value in approx.params.items()}
    if head is not None:
        arrays["head/offset"] = np.array(head.offset)
        arrays["head/scale"] = np.array(head.scale)
        arrays["head/param"] = np.asarray(head.param, dtype=float)
    with path.open("wb") as fh:
        np.savez(fh, meta=np.array(json.dumps(meta, sort_keys=True)), **arrays)
    return path


def _build(model_meta: dict) -> Approximator:
    kind, dim = model_meta["kind"], model_meta["dim"]
    if kind == "mlp":
        return MLP(dim, hidden=model_meta["hidden"], seed=model_meta["seed"], zero=True)
    if kind == "vqc":
        return VqcModel(dim, model_meta["n_qubits"], model_meta["n_layers"],
                        seed=model_meta["seed"], adapter_seed=model_meta["adapter_seed"],
                        decoder_variance=model_meta["decoder_variance"])
    if kind == "zero":
        return ZeroControl(dim)
    raise ValueError(f"unknown model kind '{kind}'")


def load_checkpoint(path) -> tuple[Approximator, TrainableHead | None, dict]:
    with np.load(Path(path), allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint format {meta.get('format_version')}")
        model = _build(meta["model"])
        for name in model.params:
            stored = data[f"param/{name}"]
            if stored.shape != model.params[name].shape:
                raise ValueError(f"tensor '{name}' has shape {stored.shape}, "
                                 f"expected {model.params[name].shape}")
            model.params[name] = stored.copy()
        model.trainable = tuple(meta["model"]["trainable"])
        head = None
        if "head/param" in data:
            head = TrainableHead(float(data["head/offset"]), float(data["head/scale"]),
                                 data["head/param"].copy())
    return model, head, meta["extra"]
