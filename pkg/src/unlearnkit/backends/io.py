"""Self-describing model checkpoints.

Single JSON file: format version, backend kind, plain config, and named
tensors as base64 blobs with dtype/shape. Deterministic bytes for identical
models, so replayed runs can be compared file-for-file. An out-of-tree
adapter binds a full-scale model by registering its class here.
"""

from __future__ import annotations

import base64
import json
from pathlib import Path

import numpy as np
import torch

from ..errors import CheckpointError
from .base import Model
from .neural import TinyNeuralModel
from .tabular import TabularModel

FORMAT_VERSION = 1

_REGISTRY: dict[str, type] = {
    TabularModel.backend_kind: TabularModel,
    TinyNeuralModel.backend_kind: TinyNeuralModel,
}


def register_backend(kind: str, cls: type) -> None:
    """Make an out-of-tree Model implementation loadable from checkpoints."""
    _REGISTRY[kind] = cls


def _encode_tensor(tensor: torch.Tensor) -> dict:
    array = tensor.detach().cpu().contiguous().numpy()
    return {
        "dtype": array.dtype.str,
        "shape": list(array.shape),
        "data": base64.b64encode(array.tobytes()).decode("ascii"),
    }


def _decode_tensor(payload: dict) -> torch.Tensor:
    raw = base64.b64decode(payload["data"])
    array = np.frombuffer(raw, dtype=np.dtype(payload["dtype"])).reshape(payload["shape"])
    return torch.from_numpy(array.copy())


def save_model(model: Model, path: str | Path) -> Path:
    payload = model.state_payload()
    document = {
        "format_version": FORMAT_VERSION,
        "backend": model.backend_kind,
        "config": payload["config"],
        "tensors": {name: _encode_tensor(t) for name, t in payload["tensors"].items()},
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(document, sort_keys=True, separators=(",", ":")) + "\n", encoding="utf-8")
    return path


def load_model(path: str | Path) -> Model:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: not a valid checkpoint: {exc}") from exc
    version = document.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint format version {version!r}")
    kind = document.get("backend")
    cls = _REGISTRY.get(kind)
    if cls is None:
        raise CheckpointError(
            f"{path}: unknown backend kind {kind!r} (registered: {sorted(_REGISTRY)})"
        )
    tensors = {name: _decode_tensor(p) for name, p in document.get("tensors", {}).items()}
    return cls.from_state_payload(document["config"], tensors)
