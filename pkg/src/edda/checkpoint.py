"""Model checkpointing: one .npz container with a JSON metadata entry."""

from __future__ import annotations

import io
import json

import numpy as np

from .errors import FormatError
from .model import ConvNet, LinearModel, Model

FORMAT_VERSION = 1

_ARCHITECTURES = {"convnet": ConvNet, "linear": LinearModel}


def save_checkpoint(model: Model, path: str, provenance: dict | None = None) -> None:
    """Persist parameters plus enough metadata to rebuild the model.

    provenance is free-form run context (strategy, config snapshot) kept
    for later inspection; it does not affect loading.
    """
    if model.architecture not in _ARCHITECTURES:
        raise FormatError(f"cannot checkpoint architecture {model.architecture!r}")
    meta = {
        "format_version": FORMAT_VERSION,
        "architecture": model.architecture,
        "input_shape": list(model.input_shape),
        "num_classes": model.num_classes,
        "task": model.task,
        "background_enabled": model.background_enabled,
        "provenance": provenance or {},
    }
    if isinstance(model, ConvNet):
        meta["channels"] = list(model.channels)
    arrays = {f"param_{name}": value for name, value in model.parameters().items()}
    buffer = io.BytesIO()
    np.savez(buffer, __meta__=json.dumps(meta), **arrays)
    with open(path, "wb") as fh:
        fh.write(buffer.getvalue())


def load_checkpoint(path: str) -> Model:
    """Rebuild a model from save_checkpoint output.

    Raises FormatError on unreadable files or version mismatches; never
    returns a partially loaded model.
    """
    try:
        with np.load(path, allow_pickle=False) as data:
            if "__meta__" not in data:
                raise FormatError(f"{path}: missing checkpoint metadata")
            meta = json.loads(str(data["__meta__"]))
            params = {
                key[len("param_") :]: np.array(data[key])
                for key in data.files
                if key.startswith("param_")
            }
    except FormatError:
        raise
    except Exception as exc:
        raise FormatError(f"{path}: unreadable checkpoint: {exc}") from exc

    version = meta.get("format_version")
    if version != FORMAT_VERSION:
        raise FormatError(
            f"{path}: checkpoint format version {version} not supported "
            f"(expected {FORMAT_VERSION})"
        )
    architecture = meta.get("architecture")
    if architecture not in _ARCHITECTURES:
        raise FormatError(f"{path}: unknown architecture {architecture!r}")
    kwargs = {
        "input_shape": tuple(meta["input_shape"]),
        "num_classes": int(meta["num_classes"]),
        "task": meta["task"],
        "background_enabled": bool(meta["background_enabled"]),
        "params": params,
    }
    if architecture == "convnet":
        kwargs["channels"] = tuple(meta["channels"])
    try:
        return _ARCHITECTURES[architecture](**kwargs)
    except Exception as exc:
        raise FormatError(f"{path}: checkpoint does not describe a valid model: {exc}") from exc


def checkpoint_provenance(path: str) -> dict:
    """Read back just the provenance block of a checkpoint."""
    try:
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["__meta__"]))
    except Exception as exc:
        raise FormatError(f"{path}: unreadable checkpoint: {exc}") from exc
    return meta.get("provenance", {})
