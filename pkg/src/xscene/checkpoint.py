"""Versioned checkpoint container: JSON manifest + named weight blobs.

A checkpoint is a zip with a ``manifest.json`` and one ``.npy`` entry per
tensor. Entries are written with fixed timestamps so identical contents
produce identical bytes.
"""

from __future__ import annotations

import io
import json
import zipfile
from pathlib import Path

import numpy as np
import torch

CONTAINER_VERSION = 1
_EPOCH = (1980, 1, 1, 0, 0, 0)


class CheckpointError(RuntimeError):
    pass


def save_checkpoint(path: Path | str, kind: str, manifest: dict, tensors: dict) -> None:
    """``tensors`` maps names to numpy arrays or torch tensors."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "container_version": CONTAINER_VERSION,
        "kind": kind,
        "manifest": manifest,
        "tensors": sorted(tensors),
    }
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        info = zipfile.ZipInfo("manifest.json", date_time=_EPOCH)
        zf.writestr(info, json.dumps(doc, sort_keys=True, indent=1))
        for name in sorted(tensors):
            value = tensors[name]
            if isinstance(value, torch.Tensor):
                value = value.detach().cpu().numpy()
            buf = io.BytesIO()
            np.save(buf, np.ascontiguousarray(value))
            info = zipfile.ZipInfo(f"tensors/{name}.npy", date_time=_EPOCH)
            zf.writestr(info, buf.getvalue())


def load_checkpoint(path: Path | str, expect_kind: str | None = None) -> tuple[dict, dict]:
    """Returns (manifest, tensors-as-numpy). Raises on kind mismatch."""
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    with zipfile.ZipFile(path) as zf:
        doc = json.loads(zf.read("manifest.json"))
        if doc.get("container_version") != CONTAINER_VERSION:
            raise CheckpointError(f"unsupported container version in {path}")
        if expect_kind is not None and doc.get("kind") != expect_kind:
            raise CheckpointError(
                f"expected a {expect_kind!r} checkpoint, found {doc.get('kind')!r}"
            )
        tensors = {}
        for name in doc["tensors"]:
            tensors[name] = np.load(io.BytesIO(zf.read(f"tensors/{name}.npy")))
    return doc["manifest"], tensors


def state_dict_tensors(module: torch.nn.Module) -> dict:
    return {k: v for k, v in module.state_dict().items()}


def load_state_dict_tensors(module: torch.nn.Module, tensors: dict) -> None:
    state = {k: torch.from_numpy(np.array(v)) for k, v in tensors.items()}
    module.load_state_dict(state)
