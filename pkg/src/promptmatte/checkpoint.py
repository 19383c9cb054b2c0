"""Checkpoint archives: config JSON plus named weight arrays in one zip.

Weights are stored as .npy entries (shape-tagged, endian-tagged). Zip entry
timestamps are pinned so identical training runs produce identical bytes.
"""

from __future__ import annotations

import hashlib
import io
import json
import zipfile
from pathlib import Path

import numpy as np

_EPOCH = (1980, 1, 1, 0, 0, 0)


def save_checkpoint(
    path: str | Path,
    kind: str,
    config: dict,
    tensors: dict[str, np.ndarray],
    step: int = 0,
) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {
        "format": 1,
        "kind": kind,
        "config": config,
        "step": step,
        "tensors": sorted(tensors),
    }
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        def write(name: str, data: bytes) -> None:
            info = zipfile.ZipInfo(name, date_time=_EPOCH)
            info.compress_type = zipfile.ZIP_DEFLATED
            zf.writestr(info, data)

        write("meta.json", json.dumps(meta, indent=2).encode("utf-8"))
        for name in sorted(tensors):
            buf = io.BytesIO()
            np.save(buf, np.ascontiguousarray(tensors[name]))
            write(f"weights/{name}.npy", buf.getvalue())


def load_checkpoint(path: str | Path) -> tuple[str, dict, dict[str, np.ndarray], int]:
    """Returns (kind, config, tensors, step)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    with zipfile.ZipFile(path, "r") as zf:
        meta = json.loads(zf.read("meta.json").decode("utf-8"))
        if meta.get("format") != 1:
            raise ValueError(f"unsupported checkpoint format: {meta.get('format')!r}")
        tensors = {}
        for name in meta["tensors"]:
            with zf.open(f"weights/{name}.npy") as fh:
                tensors[name] = np.load(fh)
    return meta["kind"], meta["config"], tensors, int(meta["step"])


def checkpoint_hash(path: str | Path) -> str:
    """SHA-256 of the checkpoint file contents."""
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()
