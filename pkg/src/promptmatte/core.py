"""Shared domain types, alpha compositing, and dataset manifest I/O.

Conventions used across the package:

* Image: float32/float64 ndarray of shape (H, W, 3), values in [0, 1].
* AlphaMatte: float ndarray of shape (H, W), values in [0, 1].
* SegMask: ndarray of shape (H, W), values strictly in {0, 1}.

On disk, images are 8-bit RGB PNG and mattes are 16-bit single-channel
PNG where stored value v encodes alpha v / 65535.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

MIN_IMAGE_SIDE = 16

SIZE_SMALL_MAX = 0.01
SIZE_MEDIUM_MAX = 0.10

GRANULARITIES = ("fine", "coarse")


class ShapeError(ValueError):
    """Spatial sizes of two arrays do not agree, or a shape contract fails."""


class ManifestError(ValueError):
    """A manifest file is malformed or references missing data."""


def validate_image(image: np.ndarray) -> None:
    if image.ndim != 3 or image.shape[2] != 3:
        raise ShapeError(f"image must be (H, W, 3), got {image.shape}")
    if image.shape[0] < MIN_IMAGE_SIDE or image.shape[1] < MIN_IMAGE_SIDE:
        raise ShapeError(f"image sides must be >= {MIN_IMAGE_SIDE}, got {image.shape[:2]}")
    if not np.isfinite(image).all():
        raise ValueError("image contains non-finite values")
    if image.min() < 0.0 or image.max() > 1.0:
        raise ValueError("image values must lie in [0, 1]")


def validate_matte(matte: np.ndarray) -> None:
    if matte.ndim != 2:
        raise ShapeError(f"matte must be 2-D, got shape {matte.shape}")
    if not np.isfinite(matte).all():
        raise ValueError("matte contains non-finite values")
    if matte.min() < 0.0 or matte.max() > 1.0:
        raise ValueError("matte values must lie in [0, 1]")


def validate_seg(seg: np.ndarray) -> None:
    if seg.ndim != 2:
        raise ShapeError(f"seg mask must be 2-D, got shape {seg.shape}")
    values = np.unique(seg)
    if not np.isin(values, (0, 1)).all():
        raise ValueError("seg mask must be strictly binary")


def require_same_size(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[:2] != b.shape[:2]:
        raise ShapeError(f"spatial size mismatch: {a.shape[:2]} vs {b.shape[:2]}")


def composite(fg: np.ndarray, bg: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Blend fg over bg: out = alpha * fg + (1 - alpha) * bg, per pixel."""
    require_same_size(fg, bg)
    require_same_size(fg, alpha)
    a = alpha[..., None]
    return a * fg + (1.0 - a) * bg


def foreground_ratio(matte: np.ndarray) -> float:
    """Fraction of total alpha mass: sum(alpha) / (H * W), in [0, 1]."""
    return float(matte.sum() / matte.size)


def size_group(ratio: float) -> str:
    """Bin a foreground ratio: small < 1%, medium in [1%, 10%), large >= 10%."""
    if ratio < SIZE_SMALL_MAX:
        return "small"
    if ratio < SIZE_MEDIUM_MAX:
        return "medium"
    return "large"


# --------------------------------------------------------------------------
# PNG I/O
# --------------------------------------------------------------------------

def save_image(path: str | Path, image: np.ndarray) -> None:
    """Write an image as 8-bit RGB PNG."""
    validate_image(image)
    u8 = np.round(image * 255.0).astype(np.uint8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ok = cv2.imwrite(str(path), cv2.cvtColor(u8, cv2.COLOR_RGB2BGR))
    if not ok:
        raise IOError(f"failed to write image: {path}")


def load_image(path: str | Path) -> np.ndarray:
    """Read an 8-bit RGB PNG as float32 in [0, 1]."""
    raw = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if raw is None:
        raise IOError(f"unable to read image: {path}")
    return cv2.cvtColor(raw, cv2.COLOR_BGR2RGB).astype(np.float32) / 255.0


def save_matte(path: str | Path, matte: np.ndarray) -> None:
    """Write a matte as 16-bit single-channel PNG (value v encodes v/65535)."""
    validate_matte(matte)
    u16 = np.round(matte * 65535.0).astype(np.uint16)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ok = cv2.imwrite(str(path), u16)
    if not ok:
        raise IOError(f"failed to write matte: {path}")


def load_matte(path: str | Path) -> np.ndarray:
    """Read a 16-bit single-channel PNG matte as float32 in [0, 1]."""
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise IOError(f"unable to read matte: {path}")
    if raw.ndim != 2:
        raise ManifestError(f"matte PNG must be single-channel: {path}")
    if raw.dtype == np.uint16:
        return raw.astype(np.float32) / 65535.0
    if raw.dtype == np.uint8:
        return raw.astype(np.float32) / 255.0
    raise ManifestError(f"unsupported matte dtype {raw.dtype}: {path}")


# --------------------------------------------------------------------------
# Manifest
# --------------------------------------------------------------------------

MANIFEST_VERSION = 1


@dataclass
class ObjectRecord:
    """One annotated object inside a sample."""

    id: int
    matte_path: str
    granularity: str
    predefined_points: list[dict] | None = None
    predefined_box: list[float] | None = None

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "matte_path": self.matte_path,
            "granularity": self.granularity,
            "predefined_points": self.predefined_points,
            "predefined_box": self.predefined_box,
        }


@dataclass
class SampleRecord:
    id: str
    image_path: str
    objects: list[ObjectRecord] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "image_path": self.image_path,
            "objects": [o.to_json() for o in self.objects],
        }


@dataclass
class Manifest:
    version: int = MANIFEST_VERSION
    seed: int = 0
    samples: list[SampleRecord] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "version": self.version,
            "seed": self.seed,
            "samples": [s.to_json() for s in self.samples],
        }


def _parse_object(raw: dict, sample_id: str, index: int) -> ObjectRecord:
    for key in ("matte_path", "granularity"):
        if raw.get(key) in (None, ""):
            raise ManifestError(
                f"sample {sample_id!r}: object {index}: missing field {key!r}"
            )
    if raw["granularity"] not in GRANULARITIES:
        raise ManifestError(
            f"sample {sample_id!r}: object {index}: "
            f"granularity must be one of {GRANULARITIES}, got {raw['granularity']!r}"
        )
    return ObjectRecord(
        id=int(raw.get("id", index)),
        matte_path=raw["matte_path"],
        granularity=raw["granularity"],
        predefined_points=raw.get("predefined_points"),
        predefined_box=raw.get("predefined_box"),
    )


def save_manifest(manifest: Manifest, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest.to_json(), indent=2) + "\n", encoding="utf-8")


def load_manifest(path: str | Path, check_files: bool = True) -> Manifest:
    """Load a manifest; relative paths are resolved against the manifest dir."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc

    if raw.get("version") != MANIFEST_VERSION:
        raise ManifestError(f"{path}: field 'version' must be {MANIFEST_VERSION}, got {raw.get('version')!r}")

    samples: list[SampleRecord] = []
    seen_ids: set[str] = set()
    for i, s in enumerate(raw.get("samples", [])):
        sid = s.get("id")
        if not sid:
            raise ManifestError(f"{path}: sample {i}: missing field 'id'")
        if sid in seen_ids:
            raise ManifestError(f"{path}: duplicate sample id {sid!r}")
        seen_ids.add(sid)
        if not s.get("image_path"):
            raise ManifestError(f"{path}: sample {sid!r}: missing field 'image_path'")
        objects = [_parse_object(o, sid, j) for j, o in enumerate(s.get("objects", []))]
        samples.append(SampleRecord(id=sid, image_path=s["image_path"], objects=objects))

    manifest = Manifest(version=raw["version"], seed=int(raw.get("seed", 0)), samples=samples)

    if check_files:
        root = path.parent
        for s in manifest.samples:
            if not (root / s.image_path).exists():
                raise ManifestError(f"{path}: sample {s.id!r}: image file not found: {s.image_path}")
            for o in s.objects:
                if not (root / o.matte_path).exists():
                    raise ManifestError(
                        f"{path}: sample {s.id!r}: object {o.id}: matte file not found: {o.matte_path}"
                    )
    return manifest


def resolve_path(manifest_path: str | Path, relative: str) -> Path:
    return Path(manifest_path).parent / relative
