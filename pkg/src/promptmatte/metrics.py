"""Matting evaluation metrics and dataset-level aggregation.

Scale conventions: SAD, Grad, and Conn are reported as raw sums scaled by
1e-3; MSE and MAE are per-pixel means scaled by 1e3. Only relative
comparisons matter downstream, but the constants are fixed here for
reproducibility.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy import ndimage

from .core import (
    Manifest,
    ManifestError,
    ShapeError,
    foreground_ratio,
    load_matte,
    require_same_size,
    size_group,
)

GRAD_SIGMA = 1.4
CONN_STEP = 0.1
CONN_SLACK = 0.15

SIZE_BINS = ("small", "medium", "large")


def sad(pred: np.ndarray, gt: np.ndarray) -> float:
    """Sum of absolute differences, scaled by 1e-3."""
    require_same_size(pred, gt)
    return float(np.abs(pred.astype(np.float64) - gt.astype(np.float64)).sum() * 1e-3)


def mse(pred: np.ndarray, gt: np.ndarray) -> float:
    """Mean squared error, scaled by 1e3."""
    require_same_size(pred, gt)
    diff = pred.astype(np.float64) - gt.astype(np.float64)
    return float(np.mean(diff * diff) * 1e3)


def mae(pred: np.ndarray, gt: np.ndarray) -> float:
    """Mean absolute error, scaled by 1e3."""
    require_same_size(pred, gt)
    return float(np.mean(np.abs(pred.astype(np.float64) - gt.astype(np.float64))) * 1e3)


def _gaussian_derivative_kernels(sigma: float) -> tuple[np.ndarray, np.ndarray]:
    """First-order Gaussian-derivative kernels for x and y, L1-normalized."""
    radius = int(math.ceil(3.0 * sigma))
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-(t**2) / (2.0 * sigma**2))
    dg = -t * g
    kx = np.outer(g, dg)
    kx /= np.abs(kx).sum()
    return kx, kx.T


def grad_filter_radius(sigma: float = GRAD_SIGMA) -> int:
    return int(math.ceil(3.0 * sigma))


def grad_error(pred: np.ndarray, gt: np.ndarray) -> float:
    """Gradient error: squared difference of Gaussian-derivative magnitudes.

    Both mattes are filtered with first-order Gaussian-derivative kernels
    (sigma 1.4, radius ceil(3*sigma), L1-normalized, reflective border).
    """
    require_same_size(pred, gt)
    radius = grad_filter_radius()
    support = 2 * radius + 1
    if min(pred.shape) < support:
        raise ShapeError(
            f"image {pred.shape} smaller than filter support ({support}x{support})"
        )
    kx, ky = _gaussian_derivative_kernels(GRAD_SIGMA)

    def amplitude(m: np.ndarray) -> np.ndarray:
        m = m.astype(np.float64)
        gx = ndimage.correlate(m, kx, mode="reflect")
        gy = ndimage.correlate(m, ky, mode="reflect")
        return np.hypot(gx, gy)

    diff = amplitude(pred) - amplitude(gt)
    return float((diff * diff).sum() * 1e-3)


_FOUR_CONN = ndimage.generate_binary_structure(2, 1)


def _largest_component(mask: np.ndarray) -> np.ndarray:
    """Largest 4-connected component; ties resolved toward the component
    whose minimum (row, col) pixel is lexicographically smallest."""
    labels, count = ndimage.label(mask, structure=_FOUR_CONN)
    if count == 0:
        return np.zeros_like(mask, dtype=bool)
    counts = np.bincount(labels.ravel())
    counts[0] = 0
    # scipy assigns labels in raster order, so argmax's first-hit rule picks
    # the component with the lexicographically smallest first pixel on ties
    best = int(np.argmax(counts))
    return labels == best


def conn_error(pred: np.ndarray, gt: np.ndarray) -> float:
    """Connectivity error with thresholds k*0.1, 4-connectivity, 0.15 slack."""
    require_same_size(pred, gt)
    p = pred.astype(np.float64)
    g = gt.astype(np.float64)

    thresholds = [k * CONN_STEP for k in range(1, 11)]
    l_map = np.full(p.shape, -1.0)
    for k, theta in enumerate(thresholds):
        both = (p >= theta) & (g >= theta)
        omega = _largest_component(both)
        newly = (~omega) & (l_map == -1.0)
        l_map[newly] = 0.0 if k == 0 else thresholds[k - 1]
    l_map[l_map == -1.0] = 1.0

    def phi(values: np.ndarray) -> np.ndarray:
        d = values - l_map
        return 1.0 - d * (d >= CONN_SLACK)

    return float(np.abs(phi(p) - phi(g)).sum() * 1e-3)


# --------------------------------------------------------------------------
# Dataset-level aggregation
# --------------------------------------------------------------------------

@dataclass
class MetricReport:
    """Mean metrics for one (granularity, prompt_mode) group."""

    granularity: str
    prompt_mode: str
    sad: float
    mse: float
    mae: float
    grad: float
    conn: float
    per_size: dict[str, float | None] = field(default_factory=dict)

    def to_json(self) -> dict:
        row = {
            "granularity": self.granularity,
            "prompt_mode": self.prompt_mode,
            "sad": self.sad,
            "mse": self.mse,
            "mae": self.mae,
            "grad": self.grad,
            "conn": self.conn,
        }
        for bin_name in SIZE_BINS:
            row[f"mse_{bin_name}"] = self.per_size.get(bin_name)
        return row


def evaluate_dataset(
    predictions: Mapping[tuple[str, int], np.ndarray],
    manifest: Manifest,
    prompt_mode: str,
    manifest_path: str | Path,
) -> list[MetricReport]:
    """Aggregate the five metrics over a manifest, grouped by granularity.

    ``predictions`` maps (sample_id, object_id) to a predicted matte; one
    prediction is required per object. MSE is additionally binned by the
    ground-truth foreground ratio (small/medium/large).
    """
    root = Path(manifest_path).parent
    per_gran: dict[str, list[dict[str, float]]] = {}
    for sample in manifest.samples:
        for obj in sample.objects:
            key = (sample.id, obj.id)
            if key not in predictions:
                raise ManifestError(
                    f"missing prediction for sample {sample.id!r} object {obj.id}"
                )
            gt = load_matte(root / obj.matte_path)
            pred = predictions[key]
            entry = {
                "sad": sad(pred, gt),
                "mse": mse(pred, gt),
                "mae": mae(pred, gt),
                "grad": grad_error(pred, gt),
                "conn": conn_error(pred, gt),
                "size": size_group(foreground_ratio(gt)),
            }
            per_gran.setdefault(obj.granularity, []).append(entry)

    reports = []
    for gran in sorted(per_gran):
        entries = per_gran[gran]
        per_size: dict[str, float | None] = {}
        for bin_name in SIZE_BINS:
            values = [e["mse"] for e in entries if e["size"] == bin_name]
            per_size[bin_name] = float(np.mean(values)) if values else None
        reports.append(
            MetricReport(
                granularity=gran,
                prompt_mode=prompt_mode,
                sad=float(np.mean([e["sad"] for e in entries])),
                mse=float(np.mean([e["mse"] for e in entries])),
                mae=float(np.mean([e["mae"] for e in entries])),
                grad=float(np.mean([e["grad"] for e in entries])),
                conn=float(np.mean([e["conn"] for e in entries])),
                per_size=per_size,
            )
        )
    return reports


CSV_COLUMNS = [
    "granularity",
    "prompt_mode",
    "sad",
    "mse",
    "mae",
    "grad",
    "conn",
    "mse_small",
    "mse_medium",
    "mse_large",
]


def write_reports_csv(reports: list[MetricReport], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for report in reports:
            row = report.to_json()
            writer.writerow({k: ("" if row[k] is None else row[k]) for k in CSV_COLUMNS})


def write_reports_json(reports: list[MetricReport], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps([r.to_json() for r in reports], indent=2) + "\n", encoding="utf-8"
    )
