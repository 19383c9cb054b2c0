"""Automatic mask generation: a regular grid of single-point prompts,
score/area filtering, and greedy NMS on binarized mattes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import MattingModel
from .prompts import PointPrompt, Prompt

DEFAULT_SCORE_THRESH = 0.7
DEFAULT_NMS_IOU = 0.7
MIN_REGION_AREA = 20


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    """IoU of two boolean masks; 0 when both are empty."""
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 0.0
    return float(np.logical_and(a, b).sum() / union)


@dataclass
class MaskCandidate:
    matte: np.ndarray
    score: float
    grid_index: int

    @property
    def region(self) -> np.ndarray:
        return self.matte >= 0.5


def auto_mask_generation(
    image: np.ndarray,
    model: MattingModel,
    grid_n: int,
    score_thresh: float = DEFAULT_SCORE_THRESH,
    nms_iou: float = DEFAULT_NMS_IOU,
    min_area: int = MIN_REGION_AREA,
    return_candidates: bool = False,
):
    """Run the model once per grid point and keep confident, distinct mattes.

    Candidates are scored by mean alpha inside their binarized region,
    filtered by score and region area, then greedily NMS-deduplicated by
    binarized IoU in descending-score order (grid order breaks ties).
    Returns the kept mattes, or MaskCandidate records with scores when
    return_candidates is set.
    """
    if grid_n < 2:
        raise ValueError("grid_n must be >= 2")
    H, W = image.shape[:2]
    candidates: list[MaskCandidate] = []
    for idx in range(grid_n * grid_n):
        i, j = divmod(idx, grid_n)
        x = (j + 0.5) * W / grid_n
        y = (i + 0.5) * H / grid_n
        matte = model.predict(image, Prompt(points=[PointPrompt(x=x, y=y, label="pos")]))
        region = matte >= 0.5
        area = int(region.sum())
        if area < min_area:
            continue
        score = float(matte[region].mean())
        if score < score_thresh:
            continue
        candidates.append(MaskCandidate(matte=matte, score=score, grid_index=idx))

    candidates.sort(key=lambda c: (-c.score, c.grid_index))
    kept: list[MaskCandidate] = []
    for cand in candidates:
        if all(mask_iou(cand.region, k.region) <= nms_iou for k in kept):
            kept.append(cand)
    if return_candidates:
        return kept
    return [c.matte for c in kept]
