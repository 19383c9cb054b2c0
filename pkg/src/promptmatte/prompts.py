"""Visual prompt types, prompt-derived attention masks, and prompt samplers.

Attention masks live on the transformer's key grid. Box prompts produce an
additive {0, -inf} mask; positive point prompts produce a multiplicative
[0, 1] Gaussian mask, normalized so each point's nearest cell reaches 1.
Samplers are deterministic functions of (inputs, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .core import ShapeError

DEFAULT_SIGMA = 21.0
MAX_CLICK_POINTS = 12
SCRIBBLE_MAX_POINTS = 24

# minimum arc-length spacing when deciding how many scribble samples are needed
SCRIBBLE_MIN_SPACING = 2.0

# deterministic click placement: claimed radius around picked points, and the
# width of the background band eligible for negative clicks
CLICK_MIN_DIST = 5.0
NEGATIVE_BAND_PX = 20.0


class PromptError(ValueError):
    """A prompt violates its contract (empty, out of range, over limits)."""


@dataclass(frozen=True)
class PointPrompt:
    x: float
    y: float
    label: str = "pos"  # "pos" | "neg"

    def __post_init__(self) -> None:
        if self.label not in ("pos", "neg"):
            raise PromptError(f"point label must be 'pos' or 'neg', got {self.label!r}")

    @property
    def positive(self) -> bool:
        return self.label == "pos"


@dataclass(frozen=True)
class BoxPrompt:
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self) -> None:
        if self.x0 > self.x1 or self.y0 > self.y1:
            raise PromptError(f"box corners must be ordered, got {self}")

    def clipped(self, image_h: int, image_w: int) -> "BoxPrompt":
        return BoxPrompt(
            x0=min(max(self.x0, 0.0), image_w - 1.0),
            y0=min(max(self.y0, 0.0), image_h - 1.0),
            x1=min(max(self.x1, 0.0), image_w - 1.0),
            y1=min(max(self.y1, 0.0), image_h - 1.0),
        )


@dataclass(frozen=True)
class Scribble:
    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if len(self.vertices) < 1:
            raise PromptError("scribble needs at least one vertex")


@dataclass
class Prompt:
    """A user prompt: points and/or a box and/or a scribble."""

    points: list[PointPrompt] = field(default_factory=list)
    box: BoxPrompt | None = None
    scribble: Scribble | None = None

    @property
    def empty(self) -> bool:
        return not self.points and self.box is None and self.scribble is None

    def to_wire(self) -> dict:
        return {
            "points": [{"x": p.x, "y": p.y, "label": p.label} for p in self.points],
            "box": [self.box.x0, self.box.y0, self.box.x1, self.box.y1] if self.box else None,
            "scribble": [[x, y] for x, y in self.scribble.vertices] if self.scribble else None,
        }

    @classmethod
    def from_wire(cls, raw: dict) -> "Prompt":
        points = [
            PointPrompt(x=float(p["x"]), y=float(p["y"]), label=str(p["label"]))
            for p in raw.get("points") or []
        ]
        box = None
        if raw.get("box") is not None:
            vals = raw["box"]
            if len(vals) != 4:
                raise PromptError(f"box must have 4 coordinates, got {len(vals)}")
            box = BoxPrompt(*(float(v) for v in vals))
        scribble = None
        if raw.get("scribble") is not None:
            scribble = Scribble(tuple((float(x), float(y)) for x, y in raw["scribble"]))
        return cls(points=points, box=box, scribble=scribble)


@dataclass
class AttentionMask:
    """Per-cell attention modulation on the key grid.

    kind "additive": values in {0, -inf}, added to attention logits.
    kind "multiplicative": values in [0, 1], multiplied into scaled logits.
    """

    kind: str
    values: np.ndarray

    @property
    def grid_h(self) -> int:
        return self.values.shape[0]

    @property
    def grid_w(self) -> int:
        return self.values.shape[1]


def _cell_centers(grid_h: int, grid_w: int, image_h: int, image_w: int):
    """Centers of grid cells, mapped to input-image pixel coordinates."""
    ys = (np.arange(grid_h) + 0.5) * (image_h / grid_h)
    xs = (np.arange(grid_w) + 0.5) * (image_w / grid_w)
    return ys, xs


def box_attention_mask(
    box: BoxPrompt, grid_h: int, grid_w: int, image_h: int, image_w: int
) -> AttentionMask:
    """Additive mask: 0 where the cell center falls inside the box, else -inf.

    Degenerate boxes (no cell center inside) are expanded so at least the
    cell containing the box center is kept.
    """
    box = box.clipped(image_h, image_w)
    ys, xs = _cell_centers(grid_h, grid_w, image_h, image_w)
    inside_y = (ys >= box.y0) & (ys <= box.y1)
    inside_x = (xs >= box.x0) & (xs <= box.x1)
    inside = np.outer(inside_y, inside_x)
    if not inside.any():
        cy = 0.5 * (box.y0 + box.y1)
        cx = 0.5 * (box.x0 + box.x1)
        i = min(max(int(cy / (image_h / grid_h)), 0), grid_h - 1)
        j = min(max(int(cx / (image_w / grid_w)), 0), grid_w - 1)
        inside[i, j] = True
    values = np.where(inside, 0.0, -np.inf)
    return AttentionMask(kind="additive", values=values)


def point_attention_mask(
    points: list[PointPrompt],
    sigma: float,
    grid_h: int,
    grid_w: int,
    image_h: int,
    image_w: int,
) -> AttentionMask:
    """Multiplicative Gaussian mask around positive points.

    Each positive point contributes exp(-(d^2 - d_min^2) / (2 sigma^2)) where
    d is the distance (in input pixels) from the cell center to the point and
    d_min is the distance to its nearest cell, so the peak is exactly 1.
    Points combine by elementwise max. Negative points are ignored.
    """
    positives = [p for p in points if p.positive]
    if not positives:
        raise PromptError("point attention mask requires at least one positive point")
    ys, xs = _cell_centers(grid_h, grid_w, image_h, image_w)
    grid_y, grid_x = np.meshgrid(ys, xs, indexing="ij")
    values = np.zeros((grid_h, grid_w))
    for p in positives:
        d2 = (grid_y - p.y) ** 2 + (grid_x - p.x) ** 2
        g = np.exp(-(d2 - d2.min()) / (2.0 * sigma * sigma))
        values = np.maximum(values, g)
    return AttentionMask(kind="multiplicative", values=values)


# --------------------------------------------------------------------------
# Prompt samplers (evaluation protocol and training)
# --------------------------------------------------------------------------

def sample_box_prompt(gt: np.ndarray, jitter_frac: float, seed: int) -> BoxPrompt:
    """Tight box around {alpha >= 0.5}, each edge jittered by up to
    jitter_frac of the corresponding side length, clipped to the image."""
    fg = gt >= 0.5
    if not fg.any():
        raise PromptError("cannot sample a box prompt from an empty foreground")
    rows = np.where(fg.any(axis=1))[0]
    cols = np.where(fg.any(axis=0))[0]
    y0, y1 = float(rows[0]), float(rows[-1])
    x0, x1 = float(cols[0]), float(cols[-1])
    if jitter_frac > 0:
        rng = np.random.default_rng(seed)
        w = x1 - x0
        h = y1 - y0
        x0 += rng.uniform(-jitter_frac, jitter_frac) * w
        x1 += rng.uniform(-jitter_frac, jitter_frac) * w
        y0 += rng.uniform(-jitter_frac, jitter_frac) * h
        y1 += rng.uniform(-jitter_frac, jitter_frac) * h
    H, W = gt.shape
    x0, x1 = sorted((min(max(x0, 0.0), W - 1.0), min(max(x1, 0.0), W - 1.0)))
    y0, y1 = sorted((min(max(y0, 0.0), H - 1.0), min(max(y1, 0.0), H - 1.0)))
    return BoxPrompt(x0=x0, y0=y0, x1=x1, y1=y1)


def _peak(dist: np.ndarray) -> tuple[int, int] | None:
    """Argmax with lexicographic (row, col) tie-break; None if all zero."""
    if dist.max() <= 0:
        return None
    flat = int(np.argmax(dist))  # first occurrence in C order
    return flat // dist.shape[1], flat % dist.shape[1]


def sample_point_prompts(gt: np.ndarray, n_points: int, seed: int) -> list[PointPrompt]:
    """Deterministic click simulation on the distance transform.

    The first click is positive at the interior peak of {alpha >= 0.5};
    later clicks alternate between positive (peak of still-unclaimed
    foreground, at least CLICK_MIN_DIST from earlier clicks when possible)
    and negative (interior peak of the background band within
    NEGATIVE_BAND_PX of the foreground).
    """
    if not 1 <= n_points <= MAX_CLICK_POINTS:
        raise PromptError(f"n_points must be in [1, {MAX_CLICK_POINTS}], got {n_points}")
    fg = gt >= 0.5
    if not fg.any():
        raise PromptError("cannot sample point prompts from an empty foreground")

    dist_fg = ndimage.distance_transform_edt(fg)
    dist_bg = ndimage.distance_transform_edt(~fg)
    band = (~fg) & (dist_bg <= NEGATIVE_BAND_PX) & (dist_bg > 0)

    points: list[PointPrompt] = []
    claimed_fg = np.zeros_like(fg, dtype=bool)
    claimed_band = np.zeros_like(fg, dtype=bool)

    def claim(mask: np.ndarray, r: int, c: int) -> None:
        yy, xx = np.ogrid[: mask.shape[0], : mask.shape[1]]
        mask |= (yy - r) ** 2 + (xx - c) ** 2 < CLICK_MIN_DIST**2

    want_positive = True
    while len(points) < n_points:
        if want_positive:
            avail = dist_fg * ~claimed_fg
            pick = _peak(avail)
            if pick is None:  # everything claimed; fall back to the global peak
                pick = _peak(dist_fg)
            r, c = pick
            points.append(PointPrompt(x=float(c), y=float(r), label="pos"))
            claim(claimed_fg, r, c)
        else:
            avail = ndimage.distance_transform_edt(band & ~claimed_band)
            pick = _peak(avail)
            if pick is not None:
                r, c = pick
                points.append(PointPrompt(x=float(c), y=float(r), label="neg"))
                claim(claimed_band, r, c)
            # no background band left: skip the negative turn
        want_positive = not want_positive
    return points


def scribble_to_points(s: Scribble, max_points: int = SCRIBBLE_MAX_POINTS) -> list[PointPrompt]:
    """Uniform arc-length sampling of positive points along the polyline.

    Closed polylines (first vertex == last) are sampled at spacing P/n so the
    duplicate endpoint is not emitted twice; open polylines include both ends.
    """
    verts = np.asarray(s.vertices, dtype=np.float64)
    if len(verts) == 1:
        return [PointPrompt(x=float(verts[0, 0]), y=float(verts[0, 1]), label="pos")]

    seg = np.diff(verts, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    total = cum[-1]
    if total == 0.0:
        return [PointPrompt(x=float(verts[0, 0]), y=float(verts[0, 1]), label="pos")]

    closed = bool(np.all(verts[0] == verts[-1]))
    needed = int(math.floor(total / SCRIBBLE_MIN_SPACING)) + 1
    n = max(1, min(max_points, needed))
    if n == 1:
        targets = np.array([0.0])
    elif closed:
        targets = np.arange(n) * (total / n)
    else:
        targets = np.arange(n) * (total / (n - 1))

    points = []
    for t in targets:
        i = int(np.searchsorted(cum, t, side="right") - 1)
        i = min(i, len(seg_len) - 1)
        frac = 0.0 if seg_len[i] == 0 else (t - cum[i]) / seg_len[i]
        xy = verts[i] + frac * seg[i]
        points.append(PointPrompt(x=float(xy[0]), y=float(xy[1]), label="pos"))
    return points
