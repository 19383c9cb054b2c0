"""Synthetic scene generator for matting experiments.

Scenes composite two kinds of objects onto a smooth gradient background:
coarse objects (rectangles, ellipses, polygons with hard edges) and fine
objects (hair-like strand tufts and feathered discs with genuinely
fractional alpha). Strands are rasterized at 4x supersampling and
box-downsampled so edge alpha is real coverage, not dithering.

Coarse objects are layered in front of fine ones so coarse mattes stay
near-binary even under occlusion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import cv2
import numpy as np

from .converter import ConverterSample, DegradeSpec, degrade_matte, make_stl_sample
from .core import (
    Manifest,
    ObjectRecord,
    SampleRecord,
    load_image,
    load_matte,
    save_image,
    save_manifest,
    save_matte,
)
from .prompts import sample_box_prompt, sample_point_prompts

SUPERSAMPLE = 4

# scene acceptance: every object must stay visible enough to prompt
MIN_VISIBLE_CORE_PX = 25
MIN_VISIBLE_PEAK = 0.6


@dataclass
class SceneSpec:
    canvas: int = 128
    n_coarse: tuple[int, int] = (1, 3)
    n_fine: tuple[int, int] = (1, 3)
    strand_count: tuple[int, int] = (5, 30)
    feather_width: tuple[int, int] = (1, 4)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.canvas < 64:
            raise ValueError("canvas must be >= 64")
        for name in ("n_coarse", "n_fine", "strand_count", "feather_width"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} range is empty")


def _seed_of(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def _downsample(ss: np.ndarray) -> np.ndarray:
    """Box-average a supersampled canvas down by SUPERSAMPLE."""
    h, w = ss.shape
    f = SUPERSAMPLE
    return ss.reshape(h // f, f, w // f, f).mean(axis=(1, 3))


def _background(rng: np.random.Generator, size: int) -> tuple[np.ndarray, tuple[np.ndarray, np.ndarray]]:
    """Smooth dark gradient plus low-amplitude noise. Backgrounds stay dark
    and objects bright: without a consistent polarity cue nothing is
    learnable from scratch at this scale (per-sample gradients cancel)."""
    c0 = rng.uniform(0.05, 0.4, size=3)
    c1 = rng.uniform(0.05, 0.4, size=3)
    theta = rng.uniform(0, 2 * math.pi)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    t = (xx * math.cos(theta) + yy * math.sin(theta)) / size
    t = (t - t.min()) / max(t.max() - t.min(), 1e-9)
    bg = c0[None, None] + t[..., None] * (c1 - c0)[None, None]
    bg += rng.normal(0.0, 0.02, size=bg.shape)
    return np.clip(bg, 0.0, 1.0), (c0, c1)


def _coarse_alpha(rng: np.random.Generator, size: int) -> np.ndarray:
    """Hard-edged shape rendered from supersampled coverage, binarized."""
    s = size * SUPERSAMPLE
    canvas = np.zeros((s, s), dtype=np.uint8)
    cx = rng.uniform(0.2, 0.8) * s
    cy = rng.uniform(0.2, 0.8) * s
    rx = rng.uniform(0.08, 0.22) * s
    ry = rng.uniform(0.08, 0.22) * s
    kind = rng.choice(["rect", "ellipse", "polygon"])
    if kind == "rect":
        angle = rng.uniform(0, 180)
        box = cv2.boxPoints(((cx, cy), (2 * rx, 2 * ry), angle))
        cv2.fillConvexPoly(canvas, np.round(box).astype(np.int32), 1)
    elif kind == "ellipse":
        angle = rng.uniform(0, 180)
        cv2.ellipse(canvas, (round(cx), round(cy)), (round(rx), round(ry)), angle, 0, 360, 1, -1)
    else:
        n = int(rng.integers(5, 9))
        angles = np.sort(rng.uniform(0, 2 * math.pi, size=n))
        radii = rng.uniform(0.5, 1.0, size=n) * max(rx, ry)
        pts = np.stack([cx + radii * np.cos(angles), cy + radii * np.sin(angles)], axis=1)
        cv2.fillPoly(canvas, [np.round(pts).astype(np.int32)], 1)
    coverage = _downsample(canvas.astype(np.float64))
    return (coverage >= 0.5).astype(np.float64)


def _quadratic_curve(p0, p1, p2, n: int) -> np.ndarray:
    t = np.linspace(0.0, 1.0, n)[:, None]
    return (1 - t) ** 2 * p0 + 2 * (1 - t) * t * p1 + t**2 * p2


def _hair_tuft_alpha(rng: np.random.Generator, size: int, strands: tuple[int, int]) -> np.ndarray:
    """Strand bundle: quadratic curves 1-2 px wide with soft falloff."""
    s = size * SUPERSAMPLE
    canvas = np.zeros((s, s), dtype=np.uint8)
    root = rng.uniform(0.2, 0.8, size=2) * s
    heading = rng.uniform(0, 2 * math.pi)
    count = int(rng.integers(strands[0], strands[1] + 1))
    for _ in range(count):
        ang = heading + rng.uniform(-0.6, 0.6)
        length = rng.uniform(0.15, 0.45) * s
        start = root + rng.uniform(-3, 3, size=2) * SUPERSAMPLE
        direction = np.array([math.cos(ang), math.sin(ang)])
        normal = np.array([-direction[1], direction[0]])
        bend = rng.uniform(-0.25, 0.25) * length
        p2 = start + direction * length
        p1 = start + direction * (length / 2) + normal * bend
        pts = _quadratic_curve(start, p1, p2, max(8, int(length / 2)))
        width_px = rng.uniform(1.0, 2.0)
        thickness = max(1, round(width_px * SUPERSAMPLE))
        cv2.polylines(canvas, [np.round(pts).astype(np.int32)], False, 1, thickness)
    coverage = _downsample(canvas.astype(np.float64))
    soft = cv2.GaussianBlur(coverage, (3, 3), 0.5)
    peak = rng.uniform(0.8, 1.0)
    return np.clip(soft * peak, 0.0, 1.0)


def _feathered_disc_alpha(rng: np.random.Generator, size: int, feather: tuple[int, int]) -> np.ndarray:
    cx = rng.uniform(0.2, 0.8) * size
    cy = rng.uniform(0.2, 0.8) * size
    r = rng.uniform(0.06, 0.18) * size
    w = float(rng.integers(feather[0], feather[1] + 1))
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    d = np.hypot(xx - cx, yy - cy)
    return np.clip((r - d) / w, 0.0, 1.0)


MIN_LUMA_CONTRAST = 0.25

_LUMA = np.array([0.299, 0.587, 0.114])


def _object_layer(
    rng: np.random.Generator, size: int, bg_colors: tuple[np.ndarray, np.ndarray] | None = None
) -> np.ndarray:
    """Flat-ish bright layer; resampled until it clearly out-shines the
    background gradient so every object is visible with a consistent
    polarity."""
    color = rng.uniform(0.45, 1.0, size=3)
    if bg_colors is not None:
        bg_luma = max(float(_LUMA @ bg_colors[0]), float(_LUMA @ bg_colors[1]))
        for _ in range(50):
            if float(_LUMA @ color) - bg_luma >= MIN_LUMA_CONTRAST:
                break
            color = rng.uniform(0.45, 1.0, size=3)
    layer = np.broadcast_to(color, (size, size, 3)).copy()
    layer += rng.normal(0.0, 0.03, size=layer.shape)
    return np.clip(layer, 0.0, 1.0)


def gen_sample(spec: SceneSpec) -> tuple[np.ndarray, list[tuple[np.ndarray, str]]]:
    """Render one scene; returns the image and per-object visible mattes.

    Each ground-truth matte is the object's own alpha multiplied by the
    visibility left by objects in front of it. Deterministic per seed.
    """
    size = spec.canvas
    for attempt in range(40):
        rng = np.random.default_rng([spec.seed, attempt])
        bg, bg_colors = _background(rng, size)
        n_fine = int(rng.integers(spec.n_fine[0], spec.n_fine[1] + 1))
        n_coarse = int(rng.integers(spec.n_coarse[0], spec.n_coarse[1] + 1))

        alphas: list[np.ndarray] = []
        layers: list[np.ndarray] = []
        grans: list[str] = []
        for _ in range(n_fine):  # back
            if rng.random() < 0.5:
                alphas.append(_hair_tuft_alpha(rng, size, spec.strand_count))
            else:
                alphas.append(_feathered_disc_alpha(rng, size, spec.feather_width))
            layers.append(_object_layer(rng, size, bg_colors))
            grans.append("fine")
        for _ in range(n_coarse):  # front
            alphas.append(_coarse_alpha(rng, size))
            layers.append(_object_layer(rng, size, bg_colors))
            grans.append("coarse")

        visible: list[np.ndarray] = [None] * len(alphas)
        vis = np.ones((size, size), dtype=np.float64)
        for i in reversed(range(len(alphas))):
            visible[i] = alphas[i] * vis
            vis = vis * (1.0 - alphas[i])

        ok = all(
            (m >= 0.5).sum() >= MIN_VISIBLE_CORE_PX and m.max() >= MIN_VISIBLE_PEAK
            for m in visible
        )
        if not ok:
            continue

        image = bg
        for alpha, layer in zip(alphas, layers):
            image = alpha[..., None] * layer + (1.0 - alpha[..., None]) * image
        image = np.clip(image, 0.0, 1.0).astype(np.float32)
        mattes = [(m.astype(np.float32), g) for m, g in zip(visible, grans)]
        return image, mattes
    raise RuntimeError(f"scene generation failed to converge for seed {spec.seed}")


def gen_disc_scene(
    canvas: int, centers: list[tuple[float, float]], radius: float, seed: int = 0,
    feather: float = 2.0,
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Scene of disjoint feathered discs at given centers (one matte each)."""
    rng = np.random.default_rng(seed)
    bg, bg_colors = _background(rng, canvas)
    yy, xx = np.mgrid[0:canvas, 0:canvas].astype(np.float64)
    image = bg
    mattes = []
    for cx, cy in centers:
        d = np.hypot(xx - cx, yy - cy)
        alpha = np.clip((radius - d) / feather, 0.0, 1.0)
        layer = _object_layer(rng, canvas, bg_colors)
        image = alpha[..., None] * layer + (1.0 - alpha[..., None]) * image
        mattes.append(alpha.astype(np.float32))
    return np.clip(image, 0.0, 1.0).astype(np.float32), mattes


# --------------------------------------------------------------------------
# Split building and converter trainset derivation
# --------------------------------------------------------------------------

def build_split(
    n_samples: int, spec: SceneSpec, prompt_seed: int, out_dir
) -> Manifest:
    """Write images, mattes, and a manifest with frozen per-object prompts."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "mattes").mkdir(parents=True, exist_ok=True)

    samples = []
    for i in range(n_samples):
        sid = f"sample_{i:04d}"
        image, mattes = gen_sample(replace(spec, seed=_seed_of(spec.seed, i)))
        image_rel = f"images/{sid}.png"
        save_image(out_dir / image_rel, image)
        objects = []
        for k, (matte, gran) in enumerate(mattes):
            matte_rel = f"mattes/{sid}_{k}_matte.png"
            save_matte(out_dir / matte_rel, matte)
            box = sample_box_prompt(matte, jitter_frac=0.1, seed=_seed_of(prompt_seed, i, k, 0))
            n_rng = np.random.default_rng([prompt_seed, i, k, 1])
            n_points = int(n_rng.integers(1, 13))
            points = sample_point_prompts(matte, n_points, seed=_seed_of(prompt_seed, i, k, 2))
            objects.append(
                ObjectRecord(
                    id=k,
                    matte_path=matte_rel,
                    granularity=gran,
                    predefined_points=[{"x": p.x, "y": p.y, "label": p.label} for p in points],
                    predefined_box=[box.x0, box.y0, box.x1, box.y1],
                )
            )
        samples.append(SampleRecord(id=sid, image_path=image_rel, objects=objects))

    manifest = Manifest(seed=spec.seed, samples=samples)
    save_manifest(manifest, out_dir / "manifest.json")
    return manifest


def derive_converter_trainset(
    manifest: Manifest,
    manifest_path,
    degrade_spec: DegradeSpec | None = None,
    coarse_source_frac: float = 0.3,
    seed: int | None = None,
) -> list[ConverterSample]:
    """Build converter training samples from a manifest.

    Fine objects become transformable samples (degraded mask input, matte
    target); a subset of coarse objects becomes non-transformable samples
    whose target equals their binarized mask, sized so roughly
    coarse_source_frac of the output is non-transformable.
    """
    spec = degrade_spec or DegradeSpec()
    root = Path(manifest_path).parent
    rng = np.random.default_rng(manifest.seed if seed is None else seed)

    fine: list[tuple[np.ndarray, np.ndarray, int]] = []
    coarse: list[tuple[np.ndarray, np.ndarray]] = []
    images: dict[str, np.ndarray] = {}
    obj_index = 0
    for sample in manifest.samples:
        if sample.image_path not in images:
            images[sample.image_path] = load_image(root / sample.image_path)
        image = images[sample.image_path]
        for obj in sample.objects:
            gt = load_matte(root / obj.matte_path)
            if obj.granularity == "fine":
                fine.append((image, gt, obj_index))
            else:
                coarse.append((image, gt))
            obj_index += 1

    out: list[ConverterSample] = []
    for image, gt, idx in fine:
        seg = degrade_matte(gt, spec.with_seed(_seed_of(spec.seed, idx)))
        out.append(ConverterSample(image=image, seg=seg, gt_matte=gt, transformable=True))

    if coarse_source_frac > 0 and coarse:
        target = coarse_source_frac / (1.0 - coarse_source_frac) * len(fine)
        p = min(1.0, target / len(coarse))
        for image, gt in coarse:
            if rng.random() < p:
                out.append(make_stl_sample(image, (gt >= 0.5).astype(np.uint8)))
    return out
