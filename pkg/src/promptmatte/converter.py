"""Segmentation-to-matte label converter.

A coarse binary mask plus the image go through a small U-shaped network
that predicts a full matte. Training degrades ground-truth mattes into
synthetic coarse masks on the fly, applies paired random cut-out to input
and target (spatial generalization), and mixes in non-transformable samples
whose target equals the input mask so coarse objects pass through unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import cv2
import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from . import checkpoint as ckpt
from .core import (
    Manifest,
    ObjectRecord,
    SampleRecord,
    ShapeError,
    load_image,
    load_matte,
    save_manifest,
    save_matte,
)
from .losses import LossConfig, gradient_loss, l1_loss


@dataclass
class DegradeSpec:
    threshold: float = 0.5
    downscale_range: tuple[int, int] = (2, 8)
    blur_sigma_range: tuple[float, float] = (0.5, 3.0)
    morph_radius_range: tuple[int, int] = (1, 4)
    use_convex_hull_prob: float = 0.2
    seed: int = 0

    def __post_init__(self) -> None:
        if self.downscale_range[0] > self.downscale_range[1]:
            raise ValueError("downscale_range must be nonempty")
        if self.blur_sigma_range[0] > self.blur_sigma_range[1]:
            raise ValueError("blur_sigma_range must be nonempty")
        if self.morph_radius_range[0] > self.morph_radius_range[1]:
            raise ValueError("morph_radius_range must be nonempty")
        if not 0.0 <= self.use_convex_hull_prob <= 1.0:
            raise ValueError("use_convex_hull_prob must be in [0, 1]")

    def with_seed(self, seed: int) -> "DegradeSpec":
        return replace(self, seed=seed)


@dataclass
class ConverterSample:
    image: np.ndarray
    seg: np.ndarray
    gt_matte: np.ndarray
    transformable: bool


def _disc_kernel(radius: int) -> np.ndarray:
    size = 2 * radius + 1
    return cv2.getStructuringElement(cv2.MORPH_ELLIPSE, (size, size))


def _convex_hull(mask: np.ndarray) -> np.ndarray:
    points = cv2.findNonZero(mask)
    if points is None:
        return mask
    hull = cv2.convexHull(points)
    out = np.zeros_like(mask)
    cv2.fillConvexPoly(out, hull, 1)
    return out


def degrade_matte(matte: np.ndarray, spec: DegradeSpec) -> np.ndarray:
    """Binarize a matte and roughen it with a random subset of degradations.

    Candidate ops: down-up rescale, blur + rebinarize, dilate, erode, convex
    hull. Each of the first four is included with probability 0.5; the hull
    with spec.use_convex_hull_prob; the empty subset is redrawn. Output is
    strictly binary, uint8 {0, 1}, deterministic per seed.
    """
    rng = np.random.default_rng(spec.seed)
    base = (matte >= spec.threshold).astype(np.uint8)

    while True:
        use = {
            "rescale": rng.random() < 0.5,
            "blur": rng.random() < 0.5,
            "dilate": rng.random() < 0.5,
            "erode": rng.random() < 0.5,
            "hull": rng.random() < spec.use_convex_hull_prob,
        }
        if any(use.values()):
            break

    params = {
        "rescale": int(rng.integers(spec.downscale_range[0], spec.downscale_range[1] + 1)),
        "blur": float(rng.uniform(*spec.blur_sigma_range)),
        "dilate": int(rng.integers(spec.morph_radius_range[0], spec.morph_radius_range[1] + 1)),
        "erode": int(rng.integers(spec.morph_radius_range[0], spec.morph_radius_range[1] + 1)),
    }

    def apply(mask: np.ndarray, erode_radius: int) -> np.ndarray:
        out = mask
        if use["rescale"]:
            f = params["rescale"]
            h, w = out.shape
            small = cv2.resize(
                out.astype(np.float32),
                (max(1, math.ceil(w / f)), max(1, math.ceil(h / f))),
                interpolation=cv2.INTER_AREA,
            )
            out = (cv2.resize(small, (w, h), interpolation=cv2.INTER_LINEAR) >= 0.5).astype(np.uint8)
        if use["blur"]:
            sigma = params["blur"]
            k = 2 * math.ceil(3 * sigma) + 1
            blurred = cv2.GaussianBlur(out.astype(np.float32), (k, k), sigma)
            out = (blurred >= 0.5).astype(np.uint8)
        if use["dilate"]:
            out = cv2.dilate(out, _disc_kernel(params["dilate"]))
        if use["erode"] and erode_radius > 0:
            out = cv2.erode(out, _disc_kernel(erode_radius))
        if use["hull"]:
            out = _convex_hull(out)
        return out

    result = apply(base, params["erode"])
    if not result.any():
        result = apply(base, max(0, params["erode"] // 2))
    if not result.any():
        result = base
    return result


def sga_cutout(
    seg: np.ndarray, matte: np.ndarray, p: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """With probability p, zero 1-3 random rectangles (sides 10-40% of the
    image side) in both the mask and the matte at identical coordinates."""
    if seg.shape != matte.shape:
        raise ShapeError(f"size mismatch: {seg.shape} vs {matte.shape}")
    rng = np.random.default_rng(seed)
    if rng.random() >= p:
        return seg, matte
    H, W = seg.shape
    seg_out = seg.copy()
    matte_out = matte.copy()
    n_rects = int(rng.integers(1, 4))
    for _ in range(n_rects):
        w = int(round(rng.uniform(0.10, 0.40) * W))
        h = int(round(rng.uniform(0.10, 0.40) * H))
        x0 = int(rng.integers(0, max(1, W - w)))
        y0 = int(rng.integers(0, max(1, H - h)))
        seg_out[y0 : y0 + h, x0 : x0 + w] = 0
        matte_out[y0 : y0 + h, x0 : x0 + w] = 0
    return seg_out, matte_out


def make_stl_sample(image: np.ndarray, coarse_seg: np.ndarray) -> ConverterSample:
    """Non-transformable sample: the target matte equals the input mask."""
    seg = coarse_seg.astype(np.uint8)
    return ConverterSample(
        image=image,
        seg=seg,
        gt_matte=seg.astype(np.float32),
        transformable=False,
    )


# --------------------------------------------------------------------------
# Converter network
# --------------------------------------------------------------------------

@dataclass
class ConverterConfig:
    input_size: int = 128
    channels: tuple[int, int, int, int] = (8, 16, 32, 64)  # strides 1, 2, 4, 8
    seed: int = 0

    def __post_init__(self) -> None:
        if self.input_size % 8 != 0:
            raise ValueError("input_size must be divisible by 8")
        self.channels = tuple(self.channels)

    def to_json(self) -> dict:
        return {"input_size": self.input_size, "channels": list(self.channels), "seed": self.seed}

    @classmethod
    def from_json(cls, raw: dict) -> "ConverterConfig":
        raw = dict(raw)
        raw["channels"] = tuple(raw.get("channels", (8, 16, 32, 64)))
        return cls(**raw)


class _Block(nn.Module):
    def __init__(self, c_in: int, c_out: int, stride: int = 1):
        super().__init__()
        self.conv = nn.Conv2d(c_in, c_out, 3, stride=stride, padding=1)
        self.norm = nn.GroupNorm(min(4, c_out), c_out)

    def forward(self, x):
        return F.gelu(self.norm(self.conv(x)))


class ConverterNet(nn.Module):
    """U-shaped encoder-decoder over a 4-channel (RGB + mask) input with
    skip connections at strides 1, 2, 4, and 8."""

    def __init__(self, cfg: ConverterConfig):
        super().__init__()
        self.cfg = cfg
        c1, c2, c3, c4 = cfg.channels
        with torch.random.fork_rng():
            torch.manual_seed(cfg.seed)
            self.enc1 = _Block(4, c1)
            self.enc2 = _Block(c1, c2, stride=2)
            self.enc3 = _Block(c2, c3, stride=2)
            self.enc4 = _Block(c3, c4, stride=2)
            self.dec3 = _Block(c4 + c3, c3)
            self.dec2 = _Block(c3 + c2, c2)
            self.dec1 = _Block(c2 + c1, c1)
            self.out = nn.Conv2d(c1, 1, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """x: (4, S, S) -> matte (S, S) in [0, 1]."""
        if x.shape[-2:] != (self.cfg.input_size, self.cfg.input_size):
            raise ShapeError(
                f"converter expects {self.cfg.input_size}x{self.cfg.input_size}, "
                f"got {tuple(x.shape[-2:])}"
            )
        x = x.unsqueeze(0)
        e1 = self.enc1(x)
        e2 = self.enc2(e1)
        e3 = self.enc3(e2)
        e4 = self.enc4(e3)
        up = lambda t: F.interpolate(t, scale_factor=2, mode="bilinear", align_corners=False)
        d3 = self.dec3(torch.cat([up(e4), e3], dim=1))
        d2 = self.dec2(torch.cat([up(d3), e2], dim=1))
        d1 = self.dec1(torch.cat([up(d2), e1], dim=1))
        return torch.sigmoid(self.out(d1)).squeeze(0).squeeze(0)


def converter_forward(image: np.ndarray, seg: np.ndarray, model: ConverterNet) -> np.ndarray:
    """Predict a matte from an image and a binary mask of the same size."""
    if image.shape[:2] != seg.shape:
        raise ShapeError(f"size mismatch: {image.shape[:2]} vs {seg.shape}")
    x = np.concatenate(
        [image.transpose(2, 0, 1), seg[None].astype(np.float32)], axis=0
    ).astype(np.float32)
    with torch.no_grad():
        matte = model(torch.from_numpy(x).to(next(model.parameters()).dtype))
    return np.clip(matte.cpu().numpy().astype(np.float32), 0.0, 1.0)


# --------------------------------------------------------------------------
# Training
# --------------------------------------------------------------------------

@dataclass
class ConverterTrainConfig:
    steps: int = 400
    batch_size: int = 4
    lr: float = 1e-3
    sga_probability: float = 0.5
    use_sga: bool = True
    lambda_grad: float = 10.0
    degrade: DegradeSpec | None = None
    seed: int = 0


def _sample_inputs(
    sample: ConverterSample, degrade: DegradeSpec, use_sga: bool, p: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Per-step training view of a sample: fresh degradation for
    transformable samples, then paired cut-out."""
    if sample.transformable:
        seg = degrade_matte(sample.gt_matte, degrade.with_seed(seed))
    else:
        seg = sample.seg
    gt = sample.gt_matte
    if use_sga:
        seg, gt = sga_cutout(seg, gt, p, seed=seed + 1)
    return seg, gt


def train_converter(
    trainset: list[ConverterSample],
    cfg: ConverterConfig,
    train_cfg: ConverterTrainConfig | None = None,
    log=None,
) -> tuple[ConverterNet, list[dict[str, float]]]:
    """Train the converter; deterministic given (trainset, configs)."""
    train_cfg = train_cfg or ConverterTrainConfig()
    degrade = train_cfg.degrade or DegradeSpec()
    loss_cfg = LossConfig(lambda_grad=train_cfg.lambda_grad)
    model = ConverterNet(cfg)
    optimizer = torch.optim.AdamW(model.parameters(), lr=train_cfg.lr, weight_decay=0.01)
    rng = np.random.default_rng(train_cfg.seed)
    stats = []
    for step in range(train_cfg.steps):
        idx = rng.integers(0, len(trainset), size=min(train_cfg.batch_size, len(trainset)))
        optimizer.zero_grad()
        total = {"loss": 0.0, "l1": 0.0, "grad": 0.0}
        for i in idx:
            sample = trainset[int(i)]
            seg, gt = _sample_inputs(
                sample, degrade, train_cfg.use_sga, train_cfg.sga_probability,
                seed=int(rng.integers(2**31)),
            )
            x = np.concatenate(
                [sample.image.transpose(2, 0, 1), seg[None].astype(np.float32)], axis=0
            )
            pred = model(torch.from_numpy(x.astype(np.float32)))
            gt_t = torch.from_numpy(np.ascontiguousarray(gt, dtype=np.float32))
            l1 = l1_loss(pred, gt_t)
            grad = gradient_loss(pred, gt_t)
            loss = l1 + loss_cfg.lambda_grad * grad
            (loss / len(idx)).backward()
            total["loss"] += float(loss.detach()) / len(idx)
            total["l1"] += float(l1.detach()) / len(idx)
            total["grad"] += float(grad.detach()) / len(idx)
        if not math.isfinite(total["loss"]):
            raise RuntimeError(f"non-finite converter loss at step {step}: {total}")
        optimizer.step()
        stats.append(total)
        if log is not None and (step % 50 == 0 or step == train_cfg.steps - 1):
            log(f"converter step {step}: loss={total['loss']:.4f}")
    return model, stats


# --------------------------------------------------------------------------
# Checkpoints and batch conversion
# --------------------------------------------------------------------------

CONVERTER_KIND = "converter"


def save_converter(path, model: ConverterNet, step: int = 0) -> None:
    tensors = {k: v.detach().cpu().numpy() for k, v in model.state_dict().items()}
    ckpt.save_checkpoint(path, CONVERTER_KIND, model.cfg.to_json(), tensors, step)


def load_converter(path) -> tuple[ConverterNet, int]:
    kind, config, tensors, step = ckpt.load_checkpoint(path)
    if kind != CONVERTER_KIND:
        raise ValueError(f"checkpoint kind {kind!r} is not a converter")
    model = ConverterNet(ConverterConfig.from_json(config))
    state = {k: torch.from_numpy(v) for k, v in tensors.items()}
    expected = {k: tuple(v.shape) for k, v in model.state_dict().items()}
    actual = {k: tuple(v.shape) for k, v in state.items()}
    if expected != actual:
        raise ValueError("checkpoint weights inconsistent with config")
    model.load_state_dict(state)
    model.eval()
    return model, step


def convert_dataset(
    manifest: Manifest,
    manifest_path,
    model: ConverterNet,
    out_dir,
    degrade_spec: DegradeSpec | None = None,
    degrade_first: bool = True,
) -> Manifest:
    """Convert every object's label to a matte via the converter.

    With degrade_first, stored mattes are first turned into coarse binary
    masks (deterministic per manifest seed) to stand in for real coarse
    segmentation labels; otherwise stored labels are binarized directly.
    """
    from pathlib import Path
    import shutil

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "images").mkdir(exist_ok=True)
    (out_dir / "mattes").mkdir(exist_ok=True)
    root = Path(manifest_path).parent
    spec = degrade_spec or DegradeSpec()

    out_samples = []
    for si, sample in enumerate(manifest.samples):
        image = load_image(root / sample.image_path)
        image_rel = f"images/{sample.id}.png"
        target = out_dir / image_rel
        if not target.exists():
            shutil.copyfile(root / sample.image_path, target)
        out_objects = []
        for obj in sample.objects:
            gt = load_matte(root / obj.matte_path)
            if degrade_first:
                seg = degrade_matte(gt, spec.with_seed(manifest.seed + 7919 * si + obj.id))
            else:
                seg = (gt >= 0.5).astype(np.uint8)
            matte = converter_forward(image, seg, model)
            matte_rel = f"mattes/{sample.id}_{obj.id}_matte.png"
            save_matte(out_dir / matte_rel, matte)
            out_objects.append(
                ObjectRecord(
                    id=obj.id,
                    matte_path=matte_rel,
                    granularity=obj.granularity,
                    predefined_points=obj.predefined_points,
                    predefined_box=obj.predefined_box,
                )
            )
        out_samples.append(SampleRecord(id=sample.id, image_path=image_rel, objects=out_objects))

    out_manifest = Manifest(seed=manifest.seed, samples=out_samples)
    save_manifest(out_manifest, out_dir / "manifest.json")
    return out_manifest
