"""The promptable matting network.

Four parts: a small patch-embed transformer image encoder (stride 16), a
prompt encoder for points and boxes, a transformer decoder whose
token-to-image cross-attention is modulated by a prompt-derived mask, and a
hierarchical pixel decoder that fuses stride 2/4/8 image features with the
upsampled embedding to emit stride-2 mask features. A dot product between
mask features and the output token yields the matte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import cv2
import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from . import checkpoint as ckpt
from .core import ShapeError
from .losses import LossConfig, gradient_loss, l1_loss
from .prompts import (
    AttentionMask,
    BoxPrompt,
    PointPrompt,
    Prompt,
    PromptError,
    box_attention_mask,
    point_attention_mask,
    sample_box_prompt,
    sample_point_prompts,
    scribble_to_points,
)

PATCH_STRIDE = 16


@dataclass
class ModelConfig:
    input_size: int = 128
    embed_dim: int = 64
    heads: int = 4
    encoder_blocks: int = 2
    decoder_layers: int = 2
    pixel_dims: tuple[int, int, int] = (32, 16, 8)  # strides 8, 4, 2
    mask_token_count: int = 1
    sigma: float = 21.0
    seed: int = 0
    use_masked_attention: bool = True
    use_hierarchical_decoder: bool = True

    def __post_init__(self) -> None:
        if self.input_size % PATCH_STRIDE != 0:
            raise ValueError(f"input_size must be a multiple of {PATCH_STRIDE}")
        if self.embed_dim % self.heads != 0:
            raise ValueError("embed_dim must be divisible by heads")
        if self.embed_dim % 4 != 0:
            raise ValueError("embed_dim must be divisible by 4 (coordinate encoding)")
        self.pixel_dims = tuple(self.pixel_dims)

    @property
    def grid_size(self) -> int:
        return self.input_size // PATCH_STRIDE

    def to_json(self) -> dict:
        cfg = asdict(self)
        s8, s4, s2 = self.pixel_dims
        cfg["pixel_dims"] = {"s8": s8, "s4": s4, "s2": s2}
        return cfg

    @classmethod
    def from_json(cls, raw: dict) -> "ModelConfig":
        raw = dict(raw)
        pd = raw.get("pixel_dims")
        if isinstance(pd, dict):
            raw["pixel_dims"] = (pd["s8"], pd["s4"], pd["s2"])
        elif isinstance(pd, list):
            raw["pixel_dims"] = tuple(pd)
        return cls(**raw)


def coord_encoding(coords: torch.Tensor, dim: int) -> torch.Tensor:
    """Sinusoidal features for normalized (x, y) in [0, 1]^2.

    dim/4 geometric frequencies per axis spanning wavelengths from twice the
    canvas down to an eighth of it. The band stays below the feature-grid
    Nyquist rate so nearby cells get smoothly comparable encodings.
    """
    quarter = dim // 4
    k = torch.arange(quarter, dtype=coords.dtype, device=coords.device)
    omega = math.pi * torch.pow(
        torch.tensor(8.0, dtype=coords.dtype), k / max(1, quarter - 1)
    )
    ax = coords[..., 0:1] * omega
    ay = coords[..., 1:2] * omega
    return torch.cat([torch.sin(ax), torch.cos(ax), torch.sin(ay), torch.cos(ay)], dim=-1)


def _grid_coords(grid_h: int, grid_w: int, dtype: torch.dtype) -> torch.Tensor:
    """Normalized cell-center coordinates, row-major (grid_h*grid_w, 2)."""
    ys = (torch.arange(grid_h, dtype=dtype) + 0.5) / grid_h
    xs = (torch.arange(grid_w, dtype=dtype) + 0.5) / grid_w
    gy, gx = torch.meshgrid(ys, xs, indexing="ij")
    return torch.stack([gx.reshape(-1), gy.reshape(-1)], dim=-1)


# --------------------------------------------------------------------------
# Attention
# --------------------------------------------------------------------------

def _mask_to_tensor(mask: AttentionMask, dtype: torch.dtype) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(mask.values.reshape(-1))).to(dtype)


def masked_attention(
    q: torch.Tensor,
    k: torch.Tensor,
    v: torch.Tensor,
    num_heads: int,
    mask: AttentionMask | None = None,
    return_weights: bool = False,
):
    """Multi-head scaled dot-product attention with prompt-mask modulation.

    q: (nq, D), k/v: (nk, D). An additive mask is added to the scaled
    logits ({0, -inf}); a multiplicative mask scales them ([0, 1]). The mask
    is broadcast over heads and query positions along the key axis.
    """
    nq, dim = q.shape
    nk = k.shape[0]
    dh = dim // num_heads
    qh = q.reshape(nq, num_heads, dh).transpose(0, 1)
    kh = k.reshape(nk, num_heads, dh).transpose(0, 1)
    vh = v.reshape(nk, num_heads, dh).transpose(0, 1)

    logits = qh @ kh.transpose(-2, -1) / math.sqrt(dh)  # (heads, nq, nk)
    if mask is not None:
        m = _mask_to_tensor(mask, logits.dtype)
        if m.numel() != nk:
            raise ShapeError(f"mask has {m.numel()} cells but key grid has {nk}")
        if mask.kind == "additive":
            logits = logits + m
        elif mask.kind == "multiplicative":
            logits = logits * m
        else:
            raise ValueError(f"unknown mask kind: {mask.kind!r}")
    weights = torch.softmax(logits, dim=-1)
    out = (weights @ vh).transpose(0, 1).reshape(nq, dim)
    if return_weights:
        return out, weights
    return out


def masked_cross_attention(
    queries: torch.Tensor,
    keys: torch.Tensor,
    values: torch.Tensor,
    mask: AttentionMask | None = None,
    num_heads: int = 1,
) -> torch.Tensor:
    """Residual masked attention: queries + softmax(mask ∘ QK^T/sqrt(d)) V."""
    return queries + masked_attention(queries, keys, values, num_heads, mask)


class Attention(nn.Module):
    """Projected multi-head attention used throughout the decoder."""

    def __init__(self, dim: int, num_heads: int):
        super().__init__()
        self.num_heads = num_heads
        self.q_proj = nn.Linear(dim, dim)
        self.k_proj = nn.Linear(dim, dim)
        self.v_proj = nn.Linear(dim, dim)
        self.out_proj = nn.Linear(dim, dim)

    def forward(self, q_in, k_in, v_in, mask=None, return_weights=False):
        result = masked_attention(
            self.q_proj(q_in),
            self.k_proj(k_in),
            self.v_proj(v_in),
            self.num_heads,
            mask,
            return_weights,
        )
        if return_weights:
            out, weights = result
            return self.out_proj(out), weights
        return self.out_proj(result)


class Mlp(nn.Module):
    def __init__(self, dim: int, ratio: int = 4):
        super().__init__()
        self.fc1 = nn.Linear(dim, dim * ratio)
        self.fc2 = nn.Linear(dim * ratio, dim)

    def forward(self, x):
        return self.fc2(F.gelu(self.fc1(x)))


# --------------------------------------------------------------------------
# Image encoder
# --------------------------------------------------------------------------

class EncoderBlock(nn.Module):
    def __init__(self, dim: int, num_heads: int):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attn = Attention(dim, num_heads)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = Mlp(dim)

    def forward(self, x):
        h = self.norm1(x)
        x = x + self.attn(h, h, h)
        return x + self.mlp(self.norm2(x))


class ImageEncoder(nn.Module):
    """Patch-embed transformer producing a stride-16 embedding grid."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.patch_embed = nn.Conv2d(3, cfg.embed_dim, PATCH_STRIDE, stride=PATCH_STRIDE)
        self.blocks = nn.ModuleList(
            EncoderBlock(cfg.embed_dim, cfg.heads) for _ in range(cfg.encoder_blocks)
        )

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        """image: (3, S, S) -> embedding (grid, grid, D)."""
        if image.shape[-2:] != (self.cfg.input_size, self.cfg.input_size):
            raise ShapeError(
                f"encoder expects {self.cfg.input_size}x{self.cfg.input_size}, "
                f"got {tuple(image.shape[-2:])}"
            )
        x = self.patch_embed(image.unsqueeze(0)).squeeze(0)  # (D, g, g)
        g = x.shape[-1]
        tokens = x.reshape(self.cfg.embed_dim, g * g).T
        tokens = tokens + coord_encoding(_grid_coords(g, g, tokens.dtype), self.cfg.embed_dim)
        for block in self.blocks:
            tokens = block(tokens)
        return tokens.reshape(g, g, self.cfg.embed_dim)


# --------------------------------------------------------------------------
# Prompt encoder
# --------------------------------------------------------------------------

class PromptEncoder(nn.Module):
    """Points and box corners to tokens, plus learned output tokens."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.label_embed = nn.Embedding(2, cfg.embed_dim)  # 0: pos, 1: neg
        self.corner_embed = nn.Embedding(2, cfg.embed_dim)  # 0: top-left, 1: bottom-right
        self.mask_tokens = nn.Parameter(torch.zeros(cfg.mask_token_count, cfg.embed_dim))
        nn.init.normal_(self.mask_tokens, std=0.02)

    def forward(
        self, points: list[PointPrompt], box: BoxPrompt | None
    ) -> tuple[torch.Tensor, torch.Tensor]:
        if not points and box is None:
            raise PromptError("prompt encoder requires at least one prompt element")
        size = float(self.cfg.input_size)
        dtype = self.mask_tokens.dtype
        tokens = []
        for p in points:
            xy = torch.tensor([p.x / size, p.y / size], dtype=dtype)
            enc = coord_encoding(xy, self.cfg.embed_dim)
            tokens.append(enc + self.label_embed.weight[0 if p.positive else 1])
        if box is not None:
            for idx, (x, y) in enumerate(((box.x0, box.y0), (box.x1, box.y1))):
                xy = torch.tensor([x / size, y / size], dtype=dtype)
                enc = coord_encoding(xy, self.cfg.embed_dim)
                tokens.append(enc + self.corner_embed.weight[idx])
        return torch.stack(tokens), self.mask_tokens


# --------------------------------------------------------------------------
# Transformer decoder
# --------------------------------------------------------------------------

class DecoderLayer(nn.Module):
    """Token self-attention, masked token-to-image cross-attention, MLP,
    then image-to-token cross-attention updating the embedding.

    Pre-norm residuals throughout: the stack has to train from scratch
    without a warmup-heavy schedule.
    """

    def __init__(self, dim: int, num_heads: int):
        super().__init__()
        self.self_attn = Attention(dim, num_heads)
        self.t2i = Attention(dim, num_heads)
        self.mlp = Mlp(dim)
        self.i2t = Attention(dim, num_heads)
        self.norm1 = nn.LayerNorm(dim)
        self.norm2 = nn.LayerNorm(dim)
        self.norm3 = nn.LayerNorm(dim)
        self.norm4 = nn.LayerNorm(dim)
        self.norm_img = nn.LayerNorm(dim)
        self.norm_tok = nn.LayerNorm(dim)

    def forward(self, tokens, emb, pe, mask, capture=None):
        h = self.norm1(tokens)
        tokens = tokens + self.self_attn(h, h, h)
        emb_n = self.norm_img(emb)
        t2i_out, weights = self.t2i(self.norm2(tokens), emb_n + pe, emb_n, mask, return_weights=True)
        if capture is not None:
            capture.setdefault("t2i_weights", []).append(weights.detach())
            capture.setdefault("t2i_out", []).append(t2i_out.detach())
        tokens = tokens + t2i_out
        tokens = tokens + self.mlp(self.norm3(tokens))
        tokens_n = self.norm_tok(tokens)
        emb = emb + self.i2t(self.norm4(emb) + pe, tokens_n, tokens_n)
        return tokens, emb


class TransformerDecoder(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.layers = nn.ModuleList(
            DecoderLayer(cfg.embed_dim, cfg.heads) for _ in range(cfg.decoder_layers)
        )

    def forward(self, emb, tokens, pe, mask, capture=None):
        """emb/pe: (n_cells, D); tokens: (n_tokens, D). The prompt mask is
        applied in token-to-image attention only."""
        for layer in self.layers:
            tokens, emb = layer(tokens, emb, pe, mask, capture)
        return tokens, emb


# --------------------------------------------------------------------------
# Pixel decoders and mask head
# --------------------------------------------------------------------------

class ConvBlock(nn.Module):
    def __init__(self, c_in: int, c_out: int, stride: int = 1):
        super().__init__()
        self.conv = nn.Conv2d(c_in, c_out, 3, stride=stride, padding=1)
        self.norm = nn.GroupNorm(min(4, c_out), c_out)

    def forward(self, x):
        return F.gelu(self.norm(self.conv(x)))


def _up2(x: torch.Tensor) -> torch.Tensor:
    return F.interpolate(x, scale_factor=2, mode="bilinear", align_corners=False)


class HierarchicalPixelDecoder(nn.Module):
    """Pyramid of stride 2/4/8 image features fused with the upsampled
    embedding; emits stride-2 mask features."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        c8, c4, c2 = cfg.pixel_dims
        self.cfg = cfg
        self.stem2 = ConvBlock(3, c2, stride=2)
        self.stem4 = ConvBlock(c2, c4, stride=2)
        self.stem8 = ConvBlock(c4, c8, stride=2)
        self.fuse8 = ConvBlock(cfg.embed_dim + c8, c8)
        self.fuse4 = ConvBlock(c8 + c4, c4)
        self.fuse2 = ConvBlock(c4 + c2, c2)
        self.out = nn.Conv2d(c2, c2, 1)

    def forward(self, image: torch.Tensor, emb_grid: torch.Tensor) -> torch.Tensor:
        """image: (3, S, S); emb_grid: (g, g, D) -> (c2, S/2, S/2)."""
        if image.shape[-2:] != (self.cfg.input_size, self.cfg.input_size):
            raise ShapeError(f"pixel decoder expects size {self.cfg.input_size}")
        img = image.unsqueeze(0)
        f2 = self.stem2(img)
        f4 = self.stem4(f2)
        f8 = self.stem8(f4)
        x = emb_grid.permute(2, 0, 1).unsqueeze(0)  # (1, D, g, g) at stride 16
        x = self.fuse8(torch.cat([_up2(x), f8], dim=1))
        x = self.fuse4(torch.cat([_up2(x), f4], dim=1))
        x = self.fuse2(torch.cat([_up2(x), f2], dim=1))
        return self.out(x).squeeze(0)


class SimplePixelDecoder(nn.Module):
    """Ablation baseline: upsample the embedding straight to stride 2
    without image-side features."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        c8, _, c2 = cfg.pixel_dims
        self.cfg = cfg
        self.conv1 = ConvBlock(cfg.embed_dim, c8)
        self.out = nn.Conv2d(c8, c2, 1)

    def forward(self, image: torch.Tensor, emb_grid: torch.Tensor) -> torch.Tensor:
        x = emb_grid.permute(2, 0, 1).unsqueeze(0)
        x = _up2(_up2(_up2(x)))  # stride 16 -> 2
        return self.out(self.conv1(x)).squeeze(0)


LOGIT_CAP = 8.0


class MaskHead(nn.Module):
    """Token-conditioned dot product over mask features, upsampled to full
    resolution and squashed to [0, 1].

    The logit field is mean-centered before the sigmoid. Mattes are mostly
    exact zeros, so the L1 term exerts a constant downward pull that an
    uncentered head satisfies by saturating the sigmoid uniformly, killing
    all gradients; centering removes that direction entirely and turns the
    pull into foreground/background contrast. A wide soft cap guards the
    tails. Centering a constant field yields 0, so a zero token still maps
    to a uniform 0.5 matte.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.proj = nn.Linear(cfg.embed_dim, cfg.pixel_dims[2], bias=False)

    def forward(self, mask_features: torch.Tensor, token: torch.Tensor) -> torch.Tensor:
        t = self.proj(token)
        logits = torch.einsum("chw,c->hw", mask_features, t)
        logits = logits - logits.mean()
        logits = LOGIT_CAP * torch.tanh(logits / LOGIT_CAP)
        logits = F.interpolate(
            logits.unsqueeze(0).unsqueeze(0), scale_factor=2, mode="bilinear",
            align_corners=False,
        ).squeeze(0).squeeze(0)
        return torch.sigmoid(logits)


# --------------------------------------------------------------------------
# Full model
# --------------------------------------------------------------------------

class MattingModel(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        with torch.random.fork_rng():
            torch.manual_seed(cfg.seed)
            self.image_encoder = ImageEncoder(cfg)
            self.prompt_encoder = PromptEncoder(cfg)
            self.decoder = TransformerDecoder(cfg)
            if cfg.use_hierarchical_decoder:
                self.pixel_decoder = HierarchicalPixelDecoder(cfg)
            else:
                self.pixel_decoder = SimplePixelDecoder(cfg)
            self.mask_head = MaskHead(cfg)

    def _dtype(self) -> torch.dtype:
        return self.prompt_encoder.mask_tokens.dtype

    def build_attention_mask(self, prompt_points, box) -> AttentionMask | None:
        if not self.cfg.use_masked_attention:
            return None
        g = self.cfg.grid_size
        s = self.cfg.input_size
        if box is not None:
            return box_attention_mask(box, g, g, s, s)
        if any(p.positive for p in prompt_points):
            return point_attention_mask(prompt_points, self.cfg.sigma, g, g, s, s)
        return None

    def forward_full(
        self, image: torch.Tensor, prompt: Prompt, capture: dict | None = None
    ) -> torch.Tensor:
        """image: (3, S, S) tensor at the configured input size."""
        if prompt.empty:
            raise PromptError("prompt must contain at least one element")
        points = list(prompt.points)
        if prompt.scribble is not None:
            points.extend(scribble_to_points(prompt.scribble))

        emb = self.image_encoder(image)
        g = emb.shape[0]
        emb_seq = emb.reshape(g * g, self.cfg.embed_dim)
        pe = coord_encoding(_grid_coords(g, g, emb_seq.dtype), self.cfg.embed_dim)

        prompt_tokens, output_tokens = self.prompt_encoder(points, prompt.box)
        tokens = torch.cat([output_tokens, prompt_tokens], dim=0)
        mask = self.build_attention_mask(points, prompt.box)

        tokens_out, emb_out = self.decoder(emb_seq, tokens, pe, mask, capture)
        mask_features = self.pixel_decoder(image, emb_out.reshape(g, g, -1))
        return self.mask_head(mask_features, tokens_out[0])

    # -- numpy-facing inference ------------------------------------------------

    def _prepare(self, image: np.ndarray, prompt: Prompt):
        """Aspect-preserving resize + zero pad to the square input size;
        prompt coordinates are scaled along with the image."""
        H, W = image.shape[:2]
        S = self.cfg.input_size
        scale = S / max(H, W)
        nh, nw = round(H * scale), round(W * scale)
        if (nh, nw) != (H, W):
            resized = cv2.resize(image.astype(np.float32), (nw, nh), interpolation=cv2.INTER_LINEAR)
        else:
            resized = image.astype(np.float32)
        padded = np.zeros((S, S, 3), dtype=np.float32)
        padded[:nh, :nw] = resized

        def sp(v: float, axis_scale: float) -> float:
            return v * axis_scale

        sx = nw / W
        sy = nh / H
        points = [PointPrompt(x=sp(p.x, sx), y=sp(p.y, sy), label=p.label) for p in prompt.points]
        box = None
        if prompt.box is not None:
            box = BoxPrompt(
                x0=sp(prompt.box.x0, sx), y0=sp(prompt.box.y0, sy),
                x1=sp(prompt.box.x1, sx), y1=sp(prompt.box.y1, sy),
            )
        scribble = None
        if prompt.scribble is not None:
            from .prompts import Scribble

            scribble = Scribble(tuple((sp(x, sx), sp(y, sy)) for x, y in prompt.scribble.vertices))
        return padded, Prompt(points=points, box=box, scribble=scribble), (nh, nw)

    @torch.no_grad()
    def predict(self, image: np.ndarray, prompt: Prompt) -> np.ndarray:
        """Full inference on an arbitrary-size image; returns an alpha matte
        of the original size, values in [0, 1]."""
        H, W = image.shape[:2]
        padded, scaled_prompt, (nh, nw) = self._prepare(image, prompt)
        tensor = torch.from_numpy(padded.transpose(2, 0, 1)).to(self._dtype())
        matte = self.forward_full(tensor, scaled_prompt).cpu().numpy()
        matte = matte[:nh, :nw]
        if (nh, nw) != (H, W):
            matte = cv2.resize(matte.astype(np.float32), (W, H), interpolation=cv2.INTER_LINEAR)
        return np.clip(matte.astype(np.float32), 0.0, 1.0)


# --------------------------------------------------------------------------
# Training
# --------------------------------------------------------------------------

def _training_prompt(gt: np.ndarray, rng: np.random.Generator) -> Prompt:
    """Box or point prompt (uniform choice), falling back to a full-image box
    when the matte has no firm foreground."""
    H, W = gt.shape
    use_box = bool(rng.random() < 0.5)
    seed = int(rng.integers(2**31))
    try:
        if use_box:
            return Prompt(box=sample_box_prompt(gt, jitter_frac=0.1, seed=seed))
        n = int(rng.integers(1, 13))
        return Prompt(points=sample_point_prompts(gt, n_points=n, seed=seed))
    except PromptError:
        return Prompt(box=BoxPrompt(x0=0.0, y0=0.0, x1=W - 1.0, y1=H - 1.0))


def train_step(
    batch: list[tuple[np.ndarray, np.ndarray]],
    model: MattingModel,
    optimizer: torch.optim.Optimizer,
    loss_cfg: LossConfig,
    rng: np.random.Generator,
) -> dict[str, float]:
    """One gradient step over a batch of (image, gt_matte) pairs."""
    optimizer.zero_grad()
    dtype = model._dtype()
    total = {"loss": 0.0, "l1": 0.0, "grad": 0.0}
    for image, gt in batch:
        prompt = _training_prompt(gt, rng)
        tensor = torch.from_numpy(np.ascontiguousarray(image.transpose(2, 0, 1))).to(dtype)
        pred = model.forward_full(tensor, prompt)
        gt_t = torch.from_numpy(np.ascontiguousarray(gt)).to(dtype)
        l1 = l1_loss(pred, gt_t)
        grad = gradient_loss(pred, gt_t)
        loss = l1 + loss_cfg.lambda_grad * grad
        (loss / len(batch)).backward()
        total["loss"] += float(loss.detach()) / len(batch)
        total["l1"] += float(l1.detach()) / len(batch)
        total["grad"] += float(grad.detach()) / len(batch)
    if not math.isfinite(total["loss"]):
        raise RuntimeError(f"non-finite training loss: {total}")
    optimizer.step()
    return total


def train_matting_model(
    samples: list[tuple[np.ndarray, np.ndarray]],
    cfg: ModelConfig,
    steps: int,
    batch_size: int = 4,
    lr: float = 1e-3,
    loss_cfg: LossConfig | None = None,
    cosine_decay: bool = True,
    log_every: int = 50,
    log=None,
) -> tuple[MattingModel, list[dict[str, float]]]:
    """Deterministic training loop; returns the model and per-step stats."""
    loss_cfg = loss_cfg or LossConfig()
    model = MattingModel(cfg)
    optimizer = torch.optim.AdamW(model.parameters(), lr=lr, weight_decay=0.01)
    rng = np.random.default_rng(cfg.seed)
    stats = []
    for step in range(steps):
        if cosine_decay:
            # full lr from step 0: a warmup lets the mostly-background L1
            # pressure erase the initial feature alignment before updates
            # are big enough to amplify it, stranding the model at the
            # uniform-output saddle
            scale = 0.5 * (1.0 + math.cos(math.pi * step / max(1, steps)))
            for group in optimizer.param_groups:
                group["lr"] = lr * scale
        idx = rng.integers(0, len(samples), size=min(batch_size, len(samples)))
        batch = [samples[i] for i in idx]
        stat = train_step(batch, model, optimizer, loss_cfg, rng)
        stats.append(stat)
        if log is not None and (step % log_every == 0 or step == steps - 1):
            log(f"step {step}: loss={stat['loss']:.4f} l1={stat['l1']:.4f} grad={stat['grad']:.4f}")
    return model, stats


# --------------------------------------------------------------------------
# Checkpoints
# --------------------------------------------------------------------------

MODEL_KIND = "matting"


def save_model(path, model: MattingModel, step: int = 0) -> None:
    tensors = {k: v.detach().cpu().numpy() for k, v in model.state_dict().items()}
    ckpt.save_checkpoint(path, MODEL_KIND, model.cfg.to_json(), tensors, step)


def load_model(path) -> tuple[MattingModel, int]:
    kind, config, tensors, step = ckpt.load_checkpoint(path)
    if kind != MODEL_KIND:
        raise ValueError(f"checkpoint kind {kind!r} is not a matting model")
    cfg = ModelConfig.from_json(config)
    model = MattingModel(cfg)
    state = {k: torch.from_numpy(v) for k, v in tensors.items()}
    expected = {k: tuple(v.shape) for k, v in model.state_dict().items()}
    actual = {k: tuple(v.shape) for k, v in state.items()}
    if expected != actual:
        missing = set(expected) ^ set(actual)
        mismatched = {k for k in expected.keys() & actual.keys() if expected[k] != actual[k]}
        raise ValueError(f"checkpoint weights inconsistent with config: {missing or mismatched}")
    model.load_state_dict(state)
    model.eval()
    return model, step
