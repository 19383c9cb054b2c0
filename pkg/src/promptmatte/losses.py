"""Training objective for the converter and the matting network.

The matte loss is an L1 term plus a weighted gradient term on forward
differences. Both terms are per-pixel means so the default weight works
across canvas sizes. Functions accept torch tensors (differentiable) or
numpy arrays (returning plain floats).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .core import ShapeError


@dataclass
class LossConfig:
    lambda_grad: float = 10.0

    def __post_init__(self) -> None:
        if self.lambda_grad <= 0:
            raise ValueError("lambda_grad must be > 0")


def _as_tensor(x: np.ndarray | torch.Tensor) -> tuple[torch.Tensor, bool]:
    if isinstance(x, torch.Tensor):
        return x, True
    return torch.from_numpy(np.asarray(x, dtype=np.float64)), False


def _check_sizes(pred: torch.Tensor, gt: torch.Tensor) -> None:
    if pred.shape != gt.shape:
        raise ShapeError(f"size mismatch: {tuple(pred.shape)} vs {tuple(gt.shape)}")


def l1_loss(pred, gt):
    """Mean absolute difference between two mattes."""
    p, p_t = _as_tensor(pred)
    g, g_t = _as_tensor(gt)
    _check_sizes(p, g)
    out = (p - g).abs().mean()
    return out if (p_t or g_t) else float(out)


def _forward_diffs(m: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    # forward differences; last column/row padded with zero so shapes match
    gx = torch.zeros_like(m)
    gy = torch.zeros_like(m)
    gx[..., :, :-1] = m[..., :, 1:] - m[..., :, :-1]
    gy[..., :-1, :] = m[..., 1:, :] - m[..., :-1, :]
    return gx, gy


def gradient_loss(pred, gt):
    """Mean absolute difference of horizontal plus vertical forward gradients."""
    p, p_t = _as_tensor(pred)
    g, g_t = _as_tensor(gt)
    _check_sizes(p, g)
    px, py = _forward_diffs(p)
    gx, gy = _forward_diffs(g)
    out = ((px - gx).abs() + (py - gy).abs()).mean()
    return out if (p_t or g_t) else float(out)


def matte_loss(pred, gt, cfg: LossConfig | None = None):
    """l1 + lambda_grad * gradient loss."""
    cfg = cfg or LossConfig()
    l1 = l1_loss(pred, gt)
    grad = gradient_loss(pred, gt)
    return l1 + cfg.lambda_grad * grad
