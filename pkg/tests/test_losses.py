from __future__ import annotations

import numpy as np
import pytest
import torch

from oracles import oracle_gradient_loss, oracle_l1
from promptmatte.core import ShapeError
from promptmatte.losses import LossConfig, gradient_loss, l1_loss, matte_loss


class TestL1:
    def test_equal_zero(self, rng):
        m = rng.random((8, 8))
        assert l1_loss(m, m) == 0.0

    def test_constant_offset(self):
        pred = np.full((8, 8), 0.7)
        gt = np.full((8, 8), 0.4)
        assert l1_loss(pred, gt) == pytest.approx(0.3, abs=1e-12)

    def test_matches_oracle(self, rng):
        pred, gt = rng.random((8, 8)), rng.random((8, 8))
        assert l1_loss(pred, gt) == pytest.approx(oracle_l1(pred, gt), abs=1e-12)

    def test_size_mismatch(self, rng):
        with pytest.raises(ShapeError):
            l1_loss(rng.random((8, 8)), rng.random((8, 9)))


class TestGradientLoss:
    def test_equal_zero(self, rng):
        m = rng.random((8, 8))
        assert gradient_loss(m, m) == 0.0

    def test_constants_zero(self):
        assert gradient_loss(np.full((8, 8), 0.2), np.full((8, 8), 0.9)) == 0.0

    def test_matches_oracle(self, rng):
        pred, gt = rng.random((8, 8)), rng.random((8, 8))
        assert gradient_loss(pred, gt) == pytest.approx(oracle_gradient_loss(pred, gt), abs=1e-12)


class TestMatteLoss:
    def test_equal_zero(self, rng):
        m = rng.random((8, 8))
        assert matte_loss(m, m) == 0.0

    def test_default_lambda_is_ten(self):
        assert LossConfig().lambda_grad == 10.0

    def test_compositional(self, rng):
        pred, gt = rng.random((8, 8)), rng.random((8, 8))
        total = matte_loss(pred, gt, LossConfig())
        assert total == pytest.approx(l1_loss(pred, gt) + 10.0 * gradient_loss(pred, gt), rel=1e-12)

    def test_nonnegative_and_zero_iff_equal(self, rng):
        pred, gt = rng.random((8, 8)), rng.random((8, 8))
        assert matte_loss(pred, gt) > 0.0
        assert matte_loss(gt, gt) == 0.0

    def test_invalid_lambda(self):
        with pytest.raises(ValueError):
            LossConfig(lambda_grad=0.0)


def _kink_free_pair(seed: int, size: int = 6, margin: float = 1e-3):
    """Random (pred, gt) with |pred-gt| and all gradient differences kept
    away from the abs() kinks so finite differences are clean."""
    for attempt in range(100):
        r = np.random.default_rng(seed * 1000 + attempt)
        pred = r.uniform(0.2, 0.8, size=(size, size))
        gt = np.clip(pred + r.choice([-1, 1], size=(size, size)) * r.uniform(0.05, 0.2, size=(size, size)), 0, 1)
        delta = pred - gt
        dgx = np.diff(delta, axis=1)
        dgy = np.diff(delta, axis=0)
        if (
            np.abs(delta).min() > margin
            and np.abs(dgx).min() > margin
            and np.abs(dgy).min() > margin
        ):
            return pred, gt
    raise RuntimeError("could not build a kink-free pair")


class TestAnalyticGradient:
    @pytest.mark.parametrize("seed", range(3))
    def test_matches_central_differences(self, seed):
        pred_np, gt_np = _kink_free_pair(seed)
        pred = torch.tensor(pred_np, dtype=torch.float64, requires_grad=True)
        gt = torch.tensor(gt_np, dtype=torch.float64)
        loss = matte_loss(pred, gt, LossConfig())
        loss.backward()
        analytic = pred.grad.numpy()

        eps = 1e-4
        for i in range(pred_np.shape[0]):
            for j in range(pred_np.shape[1]):
                plus = pred_np.copy()
                minus = pred_np.copy()
                plus[i, j] += eps
                minus[i, j] -= eps
                fd = (matte_loss(plus, gt_np) - matte_loss(minus, gt_np)) / (2 * eps)
                denom = max(abs(fd), abs(analytic[i, j]), 1e-8)
                assert abs(fd - analytic[i, j]) / denom < 1e-3, (i, j)
