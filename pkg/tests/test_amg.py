from __future__ import annotations

import numpy as np
import pytest

from promptmatte.amg import auto_mask_generation, mask_iou


class TestMaskIou:
    def test_identical(self):
        m = np.zeros((8, 8), dtype=bool)
        m[2:5, 2:5] = True
        assert mask_iou(m, m) == 1.0

    def test_disjoint(self):
        a = np.zeros((8, 8), dtype=bool)
        b = np.zeros((8, 8), dtype=bool)
        a[0, 0] = True
        b[7, 7] = True
        assert mask_iou(a, b) == 0.0

    def test_both_empty(self):
        e = np.zeros((8, 8), dtype=bool)
        assert mask_iou(e, e) == 0.0

    def test_half_overlap(self):
        a = np.zeros((8, 8), dtype=bool)
        b = np.zeros((8, 8), dtype=bool)
        a[0:2, 0:2] = True  # 4 px
        b[0:2, 1:3] = True  # 4 px, overlap 2
        assert mask_iou(a, b) == pytest.approx(2 / 6)


class TestAutoMaskGeneration:
    def test_candidate_count_bound_and_nms_postcondition(self, tiny_model):
        image = np.random.default_rng(0).random((32, 32, 3)).astype(np.float32)
        kept = auto_mask_generation(
            image, tiny_model, grid_n=4, score_thresh=0.0, nms_iou=0.7,
            min_area=1, return_candidates=True,
        )
        assert len(kept) <= 16
        for i, a in enumerate(kept):
            for b in kept[i + 1 :]:
                assert mask_iou(a.region, b.region) <= 0.7
        # descending score order
        scores = [c.score for c in kept]
        assert scores == sorted(scores, reverse=True)

    def test_score_threshold_filters(self, tiny_model):
        image = np.random.default_rng(1).random((32, 32, 3)).astype(np.float32)
        kept = auto_mask_generation(
            image, tiny_model, grid_n=4, score_thresh=1.1, nms_iou=0.7, return_candidates=True
        )
        assert kept == []

    def test_grid_n_validation(self, tiny_model):
        image = np.zeros((32, 32, 3), dtype=np.float32)
        with pytest.raises(ValueError):
            auto_mask_generation(image, tiny_model, grid_n=1)

    def test_returns_mattes_by_default(self, tiny_model):
        image = np.random.default_rng(2).random((32, 32, 3)).astype(np.float32)
        mattes = auto_mask_generation(image, tiny_model, grid_n=2, score_thresh=0.0, min_area=1)
        for m in mattes:
            assert m.shape == (32, 32)
            assert m.min() >= 0.0 and m.max() <= 1.0
