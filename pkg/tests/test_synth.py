from __future__ import annotations

import numpy as np
import pytest

from promptmatte.converter import DegradeSpec
from promptmatte.core import load_manifest, validate_image, validate_matte
from promptmatte.synth import (
    SceneSpec,
    build_split,
    derive_converter_trainset,
    gen_disc_scene,
    gen_sample,
)


class TestGenSample:
    def test_mattes_satisfy_invariants(self):
        for seed in range(10):
            image, mattes = gen_sample(SceneSpec(canvas=64, seed=seed))
            validate_image(image)
            for matte, gran in mattes:
                validate_matte(matte)
                assert matte.shape == image.shape[:2]
                assert gran in ("fine", "coarse")

    def test_bit_identical_regeneration(self):
        a_img, a_mattes = gen_sample(SceneSpec(canvas=64, seed=7))
        b_img, b_mattes = gen_sample(SceneSpec(canvas=64, seed=7))
        np.testing.assert_array_equal(a_img, b_img)
        for (ma, ga), (mb, gb) in zip(a_mattes, b_mattes):
            np.testing.assert_array_equal(ma, mb)
            assert ga == gb

    def test_visible_alpha_sums_below_one(self):
        for seed in range(10):
            _, mattes = gen_sample(SceneSpec(canvas=64, seed=seed))
            total = np.sum([m for m, _ in mattes], axis=0)
            assert total.max() <= 1.0 + 1e-6

    def test_soft_pixel_histogram_contract(self):
        # fine mattes keep real fractional coverage; coarse stay near-binary
        for seed in range(25):
            _, mattes = gen_sample(SceneSpec(canvas=96, seed=seed))
            for matte, gran in mattes:
                nonzero = matte > 0.0
                if nonzero.sum() == 0:
                    continue
                frac = ((matte > 0.0) & (matte < 1.0)).sum() / nonzero.sum()
                if gran == "fine":
                    assert frac >= 0.01, (seed, gran, frac)
                else:
                    assert frac <= 0.005, (seed, gran, frac)

    def test_counts_within_spec_ranges(self):
        spec = SceneSpec(canvas=64, n_coarse=(1, 2), n_fine=(2, 3), seed=0)
        for seed in range(15):
            _, mattes = gen_sample(SceneSpec(canvas=64, n_coarse=(1, 2), n_fine=(2, 3), seed=seed))
            coarse = sum(1 for _, g in mattes if g == "coarse")
            fine = sum(1 for _, g in mattes if g == "fine")
            assert 1 <= coarse <= 2
            assert 2 <= fine <= 3


class TestDiscScene:
    def test_three_disjoint_discs(self):
        image, mattes = gen_disc_scene(96, [(20, 20), (70, 24), (46, 70)], radius=12, seed=0)
        assert len(mattes) == 3
        validate_image(image)
        for i, a in enumerate(mattes):
            for b in mattes[i + 1 :]:
                assert np.logical_and(a >= 0.5, b >= 0.5).sum() == 0


class TestBuildSplit:
    def test_manifest_contract(self, tmp_path):
        manifest = build_split(4, SceneSpec(canvas=64, seed=1), prompt_seed=2, out_dir=tmp_path)
        assert len(manifest.samples) == 4
        loaded = load_manifest(tmp_path / "manifest.json")
        assert loaded == manifest
        for sample in loaded.samples:
            for obj in sample.objects:
                assert obj.predefined_box is not None
                assert obj.predefined_points
                assert 1 <= len(obj.predefined_points) <= 12

    def test_regeneration_byte_identical(self, tmp_path):
        build_split(3, SceneSpec(canvas=64, seed=5), prompt_seed=6, out_dir=tmp_path / "a")
        build_split(3, SceneSpec(canvas=64, seed=5), prompt_seed=6, out_dir=tmp_path / "b")
        for rel in sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file()):
            a = (tmp_path / "a" / rel).read_bytes()
            b = (tmp_path / "b" / rel).read_bytes()
            assert a == b, rel

    def test_invalid_count(self, tmp_path):
        with pytest.raises(ValueError):
            build_split(0, SceneSpec(canvas=64), prompt_seed=0, out_dir=tmp_path)


@pytest.fixture(scope="module")
def split(tmp_path_factory):
    out = tmp_path_factory.mktemp("split")
    manifest = build_split(8, SceneSpec(canvas=64, seed=11), prompt_seed=3, out_dir=out)
    return manifest, out / "manifest.json"


class TestDeriveConverterTrainset:
    def test_zero_frac_all_transformable(self, split):
        manifest, path = split
        samples = derive_converter_trainset(manifest, path, DegradeSpec(seed=0), coarse_source_frac=0.0)
        assert samples
        assert all(s.transformable for s in samples)

    def test_stl_samples_have_gt_equal_seg(self, split):
        manifest, path = split
        samples = derive_converter_trainset(manifest, path, DegradeSpec(seed=0), coarse_source_frac=0.5)
        stl = [s for s in samples if not s.transformable]
        assert stl
        for s in stl:
            np.testing.assert_array_equal(s.gt_matte, s.seg.astype(np.float32))

    def test_fraction_close_to_requested(self, tmp_path):
        manifest = build_split(
            40, SceneSpec(canvas=64, n_coarse=(1, 2), n_fine=(1, 2), seed=21), prompt_seed=4,
            out_dir=tmp_path,
        )
        samples = derive_converter_trainset(
            manifest, tmp_path / "manifest.json", DegradeSpec(seed=0), coarse_source_frac=0.3
        )
        frac = sum(1 for s in samples if not s.transformable) / len(samples)
        assert abs(frac - 0.3) <= 0.1

    def test_transformable_segs_binary(self, split):
        manifest, path = split
        samples = derive_converter_trainset(manifest, path, DegradeSpec(seed=0))
        for s in samples:
            assert set(np.unique(s.seg)) <= {0, 1}
