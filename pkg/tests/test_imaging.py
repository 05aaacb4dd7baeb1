import numpy as np
import pytest

from googlenet import imaging
from googlenet.errors import ShapeError
from googlenet.imaging import METHODS, CropSpec, enumerate_crops, resize


def gradient_image(h, w, seed=0):
    rng = np.random.default_rng(seed)
    base = np.linspace(0, 1, h * w * 3, dtype=np.float32).reshape(h, w, 3)
    return np.clip(base + rng.random((h, w, 3), dtype=np.float32) * 0.1, 0, 1)


class TestResize:
    @pytest.mark.parametrize("method", METHODS)
    def test_same_size_is_identity(self, method):
        img = gradient_image(17, 23)
        np.testing.assert_array_equal(resize(img, 17, 23, method), img)

    def test_area_downscale_is_block_mean(self):
        img = np.zeros((2, 2, 3), np.float32)
        img[1, :, :] = 1.0
        out = resize(img, 1, 1, "area")
        np.testing.assert_allclose(out, np.full((1, 1, 3), 0.5), atol=1e-7)

    @pytest.mark.parametrize("method", METHODS)
    @pytest.mark.parametrize("target", [(3, 5), (16, 16), (31, 9)])
    def test_constant_image_stays_constant(self, method, target):
        img = np.full((13, 11, 3), 0.37, np.float32)
        out = resize(img, *target, method)
        np.testing.assert_allclose(out, np.full((*target, 3), 0.37), atol=1e-6)

    def test_bilinear_upscale_interpolates_midpoint(self):
        img = np.zeros((1, 2, 3), np.float32)
        img[0, 1, :] = 1.0
        out = resize(img, 1, 4, "bilinear")
        np.testing.assert_allclose(out[0, :, 0], [0.0, 0.25, 0.75, 1.0], atol=1e-7)

    def test_bad_method_and_size(self):
        img = gradient_image(4, 4)
        with pytest.raises(ValueError, match="method"):
            resize(img, 4, 4, "lanczos")
        with pytest.raises(ValueError, match="positive"):
            resize(img, 0, 4)


class TestEnumerateCrops:
    @pytest.mark.parametrize("shape", [(300, 500), (500, 300), (400, 400)])
    def test_c144_yields_144_at_224(self, shape):
        crops = enumerate_crops(gradient_image(*shape), "c144")
        assert len(crops) == 144
        assert all(img.shape == (224, 224, 3) for _, img in crops)
        assert len({spec for spec, _ in crops}) == 144

    def test_c10_and_c1_counts(self):
        img = gradient_image(260, 340)
        assert len(enumerate_crops(img, "c10")) == 10
        assert len(enumerate_crops(img, "c1")) == 1

    def test_enumeration_order_is_fixed(self):
        specs = [spec for spec, _ in enumerate_crops(gradient_image(250, 320), "c144")]
        assert specs[0] == CropSpec(256, "first", "tl", False)
        assert specs[1] == CropSpec(256, "first", "tl", True)
        assert specs[12] == CropSpec(256, "center", "tl", False)
        assert specs[-1] == CropSpec(352, "last", "full", True)
        scales = [s.scale for s in specs]
        assert scales == sorted(scales)

    def test_two_runs_bitwise_identical(self):
        img = gradient_image(280, 450, seed=3)
        a, b = enumerate_crops(img, "c144"), enumerate_crops(img, "c144")
        for (sa, ia), (sb, ib) in zip(a, b):
            assert sa == sb
            np.testing.assert_array_equal(ia, ib)

    def test_mirrored_crops_are_bitwise_flips(self):
        crops = dict_by_spec = {spec: img for spec, img in enumerate_crops(gradient_image(320, 260), "c144")}
        for spec, img in dict_by_spec.items():
            if spec.mirrored:
                partner = dict_by_spec[CropSpec(spec.scale, spec.square, spec.sub, False)]
                np.testing.assert_array_equal(img, partner[:, ::-1])

    def test_square_image_emits_three_identical_squares(self):
        crops = enumerate_crops(gradient_image(330, 330), "c144")
        by_spec = {spec: img for spec, img in crops}
        for scale in (256, 352):
            for sub in ("tl", "center"):
                first = by_spec[CropSpec(scale, "first", sub, False)]
                for square in ("center", "last"):
                    np.testing.assert_array_equal(first, by_spec[CropSpec(scale, square, sub, False)])

    def test_portrait_squares_tile_vertically(self):
        img = gradient_image(500, 300)
        resized = resize(img, round(500 * 256 / 300), 256, "bilinear")
        by_spec = {spec: im for spec, im in enumerate_crops(img, "c144")}
        top = by_spec[CropSpec(256, "first", "tl", False)]
        np.testing.assert_array_equal(top[0], resized[0, :224])
        bottom = by_spec[CropSpec(256, "last", "bl", False)]
        np.testing.assert_array_equal(bottom[-1], resized[-1, :224])

    def test_filenames(self):
        assert CropSpec(288, "center", "br", True).filename() == "288_center_br_m.ppm"
        assert CropSpec(256, "first", "full", False).filename() == "256_first_full_o.ppm"

    def test_unknown_mode(self):
        with pytest.raises(ValueError, match="mode"):
            enumerate_crops(gradient_image(300, 300), "c42")


class _ScriptedRng:
    """Deterministic stand-in driving the patch sampler down chosen paths."""

    def __init__(self, uniforms):
        self.uniforms = list(uniforms)

    def uniform(self, lo, hi):
        return self.uniforms.pop(0)

    def integers(self, lo, hi):
        return lo


class TestTrainPatchSampler:
    def test_output_is_224(self):
        rng = np.random.default_rng(0)
        out = imaging.sample_train_patch(gradient_image(500, 400), rng)
        assert out.shape == (224, 224, 3)

    def test_fallback_on_224_input_returns_the_image(self):
        img = gradient_image(224, 224)
        # every attempt draws area 1.0 at aspect 3/4 -> 259x194 patch, rejected
        rng = _ScriptedRng([1.0, 0.75] * 10)
        out = imaging.sample_train_patch(img, rng)
        np.testing.assert_array_equal(out, img)

    def test_reproducible_for_fixed_seed(self):
        img = gradient_image(333, 444)
        a = imaging.sample_train_patch(img, np.random.default_rng(9))
        b = imaging.sample_train_patch(img, np.random.default_rng(9))
        np.testing.assert_array_equal(a, b)

    def test_drawn_fractions_are_uniform(self):
        rng = np.random.default_rng(123)
        trace = []
        for _ in range(10_000):
            imaging.draw_patch_box(500, 500, rng, trace=trace)
        fracs = np.array([t["area_fraction"] for t in trace])
        assert abs(fracs.mean() - 0.54) / 0.54 < 0.02
        # Kolmogorov-Smirnov against U(0.08, 1.0) at significance 0.01
        sorted_f = np.sort((fracs - 0.08) / 0.92)
        n = len(sorted_f)
        ecdf_hi = np.arange(1, n + 1) / n
        ecdf_lo = np.arange(0, n) / n
        d = max(np.abs(ecdf_hi - sorted_f).max(), np.abs(sorted_f - ecdf_lo).max())
        assert d < 1.628 / np.sqrt(n)

    def test_accepted_aspects_within_bounds(self):
        rng = np.random.default_rng(7)
        trace = []
        boxes = [imaging.draw_patch_box(500, 500, rng, trace=trace) for _ in range(2_000)]
        accepted = [t["aspect"] for t in trace if t["accepted"]]
        assert accepted
        assert min(accepted) >= 0.75 and max(accepted) <= 4 / 3
        for _, _, ph, pw in boxes:
            assert 0.75 * 0.99 <= pw / ph <= 4 / 3 * 1.01  # integer rounding slack


class TestPhotometric:
    def test_unit_factors_are_identity(self):
        img = gradient_image(32, 32)
        out = imaging.photometric_distort(img, None, factors=np.ones(3), order=[0, 1, 2])
        np.testing.assert_array_equal(out, img)

    def test_brightness_is_multiplicative(self):
        img = np.full((8, 8, 3), 0.8, np.float32)
        out = imaging.photometric_distort(img, None, factors=[0.5, 1.0, 1.0], order=[0, 1, 2])
        np.testing.assert_allclose(out, np.full_like(img, 0.4), atol=1e-7)

    def test_output_clamped(self):
        img = gradient_image(16, 16)
        rng = np.random.default_rng(2)
        for _ in range(20):
            out = imaging.photometric_distort(img, rng)
            assert out.min() >= 0.0 and out.max() <= 1.0

    def test_saturation_zero_is_grayscale(self):
        img = gradient_image(8, 8, seed=5)
        out = imaging.photometric_distort(img, None, factors=[1.0, 1.0, 0.0], order=[2, 1, 0])
        np.testing.assert_allclose(out[..., 0], out[..., 1], atol=1e-6)
        np.testing.assert_allclose(out[..., 1], out[..., 2], atol=1e-6)


class TestMeanSubtract:
    def test_zero_mean_matches_transpose(self):
        img = gradient_image(224, 224)
        t = imaging.mean_subtract(img, (0, 0, 0))
        assert t.shape == (1, 3, 224, 224)
        np.testing.assert_array_equal(t[0], img.transpose(2, 0, 1))

    def test_constant_minus_its_mean_is_zero(self):
        img = np.full((224, 224, 3), 0.5, np.float32)
        np.testing.assert_array_equal(imaging.mean_subtract(img, (0.5, 0.5, 0.5)), np.zeros((1, 3, 224, 224)))

    def test_wrong_size_rejected(self):
        with pytest.raises(ShapeError, match="224"):
            imaging.mean_subtract(gradient_image(100, 224), (0, 0, 0))

    def test_dataset_mean_is_brute_force_mean(self):
        imgs = [gradient_image(10, 12, seed=i) for i in range(3)]
        got = imaging.dataset_mean(imgs)
        stacked = np.concatenate([im.reshape(-1, 3) for im in imgs])
        np.testing.assert_allclose(got, stacked.mean(axis=0), rtol=1e-6)
