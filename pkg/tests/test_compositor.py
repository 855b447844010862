import numpy as np
import pytest
from PIL import Image

from syn3dtxt.compositor import (
    BackgroundPool,
    WarpedText,
    composite_pair,
    contrast_ok,
    crop_background,
    luma,
)
from syn3dtxt.errors import ConfigurationError, PairingContractError
from syn3dtxt.sampler import rng_for_sample


@pytest.fixture(scope="module")
def pool(backgrounds_dir):
    return BackgroundPool.from_dir(backgrounds_dir)


class TestBackgroundPool:
    def test_from_dir(self, pool, backgrounds_dir):
        assert len(pool) == 6
        assert list(pool.paths) == sorted(pool.paths)

    def test_missing_dir(self, tmp_path):
        with pytest.raises(ConfigurationError):
            BackgroundPool.from_dir(tmp_path / "none")

    def test_empty_dir(self, tmp_path):
        with pytest.raises(ConfigurationError):
            BackgroundPool.from_dir(tmp_path)


class TestCropBackground:
    def test_deterministic(self, pool):
        a = crop_background(pool, rng_for_sample(1, 2), 256, 64)
        b = crop_background(pool, rng_for_sample(1, 2), 256, 64)
        assert np.array_equal(a, b)
        assert a.shape == (64, 256, 3)

    def test_small_source_upscaled(self, tmp_path):
        Image.fromarray(np.full((20, 30, 3), 90, dtype=np.uint8)).save(tmp_path / "tiny.png")
        small_pool = BackgroundPool.from_dir(tmp_path)
        crop = crop_background(small_pool, rng_for_sample(3, 0), 256, 64)
        assert crop.shape == (64, 256, 3)

    def test_undecodable_pool_fatal(self, tmp_path):
        (tmp_path / "junk.png").write_bytes(b"this is not a png")
        bad_pool = BackgroundPool.from_dir(tmp_path)
        with pytest.raises(ConfigurationError):
            crop_background(bad_pool, rng_for_sample(5, 0), 256, 64)

    def test_undecodable_entry_skipped(self, tmp_path):
        for name in ("a_good.png", "b_good.png", "c_good.png"):
            Image.fromarray(np.full((100, 400, 3), 50, dtype=np.uint8)).save(tmp_path / name)
        (tmp_path / "d_junk.png").write_bytes(b"nope")
        mixed = BackgroundPool.from_dir(tmp_path)
        # seeds that draw the junk entry first must fall through to a good one
        for i in range(40):
            crop = crop_background(mixed, rng_for_sample(7, i), 256, 64)
            assert crop.shape == (64, 256, 3)
            assert (crop == 50).all()


class TestContrast:
    def test_white_on_black(self):
        bg = np.zeros((10, 10, 3), dtype=np.uint8)
        assert contrast_ok((255, 255, 255), bg)

    def test_gray_on_gray(self):
        bg = np.full((10, 10, 3), 128, dtype=np.uint8)
        assert not contrast_ok((128, 128, 128), bg)

    def test_red_on_matching_luma(self):
        # oracle: luma(200,0,0) = 59.8, |59.8 - 60| = 0.2 < 30 -> fails
        bg = np.full((10, 10, 3), 60, dtype=np.uint8)
        assert abs(float(luma(np.array([60, 60, 60]))) - 60.0) < 1e-9
        assert not contrast_ok((200, 0, 0), bg)

    def test_region_restriction(self):
        bg = np.zeros((10, 20, 3), dtype=np.uint8)
        bg[:, 10:] = 255
        assert contrast_ok((255, 255, 255), bg, (0, 0, 10, 10))
        assert not contrast_ok((255, 255, 255), bg, (10, 0, 20, 10))


def _warped(alpha, color, key):
    normal = np.zeros(alpha.shape + (3,), dtype=np.uint8)
    normal[alpha > 127] = color
    return WarpedText(alpha=alpha, normal_rgb=normal, style_key=key)


class TestCompositePair:
    BG = np.tile(np.arange(64, dtype=np.uint8)[:, None, None], (1, 128, 3)) + 40

    def _alpha(self, seed):
        rng = np.random.default_rng(seed)
        alpha = np.zeros((64, 128), dtype=np.uint8)
        alpha[20:40, 30:90] = rng.integers(0, 256, size=(20, 60))
        return alpha

    def test_blank_masks_reproduce_background(self):
        blank = np.zeros((64, 128), dtype=np.uint8)
        s = _warped(blank, (128, 128, 255), ("k",))
        t = _warped(blank.copy(), (128, 128, 255), ("k",))
        out = composite_pair(s, t, ("font", (10, 200, 30)), self.BG)
        assert np.array_equal(out.i_s, self.BG)
        assert np.array_equal(out.i_t, self.BG)
        assert not out.bin_s.any() and not out.bin_t.any()
        assert not out.mask_s.any()

    def test_pair_background_invariant(self):
        s = _warped(self._alpha(1), (200, 128, 128), ("k",))
        t = _warped(self._alpha(2), (200, 128, 128), ("k",))
        out = composite_pair(s, t, ("font", (250, 10, 10)), self.BG)
        outside_union = (out.bin_s == 0) & (out.bin_t == 0)
        assert np.array_equal(out.i_s[outside_union], out.i_t[outside_union])
        assert np.array_equal(out.i_s[out.bin_s == 0], out.t_b[out.bin_s == 0])
        assert np.array_equal(out.i_t[out.bin_t == 0], out.t_b[out.bin_t == 0])

    def test_mask_support_equals_binary_support(self):
        s = _warped(self._alpha(3), (77, 128, 222), ("k",))
        t = _warped(self._alpha(4), (77, 128, 222), ("k",))
        out = composite_pair(s, t, ("font", (0, 0, 0)), self.BG)
        assert np.array_equal(out.mask_s.any(axis=2), out.bin_s > 0)
        assert np.array_equal(out.mask_t.any(axis=2), out.bin_t > 0)

    def test_flat_sample_single_mask_color(self):
        s = _warped(self._alpha(5), (30, 128, 250), ("k",))
        t = _warped(self._alpha(6), (30, 128, 250), ("k",))
        out = composite_pair(s, t, ("font", (9, 9, 9)), self.BG)
        colors = np.unique(out.mask_s[out.bin_s > 0].reshape(-1, 3), axis=0)
        assert colors.shape == (1, 3)
        assert tuple(colors[0]) == (30, 128, 250)

    def test_deterministic(self):
        s = _warped(self._alpha(7), (1, 2, 3), ("k",))
        t = _warped(self._alpha(8), (1, 2, 3), ("k",))
        a = composite_pair(s, t, ("font", (200, 100, 50)), self.BG)
        b = composite_pair(s, t, ("font", (200, 100, 50)), self.BG)
        for x, y in zip(a.as_dict().values(), b.as_dict().values()):
            assert np.array_equal(x, y)

    def test_mismatched_style_key_rejected(self):
        s = _warped(self._alpha(9), (1, 2, 3), ("a",))
        t = _warped(self._alpha(10), (1, 2, 3), ("b",))
        with pytest.raises(PairingContractError):
            composite_pair(s, t, ("font", (0, 0, 0)), self.BG)

    def test_full_alpha_paints_pure_fill(self):
        alpha = np.zeros((64, 128), dtype=np.uint8)
        alpha[10:20, 10:20] = 255
        s = _warped(alpha, (128, 128, 255), ("k",))
        t = _warped(alpha.copy(), (128, 128, 255), ("k",))
        out = composite_pair(s, t, ("font", (12, 34, 56)), self.BG)
        assert (out.i_s[12:18, 12:18] == np.array([12, 34, 56])).all()
