import numpy as np
import pytest

from promptseg.masks import BinaryMask, MaskError
from promptseg.promptgen import (
    Box,
    NoiseSpec,
    box_from_mask,
    center_point,
    degradation_band,
    degrade_mask,
    large_scale_jitter,
    noise_box,
    sample_points,
)


def mask_with(pixels, w=16, h=16):
    m = BinaryMask.zeros(w, h)
    for x, y in pixels:
        m.a[y, x] = True
    return m


class TestBoxFromMask:
    def test_single_pixel_half_open(self):
        assert box_from_mask(mask_with([(5, 7)])) == Box(5, 7, 6, 8)

    def test_full_frame(self):
        m = BinaryMask(np.ones((16, 16), dtype=bool))
        assert box_from_mask(m) == Box(0, 0, 16, 16)

    def test_l_shape_matches_pixel_scan(self, rng):
        m = BinaryMask.zeros(20, 20)
        m.a[3:15, 4] = True
        m.a[14, 4:12] = True
        box = box_from_mask(m)
        ys, xs = np.nonzero(m.a)
        assert box == Box(xs.min(), ys.min(), xs.max() + 1, ys.max() + 1)

    def test_empty_rejected(self):
        with pytest.raises(MaskError):
            box_from_mask(BinaryMask.zeros(4, 4))


class TestNoiseBox:
    def test_scale_zero_identity(self, rng):
        box = Box(10, 10, 30, 30)
        assert noise_box(box, 0.0, rng, (128, 128)) == box

    def test_corners_within_half_extent(self):
        box = Box(40, 40, 60, 70)  # w=20, h=30
        for seed in range(300):
            out = noise_box(box, 0.2, np.random.default_rng(seed), (128, 128))
            for orig, new, half in (
                (box.x0, out.x0, 0.2 * 20 / 2),
                (box.x1, out.x1, 0.2 * 20 / 2),
                (box.y0, out.y0, 0.2 * 30 / 2),
                (box.y1, out.y1, 0.2 * 30 / 2),
            ):
                assert abs(new - orig) <= half + 1e-9

    def test_deterministic_and_reordered(self):
        box = Box(10, 10, 30, 30)
        a = noise_box(box, 0.2, np.random.default_rng(7), (128, 128))
        b = noise_box(box, 0.2, np.random.default_rng(7), (128, 128))
        assert a == b
        assert a.x0 < a.x1 and a.y0 < a.y1
        assert max(abs(a.x0 - 10), abs(a.y0 - 10), abs(a.x1 - 30), abs(a.y1 - 30)) <= 2.0

    def test_clamped_to_bounds(self):
        box = Box(0, 0, 128, 128)
        for seed in range(50):
            out = noise_box(box, 0.4, np.random.default_rng(seed), (128, 128))
            assert 0 <= out.x0 < out.x1 <= 128
            assert 0 <= out.y0 < out.y1 <= 128


class TestCenterPoint:
    def test_filled_square_center(self):
        m = BinaryMask.zeros(16, 16)
        m.a[2:7, 3:8] = True  # 5x5 square at rows 2..6, cols 3..7
        assert center_point(m) == (5, 4)

    def test_single_width_line_first_in_scan(self):
        m = BinaryMask.zeros(16, 16)
        m.a[5, 2:10] = True
        x, y = center_point(m)
        assert y == 5 and x == 2  # all distances tie; scan order wins

    def test_ring_matches_brute_force(self):
        yy, xx = np.mgrid[0:24, 0:24]
        d2 = (yy - 12.0) ** 2 + (xx - 12.0) ** 2
        ring = BinaryMask((d2 <= 100) & (d2 >= 25))
        cx, cy = center_point(ring)
        assert ring.a[cy, cx]
        # O(n^2) oracle: per foreground pixel, min distance to any background pixel
        best = None
        fg = np.argwhere(ring.a)
        bgm = np.pad(~ring.a, 1, constant_values=True)
        bg = np.argwhere(bgm) - 1
        for y, x in fg:
            d2min = ((bg[:, 0] - y) ** 2 + (bg[:, 1] - x) ** 2).min()
            key = (-d2min, y, x)
            if best is None or key < best[0]:
                best = (key, (x, y))
        assert (cx, cy) == best[1]

    def test_translation_equivariance(self):
        m = BinaryMask.zeros(32, 32)
        m.a[4:12, 5:14] = True
        m.a[6:10, 7:12] = True
        cx, cy = center_point(m)
        shifted = BinaryMask(np.roll(np.roll(m.a, 7, axis=0), 5, axis=1))
        assert center_point(shifted) == (cx + 5, cy + 7)

    def test_empty_rejected(self):
        with pytest.raises(MaskError):
            center_point(BinaryMask.zeros(4, 4))


class TestSamplePoints:
    def test_single_pixel_mask(self, rng):
        m = mask_with([(3, 9)])
        pts = sample_points(m, 1, 0, rng)
        assert pts == [(3.0, 9.0, "positive")]

    def test_fig_scale_counts_and_labels(self, rng):
        m = BinaryMask.zeros(32, 32)
        m.a[8:24, 8:24] = True
        pts = sample_points(m, 10, 5, rng)
        assert len(pts) == 15
        assert sum(p.label == "positive" for p in pts) == 10
        assert sum(p.label == "negative" for p in pts) == 5

    def test_membership_exhaustive(self, rng):
        m = BinaryMask(rng.random((20, 20)) < 0.4)
        pts = sample_points(m, 8, 8, rng)
        for p in pts:
            inside = bool(m.a[int(p.y), int(p.x)])
            assert inside == (p.label == "positive")

    def test_no_replacement(self, rng):
        m = BinaryMask.zeros(8, 8)
        m.a[0, 0:4] = True
        pts = sample_points(m, 4, 0, rng)
        assert len({(p.x, p.y) for p in pts}) == 4

    def test_insufficient_pixels(self, rng):
        with pytest.raises(MaskError):
            sample_points(mask_with([(1, 1)]), 2, 0, rng)


class TestDegradeMask:
    def test_sigma_zero_identity(self, rng):
        m = BinaryMask(rng.random((32, 32)) < 0.5)
        out = degrade_mask(m, NoiseSpec(mask_noise_sigma=0.0, band_ratio=0.05), rng)
        assert out == m

    def test_changes_confined_to_band(self, rng):
        yy, xx = np.mgrid[0:48, 0:48]
        m = BinaryMask((yy - 24) ** 2 + (xx - 24) ** 2 <= 180)
        spec = NoiseSpec(mask_noise_sigma=3.0, band_ratio=0.04)
        band = degradation_band(m, spec.band_ratio)
        out = degrade_mask(m, spec, rng)
        changed = out.a ^ m.a
        assert changed.any()
        assert not np.any(changed & ~band)

    def test_huge_sigma_is_fair_coin(self):
        m = BinaryMask(np.zeros((256, 256), dtype=bool))
        m.a[:, :128] = True  # half-plane: long straight contour
        spec = NoiseSpec(mask_noise_sigma=1e6, band_ratio=0.1)
        band = degradation_band(m, spec.band_ratio)
        assert band.sum() >= 10_000
        out = degrade_mask(m, spec, np.random.default_rng(0))
        flip_rate = (out.a ^ m.a)[band].mean()
        assert abs(flip_rate - 0.5) <= 0.05


class TestLargeScaleJitter:
    def test_unit_scale_is_identity(self, rng):
        img = rng.random((3, 64, 64))
        m = BinaryMask(rng.random((64, 64)) < 0.3)
        out_img, (out_m,) = large_scale_jitter(img, [m], rng, scale_range=(1.0, 1.0))
        assert np.array_equal(out_img, img)
        assert out_m == m

    def test_upscale_area_roughly_quadruples(self):
        img = np.zeros((3, 128, 128))
        m = BinaryMask.zeros(128, 128)
        yy, xx = np.mgrid[0:128, 0:128]
        m.a[:] = (yy - 64) ** 2 + (xx - 64) ** 2 <= 15**2
        saw_uncut = False
        for seed in range(8):
            rng2 = np.random.default_rng(seed)
            _, (out_m,), t = large_scale_jitter(img, [m], rng2, (2.0, 2.0), return_transform=True)
            ratio = out_m.area() / m.area()
            assert ratio <= 4.6  # never more than the scale-squared bound
            ox, oy = t["crop"]
            # scaled blob spans [98, 158] on each axis; uncut iff fully in the window
            if ox <= 98 and ox + 128 >= 158 and oy <= 98 and oy + 128 >= 158:
                saw_uncut = True
                assert 3.4 <= ratio <= 4.6
        assert saw_uncut

    def test_bbox_tracks_transform(self, rng):
        from promptseg.promptgen import box_from_mask

        img = rng.random((3, 128, 128))
        m = BinaryMask.zeros(128, 128)
        m.a[40:80, 50:90] = True
        out_img, (out_m,), t = large_scale_jitter(img, [m], rng, (0.6, 1.8), return_transform=True)
        s = t["scale"]
        ox, oy = t["crop"]
        px, py = t["pad"]
        box = box_from_mask(out_m)
        exp_x0 = max(0.0, 50 * s - ox + px)
        exp_y0 = max(0.0, 40 * s - oy + py)
        exp_x1 = min(128.0, 90 * s - ox + px)
        exp_y1 = min(128.0, 80 * s - oy + py)
        assert abs(box.x0 - exp_x0) <= 1.5
        assert abs(box.y0 - exp_y0) <= 1.5
        assert abs(box.x1 - exp_x1) <= 1.5
        assert abs(box.y1 - exp_y1) <= 1.5

    def test_vanishing_mask_returns_untransformed(self):
        img = np.random.default_rng(0).random((3, 128, 128))
        m = BinaryMask.zeros(128, 128)
        m.a[67, 61] = True
        rng2 = np.random.default_rng(3)
        out_img, (out_m,) = large_scale_jitter(img, [m], rng2, scale_range=(0.29, 0.30))
        assert np.array_equal(out_img, img)
        assert out_m == m
