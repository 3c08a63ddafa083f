import numpy as np

from hvio.flow import lk_flow
from hvio.image import GrayImage, build_pyramid

from test_features import render_blobs, scatter_centers


def multiscale_texture(width, height, centers, sigmas, amps, shift=(0, 0)):
    ys, xs = np.mgrid[0:height, 0:width].astype(float)
    img = 20.0 + 25.0 * (xs / width + ys / height)
    for (cx, cy), s, a in zip(centers, sigmas, amps):
        img += a * np.exp(-((xs - cx - shift[0]) ** 2 + (ys - cy - shift[1]) ** 2) / (2 * s**2))
    return GrayImage(np.clip(img, 0, 255))


def textured_pair(seed, width=256, height=192, shift=(0, 0)):
    """Image pair with texture at several scales so every pyramid level is informative."""
    rng = np.random.default_rng(seed)
    centers = scatter_centers(rng, width, height, 60, margin=16, min_sep=10)
    sigmas = rng.uniform(2.5, 8.0, len(centers))
    amps = rng.uniform(40.0, 120.0, len(centers))
    prev = multiscale_texture(width, height, centers, sigmas, amps)
    cur = multiscale_texture(width, height, centers, sigmas, amps, shift=shift)
    pts = np.array(centers)
    return prev, cur, pts


class TestLkFlow:
    def test_identity_pair(self):
        prev, _, pts = textured_pair(50)
        pyr = build_pyramid(prev, 4)
        res = lk_flow(pyr, pyr, pts)
        assert res.converged.all()
        assert np.abs(res.positions - pts).max() < 1e-6

    def test_integer_shift(self):
        # rolling the stored samples is an exact integer translation
        prev, _, pts = textured_pair(51)
        cur = GrayImage(np.roll(np.roll(prev.pixels, -2, axis=0), 3, axis=1))
        interior = (pts[:, 0] > 60) & (pts[:, 0] < 190) & (pts[:, 1] > 60) & (pts[:, 1] < 130)
        pts = pts[interior]
        p_prev = build_pyramid(prev, 4)
        p_cur = build_pyramid(cur, 4)
        res = lk_flow(p_prev, p_cur, pts)
        assert res.converged.all()
        flow = res.positions - pts
        assert np.abs(flow - [3, -2]).max() < 0.05

    def test_constant_region_not_converged(self):
        img = GrayImage(np.full((64, 64), 100, dtype=np.uint8))
        pyr = build_pyramid(img, 3)
        res = lk_flow(pyr, pyr, np.array([[32.0, 32.0]]))
        assert not res.converged[0]

    def test_large_shift_needs_pyramid(self):
        # 10 px displacement exceeds the 11x11 window's single-level basin
        prev, _, pts = textured_pair(52)
        cur = GrayImage(np.roll(prev.pixels, 10, axis=1))
        interior = (pts[:, 0] > 64) & (pts[:, 0] < 180) & (pts[:, 1] > 64) & (pts[:, 1] < 130)
        pts = pts[interior]
        p_prev4 = build_pyramid(prev, 4)
        p_cur4 = build_pyramid(cur, 4)
        res4 = lk_flow(p_prev4, p_cur4, pts)
        good4 = res4.converged & (np.abs(res4.positions - pts - [10, 0]).max(axis=1) < 0.1)
        assert good4.mean() > 0.9

    def test_init_seeding(self):
        prev, _, pts = textured_pair(53)
        cur = GrayImage(np.roll(np.roll(prev.pixels, 6, axis=0), 14, axis=1))
        interior = (pts[:, 0] > 40) & (pts[:, 0] < 190) & (pts[:, 1] > 40) & (pts[:, 1] < 140)
        pts = pts[interior]
        p_prev = build_pyramid(prev, 1)
        p_cur = build_pyramid(cur, 1)
        seeded = lk_flow(p_prev, p_cur, pts, init=pts + [13.0, 5.5])
        assert seeded.converged.all()
        assert np.abs(seeded.positions - pts - [14, 6]).max() < 0.05

    def test_empty_input(self):
        img = GrayImage(np.zeros((32, 32), dtype=np.uint8))
        pyr = build_pyramid(img, 2)
        res = lk_flow(pyr, pyr, np.empty((0, 2)))
        assert len(res.positions) == 0
