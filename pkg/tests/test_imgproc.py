import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from retinoscopy.errors import BadKernel, Degenerate, DegenerateConfig, SingularHomography
from retinoscopy.imgproc import (
    apply_homography,
    canny,
    clahe,
    denoise_edge_preserving,
    estimate_homography,
    hough_circles,
    median_filter,
    otsu_from_histogram,
    otsu_threshold,
    read_png,
    to_gray_ccir601,
    upsample,
    warp_perspective,
    write_png,
)


def brute_force_otsu(hist):
    """Exhaustive between-class variance scan; lowest level wins ties."""
    hist = np.asarray(hist, dtype=np.float64)
    levels = np.arange(256)
    best, best_t = -1.0, None
    for t in range(256):
        w0, w1 = hist[: t + 1].sum(), hist[t + 1 :].sum()
        if w0 == 0 or w1 == 0:
            continue
        m0 = (levels[: t + 1] * hist[: t + 1]).sum() / w0
        m1 = (levels[t + 1 :] * hist[t + 1 :]).sum() / w1
        var = w0 * w1 * (m0 - m1) ** 2
        if var > best * (1 + 1e-12):
            best, best_t = var, t
    return best_t


def clahe_reference(img, tile, clip):
    """Straight loops over tiles and pixels."""
    img = np.asarray(img, dtype=np.intp)
    h, w = img.shape
    ny, nx = math.ceil(h / tile), math.ceil(w / tile)
    luts = np.zeros((ny, nx, 256))
    cy, cx = np.zeros(ny), np.zeros(nx)
    for i in range(ny):
        for j in range(nx):
            block = img[i * tile : (i + 1) * tile, j * tile : (j + 1) * tile]
            area = block.size
            hist = np.zeros(256)
            for v in block.ravel():
                hist[v] += 1
            if math.isfinite(clip):
                limit = max(clip * area / 256, 1 / 256)
                excess = sum(max(c - limit, 0) for c in hist)
                hist = np.array([min(c, limit) + excess / 256 for c in hist])
            acc = 0.0
            for v in range(256):
                acc += hist[v]
                luts[i, j, v] = min(max(math.floor(acc * 255 / area + 0.5), 0), 255)
            cy[i] = (i * tile + min((i + 1) * tile, h) - 1) / 2
            cx[j] = (j * tile + min((j + 1) * tile, w) - 1) / 2

    def locate(c, centers):
        if len(centers) == 1:
            return 0, 0, 0.0
        k = 0
        while k < len(centers) - 2 and c >= centers[k + 1]:
            k += 1
        t = (c - centers[k]) / (centers[k + 1] - centers[k])
        return k, k + 1, min(max(t, 0.0), 1.0)

    out = np.zeros((h, w), dtype=np.uint8)
    for y in range(h):
        i0, i1, ty = locate(y, cy)
        for x in range(w):
            j0, j1, tx = locate(x, cx)
            v = img[y, x]
            top = luts[i0, j0, v] * (1 - tx) + luts[i0, j1, v] * tx
            bot = luts[i1, j0, v] * (1 - tx) + luts[i1, j1, v] * tx
            out[y, x] = min(max(math.floor(top * (1 - ty) + bot * ty + 0.5), 0), 255)
    return out


# ---- color ----


@pytest.mark.parametrize("rgb, g", [((255, 0, 0), 76), ((255, 255, 255), 255), ((0, 128, 0), 75)])
def test_gray_examples(rgb, g):
    img = np.array([[rgb]], dtype=np.uint8)
    assert to_gray_ccir601(img)[0, 0] == g


def test_gray_of_neutral_is_identity():
    v = np.arange(256, dtype=np.uint8)
    img = np.stack([v, v, v], axis=-1)[None]
    assert np.array_equal(to_gray_ccir601(img)[0], v)


# ---- median ----


def test_median_constant():
    img = np.full((9, 9), 77, np.uint8)
    assert np.array_equal(median_filter(img, 5), img)


def test_median_removes_impulse():
    img = np.zeros((11, 11), np.uint8)
    img[5, 5] = 255
    assert median_filter(img, 5)[5, 5] == 0


def test_median_center_of_patch():
    img = np.arange(1, 10, dtype=np.uint8).reshape(3, 3)
    assert median_filter(img, 3)[1, 1] == 5


@pytest.mark.parametrize("k", [0, 2, -3, 4])
def test_median_bad_kernel(k):
    with pytest.raises(BadKernel):
        median_filter(np.zeros((9, 9)), k)


def test_median_matches_sliding_window(rng):
    img = rng.integers(0, 256, (17, 23)).astype(np.uint8)
    p = np.pad(img, 2, mode="edge")
    want = np.array([[np.median(p[y : y + 5, x : x + 5]) for x in range(23)] for y in range(17)])
    assert np.array_equal(median_filter(img, 5), want.astype(np.uint8))


def test_median_idempotent_on_binary_stripes(rng):
    # stripes at least 3 wide are roots of the 5x5 median; blobs with corners are not
    for _ in range(20):
        widths = rng.integers(3, 8, 12)
        row = np.repeat(np.arange(len(widths)) % 2, widths)[:40] * 255
        img = np.tile(row.astype(np.uint8), (30, 1))
        if rng.random() < 0.5:
            img = np.ascontiguousarray(img.T)
        once = median_filter(img, 5)
        assert np.array_equal(once, img)
        assert np.array_equal(median_filter(once, 5), once)


# ---- CLAHE ----


def test_clahe_constant():
    out = clahe(np.full((32, 32), 90, np.uint8), 8, 2.0)
    assert len(np.unique(out)) == 1


def test_clahe_two_tiles():
    img = np.zeros((8, 16), np.uint8)
    img[:, :8], img[:, 8:] = 50, 200
    out = clahe(img, 8, 2.0)
    # area 64, limit 0.5: cdf(v) = 0.5 + (v + 1) * 63.5 / 256 inside each constant tile
    assert np.all(out[:, :4] == 52)
    assert np.all(out[:, 12:] == 201)


def test_clahe_tile_mapping_monotone():
    # the same tile filled with increasing constants maps to nondecreasing outputs
    outs = [int(clahe(np.full((8, 8), v, np.uint8), 8, 2.0)[0, 0]) for v in range(0, 256, 5)]
    assert outs == sorted(outs)


def test_clahe_unclipped_uniform_tile_is_identity():
    img = np.arange(256, dtype=np.uint8).reshape(16, 16)
    out = clahe(img, 16, np.inf)
    assert np.max(np.abs(out.astype(int) - img.astype(int))) <= 1


@pytest.mark.parametrize("shape, tile, clip", [((20, 27), 8, 2.0), ((16, 16), 8, np.inf), ((13, 9), 4, 3.0)])
def test_clahe_matches_loop_reference(rng, shape, tile, clip):
    img = rng.integers(0, 256, shape).astype(np.uint8)
    assert np.array_equal(clahe(img, tile, clip), clahe_reference(img, tile, clip))


# ---- Canny ----


def test_canny_vertical_step():
    img = np.zeros((20, 20))
    img[:, 10:] = 255
    e = canny(img, 100, 300)
    cols = np.unique(np.nonzero(e.edges)[1])
    assert len(cols) == 1
    assert e.edges[:, cols[0]].all()
    assert np.all(e.sign[e.edges] > 0)


def test_canny_falling_step_negative():
    img = np.full((20, 20), 255.0)
    img[:, 10:] = 0
    e = canny(img, 100, 300)
    assert e.edges.any()
    assert np.all(e.sign[e.edges] < 0)


def test_canny_constant_empty():
    assert not canny(np.full((10, 10), 42.0), 1, 2).edges.any()


@given(st.integers(0, 255))
def test_canny_constant_any_level(v):
    assert not canny(np.full((8, 8), float(v)), 0.0, 0.0).edges.any()


def test_canny_signs_nonzero(rng):
    img = rng.integers(0, 256, (30, 30)).astype(float)
    e = canny(img, 50, 150)
    assert np.all(e.sign[e.edges] != 0)


def test_canny_threshold_order():
    with pytest.raises(ValueError):
        canny(np.zeros((5, 5)), 5, 1)


# ---- Otsu ----


def test_otsu_two_modes():
    img = np.array([0] * 50 + [255] * 50, np.uint8)
    t = otsu_threshold(img)
    assert 0 <= t < 255
    assert t == brute_force_otsu(np.bincount(img, minlength=256))


def test_otsu_fifty_two_hundred():
    img = np.array([50] * 100 + [200] * 100, np.uint8)
    hist = np.bincount(img, minlength=256)
    assert otsu_threshold(img) == brute_force_otsu(hist)
    assert 50 <= otsu_threshold(img) < 200


def test_otsu_degenerate():
    with pytest.raises(Degenerate):
        otsu_threshold(np.full(10, 7, np.uint8))


def test_otsu_mask(rng):
    img = rng.integers(0, 256, (20, 20)).astype(np.uint8)
    mask = np.zeros_like(img, bool)
    mask[5:15, 5:15] = True
    hist = np.bincount(img[mask], minlength=256)
    assert otsu_threshold(img, mask) == otsu_from_histogram(hist) == brute_force_otsu(hist)


# ---- denoising ----


@pytest.mark.parametrize("mode", ["bilateral", "nonlocal_means"])
def test_denoise_constant_unchanged(mode):
    img = np.full((16, 16), 128.0)
    assert np.allclose(denoise_edge_preserving(img, mode), img)


def test_bilateral_preserves_step():
    img = np.zeros((20, 20))
    img[:, 10:] = 100.0  # 5x the range sigma
    out = denoise_edge_preserving(img, "bilateral", sigma_space=2.0, sigma_range=20.0)
    contrast = out[:, 12:].mean() - out[:, :8].mean()
    assert contrast >= 0.9 * 100


def test_nlm_reduces_noise(rng):
    img = 128 + rng.normal(0, 20, (64, 64))
    out = denoise_edge_preserving(img, "nonlocal_means", h=30.0, patch_radius=1, search_radius=3)
    assert out.std() <= 0.5 * img.std()


# ---- Hough ----


def circle_edges(shape, circles):
    from retinoscopy.imgproc import auto_canny

    yy, xx = np.mgrid[0 : shape[0], 0 : shape[1]]
    img = np.zeros(shape)
    for cx, cy, r in circles:
        img[(xx - cx) ** 2 + (yy - cy) ** 2 <= r * r] = 255
    return auto_canny(img)


def test_hough_single_circle():
    e = circle_edges((200, 200), [(100, 100, 20)])
    c = hough_circles(e, 15, 25)[0]
    assert abs(c.cx - 100) <= 1 and abs(c.cy - 100) <= 1 and abs(c.radius - 20) <= 1


def test_hough_empty():
    from retinoscopy.imgproc import EdgeMap

    z = np.zeros((20, 20))
    assert hough_circles(EdgeMap(z.astype(bool), z, z), 3, 5) == []


def test_hough_two_circles_larger_first():
    e = circle_edges((120, 220), [(50, 60, 12), (150, 60, 24)])
    found = hough_circles(e, 8, 28)
    big = found[0]
    assert abs(big.cx - 150) <= 1 and abs(big.radius - 24) <= 1
    assert any(abs(c.cx - 50) <= 1 and abs(c.cy - 60) <= 1 and abs(c.radius - 12) <= 1 for c in found[1:])


def test_hough_radius_bounds():
    with pytest.raises(ValueError):
        hough_circles(circle_edges((20, 20), []), 2, 5)


# ---- upsampling ----


def test_upsample_constant():
    out = upsample(np.full((5, 7), 33.0), 4)
    assert out.shape == (20, 28)
    assert np.allclose(out, 33.0)


def test_upsample_two_point_ramp_monotone():
    out = upsample(np.array([[0.0, 255.0]]), 4)
    assert out.shape == (4, 8)
    assert np.all(np.diff(out[0]) >= -1e-9)


def test_upsample_step_position():
    img = np.zeros((4, 20))
    img[:, 10:] = 200.0
    out = upsample(img, 4)[0]
    j = np.flatnonzero(out >= 100)[0]
    # half-max crossing in source coordinates, just before the step at 9.5
    x = (j - 1 + (100 - out[j - 1]) / (out[j] - out[j - 1]) + 0.5) / 4 - 0.5
    assert abs(x - 9.5) < 1.0


@pytest.mark.parametrize("factor", [2, 4])
def test_upsample_preserves_mean(rng, factor):
    img = rng.uniform(0, 255, (16, 16))
    assert upsample(img, factor).mean() == pytest.approx(img.mean(), rel=0.01)


def test_upsample_factor_check():
    with pytest.raises(ValueError):
        upsample(np.zeros((4, 4)), 3)


# ---- homography ----


def five_points():
    return np.array([[0.0, 0.0], [100.0, 0.0], [100.0, 60.0], [0.0, 80.0], [40.0, 120.0]])


def test_homography_identity():
    p = five_points()
    assert np.allclose(estimate_homography(p, p), np.eye(3), atol=1e-10)


def test_homography_translation():
    p = five_points()
    H = estimate_homography(p, p + [10, -5])
    assert np.allclose(H, [[1, 0, 10], [0, 1, -5], [0, 0, 1]], atol=1e-10)


def test_homography_random_projective(rng):
    for _ in range(20):
        H = np.eye(3) + rng.normal(0, [[0.1, 0.1, 5], [0.1, 0.1, 5], [1e-4, 1e-4, 0]])
        p = five_points()
        q = apply_homography(H, p)
        Hest = estimate_homography(p, q)
        assert np.max(np.linalg.norm(apply_homography(Hest, p) - q, axis=1)) < 1e-6
        assert Hest[2, 2] == 1.0


def test_homography_collinear():
    p = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    with pytest.raises(DegenerateConfig):
        estimate_homography(p, p)


def test_homography_too_few():
    with pytest.raises(DegenerateConfig):
        estimate_homography(five_points()[:3], five_points()[:3])


# ---- warping ----


def textured(rng, shape=(60, 80)):
    from scipy.ndimage import gaussian_filter

    return np.clip(gaussian_filter(rng.uniform(0, 255, shape), 2.0) * 3 - 255, 0, 255)


def test_warp_identity(rng):
    img = rng.integers(0, 256, (20, 30)).astype(np.uint8)
    assert np.array_equal(warp_perspective(img, np.eye(3), (30, 20)), img)


def test_warp_translation_zero_fill(rng):
    img = rng.integers(1, 256, (20, 30)).astype(np.uint8)
    out = warp_perspective(img, [[1, 0, 3], [0, 1, 2], [0, 0, 1]], (30, 20))
    assert np.array_equal(out[2:, 3:], img[:-2, :-3])
    assert not out[:2].any() and not out[:, :3].any()


def test_warp_roundtrip_psnr(rng):
    img = textured(rng)
    H = np.array([[1.02, 0.03, 2.0], [-0.02, 0.98, 1.5], [1e-4, -5e-5, 1.0]])
    back = warp_perspective(warp_perspective(img, H, (80, 60), keep_float=True), np.linalg.inv(H), (80, 60), True)
    inner = (slice(10, 50), slice(10, 70))
    mse = np.mean((back[inner] - img[inner]) ** 2)
    assert 10 * np.log10(255**2 / mse) > 30


def test_warp_singular():
    with pytest.raises(SingularHomography):
        warp_perspective(np.zeros((4, 4)), np.zeros((3, 3)), (4, 4))


def test_png_roundtrip(tmp_path, rng):
    img = rng.integers(0, 256, (12, 10, 3)).astype(np.uint8)
    write_png(tmp_path / "a.png", img)
    assert np.array_equal(read_png(tmp_path / "a.png"), img)
