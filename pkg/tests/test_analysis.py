import io

import numpy as np
import pytest
from PIL import Image

import oracles
from imgforensics.analysis import (SCORE_EPSILON, Heatmap, block_means, block_verdict,
                                   check_window, covariance_rank, ela, ela_indicates,
                                   luminance_gradient, noise_analysis, otsu_threshold, pca_eigen,
                                   pca_projection, region_score, separable_median,
                                   verdict_from_heatmap)
from imgforensics.codec import EncodeParams, decode, encode
from imgforensics.errors import DegenerateCovariance, DimensionMismatch, WindowTooLarge
from imgforensics.image import PixelImage
from imgforensics.synth import smooth_gradient, texture


def test_ela_shape_and_range():
    img = PixelImage.from_array(texture(np.random.default_rng(0), 24, 40))
    h = ela(img)
    assert h.values.shape == (24, 40) and h.method == "ela"
    assert h.values.min() >= 0 and h.values.max() <= 255
    assert h.params == {"quality": 95, "amplification": 20.0}
    with pytest.raises(ValueError):
        ela(img, amplification=0)


def test_ela_matches_manual_recompression():
    arr = texture(np.random.default_rng(1), 16, 16)
    img = PixelImage.from_array(arr)
    again = decode(encode(img, EncodeParams(90, "4:4:4"))).to_array().astype(float)
    expected = np.minimum(7 * np.abs(img.to_array() - again).mean(axis=2), 255)
    assert np.allclose(ela(img, 90, 7).values, expected)


def test_ela_separates_splices(splices):
    for fx in splices:
        heat = ela(fx.spliced)
        v = block_verdict(heat)
        assert ela_indicates(v, heat), fx.name
        # every hot tile must touch the paste (boxes are not tile-aligned)
        hot = block_means(v.suspicious_mask.astype(float), 16) > 0
        touched = block_means(fx.mask.astype(float), 16) > 0
        assert hot.any() and not (hot & ~touched).any()
        control = ela(fx.control)
        assert not ela_indicates(block_verdict(control), control), fx.name


@pytest.mark.parametrize("window", [2, 4, 1, 3.0, True])
def test_window_must_be_odd_int(window):
    with pytest.raises(ValueError):
        check_window(window, 10, 10)


def test_window_too_large():
    with pytest.raises(WindowTooLarge):
        check_window(9, 8, 20)
    check_window(7, 7, 7)
    with pytest.raises(WindowTooLarge):
        noise_analysis(np.zeros((5, 20)), 7)


def test_noise_is_median_residual():
    gray = np.random.default_rng(2).integers(0, 255, (12, 15)).astype(float)
    h = noise_analysis(gray, 5)
    med = np.array(oracles.separable_median_bruteforce(gray.tolist(), 5))
    assert np.array_equal(h.values, np.abs(gray - med))
    assert np.array_equal(separable_median(gray, 5), med)


def test_gradient_against_loops():
    lum = np.random.default_rng(3).integers(0, 256, (6, 9)).astype(float)
    h = luminance_gradient(lum)
    rows, cols = lum.shape
    for i in range(rows):
        for j in range(cols):
            if 0 < j < cols - 1:
                gx = (lum[i, j + 1] - lum[i, j - 1]) / 2
            else:
                gx = lum[i, 1] - lum[i, 0] if j == 0 else lum[i, j] - lum[i, j - 1]
            if 0 < i < rows - 1:
                gy = (lum[i + 1, j] - lum[i - 1, j]) / 2
            else:
                gy = lum[1, j] - lum[0, j] if i == 0 else lum[i, j] - lum[i - 1, j]
            assert h.values[i, j] == pytest.approx(np.hypot(gx, gy), abs=1e-9)


def test_gradient_single_row():
    h = luminance_gradient(np.arange(5, dtype=float)[None, :] * 10)
    assert h.values.shape == (1, 5)
    assert np.allclose(h.values, 10)


def test_pca_degenerate():
    gray = PixelImage.from_array(smooth_gradient(8, 8)[:, :, 0])
    vals, _ = pca_eigen(gray)
    assert covariance_rank(vals) == 1
    assert pca_projection(gray, 1).values.shape == (8, 8)
    with pytest.raises(DegenerateCovariance):
        pca_projection(gray, 2)
    with pytest.raises(DegenerateCovariance):
        pca_projection(np.full((4, 4, 3), 9.0), 1)
    with pytest.raises(ValueError):
        pca_projection(gray, 4)


def test_pca_projection_is_minmax():
    h = pca_projection(texture(np.random.default_rng(4), 16, 16), 1)
    assert h.normalization == "minmax"
    assert h.values.min() == pytest.approx(0) and h.values.max() == pytest.approx(255)
    assert len(h.params["eigenvalues"]) == 3


def _otsu_bruteforce(values):
    """Best split over the sorted distinct values by between-class variance."""
    v = sorted(values)
    distinct = sorted(set(v))
    best, best_cut = -1.0, None
    for cut in distinct[1:]:
        lo = [x for x in v if x < cut]
        hi = [x for x in v if x >= cut]
        w0, w1 = len(lo) / len(v), len(hi) / len(v)
        between = w0 * w1 * (sum(lo) / len(lo) - sum(hi) / len(hi)) ** 2
        if between > best:
            best, best_cut = between, cut
    return best_cut


def test_otsu_partition_matches_bruteforce():
    rng = np.random.default_rng(5)
    for _ in range(20):
        a = rng.integers(0, 12, 60)
        b = rng.integers(20, 40, rng.integers(5, 60))
        values = np.concatenate([a, b]).astype(float)
        thr = otsu_threshold(values)
        cut = _otsu_bruteforce(values.tolist())
        assert np.array_equal(values >= thr, values >= cut)


def test_otsu_constant_is_none():
    assert otsu_threshold(np.full(10, 3.0)) is None
    v = verdict_from_heatmap(np.full((4, 4), 3.0))
    assert not v.suspicious_mask.any() and v.score == 0 and v.threshold_used == 3.0


def test_verdict_with_mask():
    values = np.ones((4, 4))
    mask = np.zeros((4, 4), bool)
    mask[:2] = True
    values[mask] = 6
    assert verdict_from_heatmap(values, mask).score == pytest.approx(6)
    with pytest.raises(DimensionMismatch):
        verdict_from_heatmap(values, np.zeros((3, 4), bool))


def test_region_score_zero_outside():
    values = np.zeros((2, 2))
    values[0, 0] = 1
    mask = values > 0
    assert region_score(values, mask) == pytest.approx(1 / SCORE_EPSILON)
    assert region_score(values, np.zeros_like(mask)) == 0.0


def test_block_means_partial_tiles():
    values = np.random.default_rng(6).uniform(size=(10, 7))
    out = block_means(values, 4)
    assert out.shape == (3, 2)
    for i in range(3):
        for j in range(2):
            assert out[i, j] == pytest.approx(values[4 * i:4 * i + 4, 4 * j:4 * j + 4].mean())


def test_block_verdict_mask_shape():
    values = np.zeros((20, 36))
    values[:16, :16] = 50
    v = block_verdict(values)
    assert v.suspicious_mask.shape == values.shape
    assert v.suspicious_mask[:16, :16].all() and v.suspicious_mask.sum() == 256


def test_heatmap_png_and_scaling():
    h = Heatmap(np.array([[0.0, 100.4], [255.0, 30.6]]))
    assert h.to_uint8().tolist() == [[0, 100], [255, 31]]
    back = np.asarray(Image.open(io.BytesIO(h.to_png())))
    assert np.array_equal(back, h.to_uint8())
    wide = Heatmap(np.array([[0.0, 510.0]]))
    assert wide.to_uint8().tolist() == [[0, 255]]
