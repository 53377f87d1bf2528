"""Pixel-domain localization: ELA, median-residual noise, luminance gradient, PCA.

Each analysis returns a Heatmap the size of the input image; a RegionVerdict
turns a heatmap into a binary suspicious mask and an inside/outside score.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .codec import EncodeParams, decode, encode
from .errors import DegenerateCovariance, DimensionMismatch, WindowTooLarge
from .image import PixelImage, to_raw
from .png import encode_png

DEFAULT_ELA_QUALITY = 95
DEFAULT_ELA_AMPLIFICATION = 20.0
DEFAULT_MEDIAN_WINDOW = 3
SCORE_EPSILON = 1e-6
OTSU_BINS = 256
RANK_TOLERANCE = 1e-9
STAGE2_BLOCK = 16
STAGE2_SCORE_THRESHOLD = 1.5
# minimum mean grey-level error inside the hot tiles, times the amplification
STAGE2_MIN_LEVEL = 0.5


@dataclass
class Heatmap:
    values: np.ndarray  # float64, (height, width), non-negative
    normalization: str = "raw"  # or "minmax"
    method: str = ""
    params: dict = field(default_factory=dict)

    @property
    def width(self):
        return self.values.shape[1]

    @property
    def height(self):
        return self.values.shape[0]

    def to_uint8(self):
        """Display scaling: values already in 0..255 are kept, wider ranges are max-scaled."""
        v = self.values
        peak = float(v.max()) if v.size else 0.0
        if peak > 255.0:
            v = v * (255.0 / peak)
        return np.clip(np.rint(v), 0, 255).astype(np.uint8)

    def to_png(self):
        return encode_png(self.to_uint8())

    def to_raw(self):
        return to_raw(PixelImage.from_array(self.to_uint8()))


@dataclass
class RegionVerdict:
    suspicious_mask: np.ndarray  # bool, same shape as the heatmap
    score: float
    threshold_used: float

    def to_dict(self):
        return {"score": self.score, "threshold_used": self.threshold_used,
                "suspicious_pixels": int(self.suspicious_mask.sum())}


def _as_image(img):
    return img if isinstance(img, PixelImage) else PixelImage.from_array(img)


# -- ELA -----------------------------------------------------------------------

def ela(img, quality=DEFAULT_ELA_QUALITY, amplification=DEFAULT_ELA_AMPLIFICATION,
        subsampling="4:4:4"):
    """Recompress at ``quality`` and amplify the per-pixel mean absolute difference."""
    if amplification <= 0:
        raise ValueError("amplification must be positive")
    img = _as_image(img)
    again = decode(encode(img, EncodeParams(quality=quality, subsampling=subsampling)))
    diff = np.abs(img.to_array().astype(np.float64) - again.to_array().astype(np.float64))
    if diff.ndim == 3:
        diff = diff.mean(axis=2)
    heat = np.minimum(amplification * diff, 255.0)
    return Heatmap(heat, "raw", "ela", {"quality": quality, "amplification": amplification})


# -- noise (separable median residual) -------------------------------------------

def check_window(window, width, height):
    if isinstance(window, bool) or not isinstance(window, (int, np.integer)):
        raise ValueError(f"median window must be an integer, got {window!r}")
    if window < 3 or window % 2 == 0:
        raise ValueError(f"median window must be odd and >= 3, got {window}")
    if window > min(width, height):
        raise WindowTooLarge(f"window {window} exceeds image size {width}x{height}")


def separable_median(plane, window):
    """Row median then column median, borders replicated."""
    rows = kernels.median_rows(plane, window)
    return kernels.median_rows(rows.T, window).T


def noise_analysis(img, window=DEFAULT_MEDIAN_WINDOW):
    img = _as_image(img)
    check_window(window, img.width, img.height)
    lum = img.luminance()
    heat = np.abs(lum - separable_median(lum, window))
    return Heatmap(heat, "raw", "noise", {"window": int(window)})


# -- luminance gradient ------------------------------------------------------------

def luminance_gradient(img):
    """Central differences inside, one-sided at the borders."""
    lum = _as_image(img).luminance()
    gy = np.gradient(lum, axis=0) if lum.shape[0] > 1 else np.zeros_like(lum)
    gx = np.gradient(lum, axis=1) if lum.shape[1] > 1 else np.zeros_like(lum)
    return Heatmap(np.hypot(gx, gy), "raw", "gradient", {})


# -- PCA -----------------------------------------------------------------------

def color_covariance(img):
    """Per-pixel RGB mean and population covariance."""
    x = _as_image(img).rgb().reshape(-1, 3)
    mean = x.mean(axis=0)
    centered = x - mean
    return mean, centered.T @ centered / len(x)


def pca_eigen(img):
    """Eigenvalues (descending) and unit eigenvectors as columns, sign-normalized."""
    _, cov = color_covariance(img)
    vals, vecs = np.linalg.eigh(cov)
    vals, vecs = vals[::-1].copy(), vecs[:, ::-1].copy()
    vals = np.maximum(vals, 0.0)
    for k in range(3):
        if vecs[np.argmax(np.abs(vecs[:, k])), k] < 0:
            vecs[:, k] = -vecs[:, k]
    return vals, vecs


def covariance_rank(vals):
    top = float(vals[0])
    if top <= 0.0:
        return 0
    return int(np.sum(vals > RANK_TOLERANCE * top))


def pca_projection(img, component=1):
    if component not in (1, 2, 3):
        raise ValueError(f"component must be 1, 2 or 3, got {component}")
    img = _as_image(img)
    vals, vecs = pca_eigen(img)
    rank = covariance_rank(vals)
    if component > rank:
        raise DegenerateCovariance(f"component {component} requested, covariance rank is {rank}")
    x = img.rgb().reshape(-1, 3)
    proj = np.abs((x - x.mean(axis=0)) @ vecs[:, component - 1])
    lo, hi = proj.min(), proj.max()
    heat = (proj - lo) * (255.0 / (hi - lo)) if hi > lo else np.zeros_like(proj)
    return Heatmap(heat.reshape(img.height, img.width), "minmax", "pca",
                   {"component": component, "eigenvalues": vals.tolist()})


# -- verdicts --------------------------------------------------------------------

def otsu_threshold(values, bins=OTSU_BINS):
    """Histogram-based Otsu threshold; None when the values are constant."""
    v = np.asarray(values, dtype=np.float64).ravel()
    lo, hi = float(v.min()), float(v.max())
    if hi <= lo:
        return None
    hist, edges = np.histogram(v, bins=bins, range=(lo, hi))
    centers = (edges[:-1] + edges[1:]) / 2
    w0 = np.cumsum(hist)[:-1].astype(np.float64)
    s0 = np.cumsum(hist * centers)[:-1]
    total, stotal = float(hist.sum()), float((hist * centers).sum())
    w1 = total - w0
    with np.errstate(divide="ignore", invalid="ignore"):
        between = w0 * w1 * (s0 / w0 - (stotal - s0) / w1) ** 2
    between = np.where((w0 > 0) & (w1 > 0), between, -1.0)
    return float(edges[int(np.argmax(between)) + 1])


def region_score(values, mask):
    inside = values[mask]
    outside = values[~mask]
    if inside.size == 0:
        return 0.0
    mean_out = float(outside.mean()) if outside.size else 0.0
    return float(inside.mean()) / max(mean_out, SCORE_EPSILON)


def verdict_from_heatmap(h, mask=None):
    """Otsu mask (or the given evaluation mask) and its inside/outside heat ratio."""
    values = h.values if isinstance(h, Heatmap) else np.asarray(h, dtype=np.float64)
    thr = otsu_threshold(values)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != values.shape:
            raise DimensionMismatch(f"mask shape {mask.shape} != heatmap shape {values.shape}")
    elif thr is None:
        mask = np.zeros(values.shape, dtype=bool)
    else:
        mask = values >= thr
    # constant heat: report that constant as the (unused) threshold
    used = float(values.max()) if thr is None else thr
    return RegionVerdict(mask, region_score(values, mask), used)


def block_means(values, block):
    """Mean heat per block x block tile (edge tiles may be partial)."""
    rows = np.arange(0, values.shape[0], block)
    cols = np.arange(0, values.shape[1], block)
    sums = np.add.reduceat(np.add.reduceat(values, rows, axis=0), cols, axis=1)
    counts = np.outer(np.diff(np.append(rows, values.shape[0])),
                      np.diff(np.append(cols, values.shape[1])))
    return sums / counts


def block_verdict(h, block=STAGE2_BLOCK):
    """Otsu verdict over tile means, mask expanded back to pixels.

    Tile averaging suppresses per-pixel rounding noise, which otherwise lets
    Otsu split any heatmap into a "hot" half.
    """
    values = h.values if isinstance(h, Heatmap) else np.asarray(h, dtype=np.float64)
    tiles = block_means(values, block)
    v = verdict_from_heatmap(tiles)
    mask = np.repeat(np.repeat(v.suspicious_mask, block, axis=0), block, axis=1)
    return RegionVerdict(mask[:values.shape[0], :values.shape[1]], v.score, v.threshold_used)


def ela_indicates(verdict, heat, amplification=DEFAULT_ELA_AMPLIFICATION):
    """Stage-2 indication rule: tile score and absolute heat must both clear their bars."""
    if verdict.score < STAGE2_SCORE_THRESHOLD or not verdict.suspicious_mask.any():
        return False
    values = heat.values if isinstance(heat, Heatmap) else heat
    return float(values[verdict.suspicious_mask].mean()) >= STAGE2_MIN_LEVEL * amplification
