"""Grayscale denoising and the six-stage contrast/edge enhancement pipeline.

Images are 2-D float64 arrays (height x width) with intensities in [0, 1].
Borders are handled by edge replication everywhere.
"""

from __future__ import annotations

import math

import numpy as np

LAPLACIAN_KERNEL = np.array([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]])
SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
SOBEL_Y = SOBEL_X.T.copy()
MEAN3_KERNEL = np.full((3, 3), 1.0 / 9.0)

HIST_BINS = 256


def check_image(img) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D image, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("image contains non-finite pixels")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("pixel intensities must lie in [0, 1]")
    return arr


def build_gaussian_kernel(sigma: float) -> np.ndarray:
    """Sample the 2-D Gaussian at integer offsets and normalise to unit sum.

    The kernel side is ``2 * ceil(3 * sigma) + 1``.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    weights = gaussian_weights(sigma, int(math.ceil(3.0 * sigma)))
    return weights / weights.sum()


def gaussian_weights(sigma: float, radius: int) -> np.ndarray:
    """Unnormalised samples of G(x, y) = exp(-(x^2 + y^2) / 2 sigma^2) / (2 pi sigma^2)."""
    off = np.arange(-radius, radius + 1, dtype=np.float64)
    xx, yy = np.meshgrid(off, off, indexing="ij")
    return np.exp(-(xx**2 + yy**2) / (2.0 * sigma**2)) / (2.0 * math.pi * sigma**2)


def filter2d(img, kernel) -> np.ndarray:
    """True 2-D convolution with replicated borders; the result is not clamped."""
    img = np.asarray(img, dtype=np.float64)
    k = np.asarray(kernel, dtype=np.float64)
    if k.ndim != 2 or k.shape[0] != k.shape[1] or k.shape[0] % 2 == 0:
        raise ValueError(f"kernel must be square with odd side, got {k.shape}")
    r = k.shape[0] // 2
    h, w = img.shape
    padded = np.pad(img, r, mode="edge")
    flipped = k[::-1, ::-1]
    # Zero-sum (derivative) kernels act on differences from the centre pixel
    # so that flat regions give exactly 0.
    centre = img if k.sum() == 0.0 else 0.0
    out = np.zeros_like(img)
    for i in range(k.shape[0]):
        for j in range(k.shape[1]):
            if flipped[i, j] != 0.0:
                out += flipped[i, j] * (padded[i : i + h, j : j + w] - centre)
    return out


def convolve2d(img, kernel) -> np.ndarray:
    return np.clip(filter2d(check_image(img), kernel), 0.0, 1.0)


def denoise(img, sigma: float) -> np.ndarray:
    return convolve2d(img, build_gaussian_kernel(sigma))


def laplacian(img) -> np.ndarray:
    """Signed 4-neighbour Laplacian response (unclamped)."""
    return filter2d(check_image(img), LAPLACIAN_KERNEL)


def sobel_magnitude(img) -> np.ndarray:
    img = check_image(img)
    gx = filter2d(img, SOBEL_X)
    gy = filter2d(img, SOBEL_Y)
    return np.clip(np.sqrt(gx**2 + gy**2), 0.0, 1.0)


def mean_filter3(img) -> np.ndarray:
    return convolve2d(img, MEAN3_KERNEL)


def quantize(img) -> np.ndarray:
    return np.rint(np.asarray(img) * (HIST_BINS - 1)).astype(np.int64)


def histogram_equalize(img) -> np.ndarray:
    """Map each pixel through the normalised CDF of its 8-bit level.

    ``out = (cdf(v) - cdf_min) / (1 - cdf_min)``; a single-level image has
    no spread to redistribute and is returned unchanged.
    """
    img = check_image(img)
    levels = quantize(img)
    hist = np.bincount(levels.ravel(), minlength=HIST_BINS)
    cdf = np.cumsum(hist) / levels.size
    cdf_min = cdf[levels.min()]
    if cdf_min >= 1.0:
        return img.copy()
    mapping = (cdf - cdf_min) / (1.0 - cdf_min)
    return np.clip(mapping[levels], 0.0, 1.0)


def enhance(img) -> np.ndarray:
    """Laplacian, Sobel, 3x3 smoothing, pixel product, sharpening, equalisation."""
    img = check_image(img)
    lap = laplacian(img)
    edges = mean_filter3(sobel_magnitude(img))
    sharpened = np.clip(img + edges * lap, 0.0, 1.0)
    return histogram_equalize(sharpened)


def preprocess(img, denoise_sigma: float | None = None, do_enhance: bool = False) -> np.ndarray:
    """Optional denoising followed by optional enhancement."""
    out = check_image(img)
    if denoise_sigma is not None:
        out = denoise(out, denoise_sigma)
    if do_enhance:
        out = enhance(out)
    return out
