"""Raster image types, conversions, histograms, grid segmentation and the
integral-image (summed-area) table with constant-time rectangle sums.

All images are immutable after construction: pixel arrays are marked
read-only, and every operation returns a new object. Coordinates are
x = column, y = row, origin at the top-left.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class DimensionError(ValueError):
    """Image/grid dimensions are inconsistent with the requested operation."""


class BoundsError(ValueError):
    """A rectangle reaches outside its host image."""


def round_half_up(x: float) -> int:
    """Round a non-negative real to the nearest integer, halves up.

    Used everywhere geometry has to be quantized (grid cuts, feature
    scaling, window strides) so all modules share one convention.
    """
    return int(math.floor(x + 0.5))


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


class RgbImage:
    """8-bit RGB raster, pixels shaped (height, width, 3)."""

    def __init__(self, pixels: np.ndarray):
        pixels = np.asarray(pixels, dtype=np.uint8)
        if pixels.ndim != 3 or pixels.shape[2] != 3:
            raise DimensionError(f"RGB pixels must be (h, w, 3), got {pixels.shape}")
        if pixels.shape[0] < 1 or pixels.shape[1] < 1:
            raise DimensionError("image must be at least 1x1")
        self.pixels = _readonly(pixels)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


class GrayImage:
    """8-bit grayscale raster, pixels shaped (height, width)."""

    def __init__(self, pixels: np.ndarray):
        pixels = np.asarray(pixels, dtype=np.uint8)
        if pixels.ndim != 2:
            raise DimensionError(f"gray pixels must be (h, w), got {pixels.shape}")
        if pixels.shape[0] < 1 or pixels.shape[1] < 1:
            raise DimensionError("image must be at least 1x1")
        self.pixels = _readonly(pixels)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


class BinaryImage:
    """Raster over {0, 1}, pixels shaped (height, width)."""

    def __init__(self, pixels: np.ndarray):
        pixels = np.asarray(pixels, dtype=np.uint8)
        if pixels.ndim != 2:
            raise DimensionError(f"binary pixels must be (h, w), got {pixels.shape}")
        if pixels.shape[0] < 1 or pixels.shape[1] < 1:
            raise DimensionError("image must be at least 1x1")
        if pixels.max(initial=0) > 1:
            raise ValueError("binary image values must be 0 or 1")
        self.pixels = _readonly(pixels)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle: top-left corner (x, y), extent (w, h)."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise ValueError(f"rectangle extent must be >= 1, got {self.w}x{self.h}")

    @property
    def x2(self) -> int:
        """One past the right edge."""
        return self.x + self.w

    @property
    def y2(self) -> int:
        """One past the bottom edge."""
        return self.y + self.h

    @property
    def area(self) -> int:
        return self.w * self.h


@dataclass(frozen=True)
class Histogram:
    """Intensity histogram: bins[v] counts pixels of value v."""

    bins: np.ndarray
    total: int


class IntegralImage:
    """Summed-area table: at(x, y) is the sum of all pixels (x' <= x, y' <= y).

    Entries are exact 64-bit integers; the internal table carries a zero
    guard row/column so out-of-range lookups at index -1 are plain reads.
    """

    def __init__(self, padded: np.ndarray, width: int, height: int):
        self._padded = _readonly(padded.astype(np.int64, copy=False))
        self.width = width
        self.height = height

    def at(self, x: int, y: int) -> int:
        """Cumulative sum at (x, y); x or y may be -1 (empty prefix, 0)."""
        return int(self._padded[y + 1, x + 1])

    @property
    def table(self) -> np.ndarray:
        """The (height, width) cumulative table without the guard border."""
        return self._padded[1:, 1:]


def rgb_to_gray(img: RgbImage) -> GrayImage:
    """Convert RGB to grayscale with the BT.601 luma weights.

    gray = round(0.299 R + 0.587 G + 0.114 B), halves rounded up.
    """
    rgb = img.pixels.astype(np.float64)
    lum = 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]
    gray = np.clip(np.floor(lum + 0.5), 0, 255).astype(np.uint8)
    return GrayImage(gray)


def otsu_threshold(img: GrayImage) -> int:
    """Threshold maximizing between-class variance over the 256-bin histogram.

    The returned t splits pixels into {v < t} and {v >= t}; all 256
    candidates are scanned and the first maximum wins. A constant image
    has no valid split and yields 0.
    """
    counts = np.bincount(img.pixels.ravel(), minlength=256).astype(np.int64)
    total = int(counts.sum())
    values = np.arange(256, dtype=np.int64)
    weighted = counts * values

    best_t = 0
    best_var = -1.0
    below_n = 0
    below_sum = 0
    grand_sum = int(weighted.sum())
    for t in range(256):
        if t > 0:
            below_n += int(counts[t - 1])
            below_sum += int(weighted[t - 1])
        above_n = total - below_n
        if below_n == 0 or above_n == 0:
            continue
        mu0 = below_sum / below_n
        mu1 = (grand_sum - below_sum) / above_n
        var = below_n * above_n * (mu0 - mu1) ** 2
        if var > best_var:
            best_var = var
            best_t = t
    return best_t


def gray_to_binary(img: GrayImage, threshold: int | str = 128) -> BinaryImage:
    """Binarize: pixel >= threshold -> 1 else 0. threshold="auto" uses Otsu."""
    if threshold == "auto":
        t = otsu_threshold(img)
    else:
        t = int(threshold)
        if not 0 <= t <= 255:
            raise ValueError(f"threshold must be in [0, 255], got {t}")
    return BinaryImage((img.pixels >= t).astype(np.uint8))


def binary_to_gray(img: BinaryImage, high: int = 255) -> GrayImage:
    """Expand {0,1} to {0,high} for dumping binary masks as PGM."""
    return GrayImage((img.pixels.astype(np.int64) * high).astype(np.uint8))


def histogram(img: GrayImage | BinaryImage) -> Histogram:
    """Count pixels per intensity level: 256 bins for gray, 2 for binary."""
    nbins = 2 if isinstance(img, BinaryImage) else 256
    bins = np.bincount(img.pixels.ravel(), minlength=nbins).astype(np.int64)
    return Histogram(bins=_readonly(bins), total=img.width * img.height)


def segment_grid(img, rows: int, cols: int):
    """Cut an image into rows x cols tiles, returned in row-major order.

    Tile boundaries sit at round(i * height / rows) and round(j * width / cols),
    so the tiles partition the image exactly: no gap, no overlap.
    """
    if rows < 1 or cols < 1:
        raise DimensionError("rows and cols must be >= 1")
    if rows > img.height or cols > img.width:
        raise DimensionError(
            f"cannot cut {img.width}x{img.height} image into {rows}x{cols} grid"
        )
    ys = [round_half_up(i * img.height / rows) for i in range(rows + 1)]
    xs = [round_half_up(j * img.width / cols) for j in range(cols + 1)]
    kind = type(img)
    tiles = []
    for i in range(rows):
        for j in range(cols):
            tiles.append(kind(img.pixels[ys[i]:ys[i + 1], xs[j]:xs[j + 1]].copy()))
    return tiles


def integral_image(img: GrayImage) -> IntegralImage:
    """Build the summed-area table of a grayscale image (exact integers)."""
    padded = np.zeros((img.height + 1, img.width + 1), dtype=np.int64)
    np.cumsum(img.pixels, axis=0, dtype=np.int64, out=padded[1:, 1:])
    np.cumsum(padded[1:, 1:], axis=1, out=padded[1:, 1:])
    return IntegralImage(padded, img.width, img.height)


def rect_sum(ii: IntegralImage, r: Rect) -> int:
    """Sum of pixels inside r, from exactly four table lookups."""
    if r.x < 0 or r.y < 0 or r.x2 > ii.width or r.y2 > ii.height:
        raise BoundsError(
            f"rect {r} outside {ii.width}x{ii.height} image"
        )
    return (
        ii.at(r.x2 - 1, r.y2 - 1)
        - ii.at(r.x - 1, r.y2 - 1)
        - ii.at(r.x2 - 1, r.y - 1)
        + ii.at(r.x - 1, r.y - 1)
    )


def crop(img: GrayImage, r: Rect) -> GrayImage:
    """Copy the sub-image covered by r."""
    if r.x < 0 or r.y < 0 or r.x2 > img.width or r.y2 > img.height:
        raise BoundsError(f"rect {r} outside {img.width}x{img.height} image")
    return GrayImage(img.pixels[r.y:r.y2, r.x:r.x2].copy())


def resize_nearest(img: GrayImage, new_w: int, new_h: int) -> GrayImage:
    """Nearest-neighbor resample; exact and filter-free, so reproducible."""
    if new_w < 1 or new_h < 1:
        raise DimensionError("target size must be >= 1")
    src_y = (np.arange(new_h) * img.height) // new_h
    src_x = (np.arange(new_w) * img.width) // new_w
    return GrayImage(img.pixels[np.ix_(src_y, src_x)].copy())
