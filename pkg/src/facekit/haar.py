"""Haar-like rectangle features over a square detection window.

Five canonical kinds are enumerated. Responses are (dark sums) - (light
sums) computed from an integral image, normalized by the scaled window
area so one threshold works across scales. The middle rectangle of the
three-rect kinds is counted twice so every kind reads zero on constant
input.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .images import BoundsError, GrayImage, IntegralImage, Rect, rect_sum, round_half_up


class HaarKind(Enum):
    TWO_RECT_HORIZONTAL = "two-h"   # left dark | right light
    TWO_RECT_VERTICAL = "two-v"     # top dark / bottom light
    THREE_RECT_HORIZONTAL = "three-h"  # middle dark (double weight)
    THREE_RECT_VERTICAL = "three-v"
    FOUR_RECT = "four"              # main-diagonal pair dark

    @property
    def span(self) -> tuple[int, int]:
        """Footprint in units of (unit_w, unit_h)."""
        return _SPANS[self]


_SPANS = {
    HaarKind.TWO_RECT_HORIZONTAL: (2, 1),
    HaarKind.TWO_RECT_VERTICAL: (1, 2),
    HaarKind.THREE_RECT_HORIZONTAL: (3, 1),
    HaarKind.THREE_RECT_VERTICAL: (1, 3),
    HaarKind.FOUR_RECT: (2, 2),
}

_KIND_BY_TOKEN = {k.value: k for k in HaarKind}


def kind_from_token(token: str) -> HaarKind:
    try:
        return _KIND_BY_TOKEN[token]
    except KeyError:
        raise ValueError(f"unknown Haar kind {token!r}") from None


@dataclass(frozen=True)
class HaarFeature:
    """One feature placement: kind, window-relative origin, unit rectangle size."""

    kind: HaarKind
    x: int
    y: int
    unit_w: int
    unit_h: int


@dataclass(frozen=True)
class WindowSpec:
    """Square detection window geometry at scale 1."""

    base_size: int

    def __post_init__(self):
        if self.base_size < 8:
            raise ValueError(f"base_size must be >= 8, got {self.base_size}")


def enumerate_features(win: WindowSpec) -> list[HaarFeature]:
    """Every placement and unit size of the five kinds fitting the window.

    Order is (kind, y, x, unit_h, unit_w) ascending, so the list is
    reproducible and indexable by trained classifiers.
    """
    base = win.base_size
    feats = []
    for kind in HaarKind:
        mw, mh = kind.span
        for y in range(base):
            for x in range(base):
                for uh in range(1, (base - y) // mh + 1):
                    for uw in range(1, (base - x) // mw + 1):
                        feats.append(HaarFeature(kind, x, y, uw, uh))
    return feats


def _cuts(f: HaarFeature) -> tuple[list[int], list[int]]:
    """Window-relative x and y boundaries of the constituent rectangles."""
    mw, mh = f.kind.span
    xs = [f.x + i * f.unit_w for i in range(mw + 1)]
    ys = [f.y + i * f.unit_h for i in range(mh + 1)]
    return xs, ys


def _scaled_cuts(cuts, offset: int, scale: float) -> list[int]:
    # Cumulative offsets are rounded, never individual widths, so sibling
    # rectangles tile exactly at every scale.
    return [offset + round_half_up(c * scale) for c in cuts]


def evaluate_feature(
    ii: IntegralImage,
    f: HaarFeature,
    win: WindowSpec,
    origin: tuple[int, int] = (0, 0),
    scale: float = 1.0,
) -> float:
    """Feature response at a window placement: (dark - light) / (base*scale)^2."""
    xs0, ys0 = _cuts(f)
    xs = _scaled_cuts(xs0, origin[0], scale)
    ys = _scaled_cuts(ys0, origin[1], scale)
    for cuts in (xs, ys):
        for a, b in zip(cuts, cuts[1:]):
            if b - a < 1:
                raise ValueError(
                    f"feature {f} collapses to zero extent at scale {scale}"
                )
    if xs[0] < 0 or ys[0] < 0 or xs[-1] > ii.width or ys[-1] > ii.height:
        raise BoundsError(
            f"scaled feature footprint [{xs[0]},{xs[-1]})x[{ys[0]},{ys[-1]}) "
            f"outside {ii.width}x{ii.height} image"
        )

    def cell(i: int, j: int) -> int:
        return rect_sum(ii, Rect(xs[i], ys[j], xs[i + 1] - xs[i], ys[j + 1] - ys[j]))

    kind = f.kind
    if kind is HaarKind.TWO_RECT_HORIZONTAL:
        raw = cell(0, 0) - cell(1, 0)
    elif kind is HaarKind.TWO_RECT_VERTICAL:
        raw = cell(0, 0) - cell(0, 1)
    elif kind is HaarKind.THREE_RECT_HORIZONTAL:
        raw = 2 * cell(1, 0) - cell(0, 0) - cell(2, 0)
    elif kind is HaarKind.THREE_RECT_VERTICAL:
        raw = 2 * cell(0, 1) - cell(0, 0) - cell(0, 2)
    else:  # FOUR_RECT
        raw = cell(0, 0) + cell(1, 1) - cell(1, 0) - cell(0, 1)
    return raw / (win.base_size * scale) ** 2


def feature_matrix(
    features: list[HaarFeature],
    images: list[GrayImage],
    win: WindowSpec,
) -> np.ndarray:
    """Evaluate every feature on every window-sized image at scale 1.

    Returns a (n_images, n_features) float64 matrix, bitwise equal to
    calling evaluate_feature per entry but computed with sliced
    summed-area arithmetic over all placements of one shape at a time.
    """
    base = win.base_size
    for img in images:
        if img.width != base or img.height != base:
            raise ValueError(
                f"expected {base}x{base} training windows, got {img.width}x{img.height}"
            )
    n = len(images)
    index_of = {f: i for i, f in enumerate(features)}
    # stacked padded tables: P[s, y, x] = cumulative sum with zero guard border
    P = np.zeros((n, base + 1, base + 1), dtype=np.int64)
    for s, img in enumerate(images):
        np.cumsum(img.pixels, axis=0, dtype=np.int64, out=P[s, 1:, 1:])
        np.cumsum(P[s, 1:, 1:], axis=1, out=P[s, 1:, 1:])

    X = np.empty((n, len(features)), dtype=np.float64)
    norm = float(base * base)

    def grid_sums(dx: int, dy: int, w: int, h: int, ny: int, nx: int) -> np.ndarray:
        # rect sums of the (w x h) rect at offset (dx, dy) for all window
        # origins (y in [0, ny), x in [0, nx)) in all images at once
        return (
            P[:, dy + h:dy + h + ny, dx + w:dx + w + nx]
            - P[:, dy:dy + ny, dx + w:dx + w + nx]
            - P[:, dy + h:dy + h + ny, dx:dx + nx]
            + P[:, dy:dy + ny, dx:dx + nx]
        )

    seen = np.zeros(len(features), dtype=bool)
    for kind in HaarKind:
        mw, mh = kind.span
        for uh in range(1, base // mh + 1):
            for uw in range(1, base // mw + 1):
                fw, fh = mw * uw, mh * uh
                ny, nx = base - fh + 1, base - fw + 1
                if kind is HaarKind.TWO_RECT_HORIZONTAL:
                    raw = grid_sums(0, 0, uw, uh, ny, nx) - grid_sums(uw, 0, uw, uh, ny, nx)
                elif kind is HaarKind.TWO_RECT_VERTICAL:
                    raw = grid_sums(0, 0, uw, uh, ny, nx) - grid_sums(0, uh, uw, uh, ny, nx)
                elif kind is HaarKind.THREE_RECT_HORIZONTAL:
                    raw = (
                        2 * grid_sums(uw, 0, uw, uh, ny, nx)
                        - grid_sums(0, 0, uw, uh, ny, nx)
                        - grid_sums(2 * uw, 0, uw, uh, ny, nx)
                    )
                elif kind is HaarKind.THREE_RECT_VERTICAL:
                    raw = (
                        2 * grid_sums(0, uh, uw, uh, ny, nx)
                        - grid_sums(0, 0, uw, uh, ny, nx)
                        - grid_sums(0, 2 * uh, uw, uh, ny, nx)
                    )
                else:
                    raw = (
                        grid_sums(0, 0, uw, uh, ny, nx)
                        + grid_sums(uw, uh, uw, uh, ny, nx)
                        - grid_sums(uw, 0, uw, uh, ny, nx)
                        - grid_sums(0, uh, uw, uh, ny, nx)
                    )
                cols = np.empty((ny, nx), dtype=np.int64)
                for yy in range(ny):
                    for xx in range(nx):
                        cols[yy, xx] = index_of[HaarFeature(kind, xx, yy, uw, uh)]
                flat = cols.ravel()
                X[:, flat] = raw.reshape(n, -1) / norm
                seen[flat] = True
    if not seen.all():
        raise AssertionError("feature matrix did not cover the enumeration")
    return X


def lookups_per_feature(kind: HaarKind) -> int:
    """Integral-table lookups one evaluation performs (4 per sub-rectangle)."""
    mw, mh = kind.span
    return 4 * mw * mh
