"""Multi-scale sliding-window scanning with a trained cascade, greedy
non-maximum suppression, and facial sub-part detection on face crops.

One integral image serves every scale: windows grow by scaling the Haar
feature geometry, not by resampling the image.
"""

from __future__ import annotations

from dataclasses import dataclass

from .boosting import Cascade, classify_window
from .images import GrayImage, Rect, crop, integral_image, round_half_up


class ImageTooSmallError(ValueError):
    """Image cannot host even one base-size detection window."""


@dataclass(frozen=True)
class Detection:
    """Scored window: rect in source pixels, final-stage margin, scan scale."""

    rect: Rect
    score: float
    scale: float
    part: str = "face"

    def line(self) -> str:
        """The one-line text form: part x y w h scale score."""
        r = self.rect
        return f"{self.part} {r.x} {r.y} {r.w} {r.h} {self.scale:.6g} {self.score:.6g}"


@dataclass(frozen=True)
class ScanConfig:
    scale_start: float = 1.0
    scale_factor: float = 1.25
    stride_fraction: float = 1.0 / 12.0
    nms_iou: float = 0.3

    def __post_init__(self):
        if self.scale_start < 1.0:
            raise ValueError("scale_start must be >= 1")
        if self.scale_factor <= 1.0:
            raise ValueError("scale_factor must be > 1")
        if not 0.0 < self.stride_fraction <= 1.0:
            raise ValueError("stride_fraction must be in (0, 1]")
        if not 0.0 < self.nms_iou < 1.0:
            raise ValueError("nms_iou must be in (0, 1)")


def iou(a: Rect, b: Rect) -> float:
    """Intersection-over-union of two rectangles."""
    iw = min(a.x2, b.x2) - max(a.x, b.x)
    ih = min(a.y2, b.y2) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def _canonical(dets: list[Detection]) -> list[Detection]:
    # score descending, then (y, x, scale) ascending: a total, scan-order-free order
    return sorted(dets, key=lambda d: (-d.score, d.rect.y, d.rect.x, d.scale))


def non_max_suppression(dets: list[Detection], iou_threshold: float) -> list[Detection]:
    """Greedy NMS: keep the best-scored detection, drop overlaps above the
    threshold, repeat. Ties resolve by (y, x, scale) ascending."""
    if not 0.0 < iou_threshold < 1.0:
        raise ValueError("iou_threshold must be in (0, 1)")
    kept: list[Detection] = []
    for d in _canonical(dets):
        if all(iou(d.rect, k.rect) <= iou_threshold for k in kept):
            kept.append(d)
    return kept


def scan_windows(win_base: int, width: int, height: int, cfg: ScanConfig):
    """Yield (origin_x, origin_y, scale, window_pixels) for the whole scan."""
    k = 0
    while True:
        scale = cfg.scale_start * cfg.scale_factor**k
        if win_base * scale > min(width, height):
            break
        winpix = round_half_up(win_base * scale)
        stride = max(1, round_half_up(cfg.stride_fraction * win_base * scale))
        for y in range(0, height - winpix + 1, stride):
            for x in range(0, width - winpix + 1, stride):
                yield x, y, scale, winpix
        k += 1


def detect(cascade: Cascade, img: GrayImage, cfg: ScanConfig | None = None) -> list[Detection]:
    """Scan an image at every scale/stride, keep accepted windows, NMS-filter.

    Output is sorted by score descending then (y, x, scale) ascending and
    does not depend on scan order.
    """
    if cfg is None:
        cfg = ScanConfig()
    base = cascade.window.base_size
    if min(img.width, img.height) < base:
        raise ImageTooSmallError(
            f"{img.width}x{img.height} image cannot host a {base}x{base} window"
        )
    ii = integral_image(img)
    raw: list[Detection] = []
    for x, y, scale, winpix in scan_windows(base, img.width, img.height, cfg):
        result = classify_window(cascade, ii, (x, y), scale)
        if result.accepted:
            raw.append(Detection(Rect(x, y, winpix, winpix), result.margin, scale))
    return non_max_suppression(raw, cfg.nms_iou)


def detect_parts(
    face: Detection,
    img: GrayImage,
    part_cascades: dict[str, Cascade],
    cfg: ScanConfig | None = None,
) -> list[Detection]:
    """Run per-part cascades inside a face crop; results are re-offset to
    source-image coordinates and labeled with their part name."""
    region = crop(img, face.rect)
    out: list[Detection] = []
    for part in sorted(part_cascades):
        for d in detect(part_cascades[part], region, cfg):
            shifted = Rect(d.rect.x + face.rect.x, d.rect.y + face.rect.y, d.rect.w, d.rect.h)
            out.append(Detection(shifted, d.score, d.scale, part))
    return out
