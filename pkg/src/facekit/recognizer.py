"""Face recognition pipeline: crop, preprocess, per-cell histogram
descriptors, bit-coded identity targets, restart training of the
backprop network, and classification of new faces.

Identity codes are bit vectors; decoding rounds the network outputs,
picks the nearest enrolled code by Hamming distance and reports a
confidence from the per-bit margins.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import bpnn
from .images import (
    GrayImage,
    Rect,
    crop,
    gray_to_binary,
    resize_nearest,
    rgb_to_gray,
    segment_grid,
)
from .netpbm import read_image


class InsufficientIdentitiesError(ValueError):
    """A recognizer needs at least two enrolled identities."""


class UnknownLabelError(KeyError):
    """Label is not enrolled in the codebook."""


class ManifestError(ValueError):
    """Malformed gallery manifest line."""


@dataclass(frozen=True)
class DescriptorConfig:
    crop_size: int = 32
    grid: tuple[int, int] = (4, 4)
    bins_per_cell: int = 16
    mode: str = "grayscale"  # or "binary"

    def __post_init__(self):
        if self.mode not in ("grayscale", "binary"):
            raise ValueError(f"mode must be grayscale or binary, got {self.mode!r}")
        if self.crop_size < max(self.grid):
            raise ValueError("crop_size too small for the grid")
        if self.bins_per_cell < 1 or 256 % self.bins_per_cell != 0:
            raise ValueError("bins_per_cell must divide 256")

    @property
    def length(self) -> int:
        rows, cols = self.grid
        per_cell = 2 if self.mode == "binary" else self.bins_per_cell
        return rows * cols * per_cell


@dataclass(frozen=True)
class FaceDescriptor:
    values: np.ndarray


@dataclass(frozen=True)
class IdentityCode:
    label: str
    bits: tuple[int, ...]


@dataclass
class Recognition:
    """Outcome of a recognize call; label is None when below threshold."""

    label: str | None
    confidence: float

    @property
    def is_unknown(self) -> bool:
        return self.label is None


@dataclass
class RecognizerModel:
    descriptor_config: DescriptorConfig
    network: bpnn.Network
    codebook: list[IdentityCode]
    dim_min: np.ndarray
    dim_max: np.ndarray
    accept_threshold: float = 0.75
    # training-time diagnostics; not part of the persisted model
    restart_reports: list[bpnn.TrainReport] = field(default_factory=list, repr=False)
    selected_restart: int = 0


def extract_descriptor(img: GrayImage, face: Rect, cfg: DescriptorConfig) -> FaceDescriptor:
    """Crop, nearest-neighbor resize, optionally binarize (Otsu), then
    concatenate the per-cell normalized histograms in row-major cell order."""
    patch = resize_nearest(crop(img, face), cfg.crop_size, cfg.crop_size)
    rows, cols = cfg.grid
    if cfg.mode == "binary":
        source = gray_to_binary(patch, "auto")
        nbins, divisor = 2, 1
    else:
        source = patch
        nbins, divisor = cfg.bins_per_cell, 256 // cfg.bins_per_cell
    parts = []
    for cell_img in segment_grid(source, rows, cols):
        cell = cell_img.pixels
        counts = np.bincount((cell // divisor).ravel(), minlength=nbins)
        parts.append(counts / cell.size)
    return FaceDescriptor(np.concatenate(parts))


def gray_code_bits(index: int, n_bits: int) -> tuple[int, ...]:
    """The index-th Gray code as an MSB-first bit tuple."""
    g = index ^ (index >> 1)
    return tuple((g >> (n_bits - 1 - i)) & 1 for i in range(n_bits))


def assign_codes(labels: list[str], n_bits: int) -> list[IdentityCode]:
    """Distinct Gray-code identities in enrollment order."""
    if len(labels) > 2**n_bits:
        raise ValueError(f"{len(labels)} identities exceed {n_bits}-bit capacity")
    return [IdentityCode(lab, gray_code_bits(i, n_bits)) for i, lab in enumerate(labels)]


def encode_target(label: str, codebook: list[IdentityCode]) -> np.ndarray:
    for code in codebook:
        if code.label == label:
            return np.array(code.bits, dtype=np.float64)
    raise UnknownLabelError(label)


def decode_output(output: np.ndarray, codebook: list[IdentityCode]) -> tuple[str, float]:
    """Round outputs at 0.5, match the nearest code by Hamming distance
    (ties to the earliest enrollment), and score confidence as the mean
    per-bit margin 2*|output - 0.5| over the agreeing bits."""
    output = np.asarray(output, dtype=np.float64)
    n_bits = len(codebook[0].bits)
    if output.shape != (n_bits,):
        raise ValueError(f"output length {output.shape} does not match code length {n_bits}")
    rounded = (output >= 0.5).astype(np.int64)
    best = None
    for idx, code in enumerate(codebook):
        dist = int(np.sum(rounded != np.array(code.bits)))
        if best is None or dist < best[0]:
            best = (dist, idx)
    _, idx = best
    code = codebook[idx]
    agree = rounded == np.array(code.bits)
    if not agree.any():
        return code.label, 0.0
    margins = 2.0 * np.abs(output[agree] - 0.5)
    return code.label, float(np.mean(margins))


def _normalize(values: np.ndarray, dim_min: np.ndarray, dim_max: np.ndarray) -> np.ndarray:
    span = dim_max - dim_min
    out = np.zeros_like(values)
    varying = span > 0
    out[varying] = (values[varying] - dim_min[varying]) / span[varying]
    return np.clip(out, 0.0, 1.0)


def train_recognizer(
    gallery: list[tuple[GrayImage, Rect, str]],
    cfg: DescriptorConfig,
    netcfg: bpnn.NetworkConfig,
    restarts: int = 5,
    ratios: tuple[float, float, float] = (1.0, 0.0, 0.0),
    codes: list[IdentityCode] | None = None,
    accept_threshold: float = 0.75,
) -> RecognizerModel:
    """Build descriptors, min-max normalize per dimension, and train the
    network `restarts` times from seeds seed..seed+restarts-1, keeping the
    restart with the lowest validation MSE (final train MSE when no
    validation split; ties go to the lowest seed).

    Codes default to the Gray-code sequence in enrollment (first
    appearance) order; pass `codes` to pin explicit bit patterns.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    labels_in_order: list[str] = []
    for _, _, label in gallery:
        if label not in labels_in_order:
            labels_in_order.append(label)
    if len(labels_in_order) < 2:
        raise InsufficientIdentitiesError(
            f"need >= 2 identities, found {len(labels_in_order)}"
        )
    if codes is None:
        codebook = assign_codes(labels_in_order, netcfg.n_out)
    else:
        codebook = list(codes)
        if len({c.label for c in codebook}) != len(codebook):
            raise ValueError("duplicate labels in explicit codebook")
        if any(len(c.bits) != netcfg.n_out for c in codebook):
            raise ValueError("explicit code length does not match n_out")

    descriptors = np.stack([
        extract_descriptor(img, face, cfg).values for img, face, _ in gallery
    ])
    if netcfg.n_in != descriptors.shape[1]:
        raise ValueError(
            f"netcfg.n_in={netcfg.n_in} but descriptors have {descriptors.shape[1]} dims"
        )
    dim_min = descriptors.min(axis=0)
    dim_max = descriptors.max(axis=0)
    inputs = np.stack([_normalize(d, dim_min, dim_max) for d in descriptors])
    targets = np.stack([encode_target(label, codebook) for _, _, label in gallery])
    data = list(zip(inputs, targets))

    best: tuple[float, int, bpnn.Network] | None = None
    reports: list[bpnn.TrainReport] = []
    for k in range(restarts):
        rcfg = bpnn.NetworkConfig(
            n_in=netcfg.n_in,
            n_hidden=netcfg.n_hidden,
            n_out=netcfg.n_out,
            learning_rate=netcfg.learning_rate,
            max_epochs=netcfg.max_epochs,
            val_fail_limit=netcfg.val_fail_limit,
            goal_mse=netcfg.goal_mse,
            seed=netcfg.seed + k,
        )
        split = bpnn.split_data(len(data), ratios, rcfg.seed)
        net, report = bpnn.train(bpnn.init_network(rcfg), data, split, rcfg)
        reports.append(report)
        if split.validation:
            key = min(v for _, v in report.mse_curve)
        else:
            key = report.mse_curve[-1][0]
        if best is None or key < best[0]:
            best = (key, k, net)

    model = RecognizerModel(
        descriptor_config=cfg,
        network=best[2],
        codebook=codebook,
        dim_min=dim_min,
        dim_max=dim_max,
        accept_threshold=accept_threshold,
    )
    model.restart_reports = reports
    model.selected_restart = best[1]
    return model


def recognize(model: RecognizerModel, img: GrayImage, face: Rect) -> Recognition:
    """Descriptor -> stored min-max normalization -> network -> decode.

    Returns an unknown result when the decoded confidence falls below the
    model's accept threshold.
    """
    desc = extract_descriptor(img, face, model.descriptor_config)
    x = _normalize(desc.values, model.dim_min, model.dim_max)
    _, output = bpnn.forward(model.network, x)
    label, confidence = decode_output(output, model.codebook)
    if confidence < model.accept_threshold:
        return Recognition(None, confidence)
    return Recognition(label, confidence)


def read_manifest(path) -> list[tuple[str, Rect | None, str]]:
    """Parse a gallery manifest: one `path x y w h label` line per sample,
    with `auto` in place of the rect to defer to the detector."""
    entries = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if len(fields) == 3 and fields[1] == "auto":
                entries.append((fields[0], None, fields[2]))
            elif len(fields) == 6:
                try:
                    x, y, w, h = (int(v) for v in fields[1:5])
                except ValueError:
                    raise ManifestError(f"{path}:{lineno}: bad rect fields") from None
                entries.append((fields[0], Rect(x, y, w, h), fields[5]))
            else:
                raise ManifestError(
                    f"{path}:{lineno}: want `path x y w h label` or `path auto label`"
                )
    return entries


def load_gallery(
    manifest_path,
    detector_cascade=None,
    scan_config=None,
) -> list[tuple[GrayImage, Rect, str]]:
    """Read manifest images (paths relative to the manifest) into memory.

    `auto` entries run the supplied detector cascade and take its
    top-scoring detection as the face rect.
    """
    from .detector import detect  # local import; detector depends on boosting only

    base_dir = os.path.dirname(os.path.abspath(manifest_path))
    gallery = []
    for rel_path, rect, label in read_manifest(manifest_path):
        img = read_image(os.path.join(base_dir, rel_path))
        if not isinstance(img, GrayImage):
            img = rgb_to_gray(img)
        if rect is None:
            if detector_cascade is None:
                raise ManifestError(
                    f"{rel_path}: rect is `auto` but no detector model was given"
                )
            found = detect(detector_cascade, img, scan_config)
            if not found:
                raise ManifestError(f"{rel_path}: detector found no face")
            rect = found[0].rect
        gallery.append((img, rect, label))
    return gallery
