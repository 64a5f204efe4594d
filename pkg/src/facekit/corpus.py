"""Seeded synthetic training corpora: window-sized "face" motifs (a dark
eye band over a lighter face field), non-motif negatives, and full scenes
for end-to-end detector exercises. Everything is deterministic per seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .images import GrayImage

EYE_BAND_LEVEL = 60
FACE_LEVEL = 180


@dataclass(frozen=True)
class SyntheticCorpusSpec:
    seed: int
    n_pos: int
    n_neg: int
    image_size: int = 16
    noise: int = 20


def _band_rows(size: int) -> tuple[int, int]:
    # eye band spans rows [0.25, 0.45) of the window
    return round(0.25 * size), round(0.45 * size)


def _add_noise(gen: np.random.Generator, field: np.ndarray, amplitude: int) -> np.ndarray:
    noise = gen.integers(-amplitude, amplitude + 1, size=field.shape)
    return np.clip(field + noise, 0, 255).astype(np.uint8)


def _motif_field(size: int) -> np.ndarray:
    field = np.full((size, size), FACE_LEVEL, dtype=np.int64)
    top, bottom = _band_rows(size)
    field[top:bottom, :] = EYE_BAND_LEVEL
    return field


def _negative_field(gen: np.random.Generator, size: int) -> np.ndarray:
    style = int(gen.integers(0, 3))
    if style == 0:  # flat field at a random level
        level = int(gen.integers(40, 216))
        return np.full((size, size), level, dtype=np.int64)
    a = float(gen.integers(30, 226))
    b = float(gen.integers(30, 226))
    ramp = np.linspace(a, b, size)
    if style == 1:  # vertical gradient
        return np.round(ramp)[:, None].astype(np.int64) * np.ones(size, dtype=np.int64)
    return np.ones((size, 1), dtype=np.int64) * np.round(ramp).astype(np.int64)  # horizontal


def generate_corpus(spec: SyntheticCorpusSpec) -> tuple[list[GrayImage], list[GrayImage]]:
    """Window-sized positives (motif + noise) and negatives (noise-dressed
    flats and gradients). The same spec always yields byte-identical sets."""
    gen = np.random.Generator(np.random.PCG64(spec.seed))
    positives = [
        GrayImage(_add_noise(gen, _motif_field(spec.image_size), spec.noise))
        for _ in range(spec.n_pos)
    ]
    negatives = [
        GrayImage(_add_noise(gen, _negative_field(gen, spec.image_size), spec.noise))
        for _ in range(spec.n_neg)
    ]
    return positives, negatives


def generate_scene(
    seed: int,
    scene_size: int = 64,
    motif_size: int = 16,
    noise: int = 20,
    with_motif: bool = True,
) -> tuple[GrayImage, tuple[int, int] | None]:
    """One test scene: a noisy background, optionally with a single motif
    pasted at a seeded position. Returns the image and the motif center
    (None for negative scenes)."""
    gen = np.random.Generator(np.random.PCG64(seed))
    background = _negative_field(gen, scene_size)
    center = None
    if with_motif:
        margin = 2
        x = int(gen.integers(margin, scene_size - motif_size - margin + 1))
        y = int(gen.integers(margin, scene_size - motif_size - margin + 1))
        background = background.copy()
        background[y:y + motif_size, x:x + motif_size] = _motif_field(motif_size)
        center = (x + motif_size // 2, y + motif_size // 2)
    return GrayImage(_add_noise(gen, background, noise)), center
