"""Synthetic multi-glyph scenes labelled only by which classes appear."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import GlyphTooLargeForCanvas
from ..tensor import LabelSet

STREAMS = ("templates", "train", "init", "shuffle", "test", "heldout")


def stream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for one named purpose, derived from a single seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(STREAMS.index(name),)))


@dataclass(frozen=True)
class GlyphTemplate:
    label: int
    stencil: np.ndarray  # (G, G) of 0/1


@dataclass(frozen=True, eq=False)
class SceneSample:
    image: np.ndarray  # (1, H, W) in [0, 1]
    labels: LabelSet
    placements: tuple[tuple[int, int, int], ...]  # (label, row, col)


def make_templates(rng: np.random.Generator, num_classes: int = 5, size: int = 8,
                   min_fill: float = 0.25) -> list[GlyphTemplate]:
    """Random binary stencils, pairwise far apart in Hamming distance."""
    min_distance = size * size // 4
    stencils: list[np.ndarray] = []
    while len(stencils) < num_classes:
        candidate = (rng.random((size, size)) < 0.5).astype(np.float64)
        if candidate.mean() < min_fill:
            continue
        if all(np.abs(candidate - s).sum() >= min_distance for s in stencils):
            stencils.append(candidate)
    return [GlyphTemplate(i + 1, s) for i, s in enumerate(stencils)]


def generate_scene(rng: np.random.Generator, num_glyphs: int, templates: list[GlyphTemplate],
                   height: int = 24, width: int = 24, noise: float = 0.1) -> SceneSample:
    """Place ``num_glyphs`` random glyphs without clipping, then add noise.

    Overlapping glyphs combine by pixelwise max.  Noise is uniform in
    ``[-noise, noise]`` and the image is clipped to ``[0, 1]``.
    """
    if num_glyphs < 0:
        raise ValueError("num_glyphs must be nonnegative")
    size = templates[0].stencil.shape[0]
    if size > height or size > width:
        raise GlyphTooLargeForCanvas(f"{size}x{size} glyph on a {height}x{width} canvas")
    canvas = np.zeros((height, width))
    placements = []
    for _ in range(num_glyphs):
        template = templates[int(rng.integers(len(templates)))]
        row = int(rng.integers(height - size + 1))
        col = int(rng.integers(width - size + 1))
        patch = canvas[row:row + size, col:col + size]
        np.maximum(patch, template.stencil, out=patch)
        placements.append((template.label, row, col))
    image = np.clip(canvas + rng.uniform(-noise, noise, size=canvas.shape), 0.0, 1.0)
    labels = LabelSet(label for label, _, _ in placements)
    return SceneSample(image[None], labels, tuple(placements))


def generate_dataset(rng: np.random.Generator, count: int, num_glyphs: int,
                     templates: list[GlyphTemplate], height: int = 24, width: int = 24,
                     noise: float = 0.1) -> list[SceneSample]:
    return [generate_scene(rng, num_glyphs, templates, height, width, noise) for _ in range(count)]


def stack_images(samples: list[SceneSample]) -> np.ndarray:
    return np.stack([s.image for s in samples])
