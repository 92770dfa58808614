"""Deterministic synthetic frame-sequence generators.

Desk-scale stand-ins for real footage: every generator is seeded and the
test suite and demos run entirely on these.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .frameio import FrameSequence

DEFAULT_SIZE = 64
COARSE = 8  # blocky base-image resolution factor


def _smooth_image(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    """Low-frequency random image: coarse noise upsampled by block repeat."""
    coarse = rng.uniform(0.0, 1.0, (max(h // COARSE, 1), max(w // COARSE, 1), 3))
    img = np.repeat(np.repeat(coarse, COARSE, axis=0), COARSE, axis=1)
    return img[:h, :w]


def static(length: int = 50, size: int = DEFAULT_SIZE, seed: int = 42) -> FrameSequence:
    """One random image repeated; a single scene by construction."""
    if length < 1:
        raise ValidationError("length must be >= 1")
    rng = np.random.default_rng([seed, 0])
    img = _smooth_image(rng, size, size)
    return FrameSequence(np.repeat(img[None], length, axis=0), source_id=f"static-{seed}")


def pan(
    length: int = 30,
    size: int = DEFAULT_SIZE,
    seed: int = 42,
    step_diff: float = 0.01,
) -> FrameSequence:
    """Texture translating one pixel per frame, with the contrast scaled so
    every consecutive mean pixel difference equals step_diff (up to clip).
    """
    if length < 1:
        raise ValidationError("length must be >= 1")
    if not 0.0 < step_diff < 0.3:
        raise ValidationError("step_diff must lie in (0, 0.3)")
    rng = np.random.default_rng([seed, 1])
    strip = rng.uniform(0.0, 1.0, (size, size + length, 3))
    crops = np.stack([strip[:, i : i + size] for i in range(length)])
    if length > 1:
        d0 = float(np.abs(crops[1:] - crops[:-1]).mean())
        scale = min(step_diff / d0, 1.0)
    else:
        scale = 1.0
    frames = np.clip(0.5 + (crops - 0.5) * scale, 0.0, 1.0)
    return FrameSequence(frames, source_id=f"pan-{seed}")


def jumpcut(
    scenes: int = 3,
    scene_len: int = 10,
    size: int = DEFAULT_SIZE,
    seed: int = 42,
) -> FrameSequence:
    """Concatenated static scenes of independent random images.

    Cut indices are scene_len, 2*scene_len, ...; independent uniform
    images differ by ~1/3 mean pixel difference, far above any sane
    partition threshold.
    """
    if scenes < 1 or scene_len < 1:
        raise ValidationError("scenes and scene_len must be >= 1")
    parts = []
    for s in range(scenes):
        rng = np.random.default_rng([seed, 2, s])
        img = _smooth_image(rng, size, size)
        parts.append(np.repeat(img[None], scene_len, axis=0))
    return FrameSequence(np.concatenate(parts), source_id=f"jumpcut-{seed}")


def noise_motion(
    length: int = 20,
    size: int = DEFAULT_SIZE,
    seed: int = 42,
    block: int = 12,
) -> FrameSequence:
    """Static background with a high-contrast block moving 2 px per frame."""
    if length < 1:
        raise ValidationError("length must be >= 1")
    rng = np.random.default_rng([seed, 3])
    bg = _smooth_image(rng, size, size) * 0.5  # keep bg dark so the block pops
    frames = np.empty((length, size, size, 3))
    for i in range(length):
        f = bg.copy()
        x = (2 * i) % max(size - block, 1)
        y = size // 3
        f[y : y + block, x : x + block] = 1.0
        frames[i] = f
    return FrameSequence(frames, source_id=f"noise-motion-{seed}")


GENERATORS = {
    "static": static,
    "pan": pan,
    "jumpcut": jumpcut,
    "noise-motion": noise_motion,
}
