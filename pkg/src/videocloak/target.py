"""Per-scene universal target generation.

One target image is shared by every frame in a scene. The base image comes
from one of three methods (scene average, middle frame, embedding medoid);
the final target optionally blends in a style reference. A bundled
checkerboard acts as a fixed black/white style preset.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .encoder import FeatureExtractor
from .errors import ShapeError, ValidationError

BASE_METHODS = ("scene_average", "middle_frame", "embedding_medoid")


@dataclass
class TargetSpec:
    base_method: str = "scene_average"
    style_image: np.ndarray | None = None
    blend_lambda: float = 0.5

    def __post_init__(self):
        if self.base_method not in BASE_METHODS:
            raise ValidationError(
                f"base_method must be one of {BASE_METHODS}, got {self.base_method!r}"
            )
        if not 0.0 <= self.blend_lambda <= 1.0:
            raise ValidationError("blend_lambda must lie in [0, 1]")
        if self.style_image is not None:
            self.style_image = np.asarray(self.style_image, dtype=np.float64)


def checkerboard_style(h: int, w: int, cell: int = 8) -> np.ndarray:
    """Black/white checkerboard, the bundled fixed-pattern style preset."""
    yy, xx = np.mgrid[0:h, 0:w]
    pattern = ((yy // cell + xx // cell) % 2).astype(np.float64)
    return np.repeat(pattern[:, :, None], 3, axis=2)


def base_image(
    scene_frames: Sequence[np.ndarray] | np.ndarray,
    method: str = "scene_average",
    extractor: FeatureExtractor | None = None,
) -> np.ndarray:
    """Base image for a scene's universal target.

    scene_average: per-pixel arithmetic mean of all frames.
    middle_frame: the frame at index floor(M/2).
    embedding_medoid: the frame whose embedding is nearest the centroid of
    all scene embeddings (ties break to the lowest index); needs an
    extractor.
    """
    frames = np.asarray(scene_frames, dtype=np.float64)
    if frames.ndim != 4 or frames.shape[0] < 1:
        raise ValidationError("scene must contain at least one frame")
    if method == "scene_average":
        return frames.mean(axis=0)
    if method == "middle_frame":
        return frames[frames.shape[0] // 2].copy()
    if method == "embedding_medoid":
        if extractor is None:
            raise ValidationError("embedding_medoid needs a feature extractor")
        embs = np.stack([extractor.encode(f).values for f in frames])
        centroid = embs.mean(axis=0)
        dists = np.linalg.norm(embs - centroid, axis=1)
        return frames[int(np.argmin(dists))].copy()  # argmin takes lowest index on ties
    raise ValidationError(f"unknown base method {method!r}")


def make_target(
    scene_frames: Sequence[np.ndarray] | np.ndarray,
    spec: TargetSpec,
    extractor: FeatureExtractor | None = None,
) -> np.ndarray:
    """T = (1 - lambda) * base + lambda * style, clipped to [0, 1].

    Without a style image, lambda is forced to 0 and T is the base image.
    """
    base = base_image(scene_frames, spec.base_method, extractor)
    if spec.style_image is None:
        return np.clip(base, 0.0, 1.0)
    if spec.style_image.shape != base.shape:
        raise ShapeError(
            f"style image shape {spec.style_image.shape} != frame shape {base.shape}"
        )
    lam = spec.blend_lambda
    return np.clip((1.0 - lam) * base + lam * spec.style_image, 0.0, 1.0)
