"""Scene partitioning by mean pixel difference of consecutive frames.

A scene is a maximal run of frames whose consecutive mean pixel difference
stays strictly below the partition threshold. This is deliberately stricter
than generic shot detection: every frame pair inside a scene must be similar
enough to share one perturbation target.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, ValidationError
from .frameio import FrameSequence, SceneManifest, SceneSpan

DEFAULT_EPSILON_SCENE = 0.04  # ~10/255 mean absolute per-channel difference


@dataclass
class ScenePartitionConfig:
    epsilon_scene: float = DEFAULT_EPSILON_SCENE
    min_scene_len: int = 1  # advisory for reporting; never forces merges

    def __post_init__(self):
        if self.epsilon_scene <= 0:
            raise ValidationError("epsilon_scene must be > 0")
        if self.min_scene_len < 1:
            raise ValidationError("min_scene_len must be >= 1")


def mean_pixel_diff(a: np.ndarray, b: np.ndarray) -> float:
    """Mean absolute difference over all H*W*3 channel values."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"frame shapes differ: {a.shape} vs {b.shape}")
    return float(np.abs(a - b).mean())


def partition(seq: FrameSequence, cfg: ScenePartitionConfig | None = None) -> SceneManifest:
    """Split a sequence into scenes.

    A new scene starts at index i exactly when
    mean_pixel_diff(F_i, F_{i-1}) >= epsilon_scene.
    """
    cfg = cfg or ScenePartitionConfig()
    n = len(seq)
    # vectorized consecutive diffs; assembly below is sequential
    diffs = np.abs(seq.frames[1:] - seq.frames[:-1]).mean(axis=(1, 2, 3))
    boundaries = [0] + [i + 1 for i in range(n - 1) if diffs[i] >= cfg.epsilon_scene]
    boundaries.append(n)
    spans = [
        SceneSpan(start=boundaries[k], end=boundaries[k + 1], epsilon_scene=cfg.epsilon_scene)
        for k in range(len(boundaries) - 1)
    ]
    return SceneManifest(scenes=spans, total_frames=n)
