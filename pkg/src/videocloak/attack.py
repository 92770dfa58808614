"""Red-team suite: perturbation-removal attacks and the scene-splitting
adaptive attack.

Selective pixel averaging combines consecutive frames per pixel, but only
where the difference to the center frame stays under a threshold, so that
movement is kept and only perturbation noise is averaged away. The
threshold can be picked automatically from the bimodal histogram of
consecutive-frame differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import metrics
from .encoder import FeatureExtractor, distance
from .errors import DegenerateError, ShapeError, ValidationError
from .frameio import FrameSequence, SceneManifest
from .protect import PGDConfig, ProtectionTrace, RoutingConfig, apply_delta, protect_scene
from .target import BASE_METHODS, TargetSpec, make_target

DEFAULT_WINDOW = 5
OTSU_BINS = 256
# fraction of samples allowed near the threshold for it to count as a real
# valley between the noise and movement modes
VALLEY_DENSITY_LIMIT = 1e-3


@dataclass
class AveragingConfig:
    window: int = DEFAULT_WINDOW
    epsilon_p: float | str = "auto"

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValidationError("window must be odd and >= 3")
        if isinstance(self.epsilon_p, str):
            if self.epsilon_p != "auto":
                raise ValidationError("epsilon_p must be a float or 'auto'")
        elif self.epsilon_p <= 0:
            raise ValidationError("epsilon_p must be > 0")


@dataclass
class SceneSplitAttackConfig:
    split_index: int
    subscene_len: int | None = None  # None: use everything on each side


def select_epsilon_p(frames: Sequence[np.ndarray] | np.ndarray) -> float:
    """Pick the averaging threshold from consecutive-frame differences.

    Builds the histogram of nonzero per-pixel absolute diffs and finds the
    two-class variance-maximizing split (Otsu). If the split sits in a real
    valley (near-empty bins), the two levels are movement vs perturbation
    and the valley value is returned. Without a valley the diffs are a
    single noise mode, and a value just above the maximum observed diff is
    returned so the averaging mask covers everything.
    """
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 4 or frames.shape[0] < 2:
        raise ValidationError("need at least 2 frames")
    diffs = np.abs(frames[1:] - frames[:-1]).ravel()
    diffs = diffs[diffs > 0]
    if diffs.size == 0:
        raise DegenerateError("all frames identical; no threshold exists")
    top = float(diffs.max())
    counts, edges = np.histogram(diffs, bins=OTSU_BINS, range=(0.0, top))

    # Otsu: maximize between-class variance over all split points
    total = counts.sum()
    bin_mid = (edges[:-1] + edges[1:]) / 2.0
    w0 = np.cumsum(counts)
    w1 = total - w0
    sum0 = np.cumsum(counts * bin_mid)
    sum_all = sum0[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        mu0 = sum0 / w0
        mu1 = (sum_all - sum0) / w1
        bcv = w0 * w1 * (mu0 - mu1) ** 2
    bcv = np.nan_to_num(bcv, nan=0.0)
    best = bcv.max()
    if best <= 0:
        return top + 1e-6

    # middle of the argmax plateau: for separated modes this is the center
    # of the empty gap between them
    plateau = np.flatnonzero(bcv >= best - 1e-12 * max(best, 1.0))
    split = int(plateau[(len(plateau) - 1) // 2])
    threshold = float(edges[split + 1])

    lo = max(split - 2, 0)
    hi = min(split + 3, OTSU_BINS)
    valley_density = counts[lo:hi].sum() / total
    if valley_density > VALLEY_DENSITY_LIMIT:
        return top + 1e-6  # unimodal: everything is perturbation noise
    return threshold


def pixel_average(
    window: Sequence[np.ndarray] | np.ndarray, center: int, epsilon_p: float
) -> np.ndarray:
    """Average each channel value over the window frames that agree with
    the center frame to within epsilon_p; disagreeing values are excluded
    and the center value itself is always included."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 4:
        raise ShapeError(f"window must be (n, H, W, 3), got {window.shape}")
    if not 0 <= center < window.shape[0]:
        raise ValidationError(f"center {center} outside window of {window.shape[0]}")
    ref = window[center]
    rel = window - ref
    mask = np.abs(rel) < epsilon_p
    mask[center] = True
    weights = mask.sum(axis=0)
    # averaging the differences keeps an all-identical window bit-exact
    return ref + (rel * mask).sum(axis=0) / weights


def laplacian_variance(frame: np.ndarray) -> float:
    """Sharpness score: variance of the discrete Laplacian of the
    luma channel. Higher = sharper."""
    frame = np.asarray(frame, dtype=np.float64)
    gray = frame @ np.array([0.299, 0.587, 0.114])
    lap = (
        -4.0 * gray[1:-1, 1:-1]
        + gray[:-2, 1:-1]
        + gray[2:, 1:-1]
        + gray[1:-1, :-2]
        + gray[1:-1, 2:]
    )
    return float(lap.var())


def remove_perturbations(
    seq: FrameSequence,
    manifest: SceneManifest,
    cfg: AveragingConfig | None = None,
    quality_scorer: Callable[[np.ndarray], float] | None = None,
) -> tuple[FrameSequence, list[int]]:
    """Apply selective pixel averaging scene by scene.

    Every frame is replaced by the average over its window (clipped to the
    scene bounds), so frame count and dimensions are preserved. The
    returned indices mark the highest-quality frame of each scene, i.e.
    the frame a mimicry attacker would extract.
    """
    cfg = cfg or AveragingConfig()
    scorer = quality_scorer or laplacian_variance
    if manifest.total_frames != len(seq):
        raise ValidationError("manifest does not cover the sequence")
    half = cfg.window // 2
    out = seq.frames.copy()
    chosen: list[int] = []
    for span in manifest.scenes:
        scene = seq.frames[span.start : span.end]
        scores = [scorer(f) for f in scene]
        chosen.append(span.start + int(np.argmax(scores)))
        if scene.shape[0] < 2:
            continue  # nothing to average against
        if cfg.epsilon_p == "auto":
            try:
                eps = select_epsilon_p(scene)
            except DegenerateError:
                continue  # all frames identical: averaging would be a no-op
        else:
            eps = float(cfg.epsilon_p)
        for i in range(scene.shape[0]):
            lo = max(i - half, 0)
            hi = min(i + half + 1, scene.shape[0])
            out[span.start + i] = pixel_average(scene[lo:hi], i - lo, eps)
    return FrameSequence(out, fps=seq.fps, source_id=seq.source_id), chosen


def linear_interpolate(a: np.ndarray, b: np.ndarray, alpha: float) -> np.ndarray:
    """Per-pixel (1 - alpha) * a + alpha * b."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"frame shapes differ: {a.shape} vs {b.shape}")
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError("alpha must lie in [0, 1]")
    return (1.0 - alpha) * a + alpha * b


@dataclass
class SceneSplitResult:
    recovered: tuple[np.ndarray, np.ndarray]  # frames adjacent to the split
    target_distance: float  # embedding distance between the chosen targets
    latent_l2: tuple[float, float]  # recovered vs original, per frame
    mpd: tuple[float, float]
    traces: tuple[ProtectionTrace, ProtectionTrace]


def scene_split_attack(
    scene_frames: np.ndarray,
    split_index: int,
    target_spec: TargetSpec,
    e: FeatureExtractor,
    pgd: PGDConfig | None = None,
    routing: RoutingConfig | None = None,
    averaging: AveragingConfig | None = None,
    subscene_len: int | None = None,
) -> SceneSplitResult:
    """Force a scene break, protect both halves toward maximally distant
    targets, then pixel-average the two frames adjacent to the split."""
    frames = np.asarray(scene_frames, dtype=np.float64)
    m = frames.shape[0]
    if not 0 < split_index < m:
        raise ValidationError(f"split {split_index} must be interior to 1..{m - 1}")
    pgd = pgd or PGDConfig()
    routing = routing or RoutingConfig()
    averaging = averaging or AveragingConfig()

    s1 = frames[:split_index]
    s2 = frames[split_index:]
    if subscene_len is not None:
        s1 = s1[-subscene_len:]
        s2 = s2[:subscene_len]

    def candidates(sub: np.ndarray, adjacent: np.ndarray) -> list[np.ndarray]:
        cands = [
            make_target(sub, TargetSpec(method, target_spec.style_image,
                                        target_spec.blend_lambda), extractor=e)
            for method in BASE_METHODS
        ]
        cands.append(
            make_target(adjacent[None], TargetSpec("scene_average",
                                                   target_spec.style_image,
                                                   target_spec.blend_lambda))
        )
        return cands

    cands1 = candidates(s1, frames[split_index - 1])
    cands2 = candidates(s2, frames[split_index])
    best = None
    for t1 in cands1:
        e1 = e.encode(t1)
        for t2 in cands2:
            d = distance(e1, e.encode(t2))
            if best is None or d > best[0]:
                best = (d, t1, t2)
    target_dist, t1, t2 = best

    deltas1, trace1 = protect_scene(s1, t1, e, pgd, routing)
    deltas2, trace2 = protect_scene(s2, t2, e, pgd, routing)
    prot_a = apply_delta(frames[split_index - 1], deltas1[-1].deltas.astype(np.float64))
    prot_b = apply_delta(frames[split_index], deltas2[0].deltas.astype(np.float64))

    pair = np.stack([prot_a, prot_b])
    if averaging.epsilon_p == "auto":
        try:
            eps = select_epsilon_p(pair)
        except DegenerateError:
            eps = 2.0 * pgd.budget  # identical frames: averaging is a no-op
    else:
        eps = float(averaging.epsilon_p)
    rec_a = pixel_average(pair, 0, eps)
    rec_b = pixel_average(pair, 1, eps)

    orig_a, orig_b = frames[split_index - 1], frames[split_index]
    return SceneSplitResult(
        recovered=(rec_a, rec_b),
        target_distance=target_dist,
        latent_l2=(metrics.latent_l2(rec_a, orig_a, e), metrics.latent_l2(rec_b, orig_b, e)),
        mpd=(metrics.mpd(rec_a, orig_a), metrics.mpd(rec_b, orig_b)),
        traces=(trace1, trace2),
    )
