"""Quantitative evaluation: latent L2, mean pixel difference, speedup
accounting, genre shift, and report assembly.

MPD is reported in 8-bit units (mean absolute difference * 255). The
canonical report is fully deterministic: its speedup figure comes from
optimization-step accounting, not wall-clock time, so identical runs
produce byte-identical reports; measured timing can be added on request.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .encoder import FeatureExtractor, distance
from .errors import DegenerateError, ShapeError, ValidationError
from .frameio import FrameSequence
from .protect import ProtectionTrace

HIST_BINS = 16
# one routing check (a single encode) per non-initial frame, priced as one
# optimization step in the deterministic cost model
ROUTING_STEP_COST = 1


def latent_l2(a: np.ndarray, b: np.ndarray, e: FeatureExtractor) -> float:
    """L2 distance between the two frames' embeddings."""
    return distance(e.encode(a), e.encode(b))


def mpd(a: np.ndarray, b: np.ndarray) -> float:
    """Mean pixel difference in 8-bit units: 255 * mean |a - b|."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"frame shapes differ: {a.shape} vs {b.shape}")
    return float(255.0 * np.abs(a - b).mean())


def speedup_report(
    trace: ProtectionTrace | Iterable[ProtectionTrace],
    naive_seconds_per_frame: float,
) -> tuple[float, float]:
    """Wall-clock speedup factor and seconds-per-frame for a protection run.

    speedup = naive_seconds_per_frame * frames / total wall time, where the
    naive figure is measured by timing one full-optimization frame.
    """
    traces = [trace] if isinstance(trace, ProtectionTrace) else list(trace)
    records = [r for t in traces for r in t.records]
    if not records:
        raise ValidationError("trace is empty")
    if naive_seconds_per_frame <= 0:
        raise ValidationError("naive_seconds_per_frame must be > 0")
    total = sum(r.wall_time_seconds for r in records)
    if total <= 0:
        raise DegenerateError("zero total wall time in trace")
    n = len(records)
    return naive_seconds_per_frame * n / total, total / n


def speedup_from_steps(
    trace: ProtectionTrace | Iterable[ProtectionTrace], steps_full: int
) -> float:
    """Deterministic speedup proxy from step counts.

    Cost per frame = optimization steps executed plus one routing-check
    unit for every non-initial frame of a scene; naive cost is steps_full
    per frame.
    """
    traces = [trace] if isinstance(trace, ProtectionTrace) else list(trace)
    n = sum(len(t.records) for t in traces)
    if n == 0:
        raise ValidationError("trace is empty")
    cost = sum(t.total_steps() for t in traces)
    cost += sum(ROUTING_STEP_COST * max(len(t.records) - 1, 0) for t in traces)
    if cost == 0:
        raise DegenerateError("zero modeled cost in trace")
    return steps_full * n / cost


def histogram_feature(frame: np.ndarray) -> np.ndarray:
    """Per-channel 16-bin color histogram, normalized, concatenated."""
    frame = np.asarray(frame, dtype=np.float64)
    feats = []
    for c in range(3):
        h, _ = np.histogram(frame[:, :, c], bins=HIST_BINS, range=(0.0, 1.0))
        feats.append(h / frame[:, :, c].size)
    return np.concatenate(feats)


def nearest_centroid_classifier(
    genre_exemplars: Mapping[str, Sequence[np.ndarray]],
) -> Callable[[np.ndarray], str]:
    """Builtin style classifier over color histograms.

    Ties break toward the genre listed first in the mapping order.
    """
    genres = list(genre_exemplars)
    if len(genres) < 2:
        raise ValidationError("need at least 2 genres")
    centroids = {
        g: np.mean([histogram_feature(f) for f in genre_exemplars[g]], axis=0)
        for g in genres
    }

    def classify(frame: np.ndarray) -> str:
        feat = histogram_feature(frame)
        best, best_d = None, np.inf
        for g in genres:
            d = float(np.linalg.norm(feat - centroids[g]))
            if d < best_d:  # strict: earlier genre wins ties
                best, best_d = g, d
        return best

    return classify


def extractor_classifier(
    extractor: FeatureExtractor, genres: Sequence[str]
) -> Callable[[np.ndarray], str]:
    """Adapt an embedding extractor (e.g. an external subprocess encoder
    whose outputs are per-genre scores) into a classifier: argmax entry of
    the embedding indexes into ``genres``."""
    genres = list(genres)
    if extractor.dim < len(genres):
        raise ValidationError("extractor dim smaller than genre count")

    def classify(frame: np.ndarray) -> str:
        emb = extractor.encode(frame)
        return genres[int(np.argmax(emb.values[: len(genres)]))]

    return classify


def genre_shift(
    frames: Sequence[np.ndarray],
    genre_exemplars: Mapping[str, Sequence[np.ndarray]],
    true_genre: str,
    classifier: Callable[[np.ndarray], str] | None = None,
) -> float:
    """Fraction of frames whose predicted genre differs from true_genre.

    Higher means stronger protection.
    """
    if len(frames) < 1:
        raise ValidationError("need at least one frame")
    if len(genre_exemplars) < 2:
        raise ValidationError("need at least 2 genres")
    if true_genre not in genre_exemplars:
        raise ValidationError(f"unknown genre {true_genre!r}")
    classify = classifier or nearest_centroid_classifier(genre_exemplars)
    wrong = sum(1 for f in frames if classify(f) != true_genre)
    return wrong / len(frames)


@dataclass
class EvalReport:
    per_frame_latent_l2: list[float]
    per_frame_mpd: list[float]
    latent_l2_mean: float
    latent_l2_std: float  # population std (ddof = 0)
    mpd_mean: float
    mpd_std: float
    speedup_factor: float | None = None  # step-accounting based
    seconds_per_frame: float | None = None  # only with measured timing
    wall_clock_speedup: float | None = None
    decision_histogram: dict[str, int] | None = None
    genre_shift: float | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        doc = {
            "per_frame_latent_l2": self.per_frame_latent_l2,
            "per_frame_mpd": self.per_frame_mpd,
            "latent_l2_mean": self.latent_l2_mean,
            "latent_l2_std": self.latent_l2_std,
            "mpd_mean": self.mpd_mean,
            "mpd_std": self.mpd_std,
            "speedup_factor": self.speedup_factor,
            "seconds_per_frame": self.seconds_per_frame,
            "wall_clock_speedup": self.wall_clock_speedup,
            "decision_histogram": self.decision_histogram,
            "genre_shift": self.genre_shift,
        }
        doc.update(self.extra)
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def build_report(
    original: FrameSequence,
    candidate: FrameSequence,
    e: FeatureExtractor,
    traces: Sequence[ProtectionTrace] | None = None,
    naive_seconds_per_frame: float | None = None,
    genre_shift_score: float | None = None,
) -> EvalReport:
    """Frame-by-frame comparison of a candidate sequence to the original."""
    if len(original) != len(candidate):
        raise ValidationError(
            f"sequence lengths differ: {len(original)} vs {len(candidate)}"
        )
    l2s = [latent_l2(original.frames[i], candidate.frames[i], e) for i in range(len(original))]
    mpds = [mpd(original.frames[i], candidate.frames[i]) for i in range(len(original))]
    report = EvalReport(
        per_frame_latent_l2=l2s,
        per_frame_mpd=mpds,
        latent_l2_mean=float(np.mean(l2s)),
        latent_l2_std=float(np.std(l2s)),
        mpd_mean=float(np.mean(mpds)),
        mpd_std=float(np.std(mpds)),
        genre_shift=genre_shift_score,
    )
    if traces:
        steps_full = traces[0].metadata.get("steps_full")
        if steps_full:
            report.speedup_factor = speedup_from_steps(traces, steps_full)
        hist = {"full": 0, "continue": 0, "reuse": 0}
        for t in traces:
            for k, v in t.decision_counts().items():
                hist[k] += v
        report.decision_histogram = hist
        if naive_seconds_per_frame:
            wall, spf = speedup_report(traces, naive_seconds_per_frame)
            report.wall_clock_speedup = wall
            report.seconds_per_frame = spf
    return report
