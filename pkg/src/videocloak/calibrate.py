"""Threshold grid search and averaging-window sweep.

Both sweeps emit plain tables (lists of rows / CSV) showing the tradeoff
between robustness (mean final distance-to-target; lower = stronger) and
computation (step-accounting speedup).
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import Sequence

import numpy as np

from . import metrics
from .attack import AveragingConfig, remove_perturbations
from .encoder import FeatureExtractor
from .errors import ValidationError
from .frameio import FrameSequence, SceneManifest
from .protect import PGDConfig, RoutingConfig, protect_video, protect_video_naive
from .scenes import ScenePartitionConfig, partition
from .target import TargetSpec

DEFAULT_TAU1_GRID = (0.01, 0.0475, 0.085, 0.1225, 0.16)
DEFAULT_TAU2_GRID = (0.2, 0.4, 0.6, 0.8, 1.0)


def grid_search_taus(
    seq: FrameSequence,
    tau1_grid: Sequence[float],
    tau2_grid: Sequence[float],
    e: FeatureExtractor,
    pgd: PGDConfig | None = None,
    routing: RoutingConfig | None = None,
    manifest: SceneManifest | None = None,
    target_spec: TargetSpec | None = None,
    threads: int = 1,
) -> list[tuple[float, float, float, float]]:
    """Protect the video once per (tau1, tau2) pair.

    Returns rows (tau1, tau2, mean final distance-to-target, speedup),
    sorted lexicographically. Pairs with tau1 >= tau2 are skipped.
    """
    if not tau1_grid or not tau2_grid:
        raise ValidationError("grids must be non-empty")
    pgd = pgd or PGDConfig()
    routing = routing or RoutingConfig()
    manifest = manifest or partition(seq, ScenePartitionConfig())
    pairs = sorted(
        (t1, t2) for t1 in tau1_grid for t2 in tau2_grid if t1 < t2
    )
    if not pairs:
        raise ValidationError("no valid tau1 < tau2 pairs in the grids")

    def run(pair):
        t1, t2 = pair
        result = protect_video(
            seq, manifest, e, pgd, replace(routing, tau1=t1, tau2=t2), target_spec
        )
        finals = [r.final_distance for t in result.traces for r in t.records]
        speedup = metrics.speedup_from_steps(result.traces, pgd.steps_full)
        return (t1, t2, float(np.mean(finals)), speedup)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(run, pairs))
    else:
        rows = [run(p) for p in pairs]
    return rows


def sweep_window(
    seq: FrameSequence,
    n_grid: Sequence[int],
    e: FeatureExtractor,
    pgd: PGDConfig | None = None,
    manifest: SceneManifest | None = None,
    epsilon_p: float | str = "auto",
) -> list[tuple[int, float, float]]:
    """Naive-protect once, attack with each window size.

    n = 1 is an identity-attack sentinel: metrics equal the protected
    baseline. Returns rows (n, mean recovered latent L2 to original,
    mean recovered MPD to original).
    """
    for n in n_grid:
        if n != 1 and (n < 3 or n % 2 == 0):
            raise ValidationError("window sizes must be 1 or odd and >= 3")
    pgd = pgd or PGDConfig()
    manifest = manifest or partition(seq, ScenePartitionConfig())
    protected, _ = protect_video_naive(seq, e, pgd)

    rows = []
    for n in sorted(n_grid):
        if n == 1:
            recovered = protected
        else:
            recovered, _ = remove_perturbations(
                protected, manifest, AveragingConfig(window=n, epsilon_p=epsilon_p)
            )
        l2s = [
            metrics.latent_l2(seq.frames[i], recovered.frames[i], e)
            for i in range(len(seq))
        ]
        mpds = [metrics.mpd(seq.frames[i], recovered.frames[i]) for i in range(len(seq))]
        rows.append((n, float(np.mean(l2s)), float(np.mean(mpds))))
    return rows


def write_taus_csv(rows: list[tuple[float, float, float, float]], path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["tau1", "tau2", "mean_final_distance", "speedup"])
        w.writerows(rows)


def write_window_csv(rows: list[tuple[int, float, float]], path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["n", "recovered_latent_l2", "recovered_mpd"])
        w.writerows(rows)
