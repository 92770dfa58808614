import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from videocloak import FrameSequence, ScenePartitionConfig, ValidationError, mean_pixel_diff, partition
from videocloak import synth


def test_mean_pixel_diff_identity():
    f = np.random.default_rng(0).uniform(0, 1, (8, 8, 3))
    assert mean_pixel_diff(f, f) == 0.0


def test_mean_pixel_diff_maximal():
    assert mean_pixel_diff(np.zeros((8, 8, 3)), np.ones((8, 8, 3))) == 1.0


def test_mean_pixel_diff_hand_sum():
    a = np.zeros((2, 2, 3))
    b = a.copy()
    b[0, 0, 0] = 0.6
    assert mean_pixel_diff(a, b) == pytest.approx(0.6 / 12)


def test_partition_identical_frames_single_scene():
    seq = synth.static(20, 16, 0)
    m = partition(seq)
    assert [(s.start, s.end) for s in m.scenes] == [(0, 20)]


def test_partition_two_blocks():
    a = np.full((16, 16, 3), 0.2)
    b = np.full((16, 16, 3), 0.5)  # mean diff 0.3 at the cut
    seq = FrameSequence(np.concatenate([np.repeat(a[None], 10, 0), np.repeat(b[None], 10, 0)]))
    m = partition(seq, ScenePartitionConfig(epsilon_scene=0.04))
    assert [(s.start, s.end) for s in m.scenes] == [(0, 10), (10, 20)]


def test_partition_smooth_pan_single_scene():
    seq = synth.pan(30, 64, 1, step_diff=0.01)
    m = partition(seq, ScenePartitionConfig(epsilon_scene=0.04))
    assert len(m.scenes) == 1


def test_partition_config_validation():
    with pytest.raises(ValidationError):
        ScenePartitionConfig(epsilon_scene=0.0)
    with pytest.raises(ValidationError):
        ScenePartitionConfig(min_scene_len=0)


def _check_invariants(seq, manifest, eps):
    for span in manifest.scenes:
        for i in range(span.start + 1, span.end):
            assert mean_pixel_diff(seq.frames[i], seq.frames[i - 1]) < eps
        if span.start > 0:
            assert mean_pixel_diff(seq.frames[span.start], seq.frames[span.start - 1]) >= eps


@settings(max_examples=25, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    n=st.integers(2, 12),
    eps=st.sampled_from([0.02, 0.04, 0.08, 0.2]),
)
def test_partition_invariants_random(seed, n, eps):
    rng = np.random.default_rng(seed)
    # random walk of frames: some steps small, some large
    frames = [rng.uniform(0, 1, (8, 8, 3))]
    for _ in range(n - 1):
        if rng.random() < 0.5:
            frames.append(np.clip(frames[-1] + rng.uniform(-0.01, 0.01, (8, 8, 3)), 0, 1))
        else:
            frames.append(rng.uniform(0, 1, (8, 8, 3)))
    seq = FrameSequence(np.stack(frames))
    m = partition(seq, ScenePartitionConfig(epsilon_scene=eps))
    _check_invariants(seq, m, eps)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(2, 12))
def test_partition_refinement_monotone(seed, n):
    # lowering epsilon never removes a boundary
    rng = np.random.default_rng(seed)
    frames = np.clip(
        np.cumsum(rng.uniform(-0.1, 0.1, (n, 8, 8, 3)), axis=0) + 0.5, 0, 1
    )
    seq = FrameSequence(frames)
    prev = None
    for eps in (0.08, 0.04, 0.02):
        bounds = {s.start for s in partition(seq, ScenePartitionConfig(epsilon_scene=eps)).scenes}
        if prev is not None:
            assert prev <= bounds
        prev = bounds
