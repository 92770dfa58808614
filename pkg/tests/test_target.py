import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from videocloak import ShapeError, TargetSpec, ValidationError, checkerboard_style, make_target, synth
from videocloak.encoder import distance
from videocloak.target import BASE_METHODS, base_image


def test_identical_frames_all_methods(surrogate):
    f = np.random.default_rng(0).uniform(0, 1, (64, 64, 3))
    frames = np.repeat(f[None], 5, axis=0)
    for method in BASE_METHODS:
        assert np.allclose(base_image(frames, method, surrogate), f)


def test_scene_average_mean():
    frames = np.stack([np.zeros((8, 8, 3)), np.ones((8, 8, 3))])
    assert np.allclose(base_image(frames, "scene_average"), 0.5)


def test_middle_frame_index():
    frames = np.stack([np.full((8, 8, 3), v) for v in (0.1, 0.2, 0.3, 0.4)])
    assert np.allclose(base_image(frames, "middle_frame"), 0.3)  # floor(4/2) = index 2


def test_medoid_needs_extractor():
    frames = np.zeros((2, 8, 8, 3))
    with pytest.raises(ValidationError):
        base_image(frames, "embedding_medoid")


def test_medoid_tie_breaks_low_index(identity8):
    f = np.full((8, 8, 3), 0.5)
    # two frames symmetric about the centroid: equal distances, pick index 0
    frames = np.stack([f - 0.1, f + 0.1])
    assert np.allclose(base_image(frames, "embedding_medoid", identity8), f - 0.1)


def test_average_closer_than_middle_on_pan(surrogate):
    seq = synth.pan(30, 64, 42, step_diff=0.04)
    avg = base_image(seq.frames, "scene_average")
    mid = base_image(seq.frames, "middle_frame")

    def worst(t):
        et = surrogate.encode(t)
        return max(distance(surrogate.encode(f), et) for f in seq.frames)

    assert worst(avg) <= worst(mid)


def test_blend_lambda_zero_is_base():
    frames = np.full((2, 8, 8, 3), 0.2)
    style = np.full((8, 8, 3), 0.8)
    t = make_target(frames, TargetSpec(style_image=style, blend_lambda=0.0))
    assert np.allclose(t, 0.2)


def test_blend_lambda_one_is_style():
    frames = np.full((2, 8, 8, 3), 0.2)
    style = np.full((8, 8, 3), 0.8)
    t = make_target(frames, TargetSpec(style_image=style, blend_lambda=1.0))
    assert np.allclose(t, 0.8)


def test_blend_midpoint():
    frames = np.full((2, 8, 8, 3), 0.2)
    style = np.full((8, 8, 3), 0.8)
    t = make_target(frames, TargetSpec(style_image=style, blend_lambda=0.5))
    assert np.allclose(t, 0.5)


def test_no_style_returns_base():
    frames = np.full((3, 8, 8, 3), 0.3)
    assert np.allclose(make_target(frames, TargetSpec()), 0.3)


def test_style_shape_mismatch():
    frames = np.zeros((2, 8, 8, 3))
    with pytest.raises(ShapeError):
        make_target(frames, TargetSpec(style_image=np.zeros((16, 16, 3))))


def test_spec_validation():
    with pytest.raises(ValidationError):
        TargetSpec(base_method="nope")
    with pytest.raises(ValidationError):
        TargetSpec(blend_lambda=1.5)


def test_checkerboard_pattern():
    cb = checkerboard_style(16, 16, cell=8)
    assert cb.shape == (16, 16, 3)
    assert cb[0, 0, 0] == 0.0
    assert cb[0, 8, 0] == 1.0
    assert cb[8, 0, 0] == 1.0
    assert cb[8, 8, 0] == 0.0


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), lam=st.floats(0.0, 1.0))
def test_target_in_unit_interval(seed, lam):
    rng = np.random.default_rng(seed)
    frames = rng.uniform(0, 1, (3, 8, 8, 3))
    style = rng.uniform(0, 1, (8, 8, 3))
    t = make_target(frames, TargetSpec(style_image=style, blend_lambda=lam))
    assert t.min() >= 0.0 and t.max() <= 1.0
