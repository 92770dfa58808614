import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from videocloak import (
    FormatError,
    FrameSequence,
    GapError,
    PerturbationTensor,
    SceneManifest,
    SceneSpan,
    ValidationError,
    load_frame,
    load_sequence,
    read_delta,
    read_manifest,
    save_frame,
    save_sequence,
    write_delta,
    write_manifest,
)
from videocloak.frameio import validate_frame


def test_load_sequence_five_frames(tmp_path):
    rng = np.random.default_rng(0)
    frames = rng.uniform(0.0, 1.0, (5, 64, 64, 3))
    save_sequence(FrameSequence(frames), tmp_path)
    seq = load_sequence(tmp_path)
    assert len(seq) == 5
    assert seq.frame_shape == (64, 64, 3)


def test_load_sequence_gap(tmp_path):
    rng = np.random.default_rng(0)
    save_sequence(FrameSequence(rng.uniform(0, 1, (4, 16, 16, 3))), tmp_path)
    (tmp_path / "frame_000002.png").rename(tmp_path / "frame_000003.png.bak")
    with pytest.raises(GapError) as ei:
        load_sequence(tmp_path)
    assert ei.value.index == 2


def test_byte_normalization_endpoints(tmp_path):
    frame = np.zeros((8, 8, 3))
    frame[0, 0] = 1.0
    save_frame(frame, tmp_path / "f.png")
    back = load_frame(tmp_path / "f.png")
    assert back[0, 0, 0] == 1.0
    assert back[1, 1, 0] == 0.0


def test_round_trip_quantization_bound(tmp_path):
    rng = np.random.default_rng(1)
    frames = rng.uniform(0.0, 1.0, (3, 32, 32, 3))
    save_sequence(FrameSequence(frames), tmp_path)
    back = load_sequence(tmp_path)
    err = np.abs(back.frames - frames).max()
    assert err <= 0.5 / 255.0 + 1e-12


def test_round_half_up(tmp_path):
    # 0.5 * 255 = 127.5 rounds up to byte 128
    save_frame(np.full((8, 8, 3), 0.5), tmp_path / "f.png")
    back = load_frame(tmp_path / "f.png")
    assert np.allclose(back, 128.0 / 255.0)


def test_empty_sequence_rejected():
    with pytest.raises(ValidationError):
        FrameSequence(np.zeros((0, 8, 8, 3)))


def test_validate_frame_rejects_bad_values():
    with pytest.raises(ValidationError):
        validate_frame(np.full((8, 8, 3), 1.5))
    with pytest.raises(ValidationError):
        validate_frame(np.full((8, 8, 3), np.nan))


def test_fvdt_round_trip_and_size(tmp_path):
    t = PerturbationTensor(np.zeros((8, 8, 3), dtype=np.float32), budget=0.07)
    path = tmp_path / "d.fvdt"
    write_delta(t, path)
    # magic(4) + version(2) + H(4) + W(4) + budget(4) + 8*8*3 f32 payload
    assert path.stat().st_size == 4 + 2 + 4 + 4 + 4 + 768
    back = read_delta(path)
    assert back.deltas.tobytes() == t.deltas.tobytes()
    assert back.budget == pytest.approx(0.07)


def test_fvdt_budget_violation():
    with pytest.raises(ValidationError):
        PerturbationTensor(np.full((8, 8, 3), 0.08, dtype=np.float32), budget=0.07)


def test_fvdt_truncated(tmp_path):
    t = PerturbationTensor(np.zeros((8, 8, 3), dtype=np.float32), budget=0.07)
    path = tmp_path / "d.fvdt"
    write_delta(t, path)
    blob = path.read_bytes()
    (tmp_path / "t.fvdt").write_bytes(blob[:-10])
    with pytest.raises(FormatError):
        read_delta(tmp_path / "t.fvdt")
    (tmp_path / "m.fvdt").write_bytes(b"XXXX" + blob[4:])
    with pytest.raises(FormatError):
        read_delta(tmp_path / "m.fvdt")


def test_manifest_coverage():
    SceneManifest([SceneSpan(0, 10), SceneSpan(10, 25)], total_frames=25)
    with pytest.raises(ValidationError, match="gap"):
        SceneManifest([SceneSpan(0, 10), SceneSpan(12, 25)], total_frames=25)
    with pytest.raises(ValidationError, match="overlap"):
        SceneManifest([SceneSpan(0, 10), SceneSpan(8, 25)], total_frames=25)


def test_manifest_json_round_trip(tmp_path):
    m = SceneManifest(
        [SceneSpan(0, 10, target_file="t0.png", epsilon_scene=0.04), SceneSpan(10, 25)],
        total_frames=25,
    )
    write_manifest(m, tmp_path / "m.json")
    back = read_manifest(tmp_path / "m.json")
    assert [(s.start, s.end, s.target_file) for s in back.scenes] == [
        (0, 10, "t0.png"),
        (10, 25, None),
    ]
    assert back.total_frames == 25


def test_manifest_bad_json(tmp_path):
    (tmp_path / "m.json").write_text("{nope")
    with pytest.raises(FormatError):
        read_manifest(tmp_path / "m.json")


@settings(max_examples=20, deadline=None)
@given(
    deltas=arrays(
        np.float32, (8, 8, 3), elements=st.floats(-0.0625, 0.0625, width=32)
    )
)
def test_fvdt_round_trip_property(tmp_path_factory, deltas):
    path = tmp_path_factory.mktemp("fvdt") / "d.fvdt"
    t = PerturbationTensor(deltas, budget=0.07)
    write_delta(t, path)
    back = read_delta(path)
    assert back.deltas.tobytes() == t.deltas.tobytes()


@settings(max_examples=15, deadline=None)
@given(
    frame=arrays(np.float64, (8, 8, 3), elements=st.floats(0.0, 1.0))
)
def test_png_round_trip_property(tmp_path_factory, frame):
    path = tmp_path_factory.mktemp("png") / "f.png"
    save_frame(frame, path)
    back = load_frame(path)
    assert np.abs(back - frame).max() <= 0.5 / 255.0 + 1e-12
