import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from videocloak import (
    FrameSequence,
    PGDConfig,
    PerturbationTensor,
    RoutingConfig,
    SceneManifest,
    SceneSpan,
    TargetSpec,
    ValidationError,
    pgd_optimize,
    protect_scene,
    protect_video,
    protect_video_naive,
    route_distance,
    synth,
)
from videocloak.protect import ProtectionTrace, TraceRecord, apply_delta


def test_pgd_config_validation():
    with pytest.raises(ValidationError):
        PGDConfig(budget=0.0)
    with pytest.raises(ValidationError):
        PGDConfig(budget=0.3)
    with pytest.raises(ValidationError):
        PGDConfig(steps_full=10, steps_continue=20)
    assert PGDConfig(budget=0.1).step_size == pytest.approx(0.01)


def test_routing_config_validation():
    with pytest.raises(ValidationError):
        RoutingConfig(tau1=0.5, tau2=0.4)
    with pytest.raises(ValidationError):
        RoutingConfig(mode="nope")


def test_pgd_target_equals_frame(identity8):
    f = np.random.default_rng(0).uniform(0.1, 0.9, (8, 8, 3))
    delta, dist = pgd_optimize(f, f, identity8, PGDConfig())
    assert dist == 0.0
    assert np.all(delta.deltas == 0.0)


def test_pgd_identity_closed_form(identity8):
    rng = np.random.default_rng(1)
    f = rng.uniform(0.2, 0.8, (8, 8, 3))
    target = rng.uniform(0.2, 0.8, (8, 8, 3))
    cfg = PGDConfig(budget=0.07, steps_full=200)
    delta, _ = pgd_optimize(f, target, identity8, cfg)
    oracle = np.clip(target - f, -0.07, 0.07)
    assert np.abs(delta.deltas - oracle).max() < 1e-5


def test_pgd_continue_never_worse(identity8):
    rng = np.random.default_rng(2)
    f = rng.uniform(0.2, 0.8, (8, 8, 3))
    target = rng.uniform(0.2, 0.8, (8, 8, 3))
    cfg = PGDConfig()
    init, d0 = pgd_optimize(f, target, identity8, cfg, steps=5)
    _, d1 = pgd_optimize(f, target, identity8, cfg, init=init, steps=cfg.steps_continue)
    assert d1 <= d0 + 1e-12


def test_route_distance_identical_frames(identity8):
    f = np.random.default_rng(3).uniform(0.2, 0.8, (8, 8, 3))
    delta = PerturbationTensor(np.zeros((8, 8, 3), dtype=np.float32), 0.07)
    t = identity8.encode(np.random.default_rng(4).uniform(0, 1, (8, 8, 3)))
    for mode in ("relative", "absolute"):
        assert route_distance(f, f, delta, t, identity8, mode) == 0.0


def test_route_distance_zero_over_zero(identity8):
    f = np.full((8, 8, 3), 0.5)
    delta = PerturbationTensor(np.zeros((8, 8, 3), dtype=np.float32), 0.07)
    t = identity8.encode(f)  # distance 0 for both frames
    assert route_distance(f, f, delta, t, identity8, "relative") == 0.0


def test_route_distance_hand_absolute(identity8):
    # flat vectors at distance 5 and 3 from an all-zero target: d_i = 2
    target = identity8.encode(np.zeros((8, 8, 3)))
    a = 5.0 / np.sqrt(192)
    b = 3.0 / np.sqrt(192)
    delta = PerturbationTensor(np.zeros((8, 8, 3), dtype=np.float32), 0.07)
    d = route_distance(
        np.full((8, 8, 3), a), np.full((8, 8, 3), b), delta, target, identity8, "absolute"
    )
    assert d == pytest.approx(2.0)


def test_protect_scene_static_reuses(surrogate):
    seq = synth.static(8, 64, 5)
    target = seq.frames.mean(axis=0) * 0.5  # anything away from the frames
    deltas, trace = protect_scene(
        seq.frames, target, surrogate, PGDConfig(rng_seed=42), RoutingConfig()
    )
    decisions = [r.decision for r in trace.records]
    assert decisions == ["full"] + ["reuse"] * 7
    first = deltas[0].deltas.tobytes()
    assert all(d.deltas.tobytes() == first for d in deltas)
    assert trace.metadata["tau1"] == 0.06
    assert trace.metadata["tau2"] == 0.45


def test_protect_scene_midjump_one_extra_full(surrogate):
    a = synth.static(1, 64, 7).frames[0]
    b = synth.static(1, 64, 8).frames[0]
    frames = np.concatenate([np.repeat(a[None], 6, 0), np.repeat(b[None], 6, 0)])
    target = frames.mean(axis=0)
    deltas, trace = protect_scene(
        frames, target, surrogate, PGDConfig(rng_seed=42), RoutingConfig()
    )
    decisions = [r.decision for r in trace.records]
    assert decisions == ["full"] + ["reuse"] * 5 + ["full"] + ["reuse"] * 5


def test_protect_video_budget_and_range(surrogate):
    seq = synth.pan(10, 64, 6, step_diff=0.02)
    manifest = SceneManifest([SceneSpan(0, 10)], total_frames=10)
    res = protect_video(seq, manifest, surrogate, PGDConfig(rng_seed=1))
    diff = np.abs(res.protected.frames - seq.frames)
    assert diff.max() <= 0.07 + 1e-6
    assert res.protected.frames.min() >= 0.0
    assert res.protected.frames.max() <= 1.0
    assert len(res.deltas) == 10
    assert len(res.targets) == 1


def test_protect_video_manifest_mismatch(surrogate):
    seq = synth.static(5, 64, 0)
    manifest = SceneManifest([SceneSpan(0, 4)], total_frames=4)
    with pytest.raises(ValidationError):
        protect_video(seq, manifest, surrogate)


def test_protect_video_thread_determinism(surrogate):
    seq = synth.jumpcut(3, 4, 64, 9)
    manifest = SceneManifest(
        [SceneSpan(0, 4), SceneSpan(4, 8), SceneSpan(8, 12)], total_frames=12
    )
    pgd = PGDConfig(rng_seed=42, steps_full=20, steps_continue=5)
    a = protect_video(seq, manifest, surrogate, pgd, threads=1)
    b = protect_video(seq, manifest, surrogate, pgd, threads=4)
    assert a.protected.frames.tobytes() == b.protected.frames.tobytes()
    assert [d.deltas.tobytes() for d in a.deltas] == [d.deltas.tobytes() for d in b.deltas]


def test_naive_decorrelates_identical_frames(surrogate):
    seq = synth.static(2, 64, 11)
    _, deltas = protect_video_naive(seq, surrogate, PGDConfig(rng_seed=42))
    gap = np.abs(deltas[0].deltas - deltas[1].deltas).max()
    assert gap > 0.01


def test_naive_deterministic(surrogate):
    seq = synth.static(3, 64, 12)
    pgd = PGDConfig(rng_seed=7, steps_full=20, steps_continue=5)
    a, da = protect_video_naive(seq, surrogate, pgd)
    b, db = protect_video_naive(seq, surrogate, pgd)
    assert a.frames.tobytes() == b.frames.tobytes()
    assert [d.deltas.tobytes() for d in da] == [d.deltas.tobytes() for d in db]


def test_naive_budget(surrogate):
    seq = synth.static(3, 64, 13)
    protected, deltas = protect_video_naive(
        seq, surrogate, PGDConfig(rng_seed=1, steps_full=20, steps_continue=5)
    )
    for d in deltas:
        assert np.abs(d.deltas).max() <= 0.07 + 1e-6
    assert protected.frames.min() >= 0.0 and protected.frames.max() <= 1.0


def test_trace_round_trip():
    trace = ProtectionTrace(
        records=[TraceRecord(0, "full", 0.0, 0.5, 0.01, 100)],
        metadata={"tau1": 0.06},
    )
    back = ProtectionTrace.from_dict(trace.to_dict())
    assert back.records == trace.records
    assert back.metadata == trace.metadata
    assert back.decision_counts() == {"full": 1, "continue": 0, "reuse": 0}
    assert back.total_steps() == 100


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10_000), budget=st.sampled_from([0.03, 0.07, 0.15]))
def test_pgd_budget_property(identity8, seed, budget):
    rng = np.random.default_rng(seed)
    f = rng.uniform(0, 1, (8, 8, 3))
    target = rng.uniform(0, 1, (8, 8, 3))
    cfg = PGDConfig(budget=budget, steps_full=20, steps_continue=5)
    delta, _ = pgd_optimize(f, target, identity8, cfg)
    assert np.abs(delta.deltas).max() <= budget + 1e-6
    out = apply_delta(f, delta.deltas.astype(np.float64))
    assert out.min() >= 0.0 and out.max() <= 1.0
