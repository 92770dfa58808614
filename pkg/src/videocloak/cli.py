"""Command-line entry point wiring all modules together.

Subcommands: partition, protect, attack, evaluate, calibrate, bench,
synth. Exit codes: 0 success, 1 validation/usage error, 2 runtime or
protocol error. A --seed threads through all RNG; --threads caps
scene-level parallelism without changing any output bytes.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import attack as attack_mod
from . import calibrate as calibrate_mod
from . import frameio, metrics, synth
from .encoder import (
    ExternalEncoder,
    FeatureExtractor,
    SurrogateEncoder,
    SurrogateEncoderConfig,
)
from .errors import ValidationError, VideocloakError
from .protect import (
    PGDConfig,
    ProtectionTrace,
    RoutingConfig,
    pgd_optimize,
    protect_video,
    protect_video_naive,
)
from .scenes import DEFAULT_EPSILON_SCENE, ScenePartitionConfig, partition
from .target import TargetSpec, checkerboard_style

TARGET_BASE_ALIASES = {
    "average": "scene_average",
    "middle": "middle_frame",
    "medoid": "embedding_medoid",
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); we want exit 1
        raise _UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def make_encoder(spec: str, timeout: float = 30.0) -> FeatureExtractor:
    """Parse --encoder values: ``builtin:SEED`` or ``ext:"CMD"``."""
    if spec.startswith("builtin:"):
        seed = int(spec.split(":", 1)[1])
        return SurrogateEncoder(SurrogateEncoderConfig(seed=seed))
    if spec.startswith("ext:"):
        return ExternalEncoder(spec.split(":", 1)[1], timeout=timeout)
    raise ValidationError(f"bad encoder spec {spec!r}; use builtin:SEED or ext:CMD")


def _target_spec(args, frame_shape=None) -> TargetSpec:
    if args.style == "checkerboard":
        if frame_shape is None:
            raise ValidationError("checkerboard style needs known frame dims")
        style = checkerboard_style(frame_shape[0], frame_shape[1])
    elif args.style:
        style = frameio.load_frame(args.style)
    else:
        style = None
    return TargetSpec(
        base_method=TARGET_BASE_ALIASES[args.target_base],
        style_image=style,
        blend_lambda=args.blend_lambda,
    )


def _pgd_config(args) -> PGDConfig:
    return PGDConfig(
        budget=args.p,
        steps_full=args.steps_full,
        steps_continue=args.steps_continue,
        rng_seed=args.seed,
    )


def _write_traces(traces: list[ProtectionTrace], path: str) -> None:
    with open(path, "w") as f:
        json.dump({"scenes": [t.to_dict() for t in traces]}, f, indent=2)
        f.write("\n")


def _read_traces(path: str) -> list[ProtectionTrace]:
    with open(path) as f:
        doc = json.load(f)
    return [ProtectionTrace.from_dict(d) for d in doc["scenes"]]


def cmd_partition(args) -> int:
    seq = frameio.load_sequence(args.in_dir)
    manifest = partition(seq, ScenePartitionConfig(epsilon_scene=args.epsilon_scene))
    frameio.write_manifest(manifest, args.out)
    print(f"{len(manifest.scenes)} scenes over {manifest.total_frames} frames -> {args.out}")
    return 0


def cmd_protect(args) -> int:
    seq = frameio.load_sequence(args.in_dir)
    e = make_encoder(args.encoder)
    pgd = _pgd_config(args)
    os.makedirs(args.out, exist_ok=True)
    delta_dir = os.path.join(args.out, "deltas")
    os.makedirs(delta_dir, exist_ok=True)

    if args.mode == "naive":
        spec = _target_spec(args, seq.frame_shape)
        protected, deltas = protect_video_naive(
            seq, e, pgd, style_image=spec.style_image, threads=args.threads
        )
        traces = []
    else:
        if not args.manifest:
            raise ValidationError("framework mode needs --manifest")
        manifest = frameio.read_manifest(args.manifest)
        routing = RoutingConfig(tau1=args.tau1, tau2=args.tau2, mode=args.routing_mode)
        result = protect_video(
            seq, manifest, e, pgd, routing, _target_spec(args, seq.frame_shape),
            threads=args.threads,
        )
        protected, deltas, traces = result.protected, result.deltas, result.traces
        for k, (span, target) in enumerate(zip(manifest.scenes, result.targets)):
            target_path = os.path.join(args.out, f"scene_{k:03d}_target.png")
            frameio.save_frame(target, target_path)
            span.target_file = os.path.basename(target_path)
        frameio.write_manifest(manifest, os.path.join(args.out, "manifest.json"))

    frameio.save_sequence(protected, args.out)
    for i, d in enumerate(deltas):
        frameio.write_delta(d, os.path.join(delta_dir, f"frame_{i:06d}.fvdt"))
    if args.trace:
        _write_traces(traces, args.trace)
    print(f"protected {len(seq)} frames ({args.mode}) -> {args.out}")
    return 0


def cmd_attack(args) -> int:
    seq = frameio.load_sequence(args.in_dir)
    manifest = frameio.read_manifest(args.manifest)
    if args.attack_mode == "scene-split":
        if args.scene is None or args.at is None:
            raise ValidationError("scene-split needs --scene and --at")
        span = manifest.scenes[args.scene]
        e = make_encoder(args.encoder)
        result = attack_mod.scene_split_attack(
            seq.frames[span.start : span.end],
            args.at,
            _target_spec(args, seq.frame_shape),
            e,
            _pgd_config(args),
            RoutingConfig(tau1=args.tau1, tau2=args.tau2, mode=args.routing_mode),
            attack_mod.AveragingConfig(window=args.n, epsilon_p=args.epsilon_p),
        )
        doc = {
            "target_distance": result.target_distance,
            "latent_l2": list(result.latent_l2),
            "mpd": list(result.mpd),
        }
        print(json.dumps(doc, indent=2))
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            frameio.save_frame(result.recovered[0], os.path.join(args.out, "recovered_a.png"))
            frameio.save_frame(result.recovered[1], os.path.join(args.out, "recovered_b.png"))
        return 0

    eps = args.epsilon_p if args.epsilon_p == "auto" else float(args.epsilon_p)
    cfg = attack_mod.AveragingConfig(window=args.n, epsilon_p=eps)
    recovered, chosen = attack_mod.remove_perturbations(seq, manifest, cfg)
    frameio.save_sequence(recovered, args.out)
    with open(os.path.join(args.out, "chosen.json"), "w") as f:
        json.dump({"chosen_indices": chosen}, f, indent=2)
        f.write("\n")
    print(f"recovered {len(recovered)} frames -> {args.out} (chosen: {chosen})")
    return 0


def cmd_evaluate(args) -> int:
    original = frameio.load_sequence(args.original)
    candidate = frameio.load_sequence(args.candidate)
    e = make_encoder(args.encoder)
    traces = _read_traces(args.trace) if args.trace else None
    report = metrics.build_report(
        original, candidate, e, traces=traces,
        naive_seconds_per_frame=args.naive_seconds_per_frame,
    )
    if args.naive_seconds_per_frame:
        # measured timing makes the report non-reproducible byte-for-byte
        print("note: wall-clock fields included; report is no longer deterministic",
              file=sys.stderr)
    with open(args.report, "w") as f:
        f.write(report.to_json())
    print(f"latent_l2 {report.latent_l2_mean:.4f} +- {report.latent_l2_std:.4f}  "
          f"mpd {report.mpd_mean:.4f} +- {report.mpd_std:.4f} -> {args.report}")
    return 0


def cmd_calibrate(args) -> int:
    seq = frameio.load_sequence(args.in_dir)
    e = make_encoder(args.encoder)
    pgd = _pgd_config(args)
    manifest = frameio.read_manifest(args.manifest) if args.manifest else None
    if args.what == "taus":
        grid1 = [float(x) for x in args.tau1_grid.split(",")]
        grid2 = [float(x) for x in args.tau2_grid.split(",")]
        rows = calibrate_mod.grid_search_taus(
            seq, grid1, grid2, e, pgd, manifest=manifest, threads=args.threads
        )
        calibrate_mod.write_taus_csv(rows, args.out)
    else:
        n_grid = [int(x) for x in args.n_grid.split(",")]
        rows = calibrate_mod.sweep_window(seq, n_grid, e, pgd, manifest=manifest)
        calibrate_mod.write_window_csv(rows, args.out)
    print(f"{len(rows)} rows -> {args.out}")
    return 0


def cmd_bench(args) -> int:
    e = make_encoder(args.encoder)
    rng = np.random.default_rng([args.seed])
    frame = rng.uniform(0.0, 1.0, (args.size, args.size, 3))
    target = rng.uniform(0.0, 1.0, (args.size, args.size, 3))
    pgd = _pgd_config(args)
    t0 = time.perf_counter()
    pgd_optimize(frame, target, e, pgd, steps=pgd.steps_full)
    elapsed = time.perf_counter() - t0
    print(json.dumps({"naive_seconds_per_frame": elapsed, "steps": pgd.steps_full}))
    return 0


def cmd_synth(args) -> int:
    kind = args.kind
    if kind == "static":
        seq = synth.static(length=args.length, size=args.size, seed=args.seed)
    elif kind == "pan":
        seq = synth.pan(length=args.length, size=args.size, seed=args.seed,
                        step_diff=args.step_diff)
    elif kind == "jumpcut":
        seq = synth.jumpcut(scenes=args.scenes, scene_len=args.scene_len,
                            size=args.size, seed=args.seed)
    else:
        seq = synth.noise_motion(length=args.length, size=args.size, seed=args.seed)
    frameio.save_sequence(seq, args.out)
    print(f"{len(seq)} {kind} frames -> {args.out}")
    return 0


def _add_common(p, encoder=False, pgd=False, routing=False, target=False):
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--threads", type=int, default=1)
    if encoder:
        p.add_argument("--encoder", default="builtin:42",
                       help="builtin:SEED or ext:CMD (subprocess wire protocol)")
    if pgd:
        p.add_argument("--p", type=float, default=0.07, help="l-inf perturbation budget")
        p.add_argument("--steps-full", type=int, default=100)
        p.add_argument("--steps-continue", type=int, default=25)
    if routing:
        p.add_argument("--tau1", type=float, default=0.06)
        p.add_argument("--tau2", type=float, default=0.45)
        p.add_argument("--routing-mode", choices=["relative", "absolute"],
                       default="relative")
    if target:
        p.add_argument("--target-base", choices=sorted(TARGET_BASE_ALIASES),
                       default="average")
        p.add_argument("--style", default=None,
                       help="style reference image path, or 'checkerboard'")
        p.add_argument("--lambda", dest="blend_lambda", type=float, default=0.5)


def build_parser() -> tuple[_Parser, list]:
    parser = _Parser(prog="videocloak")
    parser.add_argument("--config", default=None,
                        help="JSON file of flag defaults (same keys as flags)")
    sub = parser.add_subparsers(dest="command")
    subparsers = []

    p = _Parser(prog="videocloak partition")
    p = sub.add_parser("partition")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--epsilon-scene", type=float, default=DEFAULT_EPSILON_SCENE)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_partition)
    subparsers.append(p)

    p = sub.add_parser("protect")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--manifest", default=None)
    p.add_argument("--mode", choices=["framework", "naive"], default="framework")
    p.add_argument("--out", required=True)
    p.add_argument("--trace", default=None, help="write per-scene trace JSON here")
    _add_common(p, encoder=True, pgd=True, routing=True, target=True)
    p.set_defaults(func=cmd_protect)
    subparsers.append(p)

    p = sub.add_parser("attack")
    p.add_argument("attack_mode", nargs="?", choices=["avg", "scene-split"], default="avg")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--n", type=int, default=5, help="averaging window (odd)")
    p.add_argument("--epsilon-p", default="auto")
    p.add_argument("--out", default=None)
    p.add_argument("--scene", type=int, default=None, help="scene index (scene-split)")
    p.add_argument("--at", type=int, default=None,
                   help="scene-relative split index (scene-split)")
    _add_common(p, encoder=True, pgd=True, routing=True, target=True)
    p.set_defaults(func=cmd_attack)
    subparsers.append(p)

    p = sub.add_parser("evaluate")
    p.add_argument("--original", required=True)
    p.add_argument("--candidate", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--trace", default=None)
    p.add_argument("--naive-seconds-per-frame", type=float, default=None)
    _add_common(p, encoder=True)
    p.set_defaults(func=cmd_evaluate)
    subparsers.append(p)

    p = sub.add_parser("calibrate")
    p.add_argument("what", choices=["taus", "window"])
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--manifest", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--tau1-grid", default=",".join(map(str, calibrate_mod.DEFAULT_TAU1_GRID)))
    p.add_argument("--tau2-grid", default=",".join(map(str, calibrate_mod.DEFAULT_TAU2_GRID)))
    p.add_argument("--n-grid", default="1,3,5,7,9")
    _add_common(p, encoder=True, pgd=True)
    p.set_defaults(func=cmd_calibrate)
    subparsers.append(p)

    p = sub.add_parser("bench")
    p.add_argument("--size", type=int, default=64)
    _add_common(p, encoder=True, pgd=True)
    p.set_defaults(func=cmd_bench)
    subparsers.append(p)

    p = sub.add_parser("synth")
    p.add_argument("kind", choices=sorted(synth.GENERATORS))
    p.add_argument("--out", required=True)
    p.add_argument("--len", dest="length", type=int, default=50)
    p.add_argument("--size", type=int, default=synth.DEFAULT_SIZE)
    p.add_argument("--scenes", type=int, default=3)
    p.add_argument("--scene-len", type=int, default=10)
    p.add_argument("--step-diff", type=float, default=0.01)
    _add_common(p)
    p.set_defaults(func=cmd_synth)
    subparsers.append(p)

    return parser, subparsers


def run(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subparsers = build_parser()
    try:
        if "--config" in argv:
            cfg_path = argv[argv.index("--config") + 1]
            with open(cfg_path) as f:
                cfg = {k.replace("-", "_"): v for k, v in json.load(f).items()}
            for sp in subparsers:
                sp.set_defaults(**cfg)
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            print(parser.format_usage(), file=sys.stderr)
            return 1
        return args.func(args)
    except _UsageError as e:
        print(str(e), file=sys.stderr)
        return 1
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except VideocloakError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
