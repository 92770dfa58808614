"""Frame, delta-tensor and scene-manifest persistence.

Frames live in memory as float64 arrays of shape (H, W, 3) with values in
[0, 1]; on disk they are 8-bit RGB PNGs named ``frame_%06d.png``.
Perturbation tensors use the custom FVDT binary layout (see
:func:`write_delta`), scene manifests are JSON.
"""

from __future__ import annotations

import json
import os
import re
import struct
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import FormatError, GapError, IoError, ShapeError, ValidationError

FRAME_PATTERN = re.compile(r"^frame_(\d{6})\.png$")

MIN_SIDE = 8

FVDT_MAGIC = b"FVDT"
FVDT_VERSION = 1


def validate_frame(pixels: np.ndarray) -> np.ndarray:
    """Check one frame against the pixel/shape invariants and return it."""
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.ndim != 3 or pixels.shape[2] != 3:
        raise ShapeError(f"frame must be (H, W, 3), got {pixels.shape}")
    h, w = pixels.shape[:2]
    if h < MIN_SIDE or w < MIN_SIDE:
        raise ValidationError(f"frame sides must be >= {MIN_SIDE}, got {h}x{w}")
    if not np.isfinite(pixels).all():
        raise ValidationError("frame contains non-finite pixels")
    if pixels.min() < 0.0 or pixels.max() > 1.0:
        raise ValidationError("frame pixels must lie in [0, 1]")
    return pixels


@dataclass
class FrameSequence:
    """Ordered stack of same-sized frames, shape (N, H, W, 3)."""

    frames: np.ndarray
    fps: float = 30.0
    source_id: str = ""

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 4 or self.frames.shape[0] < 1:
            raise ValidationError("sequence needs at least one (H, W, 3) frame")
        validate_frame(self.frames[0])
        if self.frames.min() < 0.0 or self.frames.max() > 1.0:
            raise ValidationError("sequence pixels must lie in [0, 1]")

    def __len__(self) -> int:
        return self.frames.shape[0]

    @property
    def frame_shape(self) -> tuple[int, int, int]:
        return self.frames.shape[1:]


@dataclass
class PerturbationTensor:
    """Per-frame signed delta, l-infinity bounded by ``budget``.

    Deltas are stored as float32 so the FVDT round trip is bit-exact.
    """

    deltas: np.ndarray
    budget: float

    def __post_init__(self):
        self.deltas = np.asarray(self.deltas, dtype=np.float32)
        if self.deltas.ndim != 3 or self.deltas.shape[2] != 3:
            raise ShapeError(f"deltas must be (H, W, 3), got {self.deltas.shape}")
        if float(np.abs(self.deltas).max(initial=0.0)) > self.budget + 1e-6:
            raise ValidationError(
                f"delta exceeds budget {self.budget}: "
                f"max |delta| = {float(np.abs(self.deltas).max()):.6g}"
            )


@dataclass
class SceneSpan:
    start: int  # inclusive
    end: int  # exclusive
    target_file: str | None = None
    epsilon_scene: float = 0.0


@dataclass
class SceneManifest:
    """Disjoint, ordered scene spans covering [0, total_frames) exactly."""

    scenes: list[SceneSpan]
    total_frames: int = field(default=0)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not self.scenes:
            raise ValidationError("manifest needs at least one scene")
        cursor = 0
        for s in self.scenes:
            if s.start > cursor:
                raise ValidationError(f"gap in scene coverage at frame {cursor}")
            if s.start < cursor:
                raise ValidationError(f"overlapping scenes at frame {s.start}")
            if s.end <= s.start:
                raise ValidationError(f"empty scene ({s.start}, {s.end})")
            cursor = s.end
        if cursor != self.total_frames:
            raise ValidationError(
                f"scenes cover [0, {cursor}) but total_frames = {self.total_frames}"
            )


def load_sequence(dir_path: str | os.PathLike, fps: float = 30.0) -> FrameSequence:
    """Load ``frame_%06d.png`` files from a directory into a FrameSequence.

    Indices must be contiguous from 0; a hole raises GapError naming the
    first missing index. 8-bit values are mapped to [0, 1] by v / 255.
    """
    dir_path = os.fspath(dir_path)
    try:
        names = os.listdir(dir_path)
    except OSError as e:
        raise IoError(str(e)) from e
    indexed = {}
    for name in names:
        m = FRAME_PATTERN.match(name)
        if m:
            indexed[int(m.group(1))] = os.path.join(dir_path, name)
    if not indexed:
        raise ValidationError(f"no frame_*.png files in {dir_path}")
    count = max(indexed) + 1
    for i in range(count):
        if i not in indexed:
            raise GapError(i)
    frames = []
    shape = None
    for i in range(count):
        try:
            with Image.open(indexed[i]) as im:
                arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
        except OSError as e:
            raise IoError(str(e)) from e
        if shape is None:
            shape = arr.shape
        elif arr.shape != shape:
            raise ShapeError(
                f"frame {i} has shape {arr.shape}, expected {shape}"
            )
        frames.append(validate_frame(arr))
    return FrameSequence(np.stack(frames), fps=fps, source_id=os.path.basename(dir_path))


def save_sequence(seq: FrameSequence, dir_path: str | os.PathLike) -> None:
    """Write a sequence as 8-bit PNGs, quantizing round-half-up."""
    if not isinstance(seq, FrameSequence):
        seq = FrameSequence(np.asarray(seq))
    dir_path = os.fspath(dir_path)
    os.makedirs(dir_path, exist_ok=True)
    for i in range(len(seq)):
        # floor(v*255 + 0.5) is round-half-up, unlike np.round's half-even
        bytes_ = np.floor(seq.frames[i] * 255.0 + 0.5).astype(np.uint8)
        try:
            Image.fromarray(bytes_, mode="RGB").save(
                os.path.join(dir_path, f"frame_{i:06d}.png")
            )
        except OSError as e:
            raise IoError(str(e)) from e


def load_frame(path: str | os.PathLike) -> np.ndarray:
    """Load a single 8-bit RGB image as a unit-interval frame."""
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    except OSError as e:
        raise IoError(str(e)) from e
    return validate_frame(arr)


def save_frame(frame: np.ndarray, path: str | os.PathLike) -> None:
    """Write one frame as an 8-bit PNG, quantizing round-half-up."""
    frame = validate_frame(frame)
    bytes_ = np.floor(frame * 255.0 + 0.5).astype(np.uint8)
    try:
        Image.fromarray(bytes_, mode="RGB").save(os.fspath(path))
    except OSError as e:
        raise IoError(str(e)) from e


def write_delta(t: PerturbationTensor, path: str | os.PathLike) -> None:
    """Serialize a PerturbationTensor in the FVDT layout.

    magic "FVDT" | version u16 LE | H u32 LE | W u32 LE | budget f32 LE |
    H*W*3 f32 LE deltas.
    """
    if float(np.abs(t.deltas).max(initial=0.0)) > t.budget + 1e-6:
        raise ValidationError("delta exceeds its budget")
    h, w = t.deltas.shape[:2]
    header = FVDT_MAGIC + struct.pack("<HIIf", FVDT_VERSION, h, w, t.budget)
    payload = t.deltas.astype("<f4").tobytes()
    try:
        with open(path, "wb") as f:
            f.write(header + payload)
    except OSError as e:
        raise IoError(str(e)) from e


def read_delta(path: str | os.PathLike) -> PerturbationTensor:
    """Read an FVDT file back; bit-exact inverse of write_delta."""
    try:
        with open(path, "rb") as f:
            blob = f.read()
    except OSError as e:
        raise IoError(str(e)) from e
    if len(blob) < 18 or blob[:4] != FVDT_MAGIC:
        raise FormatError("bad FVDT magic or truncated header")
    version, h, w, budget = struct.unpack("<HIIf", blob[4:18])
    if version != FVDT_VERSION:
        raise FormatError(f"unsupported FVDT version {version}")
    expected = h * w * 3 * 4
    payload = blob[18:]
    if len(payload) != expected:
        raise FormatError(
            f"FVDT payload is {len(payload)} bytes, expected {expected}"
        )
    deltas = np.frombuffer(payload, dtype="<f4").reshape(h, w, 3).copy()
    return PerturbationTensor(deltas=deltas, budget=float(budget))


def write_manifest(m: SceneManifest, path: str | os.PathLike) -> None:
    m.validate()
    doc = {
        "total_frames": m.total_frames,
        "scenes": [
            {
                "start": s.start,
                "end": s.end,
                "target_file": s.target_file,
                "epsilon_scene": s.epsilon_scene,
            }
            for s in m.scenes
        ],
    }
    try:
        with open(path, "w") as f:
            json.dump(doc, f, indent=2)
            f.write("\n")
    except OSError as e:
        raise IoError(str(e)) from e


def read_manifest(path: str | os.PathLike) -> SceneManifest:
    try:
        with open(path) as f:
            doc = json.load(f)
    except OSError as e:
        raise IoError(str(e)) from e
    except json.JSONDecodeError as e:
        raise FormatError(f"manifest is not valid JSON: {e}") from e
    scenes = [
        SceneSpan(
            start=int(s["start"]),
            end=int(s["end"]),
            target_file=s.get("target_file"),
            epsilon_scene=float(s.get("epsilon_scene", 0.0)),
        )
        for s in doc["scenes"]
    ]
    return SceneManifest(scenes=scenes, total_frames=int(doc["total_frames"]))
