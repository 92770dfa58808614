"""Feature extractors and their gradient machinery.

The built-in surrogate extractor is average-pool -> fixed seeded dense
projection -> tanh. It is deterministic, differentiable, and cheap enough
to run full optimizations on a CPU in seconds, while the pooling stage
gives it the spatial locality that makes pixel-averaging attacks
meaningful. Real encoders are mounted as external subprocesses speaking
the binary wire protocol documented on :class:`ExternalEncoder`.
"""

from __future__ import annotations

import os
import selectors
import shlex
import struct
import subprocess
import time
from dataclasses import dataclass

import numpy as np

from .errors import MismatchError, ProtocolError, ShapeError, ValidationError

DEFAULT_DIM = 256
DEFAULT_POOL_FACTOR = 4


@dataclass
class Embedding:
    values: np.ndarray
    extractor_id: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).ravel()
        if not np.isfinite(self.values).all():
            raise ValidationError("embedding has non-finite entries")

    @property
    def dim(self) -> int:
        return self.values.shape[0]


def distance(a: Embedding, b: Embedding) -> float:
    """Euclidean distance between two embeddings of the same extractor."""
    if a.extractor_id != b.extractor_id:
        raise MismatchError(
            f"embeddings from different extractors: {a.extractor_id!r} vs {b.extractor_id!r}"
        )
    if a.dim != b.dim:
        raise MismatchError(f"embedding dims differ: {a.dim} vs {b.dim}")
    return float(np.linalg.norm(a.values - b.values))


def normalized_distance(a: Embedding, b: Embedding) -> float:
    """distance / sqrt(D); scale-portable across extractors."""
    return distance(a, b) / np.sqrt(a.dim)


class FeatureExtractor:
    """Behavioral interface: deterministic encode plus analytic gradient.

    ``grad_distance(frame, target)`` must return the gradient of
    ``distance(encode(frame), target)`` with respect to each pixel, and is
    defined as the zero tensor where encode(frame) == target.
    """

    id: str
    dim: int

    def encode(self, frame: np.ndarray) -> Embedding:
        raise NotImplementedError

    def grad_distance(self, frame: np.ndarray, target: Embedding) -> np.ndarray:
        raise NotImplementedError

    def _check_target(self, target: Embedding):
        if target.extractor_id != self.id:
            raise MismatchError(
                f"target from {target.extractor_id!r}, extractor is {self.id!r}"
            )
        if target.dim != self.dim:
            raise MismatchError(f"target dim {target.dim} != extractor dim {self.dim}")


@dataclass
class SurrogateEncoderConfig:
    seed: int = 0
    pool_factor: int = DEFAULT_POOL_FACTOR
    dim: int = DEFAULT_DIM

    def __post_init__(self):
        if self.pool_factor < 1:
            raise ValidationError("pool_factor must be >= 1")
        if self.dim < 1:
            raise ValidationError("dim must be >= 1")


class SurrogateEncoder(FeatureExtractor):
    """Desk-scale stand-in for a diffusion image encoder.

    Pipeline: average-pool by pool_factor, flatten, multiply by a fixed
    seeded Gaussian matrix (plus bias), elementwise tanh. The projection
    for a given pooled size K is drawn from ``default_rng([seed, K])`` so
    it is reproducible across processes and input shapes.
    """

    def __init__(self, cfg: SurrogateEncoderConfig | None = None):
        self.cfg = cfg or SurrogateEncoderConfig()
        self.dim = self.cfg.dim
        self.id = f"builtin:{self.cfg.seed}:{self.cfg.pool_factor}:{self.cfg.dim}"
        self._proj_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def _pool(self, frame: np.ndarray) -> np.ndarray:
        frame = np.asarray(frame, dtype=np.float64)
        if frame.ndim != 3 or frame.shape[2] != 3:
            raise ShapeError(f"frame must be (H, W, 3), got {frame.shape}")
        h, w = frame.shape[:2]
        pf = self.cfg.pool_factor
        if h % pf or w % pf:
            raise ShapeError(f"dims {h}x{w} not divisible by pool_factor {pf}")
        return frame.reshape(h // pf, pf, w // pf, pf, 3).mean(axis=(1, 3))

    def _projection(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        if k not in self._proj_cache:
            if self.dim > k:
                raise ShapeError(f"dim {self.dim} exceeds pooled value count {k}")
            rng = np.random.default_rng([self.cfg.seed, k])
            weight = rng.standard_normal((self.dim, k)) / np.sqrt(k)
            bias = 0.1 * rng.standard_normal(self.dim)
            self._proj_cache[k] = (weight, bias)
        return self._proj_cache[k]

    def encode(self, frame: np.ndarray) -> Embedding:
        x = self._pool(frame).ravel()
        weight, bias = self._projection(x.size)
        return Embedding(np.tanh(weight @ x + bias), self.id)

    def grad_distance(self, frame: np.ndarray, target: Embedding) -> np.ndarray:
        self._check_target(target)
        frame = np.asarray(frame, dtype=np.float64)
        pooled = self._pool(frame)
        x = pooled.ravel()
        weight, bias = self._projection(x.size)
        z = np.tanh(weight @ x + bias)
        diff = z - target.values
        d = np.linalg.norm(diff)
        if d == 0.0:
            return np.zeros_like(frame)
        # chain rule through tanh and the pooling average
        g_pool = (weight.T @ (diff / d * (1.0 - z * z))).reshape(pooled.shape)
        pf = self.cfg.pool_factor
        g = np.repeat(np.repeat(g_pool, pf, axis=0), pf, axis=1) / (pf * pf)
        return g


class IdentityEncoder(FeatureExtractor):
    """Phi = flatten. Closed-form optimum makes it the PGD test oracle."""

    def __init__(self, frame_shape: tuple[int, int, int]):
        self.frame_shape = tuple(frame_shape)
        self.dim = int(np.prod(frame_shape))
        self.id = f"identity:{frame_shape[0]}x{frame_shape[1]}"

    def encode(self, frame: np.ndarray) -> Embedding:
        frame = np.asarray(frame, dtype=np.float64)
        if frame.shape != self.frame_shape:
            raise ShapeError(f"expected {self.frame_shape}, got {frame.shape}")
        return Embedding(frame.ravel(), self.id)

    def grad_distance(self, frame: np.ndarray, target: Embedding) -> np.ndarray:
        self._check_target(target)
        frame = np.asarray(frame, dtype=np.float64)
        diff = frame.ravel() - target.values
        d = np.linalg.norm(diff)
        if d == 0.0:
            return np.zeros(self.frame_shape)
        return (diff / d).reshape(self.frame_shape)


def grad_distance(frame: np.ndarray, target: Embedding, e: FeatureExtractor) -> np.ndarray:
    """Gradient of distance(encode(frame), target) w.r.t. each pixel."""
    return e.grad_distance(frame, target)


# ---------------------------------------------------------------------------
# External encoder subprocess protocol.
#
# Every message, request or reply, is framed as:
#   u32 LE payload length | u8 opcode | body
# Opcodes: 0 = HELLO, 1 = ENCODE, 2 = GRAD, 3 = ERROR (reply only).
#   HELLO request: empty body.
#   HELLO reply:   u16 LE id length | id UTF-8 | u32 LE dim D.
#   ENCODE request: u32 LE H | u32 LE W | H*W*3 f32 LE pixels.
#   ENCODE reply:   D f32 LE embedding values.
#   GRAD request:   u32 LE H | u32 LE W | H*W*3 f32 LE pixels | D f32 LE target.
#   GRAD reply:     H*W*3 f32 LE gradient.
#   ERROR reply:    u16 LE message length | message UTF-8.
# ---------------------------------------------------------------------------

OP_HELLO = 0
OP_ENCODE = 1
OP_GRAD = 2
OP_ERROR = 3

DEFAULT_TIMEOUT = 30.0


class ExternalEncoder(FeatureExtractor):
    """FeatureExtractor backed by a subprocess speaking the wire protocol.

    One request in flight per connection; callers wanting parallelism must
    open one ExternalEncoder per worker.
    """

    def __init__(self, connect_cmd: str, timeout: float = DEFAULT_TIMEOUT):
        self.connect_cmd = connect_cmd
        self.timeout = timeout
        try:
            self._proc = subprocess.Popen(
                shlex.split(connect_cmd),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
            )
        except OSError as e:
            raise ProtocolError(f"cannot spawn encoder process: {e}") from e
        self._selector = selectors.DefaultSelector()
        os.set_blocking(self._proc.stdout.fileno(), False)
        self._selector.register(self._proc.stdout, selectors.EVENT_READ)
        try:
            op, body = self._request(OP_HELLO, b"")
            if op != OP_HELLO or len(body) < 6:
                raise ProtocolError(f"malformed HELLO reply (opcode {op})")
            (id_len,) = struct.unpack_from("<H", body, 0)
            if len(body) != 2 + id_len + 4:
                raise ProtocolError("HELLO reply length mismatch")
            self.id = body[2 : 2 + id_len].decode("utf-8")
            (self.dim,) = struct.unpack_from("<I", body, 2 + id_len)
            if self.dim == 0:
                raise ProtocolError("encoder reports dim = 0")
        except ProtocolError:
            self.close()
            raise

    def _read_exact(self, n: int, deadline: float) -> bytes:
        # raw os.read on the fd: a buffered read could drain the pipe into a
        # Python-side buffer that select() cannot see
        fd = self._proc.stdout.fileno()
        chunks = bytearray()
        while len(chunks) < n:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise ProtocolError("timeout waiting for encoder reply")
            if not self._selector.select(timeout=remaining):
                continue
            try:
                chunk = os.read(fd, n - len(chunks))
            except BlockingIOError:
                continue
            if chunk == b"":
                raise ProtocolError("encoder process closed its output (eof)")
            chunks.extend(chunk)
        return bytes(chunks)

    def _request(self, opcode: int, body: bytes) -> tuple[int, bytes]:
        payload = bytes([opcode]) + body
        try:
            self._proc.stdin.write(struct.pack("<I", len(payload)) + payload)
            self._proc.stdin.flush()
        except (OSError, ValueError) as e:
            raise ProtocolError(f"cannot write to encoder process: {e}") from e
        deadline = time.monotonic() + self.timeout
        (length,) = struct.unpack("<I", self._read_exact(4, deadline))
        if length < 1:
            raise ProtocolError("empty reply frame")
        reply = self._read_exact(length, deadline)
        op = reply[0]
        if op == OP_ERROR:
            if len(reply) >= 3:
                (msg_len,) = struct.unpack_from("<H", reply, 1)
                msg = reply[3 : 3 + msg_len].decode("utf-8", "replace")
            else:
                msg = "unspecified error"
            raise ProtocolError(f"encoder error: {msg}")
        return op, reply[1:]

    @staticmethod
    def _frame_body(frame: np.ndarray) -> bytes:
        frame = np.asarray(frame, dtype=np.float64)
        if frame.ndim != 3 or frame.shape[2] != 3:
            raise ShapeError(f"frame must be (H, W, 3), got {frame.shape}")
        h, w = frame.shape[:2]
        return struct.pack("<II", h, w) + frame.astype("<f4").tobytes()

    def encode(self, frame: np.ndarray) -> Embedding:
        op, body = self._request(OP_ENCODE, self._frame_body(frame))
        if op != OP_ENCODE or len(body) != self.dim * 4:
            raise ProtocolError(f"malformed ENCODE reply ({len(body)} bytes)")
        return Embedding(np.frombuffer(body, dtype="<f4").astype(np.float64), self.id)

    def grad_distance(self, frame: np.ndarray, target: Embedding) -> np.ndarray:
        self._check_target(target)
        body = self._frame_body(frame) + target.values.astype("<f4").tobytes()
        op, reply = self._request(OP_GRAD, body)
        h, w = np.asarray(frame).shape[:2]
        if op != OP_GRAD or len(reply) != h * w * 3 * 4:
            raise ProtocolError(f"malformed GRAD reply ({len(reply)} bytes)")
        return np.frombuffer(reply, dtype="<f4").astype(np.float64).reshape(h, w, 3)

    def close(self):
        try:
            self._selector.close()
        except Exception:
            pass
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def external_encoder(connect_cmd: str, timeout: float = DEFAULT_TIMEOUT) -> ExternalEncoder:
    """Spawn a subprocess encoder and complete the HELLO handshake."""
    return ExternalEncoder(connect_cmd, timeout=timeout)


def surrogate_encode(frame: np.ndarray, cfg: SurrogateEncoderConfig) -> Embedding:
    """One-shot convenience wrapper around SurrogateEncoder.encode."""
    return SurrogateEncoder(cfg).encode(frame)
