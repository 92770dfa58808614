"""stdin/stdout protocol loop.

Framing (little-endian throughout):
  u32 payload length | u8 opcode | body
Opcodes: 0 HELLO, 1 ENCODE, 2 GRAD, 3 ERROR (replies only).
  HELLO reply: u16 id length | id UTF-8 | u32 dim.
  ENCODE request: u32 H | u32 W | H*W*3 f32 pixels; reply: dim f32 values.
  GRAD request: ENCODE body | dim f32 target; reply: H*W*3 f32 gradient.
  ERROR reply: u16 message length | message UTF-8.

One request in flight; a malformed request gets an ERROR reply and the
loop keeps running. EOF on stdin ends the process cleanly.
"""

from __future__ import annotations

import argparse
import importlib
import struct
import sys

import numpy as np

from .encoder import AdapterError, MockEncoder, NumericalGradient

OP_HELLO = 0
OP_ENCODE = 1
OP_GRAD = 2
OP_ERROR = 3

MAX_PAYLOAD = 1 << 28  # 256 MiB: larger lengths are treated as garbage


def _read_exact(stream, n: int) -> bytes | None:
    chunks = bytearray()
    while len(chunks) < n:
        chunk = stream.read(n - len(chunks))
        if not chunk:
            return None  # eof mid-message: client went away
        chunks.extend(chunk)
    return bytes(chunks)


def _write_msg(stream, opcode: int, body: bytes) -> None:
    payload = bytes([opcode]) + body
    stream.write(struct.pack("<I", len(payload)) + payload)
    stream.flush()


def _error(stream, message: str) -> None:
    raw = message.encode("utf-8")[:65535]
    _write_msg(stream, OP_ERROR, struct.pack("<H", len(raw)) + raw)


def _parse_frame(body: bytes) -> tuple[np.ndarray, bytes]:
    if len(body) < 8:
        raise AdapterError("frame header truncated")
    h, w = struct.unpack_from("<II", body, 0)
    need = h * w * 3 * 4
    if h < 1 or w < 1 or need > MAX_PAYLOAD:
        raise AdapterError(f"implausible frame dims {h}x{w}")
    pixels = body[8 : 8 + need]
    if len(pixels) != need:
        raise AdapterError(
            f"frame payload is {len(body) - 8} bytes, expected {need}"
        )
    frame = np.frombuffer(pixels, dtype="<f4").astype(np.float64).reshape(h, w, 3)
    return frame, body[8 + need :]


def serve(encoder, stdin=None, stdout=None) -> None:
    stdin = stdin or sys.stdin.buffer
    stdout = stdout or sys.stdout.buffer
    ident = encoder.id.encode("utf-8")
    while True:
        header = _read_exact(stdin, 4)
        if header is None:
            return
        (length,) = struct.unpack("<I", header)
        if length < 1 or length > MAX_PAYLOAD:
            _error(stdout, f"bad frame length {length}")
            return  # framing is lost; resyncing is not possible
        payload = _read_exact(stdin, length)
        if payload is None:
            return
        opcode, body = payload[0], payload[1:]
        try:
            if opcode == OP_HELLO:
                reply = struct.pack("<H", len(ident)) + ident + struct.pack("<I", encoder.dim)
                _write_msg(stdout, OP_HELLO, reply)
            elif opcode == OP_ENCODE:
                frame, rest = _parse_frame(body)
                if rest:
                    raise AdapterError(f"{len(rest)} trailing bytes after frame")
                values = np.asarray(encoder.encode(frame), dtype="<f4")
                if values.shape != (encoder.dim,):
                    raise AdapterError("mounted encoder returned a wrong-sized embedding")
                _write_msg(stdout, OP_ENCODE, values.tobytes())
            elif opcode == OP_GRAD:
                frame, rest = _parse_frame(body)
                if len(rest) != encoder.dim * 4:
                    raise AdapterError(
                        f"target is {len(rest)} bytes, expected {encoder.dim * 4}"
                    )
                target = np.frombuffer(rest, dtype="<f4").astype(np.float64)
                grad = np.asarray(encoder.grad_distance(frame, target), dtype="<f4")
                _write_msg(stdout, OP_GRAD, grad.tobytes())
            else:
                raise AdapterError(f"unknown opcode {opcode}")
        except AdapterError as e:
            _error(stdout, str(e))
        except Exception as e:  # noqa: BLE001 - must stay alive per contract
            _error(stdout, f"internal error: {e}")


def _load_custom(path: str):
    module_name, _, attr = path.partition(":")
    if not attr:
        raise SystemExit("custom encoder must be MODULE:ATTRIBUTE")
    obj = getattr(importlib.import_module(module_name), attr)
    encoder = obj() if callable(obj) and not hasattr(obj, "encode") else obj
    if not hasattr(encoder, "grad_distance"):
        encoder = NumericalGradient(encoder)
    return encoder


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(prog="videocloak-adapter")
    parser.add_argument("--mode", choices=["mock", "custom"], default="mock")
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--pool-factor", type=int, default=4)
    parser.add_argument("--dim", type=int, default=256)
    parser.add_argument("--encoder", default=None,
                        help="MODULE:ATTRIBUTE of the custom encoder object")
    args = parser.parse_args(argv)
    if args.mode == "mock":
        encoder = MockEncoder(seed=args.seed, pool_factor=args.pool_factor, dim=args.dim)
    else:
        if not args.encoder:
            raise SystemExit("--mode custom requires --encoder MODULE:ATTRIBUTE")
        encoder = _load_custom(args.encoder)
    serve(encoder)


if __name__ == "__main__":
    main()
