"""Minimal misbehaving encoder processes for exercising the wire-protocol
client error paths. Usage: python3 protocol_stub.py {dim0|eof}

dim0: answers HELLO with dim = 0.
eof:  answers HELLO correctly, then exits before the next request.
"""

import struct
import sys


def read_msg(stream):
    header = stream.read(4)
    if len(header) < 4:
        return None, b""
    (length,) = struct.unpack("<I", header)
    payload = stream.read(length)
    return payload[0], payload[1:]


def write_msg(stream, opcode, body):
    payload = bytes([opcode]) + body
    stream.write(struct.pack("<I", len(payload)) + payload)
    stream.flush()


def main():
    mode = sys.argv[1]
    stdin = sys.stdin.buffer
    stdout = sys.stdout.buffer
    op, _ = read_msg(stdin)
    assert op == 0, f"expected HELLO, got {op}"
    ident = b"stub"
    dim = 0 if mode == "dim0" else 16
    write_msg(stdout, 0, struct.pack("<H", len(ident)) + ident + struct.pack("<I", dim))
    if mode == "eof":
        return  # die before the next request
    # dim0 clients bail after the handshake; nothing else to do
    read_msg(stdin)


if __name__ == "__main__":
    main()
