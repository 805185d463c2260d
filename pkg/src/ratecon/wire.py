"""Binary framing of protocol messages for the networked mode.

Each message on the byte stream is:

    1 byte  type tag: 0x01 payload, 0x02 sample, 0x03 syndrome, 0x04 ack
    4 bytes big-endian body length
    body

Bit-strings are packed MSB-first.  Bodies:

    payload    packed payload bits (bit count fixed by session config)
    sample     4-byte big-endian t, then t 4-byte big-endian positions,
               then packed sampled values
    syndrome   packed syndrome bits, then 8-byte IEEE-754 big-endian
               crossover estimate
    ack        1 byte, 0x01 success / 0x00 failure
"""

from __future__ import annotations

import struct

import numpy as np

from .protocol import Ack, Payload, Sample, SyndromeAndEstimate

TAG_PAYLOAD = 0x01
TAG_SAMPLE = 0x02
TAG_SYNDROME = 0x03
TAG_ACK = 0x04


class WireError(ValueError):
    pass


def pack_bits(bits) -> bytes:
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()


def unpack_bits(data: bytes, count: int) -> np.ndarray:
    if len(data) != (count + 7) // 8:
        raise WireError(f"{len(data)} bytes cannot hold exactly {count} bits")
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8), count=count)


def encode(message) -> bytes:
    if isinstance(message, Payload):
        tag, body = TAG_PAYLOAD, pack_bits(message.bits)
    elif isinstance(message, Sample):
        t = len(message.positions)
        body = struct.pack(">I", t)
        body += b"".join(struct.pack(">I", int(q)) for q in message.positions)
        body += pack_bits(message.values)
        tag = TAG_SAMPLE
    elif isinstance(message, SyndromeAndEstimate):
        tag = TAG_SYNDROME
        body = pack_bits(message.syndrome) + struct.pack(">d", message.crossover_estimate)
    elif isinstance(message, Ack):
        tag, body = TAG_ACK, (b"\x01" if message.success else b"\x00")
    else:
        raise WireError(f"unknown message {message!r}")
    return bytes([tag]) + struct.pack(">I", len(body)) + body


def decode(tag: int, body: bytes, payload_bits: int, syndrome_bits: int):
    """Rebuild a message; the expected bit counts come from session config."""
    if tag == TAG_PAYLOAD:
        return Payload(unpack_bits(body, payload_bits))
    if tag == TAG_SAMPLE:
        if len(body) < 4:
            raise WireError("sample body truncated")
        (t,) = struct.unpack(">I", body[:4])
        need = 4 + 4 * t + (t + 7) // 8
        if len(body) != need:
            raise WireError(f"sample body is {len(body)} bytes, expected {need}")
        positions = np.frombuffer(body[4:4 + 4 * t], dtype=">u4").astype(np.int64)
        values = unpack_bits(body[4 + 4 * t:], t)
        return Sample(positions, values)
    if tag == TAG_SYNDROME:
        packed = (syndrome_bits + 7) // 8
        if len(body) != packed + 8:
            raise WireError(f"syndrome body is {len(body)} bytes, expected {packed + 8}")
        syndrome = unpack_bits(body[:packed], syndrome_bits)
        (estimate,) = struct.unpack(">d", body[packed:])
        return SyndromeAndEstimate(syndrome, estimate)
    if tag == TAG_ACK:
        if len(body) != 1:
            raise WireError("ack body must be one byte")
        return Ack(body[0] == 1)
    raise WireError(f"unknown message tag 0x{tag:02x}")


def write_message(stream, message) -> None:
    stream.sendall(encode(message))


def read_message(stream, payload_bits: int, syndrome_bits: int):
    header = _read_exact(stream, 5)
    tag = header[0]
    (length,) = struct.unpack(">I", header[1:])
    body = _read_exact(stream, length)
    return decode(tag, body, payload_bits, syndrome_bits)


def _read_exact(stream, count: int) -> bytes:
    chunks = []
    remaining = count
    while remaining:
        chunk = stream.recv(remaining)
        if not chunk:
            raise WireError("stream closed mid-message")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)
