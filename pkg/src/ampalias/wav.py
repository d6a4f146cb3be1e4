"""Minimal RIFF/WAVE reader and writer.

Supported encodings: 16-bit PCM, 24-bit PCM and 32-bit IEEE float, plain or
WAVE_FORMAT_EXTENSIBLE. Multichannel files are averaged down to mono.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .dsp import Signal

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE


class WavError(ValueError):
    pass


class UnsupportedCodecError(WavError):
    pass


class MalformedHeaderError(WavError):
    pass


class EmptyDataError(WavError):
    pass


def _chunks(buf: bytes):
    pos = 12
    while pos + 8 <= len(buf):
        cid, size = struct.unpack_from("<4sI", buf, pos)
        body = buf[pos + 8: pos + 8 + size]
        if len(body) < size and cid != b"data":
            raise MalformedHeaderError(f"chunk {cid!r} truncated")
        yield cid, body
        pos += 8 + size + (size & 1)


def _decode(body: bytes, fmt_tag: int, bits: int, channels: int) -> np.ndarray:
    if fmt_tag == WAVE_FORMAT_PCM and bits == 16:
        data = np.frombuffer(body[: len(body) // 2 * 2], dtype="<i2").astype(np.float64) / 2 ** 15
    elif fmt_tag == WAVE_FORMAT_PCM and bits == 24:
        raw = np.frombuffer(body[: len(body) // 3 * 3], dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        ints = raw[:, 0] | (raw[:, 1] << 8) | (raw[:, 2] << 16)
        ints = np.where(ints >= 1 << 23, ints - (1 << 24), ints)
        data = ints.astype(np.float64) / 2 ** 23
    elif fmt_tag == WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        data = np.frombuffer(body[: len(body) // 4 * 4], dtype="<f4").astype(np.float64)
    else:
        raise UnsupportedCodecError(f"unsupported WAV encoding: format tag {fmt_tag:#06x}, {bits} bits")
    frames = data.shape[0] // channels
    return data[: frames * channels].reshape(frames, channels).mean(axis=1)


def load_wav(path) -> Signal:
    buf = Path(path).read_bytes()
    if len(buf) < 12 or buf[:4] != b"RIFF" or buf[8:12] != b"WAVE":
        raise MalformedHeaderError(f"{path}: not a RIFF/WAVE file")
    fmt = None
    data = None
    for cid, body in _chunks(buf):
        if cid == b"fmt ":
            if len(body) < 16:
                raise MalformedHeaderError(f"{path}: fmt chunk too short")
            tag, channels, rate, _, _, bits = struct.unpack_from("<HHIIHH", body)
            if tag == WAVE_FORMAT_EXTENSIBLE:
                if len(body) < 26:
                    raise MalformedHeaderError(f"{path}: extensible fmt chunk too short")
                # first two bytes of the sub-format GUID carry the real tag
                tag = struct.unpack_from("<H", body, 24)[0]
            fmt = (tag, channels, rate, bits)
        elif cid == b"data":
            data = body
    if fmt is None:
        raise MalformedHeaderError(f"{path}: missing fmt chunk")
    if data is None:
        raise MalformedHeaderError(f"{path}: missing data chunk")
    tag, channels, rate, bits = fmt
    if channels < 1 or rate < 1:
        raise MalformedHeaderError(f"{path}: invalid channel count or sample rate")
    samples = _decode(data, tag, bits, channels)
    if samples.size == 0:
        raise EmptyDataError(f"{path}: data chunk holds no complete frames")
    return Signal(samples, rate)


def save_wav(path, s: Signal, encoding: str = "float32") -> None:
    """Write ``s`` as mono WAV. ``encoding`` is one of float32, pcm16, pcm24.

    PCM output is clipped to the representable range and rounded.
    """
    x = s.samples
    if encoding == "float32":
        tag, bits = WAVE_FORMAT_IEEE_FLOAT, 32
        payload = x.astype("<f4").tobytes()
    elif encoding in ("pcm16", "pcm24"):
        tag, bits = WAVE_FORMAT_PCM, int(encoding[3:])
        scale = 2 ** (bits - 1)
        ints = np.clip(np.round(x * scale), -scale, scale - 1).astype(np.int64)
        if bits == 16:
            payload = ints.astype("<i2").tobytes()
        else:
            u = (ints & 0xFFFFFF).astype(np.uint32)
            payload = np.stack([u & 0xFF, (u >> 8) & 0xFF, u >> 16], axis=1).astype(np.uint8).tobytes()
    else:
        raise UnsupportedCodecError(f"unknown encoding {encoding!r}")
    block = bits // 8
    fmt = struct.pack("<HHIIHH", tag, 1, s.sample_rate, s.sample_rate * block, block, bits)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) & 1:
        body += b"\x00"
    Path(path).write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)
