"""Binary and CSV serialisation of CSI traces (layout in docs/formats.md)."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import TraceFormatError
from .simenv import CsiTrace

MAGIC = b"JBTR"
VERSION = 1
_HEADER = struct.Struct("<4sHHIIdH")
FLAG_SECTORS = 1


def trace_to_bytes(trace: CsiTrace) -> bytes:
    owner = trace.owner.encode("utf-8")
    flags = FLAG_SECTORS if trace.sectors is not None else 0
    parts = [
        _HEADER.pack(MAGIC, VERSION, trace.K, trace.samples_per_probe, trace.n_rounds,
                     float(trace.sample_rate), flags),
        struct.pack("<H", len(owner)), owner,
        np.ascontiguousarray(trace.samples, dtype="<c8").tobytes(),
        np.packbits(trace.validity.astype(np.uint8), bitorder="little").tobytes(),
    ]
    if trace.sectors is not None:
        parts.append(np.asarray(trace.sectors, dtype="<i2").tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, section: str) -> bytes:
        if self.pos + n > len(self.data):
            raise TraceFormatError(
                f"truncated trace file: {section} needs {n} bytes at offset {self.pos}, "
                f"only {len(self.data) - self.pos} left")
        out = self.data[self.pos: self.pos + n]
        self.pos += n
        return out


def trace_from_bytes(data: bytes) -> CsiTrace:
    r = _Reader(data)
    magic, version, K, alpha, n_rounds, rate, flags = _HEADER.unpack(r.take(_HEADER.size, "header"))
    if magic != MAGIC:
        raise TraceFormatError(f"not a trace file (magic {magic!r})")
    if version != VERSION:
        raise TraceFormatError(f"unsupported trace version {version} (expected {VERSION})")
    (n_owner,) = struct.unpack("<H", r.take(2, "owner length"))
    owner = r.take(n_owner, "owner").decode("utf-8")
    width = alpha * n_rounds
    samples = np.frombuffer(r.take(K * width * 8, "samples"), dtype="<c8").reshape(K, width)
    packed = np.frombuffer(r.take((width + 7) // 8, "validity bitmap"), dtype=np.uint8)
    validity = np.unpackbits(packed, count=width, bitorder="little").astype(bool)
    sectors = None
    if flags & FLAG_SECTORS:
        sectors = np.frombuffer(r.take(width * 2, "sector labels"), dtype="<i2").astype(np.int16)
    if r.pos != len(data):
        raise TraceFormatError(f"{len(data) - r.pos} unexpected trailing bytes")
    return CsiTrace(samples.astype(np.complex64), validity, owner, alpha, n_rounds, rate, sectors)


def save_trace(trace: CsiTrace, path) -> None:
    Path(path).write_bytes(trace_to_bytes(trace))


def load_trace(path) -> CsiTrace:
    return trace_from_bytes(Path(path).read_bytes())


def save_trace_csv(trace: CsiTrace, path) -> None:
    """Debug dump: one row per time index with validity and per-subcarrier amplitudes."""
    amp = trace.amplitude()
    header = ["index", "time_sec", "valid"] + [f"amp_{k + 1}" for k in range(trace.K)]
    t = trace.times()
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for j in range(trace.width):
            row = [str(j), f"{t[j]:.6f}", str(int(trace.validity[j]))]
            row += [f"{v:.6g}" for v in amp[:, j]]
            fh.write(",".join(row) + "\n")
