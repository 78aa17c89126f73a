"""
On-disk formats: CSI sequences, compander parameter files and the
compressed bitstream container.

All multi-byte integers are little-endian.

CSI sequence (binary)::

    b"CSI1"  u32 n_t  u64 n  then n*n_t (re, im) f64 pairs, time-major

A CSV variant holds one row per timestep with re/im interleaved.

Bitstream container::

    b"CTQ1"  u16 version  u32 n_t  u8 depth  f64 gamma  u8 q1  u8 q2
    u16 m3  u16 M_abs  u16 M_ang  u16 len + amp record  u16 len + phase record
    u8 strategy tag  u64 payload bit count  payload (MSB-first, zero padded)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .compander import CompanderParams, format_record, parse_record
from .errors import FormatError, TruncatedStream

__all__ = [
    "CSI_MAGIC", "CTQ_MAGIC", "CTQ_VERSION",
    "write_csi", "read_csi", "write_csi_csv", "read_csi_csv", "load_csi",
    "write_params", "read_params", "Container", "write_container", "read_container",
]

CSI_MAGIC = b"CSI1"
CTQ_MAGIC = b"CTQ1"
CTQ_VERSION = 1

_CSI_HEAD = struct.Struct("<4sIQ")
_CTQ_HEAD = struct.Struct("<4sHIBdBBHHH")


# -- CSI sequences -----------------------------------------------------------

def write_csi(path, frames):
    x = np.asarray(frames, dtype=complex)
    if x.ndim != 2:
        raise ValueError("frames must have shape (n, n_t)")
    n, n_t = x.shape
    body = np.empty((n, n_t, 2), dtype="<f8")
    body[..., 0] = x.real
    body[..., 1] = x.imag
    with open(path, "wb") as fh:
        fh.write(_CSI_HEAD.pack(CSI_MAGIC, n_t, n))
        fh.write(body.tobytes())


def read_csi(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _CSI_HEAD.size:
        raise FormatError("CSI file shorter than its header")
    magic, n_t, n = _CSI_HEAD.unpack_from(data)
    if magic != CSI_MAGIC:
        raise FormatError(f"bad CSI magic {magic!r}")
    need = _CSI_HEAD.size + 16 * n * n_t
    if len(data) != need:
        raise FormatError(f"CSI body holds {len(data) - _CSI_HEAD.size} bytes, header implies {need - _CSI_HEAD.size}")
    body = np.frombuffer(data, dtype="<f8", offset=_CSI_HEAD.size).reshape(n, n_t, 2)
    return body[..., 0] + 1j * body[..., 1]


def write_csi_csv(path, frames):
    x = np.asarray(frames, dtype=complex)
    out = np.empty((x.shape[0], 2 * x.shape[1]))
    out[:, 0::2] = x.real
    out[:, 1::2] = x.imag
    np.savetxt(path, out, delimiter=",", fmt="%.17g")


def read_csi_csv(path) -> np.ndarray:
    try:
        raw = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise FormatError(f"unreadable CSI CSV: {exc}") from None
    if raw.shape[1] % 2:
        raise FormatError("CSI CSV rows need an even number of columns (re, im pairs)")
    return raw[:, 0::2] + 1j * raw[:, 1::2]


def load_csi(path) -> np.ndarray:
    """Read either format, chosen by the file's leading bytes."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    return read_csi(path) if head == CSI_MAGIC else read_csi_csv(path)


# -- compander parameter files -------------------------------------------------

def write_params(path, amp: CompanderParams, ang: CompanderParams):
    Path(path).write_text(f"amp {format_record(amp)}\nphase {format_record(ang)}\n")


def read_params(path):
    """Return ``(amp, phase)`` companders from a two-line parameter file."""
    found = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, rest = line.partition(" ")
        if key not in ("amp", "phase"):
            raise FormatError(f"unknown parameter line {line!r}")
        try:
            found[key] = parse_record(rest)
        except ValueError as exc:
            raise FormatError(str(exc)) from None
    if set(found) != {"amp", "phase"}:
        raise FormatError("parameter file needs one 'amp' and one 'phase' record")
    return found["amp"], found["phase"]


# -- bitstream container -------------------------------------------------------

@dataclass(frozen=True)
class Container:
    n_t: int
    depth: int
    gamma: float
    q1: int
    q2: int
    m3: int
    M_abs: int
    M_ang: int
    amp: CompanderParams
    ang: CompanderParams
    strategy_tag: int
    payload_bits: int
    payload: bytes
    version: int = CTQ_VERSION


def _record_bytes(params) -> bytes:
    rec = format_record(params).encode("ascii")
    return struct.pack("<H", len(rec)) + rec


def write_container(path, c: Container):
    with open(path, "wb") as fh:
        fh.write(_CTQ_HEAD.pack(CTQ_MAGIC, c.version, c.n_t, c.depth, c.gamma,
                                c.q1, c.q2, c.m3, c.M_abs, c.M_ang))
        fh.write(_record_bytes(c.amp))
        fh.write(_record_bytes(c.ang))
        fh.write(struct.pack("<BQ", c.strategy_tag, c.payload_bits))
        fh.write(c.payload)


def read_container(path) -> Container:
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != CTQ_MAGIC:
        raise FormatError(f"bad bitstream magic {data[:4]!r}")
    if len(data) < _CTQ_HEAD.size:
        raise TruncatedStream("bitstream header is truncated")
    _, version, n_t, depth, gamma, q1, q2, m3, M_abs, M_ang = _CTQ_HEAD.unpack_from(data)
    if version != CTQ_VERSION:
        raise FormatError(f"unsupported bitstream version {version}")
    pos = _CTQ_HEAD.size
    records = []
    for _ in range(2):
        if pos + 2 > len(data):
            raise TruncatedStream("bitstream header is truncated")
        (n,) = struct.unpack_from("<H", data, pos)
        pos += 2
        if pos + n > len(data):
            raise TruncatedStream("bitstream header is truncated")
        try:
            records.append(parse_record(data[pos:pos + n].decode("ascii")))
        except (UnicodeDecodeError, ValueError) as exc:
            raise FormatError(f"bad compander record: {exc}") from None
        pos += n
    if pos + 9 > len(data):
        raise TruncatedStream("bitstream header is truncated")
    tag, nbits = struct.unpack_from("<BQ", data, pos)
    pos += 9
    payload = data[pos:]
    if nbits > 8 * len(payload):
        raise TruncatedStream("payload shorter than its declared bit count")
    return Container(n_t, depth, gamma, q1, q2, m3, M_abs, M_ang, records[0], records[1],
                     tag, nbits, payload, version)
