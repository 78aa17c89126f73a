"""
Normalize-and-quantize front end for complex CSI vectors.

Each frame is divided by its strongest component, split into amplitude and
phase, and every non-strongest component is scalar-quantized as
``floor(M * g(v))`` after companding.  The strongest component is sent as
the reserved special symbol ``M`` in both streams, so each stream's
alphabet holds ``M + 1`` symbols.

Component indices are 0-based throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .compander import CompanderParams, Identity
from .errors import MalformedFrame, ZeroVector

__all__ = [
    "ScalarQuantizer", "QuantizerConfig", "QuantizedFrame",
    "normalize", "quantize_frame", "dequantize_frame",
    "quantize_frames", "dequantize_frames", "mscd", "split_levels",
    "raw_rate", "E_ANG_UNIFORM",
]

TWO_PI = 2.0 * math.pi
E_ANG_UNIFORM = 4.0 * math.pi ** 2 / 3.0


@dataclass(frozen=True)
class ScalarQuantizer:
    """Uniform grid of ``levels`` cells in compander image space."""

    levels: int
    compander: CompanderParams = field(default_factory=Identity)

    def __post_init__(self):
        if self.levels < 2:
            raise ValueError("a scalar quantizer needs at least 2 levels")

    @property
    def special(self) -> int:
        return self.levels

    @property
    def alphabet(self) -> int:
        return self.levels + 1

    def quantize(self, v):
        """Index of ``v`` in [0, 1]; values at 1.0 clamp to the top cell."""
        y = np.asarray(self.compander.compress(v))
        idx = np.minimum(np.floor(self.levels * y).astype(np.int64), self.levels - 1)
        return int(idx) if idx.ndim == 0 else idx

    @cached_property
    def table(self) -> np.ndarray:
        mids = (np.arange(self.levels) + 0.5) / self.levels
        return np.asarray(self.compander.expand(mids), dtype=float)

    def reconstruct(self, s):
        s = np.asarray(s)
        if np.any((s < 0) | (s >= self.levels)):
            raise ValueError("symbol outside the quantizer grid")
        out = self.table[s]
        return float(out) if out.ndim == 0 else out

    def reproject(self, s: int, high: "ScalarQuantizer") -> int:
        """Re-quantize this grid's reconstruction of ``s`` on ``high``.

        The special symbol maps to ``high``'s special symbol.
        """
        if s == self.special:
            return high.special
        return high.quantize(self.reconstruct(s))


@dataclass(frozen=True)
class QuantizerConfig:
    n_t: int
    M_abs: int
    M_ang: int
    amp_compander: CompanderParams = field(default_factory=Identity)
    ang_compander: CompanderParams = field(default_factory=Identity)

    def __post_init__(self):
        if self.n_t < 1:
            raise ValueError("n_t must be positive")
        if self.M_abs < 2 or self.M_ang < 2:
            raise ValueError("M_abs and M_ang must be at least 2")

    @property
    def m_abs(self) -> int:
        return self.M_abs + 1

    @property
    def m_ang(self) -> int:
        return self.M_ang + 1

    @cached_property
    def amp(self) -> ScalarQuantizer:
        return ScalarQuantizer(self.M_abs, self.amp_compander)

    @cached_property
    def ang(self) -> ScalarQuantizer:
        return ScalarQuantizer(self.M_ang, self.ang_compander)


@dataclass(frozen=True)
class QuantizedFrame:
    strongest: int
    amp_symbols: tuple
    ang_symbols: tuple

    def __post_init__(self):
        object.__setattr__(self, "amp_symbols", tuple(int(s) for s in self.amp_symbols))
        object.__setattr__(self, "ang_symbols", tuple(int(s) for s in self.ang_symbols))


def normalize(frame):
    """Divide by the strongest component (lowest index wins ties).

    Returns ``(normalized, strongest)`` with ``normalized[strongest] == 1``.
    """
    x = np.asarray(frame, dtype=complex)
    mags = np.abs(x)
    i = int(np.argmax(mags))
    if mags[i] == 0.0:
        raise ZeroVector("cannot normalize an all-zero frame")
    xn = x / x[i]
    xn[i] = 1.0 + 0.0j
    return xn, i


def _polar_unit(xn):
    a = np.clip(np.abs(xn), 0.0, 1.0)
    phi = np.mod(np.angle(xn), TWO_PI) / TWO_PI
    return a, np.clip(phi, 0.0, 1.0)


def quantize_frame(cfg: QuantizerConfig, frame) -> QuantizedFrame:
    xn, i = normalize(frame)
    if xn.shape[0] != cfg.n_t:
        raise ValueError("frame length does not match n_t")
    a, phi = _polar_unit(xn)
    amp = cfg.amp.quantize(a)
    ang = cfg.ang.quantize(phi)
    amp[i] = cfg.M_abs
    ang[i] = cfg.M_ang
    return QuantizedFrame(i, amp, ang)


def _check_special(cfg: QuantizerConfig, amp, ang):
    """Return the strongest index implied by the symbol streams."""
    amp = np.asarray(amp)
    ang = np.asarray(ang)
    if amp.shape != ang.shape:
        raise MalformedFrame("amplitude and phase streams differ in length")
    sa = amp == cfg.M_abs
    sp = ang == cfg.M_ang
    if np.any(sa != sp):
        raise MalformedFrame("special symbol present in only one stream of a component")
    if np.any((amp < 0) | (amp > cfg.M_abs) | (ang < 0) | (ang > cfg.M_ang)):
        raise MalformedFrame("symbol outside the alphabet")
    where = np.flatnonzero(sa)
    if where.size != 1:
        raise MalformedFrame(f"expected one special component, found {where.size}")
    return int(where[0])


def dequantize_frame(cfg: QuantizerConfig, qf: QuantizedFrame) -> np.ndarray:
    """Midpoint reconstruction; the strongest component comes back as 1+0j."""
    i = _check_special(cfg, qf.amp_symbols, qf.ang_symbols)
    if i != qf.strongest:
        raise MalformedFrame("strongest index disagrees with the special symbols")
    amp = np.array(qf.amp_symbols)
    ang = np.array(qf.ang_symbols)
    amp[i] = 0
    ang[i] = 0
    out = cfg.amp.reconstruct(amp) * np.exp(1j * TWO_PI * cfg.ang.reconstruct(ang))
    out[i] = 1.0 + 0.0j
    return out


def quantize_frames(cfg: QuantizerConfig, frames):
    """Vectorized quantize_frame over an ``(n, n_t)`` array.

    Returns ``(strongest, amp, ang)`` integer arrays of shapes ``(n,)``,
    ``(n, n_t)``, ``(n, n_t)``.
    """
    x = np.asarray(frames, dtype=complex)
    if x.ndim != 2 or x.shape[1] != cfg.n_t:
        raise ValueError("frames must have shape (n, n_t)")
    mags = np.abs(x)
    strongest = np.argmax(mags, axis=1)
    rows = np.arange(x.shape[0])
    peak = x[rows, strongest]
    if np.any(peak == 0):
        raise ZeroVector("cannot normalize an all-zero frame")
    xn = x / peak[:, None]
    xn[rows, strongest] = 1.0
    a, phi = _polar_unit(xn)
    amp = cfg.amp.quantize(a)
    ang = cfg.ang.quantize(phi)
    amp[rows, strongest] = cfg.M_abs
    ang[rows, strongest] = cfg.M_ang
    return strongest, amp, ang


def dequantize_frames(cfg: QuantizerConfig, amp, ang) -> np.ndarray:
    """Inverse of quantize_frames from the two symbol arrays."""
    amp = np.asarray(amp)
    ang = np.asarray(ang)
    special = amp == cfg.M_abs
    if np.any(special != (ang == cfg.M_ang)) or np.any(special.sum(axis=1) != 1):
        raise MalformedFrame("special symbols are inconsistent")
    a = cfg.amp.reconstruct(np.where(special, 0, amp))
    p = cfg.ang.reconstruct(np.where(special, 0, ang))
    return np.where(special, 1.0 + 0.0j, a * np.exp(1j * TWO_PI * p))


def mscd(reference, reconstructed) -> float:
    """Mean squared chordal distance between two frame sequences."""
    x = np.asarray(reference, dtype=complex)
    y = np.asarray(reconstructed, dtype=complex)
    if x.ndim == 1:
        x = x[None, :]
    if y.ndim == 1:
        y = y[None, :]
    if x.shape != y.shape or x.shape[0] == 0:
        raise ValueError("sequences must be non-empty with matching shapes")
    nx = np.sum(np.abs(x) ** 2, axis=1)
    ny = np.sum(np.abs(y) ** 2, axis=1)
    if np.any(nx == 0) or np.any(ny == 0):
        raise ZeroVector("MSCD undefined for zero-norm frames")
    inner = np.abs(np.sum(x * np.conj(y), axis=1)) ** 2
    return float(np.clip(1.0 - np.mean(inner / (nx * ny)), 0.0, 1.0))


def split_levels(M_total: int, e_ang: float = E_ANG_UNIFORM, ratio: float = 1.0):
    """Split a power-of-two level budget between amplitude and phase.

    Picks ``(M_abs, M_ang)``, both powers of two with product ``M_total``,
    whose log-ratio is closest to ``log2(sqrt(e_ang) * ratio)``.  Ties favour
    the larger amplitude share.
    """
    if M_total < 4 or M_total & (M_total - 1):
        raise ValueError("M_total must be a power of two, at least 4")
    if not (e_ang > 0 and ratio > 0):
        raise ValueError("e_ang and ratio must be positive")
    bits = M_total.bit_length() - 1
    target = math.log2(math.sqrt(e_ang) * ratio)
    best = min(range(1, bits), key=lambda a: (abs((bits - a) - a - target), -a))
    return 1 << best, 1 << (bits - best)


def raw_rate(M_abs: int, M_ang: int) -> float:
    """Uncompressed bits per complex component."""
    return math.log2(M_abs * M_ang)
