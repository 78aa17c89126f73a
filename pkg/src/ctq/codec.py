"""
Three-level fixed-codeword coding of a symbol stream driven by a MAP tree.

For every symbol the coder ranks the alphabet by the add-half prediction of
the current MAP model (ties to the lower symbol index) and emits

    rank < 2^q1                 '0'  + q1 bits of rank
    rank < 2^q1 + 2^q2          '10' + q2 bits of (rank - 2^q1)
    otherwise                   '11' + ceil(log2 m3) bits of a low-res index

Without the low-res level (``fallback=False``) the second prefix shrinks to
a single '1', since only two cases remain.  Bits are MSB-first.  Encoder and decoder hold identical trees; after a
low-res codeword both sides update with the low-res index projected back
onto the high-res alphabet (``reproject``), or skip the count update
(``skip``).  The MAP model is re-pruned every ``update_interval`` symbols.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

from .context_tree import ContextTree, Model
from .errors import DesyncDetected, MissingFallback, TruncatedStream
from .quantizer import ScalarQuantizer

__all__ = [
    "BitWriter", "BitReader", "CodecConfig", "CodecState", "StreamCoder",
    "Decoded", "rank_symbols", "encode_symbol", "decode_symbol",
    "reproject", "ctw_ideal_code_length", "codeword_lengths",
]

REPROJECT = "reproject"
SKIP = "skip"


class BitWriter:
    """Append-only MSB-first bit buffer."""

    def __init__(self):
        self._parts = []
        self.nbits = 0

    def write(self, value: int, nbits: int):
        if nbits == 0:
            return
        if not 0 <= value < (1 << nbits):
            raise ValueError(f"{value} does not fit in {nbits} bits")
        self._parts.append(format(value, f"0{nbits}b"))
        self.nbits += nbits

    def write_bits(self, bits: str):
        self._parts.append(bits)
        self.nbits += len(bits)

    def getvalue(self) -> str:
        s = "".join(self._parts)
        self._parts = [s]
        return s

    def to_bytes(self) -> bytes:
        """Pack bits, zero-padding the final byte."""
        s = self.getvalue()
        if not s:
            return b""
        pad = (-len(s)) % 8
        return int(s + "0" * pad, 2).to_bytes((len(s) + pad) // 8, "big")


class BitReader:
    """Cursor over a bit string."""

    def __init__(self, bits: str):
        self.bits = bits
        self.pos = 0

    @classmethod
    def from_bytes(cls, data: bytes, nbits: int) -> "BitReader":
        if nbits > 8 * len(data):
            raise TruncatedStream("payload shorter than its declared bit count")
        s = format(int.from_bytes(data, "big"), f"0{8 * len(data)}b") if data else ""
        return cls(s[:nbits])

    @property
    def remaining(self) -> int:
        return len(self.bits) - self.pos

    def read(self, nbits: int) -> int:
        if nbits == 0:
            return 0
        if self.pos + nbits > len(self.bits):
            raise TruncatedStream("bit stream ended inside a codeword")
        v = int(self.bits[self.pos:self.pos + nbits], 2)
        self.pos += nbits
        return v


def _width(n: int) -> int:
    """Bits needed to index n values."""
    return max(0, math.ceil(math.log2(n))) if n > 1 else 0


@dataclass(frozen=True)
class CodecConfig:
    q1: int = 0
    q2: int = 1
    m3: int = 2
    update_interval: int = 100
    decay: Optional[tuple] = None          # (factor, interval)
    fallback_update: str = REPROJECT
    fallback: bool = True

    def __post_init__(self):
        if self.q1 < 0 or self.q2 < 1:
            raise ValueError("need q1 >= 0 and q2 >= 1")
        if self.m3 < 2:
            raise ValueError("m3 must be at least 2")
        if self.update_interval < 1:
            raise ValueError("update_interval must be positive")
        if self.fallback_update not in (REPROJECT, SKIP):
            raise ValueError("fallback_update must be 'reproject' or 'skip'")
        if self.decay is not None:
            factor, interval = self.decay
            if not 0.0 <= factor <= 1.0 or interval < 1:
                raise ValueError("decay needs a factor in [0, 1] and a positive interval")

    @property
    def m1(self) -> int:
        return 1 << self.q1

    @property
    def m2(self) -> int:
        return 1 << self.q2

    @property
    def low_bits(self) -> int:
        return _width(self.m3)

    def check_alphabet(self, m: int):
        if self.fallback and self.m1 + self.m2 > m:
            raise ValueError(f"2^q1 + 2^q2 = {self.m1 + self.m2} exceeds alphabet size {m}")
        if not self.fallback and self.m1 + self.m2 < m:
            raise ValueError("without fallback the two lists must cover the alphabet")


def codeword_lengths(cfg: CodecConfig) -> tuple:
    """Possible codeword lengths: (1+q1, 2+q2, 2+ceil(log2 m3)), or
    (1+q1, 1+q2) without the low-res level."""
    if not cfg.fallback:
        return (1 + cfg.q1, 1 + cfg.q2)
    return (1 + cfg.q1, 2 + cfg.q2, 2 + cfg.low_bits)


class CodecState:
    """Tree, frozen MAP model and re-prune/decay counters of one stream."""

    def __init__(self, m: int, depth: int, gamma: float = 0.5):
        self.tree = ContextTree(m, depth, gamma)
        self.model: Model = self.tree.ctm_prune()
        self.symbols_since_prune = 0
        self.symbols_since_decay = 0

    @property
    def m(self) -> int:
        return self.tree.m

    def snapshot(self) -> str:
        return "\n".join([
            self.tree.snapshot(full=True),
            "model=" + " ".join(sorted(repr(s) for s in self.model.suffixes)),
            f"since_prune={self.symbols_since_prune} since_decay={self.symbols_since_decay}",
        ])

    # ranking at the current context, read off the leaf counts: probability
    # is increasing in count, so sorting by (-count, symbol) is the rank order

    def _leaf(self):
        return self.tree.node_stats(self.model.context_of(self.tree.history))[0]

    def rank_of(self, symbol: int) -> int:
        counts = self._leaf()
        c = counts.get(symbol, 0.0)
        if c > 0:
            return sum(1 for j, v in counts.items() if v > c or (v == c and j < symbol))
        positive = [j for j, v in counts.items() if v > 0]
        return len(positive) + symbol - sum(1 for j in positive if j < symbol)

    def symbol_at(self, rank: int) -> int:
        if not 0 <= rank < self.m:
            raise ValueError("rank outside alphabet")
        counts = self._leaf()
        ordered = sorted((j for j, v in counts.items() if v > 0), key=lambda j: (-counts[j], j))
        if rank < len(ordered):
            return ordered[rank]
        cand = rank - len(ordered)
        for j in sorted(ordered):
            if j <= cand:
                cand += 1
            else:
                break
        return cand

    def distribution(self):
        return self.tree.predict(self.model)

    def train(self, symbols):
        """Count a training prefix without coding it, then prune."""
        for s in symbols:
            self.tree.update(s)
        self.model = self.tree.ctm_prune()
        self.symbols_since_prune = 0

    def advance(self, cfg: CodecConfig, symbol: int, count: bool = True):
        """Post-symbol bookkeeping shared by encoder and decoder."""
        if count:
            self.tree.update(symbol)
        else:
            self.tree.push_history(symbol)
        self.symbols_since_prune += 1
        if cfg.decay is not None:
            self.symbols_since_decay += 1
            factor, interval = cfg.decay
            if self.symbols_since_decay >= interval:
                self.tree.decay_counts(factor)
                self.symbols_since_decay = 0
        if self.symbols_since_prune >= cfg.update_interval:
            self.model = self.tree.ctm_prune()
            self.symbols_since_prune = 0


def rank_symbols(dist) -> list:
    """Symbols by decreasing probability; equal probabilities by ascending index."""
    return sorted(range(len(dist)), key=lambda j: (-dist[j], j))


class Decoded(NamedTuple):
    symbol: Optional[int]       # exact symbol, or the projected one after a fallback
    low_res: Optional[int]      # low-res index when the fallback codeword was read
    consumed: int


def encode_symbol(state: CodecState, cfg: CodecConfig, symbol: int,
                  low_res_symbol: Optional[int] = None,
                  project: Optional[Callable[[int], int]] = None) -> str:
    """Codeword for ``symbol``; updates ``state`` exactly as the decoder will."""
    if not 0 <= symbol < state.m:
        raise ValueError("symbol outside alphabet")
    r = state.rank_of(symbol)
    w = BitWriter()
    if r < cfg.m1:
        w.write(0, 1)
        w.write(r, cfg.q1)
        state.advance(cfg, symbol)
    elif r < cfg.m1 + cfg.m2:
        if cfg.fallback:
            w.write(0b10, 2)
        else:
            w.write(1, 1)
        w.write(r - cfg.m1, cfg.q2)
        state.advance(cfg, symbol)
    else:
        if low_res_symbol is None or project is None:
            raise MissingFallback(f"symbol at rank {r} needs a low-resolution index")
        w.write(0b11, 2)
        w.write(low_res_symbol, cfg.low_bits)
        state.advance(cfg, project(low_res_symbol), count=cfg.fallback_update == REPROJECT)
    return w.getvalue()


def decode_symbol(state: CodecState, cfg: CodecConfig, reader: BitReader,
                  project: Optional[Callable[[int], int]] = None) -> Decoded:
    start = reader.pos
    if reader.read(1) == 0:
        sym = state.symbol_at(reader.read(cfg.q1))
        state.advance(cfg, sym)
        return Decoded(sym, None, reader.pos - start)
    if not cfg.fallback or reader.read(1) == 0:
        rank = cfg.m1 + reader.read(cfg.q2)
        if rank >= state.m:
            raise DesyncDetected(f"decoded rank {rank} outside the alphabet")
        sym = state.symbol_at(rank)
        state.advance(cfg, sym)
        return Decoded(sym, None, reader.pos - start)
    low = reader.read(cfg.low_bits)
    if project is None:
        raise MissingFallback("fallback codeword read but no projection is available")
    sym = project(low)
    state.advance(cfg, sym, count=cfg.fallback_update == REPROJECT)
    return Decoded(sym, low, reader.pos - start)


class StreamCoder:
    """A CodecState bound to its config and low-res projection."""

    def __init__(self, m: int, cfg: CodecConfig, depth: int = 2, gamma: float = 0.5,
                 project: Optional[Callable[[int], int]] = None):
        cfg.check_alphabet(m)
        self.cfg = cfg
        self.state = CodecState(m, depth, gamma)
        self.project = project

    def encode(self, symbol: int, low_res_symbol: Optional[int] = None) -> str:
        return encode_symbol(self.state, self.cfg, symbol, low_res_symbol, self.project)

    def decode(self, reader: BitReader) -> Decoded:
        return decode_symbol(self.state, self.cfg, reader, self.project)


def reproject(low_res_symbol: int, low_cfg: ScalarQuantizer, high_cfg: ScalarQuantizer) -> int:
    """Reconstruct on the low-res grid, then re-quantize on the high-res grid."""
    return low_cfg.reproject(low_res_symbol, high_cfg)


def ctw_ideal_code_length(symbols, m: int, depth: int = 2, gamma: float = 0.5,
                          prefix=()) -> int:
    """ceil(-log2 Q(symbols | prefix)) + 1 bits under CTW.

    ``prefix`` symbols are counted first and not charged, which gives the
    cost of the remainder after a training segment.
    """
    symbols = list(symbols)
    if not symbols:
        raise ValueError("sequence must be non-empty")
    tree = ContextTree(m, depth, gamma)
    tree.extend(prefix)
    before = tree.ctw_log_prob()
    tree.extend(symbols)
    # slack keeps exact powers of two from rounding up a whole bit
    return math.ceil(-(tree.ctw_log_prob() - before) - 1e-9) + 1
