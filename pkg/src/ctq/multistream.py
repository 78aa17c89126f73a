"""
Joint coding of the 2*N_t amplitude/phase symbol streams of a CSI sequence.

Every stream keeps its own context tree.  Per timestep each stream's symbol
gets a flag from its current prediction: 0 (top-ranked), 1 (within the next
2^q) or 2 (anything else).  Three strategies turn the flags into bits:

individual
    Each stream is coded on its own with the three-level codec, amplitude
    streams 1..N_t first, then phase streams 1..N_t.

simple_joint
    One bit ``0`` when every stream is top-ranked.  Otherwise ``1`` and an
    N_t-bit mark vector (component 0 is the most significant bit), then the
    *change* part: for every marked component, amplitude then phase, either
    ``0`` + q bits of the rank within the top 2^q list, or ``1`` + the
    low-resolution index.

ct_indicator
    The mark vector, read as an integer, is coded by its own context-tree
    codec (no fallback), followed by the same change part.

Unmarked components decode to each stream's top-ranked symbol.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .codec import REPROJECT, BitReader, BitWriter, CodecConfig, StreamCoder, _width
from .errors import DesyncDetected, MalformedFrame, MissingFallback
from .quantizer import QuantizedFrame, QuantizerConfig, _check_special

__all__ = [
    "INDIVIDUAL", "SIMPLE_JOINT", "CT_INDICATOR", "STRATEGY_TAGS",
    "JointConfig", "RateReport", "StreamBundle", "classify",
    "encode_timestep", "decode_timestep", "rate_report",
]

INDIVIDUAL = "individual"
SIMPLE_JOINT = "simple_joint"
CT_INDICATOR = "ct_indicator"
STRATEGY_TAGS = {INDIVIDUAL: 0, SIMPLE_JOINT: 1, CT_INDICATOR: 2}


def classify(dist, symbol: int, q: int) -> int:
    """Flag of ``symbol`` under ``dist``: 0 top, 1 within the next 2^q, else 2."""
    dist = np.asarray(dist, dtype=float)
    p = dist[symbol]
    rank = int(np.sum(dist > p) + np.sum(dist[:symbol] == p))
    return _flag(rank, q)


def _flag(rank: int, q: int) -> int:
    if rank == 0:
        return 0
    return 1 if rank <= (1 << q) else 2


@dataclass(frozen=True)
class JointConfig:
    strategy: str = CT_INDICATOR
    n_t: int = 4
    q_abs: int = 1
    q_ang: int = 2
    m_L_abs: int = 3
    m_L_ang: int = 5
    depth: int = 2
    gamma: float = 0.5
    update_interval: int = 100
    fallback_update: str = REPROJECT
    decay: tuple | None = None

    def __post_init__(self):
        if self.strategy not in STRATEGY_TAGS:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if not 1 <= self.n_t <= 30:
            raise ValueError("n_t must lie in 1..30")
        if self.m_L_abs < 3 or self.m_L_ang < 3:
            raise ValueError("low-resolution alphabets need at least 3 symbols (2 levels)")

    def stream_config(self, kind: str) -> CodecConfig:
        q, m_L = (self.q_abs, self.m_L_abs) if kind == "amp" else (self.q_ang, self.m_L_ang)
        return CodecConfig(q1=0, q2=q, m3=m_L, update_interval=self.update_interval,
                           decay=self.decay, fallback_update=self.fallback_update)

    def indicator_config(self) -> CodecConfig:
        return CodecConfig(q1=0, q2=self.n_t, m3=2, update_interval=self.update_interval,
                           decay=self.decay, fallback=False)


@dataclass
class RateReport:
    n_t: int
    timesteps: int = 0
    indicator_bits: int = 0
    change_bits: int = 0
    individual_bits: int = 0
    fallbacks: int = 0
    per_timestep: list = field(default_factory=list)

    @property
    def total_bits(self) -> int:
        return self.indicator_bits + self.change_bits + self.individual_bits

    @property
    def bits_per_timestep(self) -> float:
        return self.total_bits / self.timesteps

    @property
    def bits_per_antenna(self) -> float:
        return self.total_bits / (self.timesteps * self.n_t)


class StreamBundle:
    """All per-stream coders of one receiver plus the optional indicator coder.

    Encoder and decoder each build their own bundle from the same configs;
    their states stay identical as long as they process the same bits.
    """

    def __init__(self, qcfg: QuantizerConfig, jcfg: JointConfig):
        if qcfg.n_t != jcfg.n_t:
            raise ValueError("quantizer and joint configs disagree on n_t")
        self.qcfg = qcfg
        self.jcfg = jcfg
        self.low_qcfg = QuantizerConfig(qcfg.n_t, jcfg.m_L_abs - 1, jcfg.m_L_ang - 1,
                                        qcfg.amp_compander, qcfg.ang_compander)
        amp_cfg, ang_cfg = jcfg.stream_config("amp"), jcfg.stream_config("ang")
        amp_lo, amp_hi = self.low_qcfg.amp, qcfg.amp
        ang_lo, ang_hi = self.low_qcfg.ang, qcfg.ang
        self.amp = [StreamCoder(qcfg.m_abs, amp_cfg, jcfg.depth, jcfg.gamma,
                                lambda k: amp_lo.reproject(k, amp_hi))
                    for _ in range(qcfg.n_t)]
        self.ang = [StreamCoder(qcfg.m_ang, ang_cfg, jcfg.depth, jcfg.gamma,
                                lambda k: ang_lo.reproject(k, ang_hi))
                    for _ in range(qcfg.n_t)]
        self.indicator = None
        if jcfg.strategy == CT_INDICATOR:
            self.indicator = StreamCoder(1 << jcfg.n_t, jcfg.indicator_config(),
                                         jcfg.depth, jcfg.gamma)
        self.report = RateReport(qcfg.n_t)
        self.last_encoded = None
        self._change_width = {
            "amp": (jcfg.q_abs, _width(jcfg.m_L_abs)),
            "ang": (jcfg.q_ang, _width(jcfg.m_L_ang)),
        }

    @property
    def n_t(self) -> int:
        return self.qcfg.n_t

    def coders(self):
        return self.amp + self.ang

    def snapshot(self) -> str:
        parts = [c.state.snapshot() for c in self.coders()]
        if self.indicator is not None:
            parts.append(self.indicator.state.snapshot())
        return "\n--\n".join(parts)

    # -- helpers -------------------------------------------------------------

    def _check(self, qf: QuantizedFrame):
        if len(qf.amp_symbols) != self.n_t or len(qf.ang_symbols) != self.n_t:
            raise ValueError("frame dimensions do not match the bundle")

    def _ranks(self, qf: QuantizedFrame):
        amp = [c.state.rank_of(s) for c, s in zip(self.amp, qf.amp_symbols)]
        ang = [c.state.rank_of(s) for c, s in zip(self.ang, qf.ang_symbols)]
        return amp, ang

    def _mark(self, amp_ranks, ang_ranks) -> int:
        mark = 0
        for i in range(self.n_t):
            if amp_ranks[i] > 0 or ang_ranks[i] > 0:
                mark |= 1 << (self.n_t - 1 - i)
        return mark

    def _advance_indicator(self, mark: int):
        if self.indicator is not None:
            self.indicator.state.advance(self.indicator.cfg, mark)

    # -- training ------------------------------------------------------------

    def train_timestep(self, qf: QuantizedFrame):
        """Count one frame on every tree without emitting bits."""
        self._check(qf)
        amp_r, ang_r = self._ranks(qf)
        mark = self._mark(amp_r, ang_r)
        for c, s in zip(self.amp, qf.amp_symbols):
            c.state.advance(c.cfg, s)
        for c, s in zip(self.ang, qf.ang_symbols):
            c.state.advance(c.cfg, s)
        self._advance_indicator(mark)

    def finish_training(self):
        """Prune every tree now so coding starts from the trained MAP models."""
        for c in self.coders() + ([self.indicator] if self.indicator else []):
            c.state.model = c.state.tree.ctm_prune()
            c.state.symbols_since_prune = 0

    # -- encoding ------------------------------------------------------------

    def encode_timestep(self, qf: QuantizedFrame, low: QuantizedFrame | None = None) -> str:
        """Bits for one quantized frame; ``low`` is the low-res frame for fallbacks."""
        self._check(qf)
        w = BitWriter()
        report = self.report
        rec = {"amp": list(qf.amp_symbols), "ang": list(qf.ang_symbols)}
        if self.jcfg.strategy == INDIVIDUAL:
            for kind, coders, syms in (("amp", self.amp, qf.amp_symbols), ("ang", self.ang, qf.ang_symbols)):
                for i, (c, s) in enumerate(zip(coders, syms)):
                    lo = None if low is None else getattr(low, f"{kind}_symbols")[i]
                    fell_back = c.state.rank_of(s) >= c.cfg.m1 + c.cfg.m2
                    w.write_bits(c.encode(s, lo))
                    if fell_back:
                        report.fallbacks += 1
                        rec[kind][i] = c.project(lo)
            report.individual_bits += w.nbits
        else:
            amp_r, ang_r = self._ranks(qf)
            mark = self._mark(amp_r, ang_r)
            if self.indicator is None:
                if mark == 0:
                    w.write(0, 1)
                else:
                    w.write(1, 1)
                    w.write(mark, self.n_t)
            else:
                w.write_bits(self.indicator.encode(mark))
            report.indicator_bits += w.nbits
            n_ind = w.nbits
            for i in range(self.n_t):
                marked = (mark >> (self.n_t - 1 - i)) & 1
                for kind, coder, sym, rank in (("amp", self.amp[i], qf.amp_symbols[i], amp_r[i]),
                                               ("ang", self.ang[i], qf.ang_symbols[i], ang_r[i])):
                    if not marked:
                        coder.state.advance(coder.cfg, sym)
                        continue
                    q, lb = self._change_width[kind]
                    if rank < (1 << q):
                        w.write(0, 1)
                        w.write(rank, q)
                        coder.state.advance(coder.cfg, sym)
                    else:
                        lo = None if low is None else getattr(low, f"{kind}_symbols")[i]
                        if lo is None:
                            raise MissingFallback(f"component {i} {kind} needs a low-resolution index")
                        w.write(1, 1)
                        w.write(lo, lb)
                        rec[kind][i] = coder.project(lo)
                        coder.state.advance(coder.cfg, rec[kind][i],
                                            count=coder.cfg.fallback_update == REPROJECT)
                        report.fallbacks += 1
            report.change_bits += w.nbits - n_ind
        report.timesteps += 1
        report.per_timestep.append(w.nbits)
        # what the decoder will output for this timestep
        self.last_encoded = QuantizedFrame(qf.strongest, rec["amp"], rec["ang"])
        return w.getvalue()

    # -- decoding ------------------------------------------------------------

    def decode_timestep(self, reader: BitReader):
        """Inverse of encode_timestep.

        Returns ``(frame, fallback)`` where ``fallback`` lists the
        ``(kind, component)`` pairs that arrived as low-res indices; their
        symbols in ``frame`` are the re-projected high-res indices.
        """
        start = reader.pos
        amp = [0] * self.n_t
        ang = [0] * self.n_t
        fallback = []
        report = self.report
        if self.jcfg.strategy == INDIVIDUAL:
            for kind, coders, out in (("amp", self.amp, amp), ("ang", self.ang, ang)):
                for i, c in enumerate(coders):
                    d = c.decode(reader)
                    out[i] = d.symbol
                    if d.low_res is not None:
                        fallback.append((kind, i))
            report.individual_bits += reader.pos - start
        else:
            if self.indicator is None:
                mark = reader.read(self.n_t) if reader.read(1) else 0
                if reader.pos - start > 1 and mark == 0:
                    raise DesyncDetected("non-zero indicator flag followed by an empty mark")
            else:
                mark = self.indicator.decode(reader).symbol
            report.indicator_bits += reader.pos - start
            n_ind = reader.pos
            for i in range(self.n_t):
                marked = (mark >> (self.n_t - 1 - i)) & 1
                for kind, coder, out in (("amp", self.amp[i], amp), ("ang", self.ang[i], ang)):
                    state = coder.state
                    if not marked:
                        sym = state.symbol_at(0)
                        state.advance(coder.cfg, sym)
                    else:
                        q, lb = self._change_width[kind]
                        if reader.read(1) == 0:
                            sym = state.symbol_at(reader.read(q))
                            state.advance(coder.cfg, sym)
                        else:
                            lo = reader.read(lb)
                            sym = coder.project(lo)
                            state.advance(coder.cfg, sym,
                                          count=coder.cfg.fallback_update == REPROJECT)
                            fallback.append((kind, i))
                    out[i] = sym
            report.change_bits += reader.pos - n_ind
        report.fallbacks += len(fallback)
        report.timesteps += 1
        report.per_timestep.append(reader.pos - start)
        try:
            strongest = _check_special(self.qcfg, amp, ang)
        except MalformedFrame as exc:
            raise DesyncDetected(f"decoded frame is inconsistent: {exc}") from None
        return QuantizedFrame(strongest, amp, ang), fallback


def encode_timestep(bundle: StreamBundle, frame: QuantizedFrame, low: QuantizedFrame | None = None) -> str:
    return bundle.encode_timestep(frame, low)


def decode_timestep(bundle: StreamBundle, reader: BitReader):
    return bundle.decode_timestep(reader)


def rate_report(bundle: StreamBundle) -> RateReport:
    if bundle.report.timesteps == 0:
        raise ValueError("no timestep has been coded yet")
    return bundle.report
