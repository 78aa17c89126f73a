"""
End-to-end CSI compression runs and the rate/distortion sweep behind the
``evaluate`` command.

A run quantizes a frame sequence, counts the first ``n_train`` frames into
every tree without emitting bits, then codes the rest.  Rates are bits per
antenna per timestep over the coded part, distortion is the MSCD between
the reference frames and what the decoder reconstructs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import compander
from .channel_sim import FadingConfig, add_noise, generate
from .codec import BitReader, ctw_ideal_code_length
from .errors import DesyncDetected
from .multistream import (CT_INDICATOR, INDIVIDUAL, SIMPLE_JOINT, JointConfig,
                          RateReport, StreamBundle)
from .quantizer import (E_ANG_UNIFORM, QuantizedFrame, QuantizerConfig,
                        dequantize_frames, mscd, quantize_frames, raw_rate, split_levels)

__all__ = [
    "component_samples", "design_quantizer", "CodedRun", "code_sequence",
    "decode_sequence", "ctw_rate", "EvalConfig", "Row", "evaluate",
    "pareto_envelope", "rate_at_mscd", "equal_mscd_savings", "STRATEGY_NAMES",
]

# CSV names of the coded strategies
STRATEGY_NAMES = {
    INDIVIDUAL: "ctm_individual",
    SIMPLE_JOINT: "ctm_simple_joint",
    CT_INDICATOR: "ctm_ct_indicator",
}
UNCOMPRESSED = "uncompressed"
CTW_IDEAL = "ctw_ideal"


def component_samples(frames):
    """Normalized amplitudes and phases (in [0, 1]) of the non-strongest components."""
    x = np.asarray(frames, dtype=complex)
    rows = np.arange(x.shape[0])
    strongest = np.argmax(np.abs(x), axis=1)
    xn = x / x[rows, strongest][:, None]
    keep = np.ones(x.shape, dtype=bool)
    keep[rows, strongest] = False
    v = xn[keep]
    amp = np.clip(np.abs(v), 0.0, 1.0)
    phase = np.mod(np.angle(v), 2.0 * np.pi) / (2.0 * np.pi)
    return amp, np.clip(phase, 0.0, 1.0)


def design_quantizer(frames, M_abs: int, M_ang: int, family: str = "identity",
                     fit_cfg: Optional[compander.FitConfig] = None) -> QuantizerConfig:
    """Quantizer whose companders are fitted to ``frames``."""
    x = np.asarray(frames, dtype=complex)
    if family == "identity":
        return QuantizerConfig(x.shape[1], M_abs, M_ang)
    amp, phase = component_samples(x)
    return QuantizerConfig(x.shape[1], M_abs, M_ang,
                           compander.design(amp, family, M_abs, fit_cfg),
                           compander.design(phase, family, M_ang, fit_cfg))


def _frames_of(strongest, amp, ang, start, stop):
    for t in range(start, stop):
        yield QuantizedFrame(int(strongest[t]), amp[t], ang[t])


class CodedRun(NamedTuple):
    bits: str
    report: RateReport
    amp: np.ndarray          # decoder-side symbols of the coded frames
    ang: np.ndarray
    n_train: int


def code_sequence(qcfg: QuantizerConfig, jcfg: JointConfig, frames, n_train: int = 0,
                  verify: bool = False) -> CodedRun:
    """Train on ``frames[:n_train]`` and code the rest.

    With ``verify`` an independent decoder replays the bits and must
    reproduce the encoder's view of every frame.
    """
    x = np.asarray(frames, dtype=complex)
    if not 0 <= n_train < x.shape[0]:
        raise ValueError("n_train must leave at least one frame to code")
    bundle = StreamBundle(qcfg, jcfg)
    strongest, amp, ang = quantize_frames(qcfg, x)
    _, low_amp, low_ang = quantize_frames(bundle.low_qcfg, x)
    for qf in _frames_of(strongest, amp, ang, 0, n_train):
        bundle.train_timestep(qf)
    bundle.finish_training()
    parts = []
    rec_amp = np.empty((x.shape[0] - n_train, qcfg.n_t), dtype=np.int64)
    rec_ang = np.empty_like(rec_amp)
    for k, t in enumerate(range(n_train, x.shape[0])):
        qf = QuantizedFrame(int(strongest[t]), amp[t], ang[t])
        low = QuantizedFrame(int(strongest[t]), low_amp[t], low_ang[t])
        parts.append(bundle.encode_timestep(qf, low))
        rec_amp[k] = bundle.last_encoded.amp_symbols
        rec_ang[k] = bundle.last_encoded.ang_symbols
    bits = "".join(parts)
    if verify:
        train = (strongest[:n_train], amp[:n_train], ang[:n_train])
        d_amp, d_ang = decode_sequence(qcfg, jcfg, bits, train=train)
        if not (np.array_equal(d_amp, rec_amp) and np.array_equal(d_ang, rec_ang)):
            raise DesyncDetected("decoder output differs from the encoder's view")
    return CodedRun(bits, bundle.report, rec_amp, rec_ang, n_train)


def decode_sequence(qcfg: QuantizerConfig, jcfg: JointConfig, bits: str, train=None,
                    n_frames: Optional[int] = None):
    """Decode timesteps until the bits (or ``n_frames`` timesteps) run out.

    ``train`` is the ``(strongest, amp, ang)`` training prefix the encoder
    counted, if any.  Returns the ``(amp, ang)`` symbol arrays.
    """
    bundle = StreamBundle(qcfg, jcfg)
    if train is not None:
        for qf in _frames_of(*train, 0, len(train[0])):
            bundle.train_timestep(qf)
    bundle.finish_training()
    reader = BitReader(bits)
    amp, ang = [], []
    while reader.remaining > 0 and (n_frames is None or len(amp) < n_frames):
        qf, _ = bundle.decode_timestep(reader)
        amp.append(qf.amp_symbols)
        ang.append(qf.ang_symbols)
    shape = (len(amp), qcfg.n_t)
    return (np.asarray(amp, dtype=np.int64).reshape(shape),
            np.asarray(ang, dtype=np.int64).reshape(shape))


def ctw_rate(qcfg: QuantizerConfig, frames, n_train: int, depth: int = 2,
             gamma: float = 0.5) -> float:
    """Ideal CTW bits per antenna, each stream coded alone after training."""
    _, amp, ang = quantize_frames(qcfg, frames)
    total = 0
    for sym, m in ((amp, qcfg.m_abs), (ang, qcfg.m_ang)):
        for i in range(qcfg.n_t):
            total += ctw_ideal_code_length(sym[n_train:, i].tolist(), m, depth, gamma,
                                           prefix=sym[:n_train, i].tolist())
    return total / ((sym.shape[0] - n_train) * qcfg.n_t)


# ---------------------------------------------------------------------------
# Sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EvalConfig:
    n_t: int = 4
    n_frames: int = 10_000
    doppler_hz: float = 5.0
    correlation: float = 0.9
    sample_period_s: float = 1e-3
    snr_db: float = math.inf
    seed: int = 0
    training_fraction: float = 0.2
    level_budgets: tuple = (16, 64, 256, 1024)
    strategies: tuple = (INDIVIDUAL, SIMPLE_JOINT, CT_INDICATOR)
    depth: int = 2
    gamma: float = 0.5
    update_interval: int = 100
    family: str = "beta"
    e_ang: float = E_ANG_UNIFORM
    ratio: float = 1.0
    # (q_abs, q_ang) pairs and low-res level divisors tried per codebook size
    q_options: tuple = ((1, 2), (2, 3))
    low_res_divisors: tuple = (1, 2)
    include_ctw: bool = True

    def __post_init__(self):
        if not 0.0 <= self.training_fraction < 1.0:
            raise ValueError("training_fraction must lie in [0, 1)")
        if not self.level_budgets:
            raise ValueError("need at least one codebook size")
        for s in self.strategies:
            if s not in STRATEGY_NAMES:
                raise ValueError(f"unknown strategy {s!r}")

    @property
    def n_train(self) -> int:
        return int(self.training_fraction * self.n_frames)


@dataclass
class Row:
    strategy: str
    M_abs: int
    M_ang: int
    bits_per_antenna: float
    mscd: float
    doppler_hz: float
    correlation: float
    params: dict = field(default_factory=dict, compare=False)

    CSV_FIELDS = ("strategy", "M_abs", "M_ang", "bits_per_antenna", "mscd",
                  "doppler_hz", "correlation")

    def csv_values(self) -> list:
        return [self.strategy, self.M_abs, self.M_ang, f"{self.bits_per_antenna:.6f}",
                f"{self.mscd:.8g}", f"{self.doppler_hz:g}", f"{self.correlation:g}"]


def _joint_options(cfg: EvalConfig, strategy: str, M_abs: int, M_ang: int):
    seen = set()
    for qa, qp in cfg.q_options:
        qa = min(qa, int(math.log2(M_abs)))
        qp = min(qp, int(math.log2(M_ang)))
        for div in cfg.low_res_divisors:
            mla = max(3, M_abs // div + 1)
            mlp = max(3, M_ang // div + 1)
            key = (qa, qp, mla, mlp)
            if key in seen:
                continue
            seen.add(key)
            yield JointConfig(strategy=strategy, n_t=cfg.n_t, q_abs=qa, q_ang=qp,
                              m_L_abs=mla, m_L_ang=mlp, depth=cfg.depth, gamma=cfg.gamma,
                              update_interval=cfg.update_interval)


def simulate(cfg: EvalConfig):
    """Return ``(reference, observed)`` frames for the configured scenario."""
    clean = generate(FadingConfig(n_t=cfg.n_t, n_frames=cfg.n_frames, doppler_hz=cfg.doppler_hz,
                                  sample_period_s=cfg.sample_period_s,
                                  correlation=cfg.correlation, seed=cfg.seed))
    return clean, add_noise(clean, cfg.snr_db, seed=cfg.seed + 1)


def evaluate(cfg: EvalConfig, reference=None, observed=None) -> list:
    """One row per (codebook size, strategy).

    For the coded strategies the (q, low-res) options of a cell are all
    run and the lowest-rate one is kept.  Distortion is measured on the
    coded part against ``reference`` (the noiseless channel when noise is
    simulated).
    """
    if reference is None:
        reference, observed = simulate(cfg)
    if observed is None:
        observed = reference
    observed = np.asarray(observed, dtype=complex)
    n_train = int(cfg.training_fraction * observed.shape[0])
    ref = np.asarray(reference, dtype=complex)[n_train:]
    rows = []
    for budget in cfg.level_budgets:
        M_abs, M_ang = split_levels(budget, cfg.e_ang, cfg.ratio)
        # companders are fitted on the training part (whole sequence on a cold start)
        qcfg = design_quantizer(observed[:n_train] if n_train else observed,
                                M_abs, M_ang, cfg.family)
        _, amp, ang = quantize_frames(qcfg, observed)
        base = mscd(ref, dequantize_frames(qcfg, amp[n_train:], ang[n_train:]))
        common = dict(M_abs=M_abs, M_ang=M_ang, doppler_hz=cfg.doppler_hz,
                      correlation=cfg.correlation)
        rows.append(Row(UNCOMPRESSED, bits_per_antenna=raw_rate(M_abs, M_ang), mscd=base,
                        params={"compander": (qcfg.amp_compander, qcfg.ang_compander)}, **common))
        for strategy in cfg.strategies:
            best = None
            for jcfg in _joint_options(cfg, strategy, M_abs, M_ang):
                run = code_sequence(qcfg, jcfg, observed, n_train)
                rate = run.report.bits_per_antenna
                if best is None or rate < best[0]:
                    best = (rate, run, jcfg)
            rate, run, jcfg = best
            d = mscd(ref, dequantize_frames(qcfg, run.amp, run.ang))
            rows.append(Row(STRATEGY_NAMES[strategy], bits_per_antenna=rate, mscd=d,
                            params={"q_abs": jcfg.q_abs, "q_ang": jcfg.q_ang,
                                    "m_L_abs": jcfg.m_L_abs, "m_L_ang": jcfg.m_L_ang,
                                    "fallbacks": run.report.fallbacks}, **common))
        if cfg.include_ctw:
            rows.append(Row(CTW_IDEAL, bits_per_antenna=ctw_rate(qcfg, observed, n_train,
                                                                 cfg.depth, cfg.gamma),
                            mscd=base, **common))
    return rows


def pareto_envelope(rows) -> list:
    """Per strategy, the rows not beaten on both rate and MSCD, by increasing rate."""
    out = []
    for name in dict.fromkeys(r.strategy for r in rows):
        best_d = math.inf
        for r in sorted((r for r in rows if r.strategy == name),
                        key=lambda r: (r.bits_per_antenna, r.mscd)):
            if r.mscd < best_d:
                out.append(r)
                best_d = r.mscd
    return out


def rate_at_mscd(rows, target: float) -> Optional[float]:
    """Rate of the envelope of ``rows`` at distortion ``target``.

    Linear in log-MSCD between envelope points; None outside their range.
    """
    env = sorted(((r.mscd, r.bits_per_antenna) for r in pareto_envelope(rows)), reverse=True)
    if not env or target <= 0:
        return None
    d = np.log([p[0] for p in env])
    rate = np.array([p[1] for p in env])
    lt = math.log(target)
    if lt > d[0] + 1e-12 or lt < d[-1] - 1e-12:
        return None
    return float(np.interp(-lt, -d, rate))


def equal_mscd_savings(candidate, reference) -> list:
    """``(mscd, rate, reference_rate, savings)`` at each candidate envelope point
    whose MSCD lies inside the reference envelope's range."""
    out = []
    for r in pareto_envelope(candidate):
        ref_rate = rate_at_mscd(reference, r.mscd)
        if ref_rate is not None:
            out.append((r.mscd, r.bits_per_antenna, ref_rate, 1.0 - r.bits_per_antenna / ref_rate))
    return out
