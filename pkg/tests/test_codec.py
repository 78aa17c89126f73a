import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ctq import codec as cd
from ctq.errors import DesyncDetected, MissingFallback, TruncatedStream
from ctq.quantizer import ScalarQuantizer


def fallback_pair(M_high, m3):
    """Encoder-side low-res index and the shared projection for a scalar stream."""
    high, low = ScalarQuantizer(M_high), ScalarQuantizer(m3 - 1)

    def low_index(s):
        return low.special if s == high.special else low.quantize(high.reconstruct(s))

    return low_index, (lambda j: low.reproject(j, high))


def markov(n, m, stay, seed):
    rng = np.random.default_rng(seed)
    out = [0]
    for _ in range(n - 1):
        out.append(out[-1] if rng.random() < stay else int(rng.integers(m)))
    return out


def run(symbols, m, cfg, depth=2, gamma=0.5, check_sync=False):
    low_index, project = fallback_pair(m - 1, cfg.m3) if cfg.fallback else (None, None)
    enc = cd.StreamCoder(m, cfg, depth, gamma, project)
    dec = cd.StreamCoder(m, cfg, depth, gamma, project)
    w = cd.BitWriter()
    words = []
    out = []
    for s in symbols:
        word = enc.encode(s, low_index(s) if low_index else None)
        words.append(word)
        w.write_bits(word)
        if check_sync:
            got = dec.decode(cd.BitReader(word))
            assert got.consumed == len(word)
            out.append(got)
            assert enc.state.snapshot() == dec.state.snapshot()
    if not check_sync:
        r = cd.BitReader(w.getvalue())
        out = [dec.decode(r) for _ in symbols]
        assert r.remaining == 0
    return words, out, enc, dec


# -- ranking -----------------------------------------------------------------------

def test_rank_symbols_examples():
    assert cd.rank_symbols([0.25] * 4) == [0, 1, 2, 3]
    assert cd.rank_symbols([0.1, 0.7, 0.2]) == [1, 2, 0]
    assert cd.rank_symbols([3 / 7, 1 / 7, 3 / 7]) == [0, 2, 1]


@given(st.lists(st.integers(0, 5), max_size=80), st.integers(0, 2))
def test_count_ranking_matches_distribution(seq, depth):
    state = cd.CodecState(6, depth)
    state.train(seq)
    order = cd.rank_symbols(state.distribution())
    for r, s in enumerate(order):
        assert state.rank_of(s) == r
        assert state.symbol_at(r) == s


# -- codeword examples -------------------------------------------------------------

def test_top_rank_is_one_bit():
    state = cd.CodecState(4, 2)
    assert cd.encode_symbol(state, cd.CodecConfig(q1=0, q2=1), 0) == "0"


def test_second_list_codeword():
    state = cd.CodecState(9, 2)
    assert cd.encode_symbol(state, cd.CodecConfig(q1=0, q2=3), 5) == "10100"


def test_fallback_codeword():
    cfg = cd.CodecConfig(q1=0, q2=1, m3=4)
    state = cd.CodecState(8, 2)
    word = cd.encode_symbol(state, cfg, 7, low_res_symbol=2, project=lambda j: 6)
    assert word == "1110"
    assert len(word) == 2 + math.ceil(math.log2(4))


def test_missing_fallback():
    state = cd.CodecState(8, 2)
    with pytest.raises(MissingFallback):
        cd.encode_symbol(state, cd.CodecConfig(q1=0, q2=1, m3=4), 7)


def test_codeword_lengths():
    assert cd.codeword_lengths(cd.CodecConfig(q1=1, q2=2, m3=5)) == (2, 4, 5)
    assert cd.codeword_lengths(cd.CodecConfig(q1=0, q2=3, fallback=False)) == (1, 4)


def test_config_validation():
    with pytest.raises(ValueError):
        cd.CodecConfig(q2=0)
    with pytest.raises(ValueError):
        cd.CodecConfig(m3=1)
    with pytest.raises(ValueError):
        cd.CodecConfig(fallback_update="drop")
    with pytest.raises(ValueError):
        cd.StreamCoder(4, cd.CodecConfig(q1=1, q2=2))
    with pytest.raises(ValueError):
        cd.StreamCoder(8, cd.CodecConfig(q1=0, q2=2, fallback=False))


# -- round trips and synchronization -------------------------------------------------

@pytest.mark.parametrize("fallback", [True, False])
def test_lossless_regime_round_trip(fallback):
    m = 5
    cfg = cd.CodecConfig(q1=0, q2=2, m3=3, fallback=fallback)
    seq = list(np.random.default_rng(0).integers(0, m, 10_000))
    words, out, _, _ = run(seq, m, cfg)
    assert [d.symbol for d in out] == seq
    assert all(d.low_res is None for d in out)
    assert {len(w) for w in words} <= set(cd.codeword_lengths(cfg))


@pytest.mark.parametrize("policy", [cd.REPROJECT, cd.SKIP])
@pytest.mark.parametrize("decay", [None, (0.5, 37)])
def test_sync_with_fallback(policy, decay):
    m = 9
    cfg = cd.CodecConfig(q1=0, q2=1, m3=4, update_interval=17, decay=decay, fallback_update=policy)
    seq = markov(1000, m, 0.6, 1)
    words, out, enc, dec = run(seq, m, cfg, check_sync=True)
    low_index, project = fallback_pair(m - 1, 4)
    assert any(d.low_res is not None for d in out)
    for s, d, w in zip(seq, out, words):
        if d.low_res is None:
            assert d.symbol == s
        else:
            assert d.low_res == low_index(s) and d.symbol == project(d.low_res)
        assert len(w) in cd.codeword_lengths(cfg)


@given(st.lists(st.integers(0, 6), min_size=1, max_size=120), st.integers(0, 2),
       st.integers(0, 2), st.integers(1, 2), st.sampled_from([cd.REPROJECT, cd.SKIP]),
       st.integers(1, 20))
def test_sync_property(seq, depth, q1, q2, policy, interval):
    m = 7
    if (1 << q1) + (1 << q2) > m:
        q1 = 0
    cfg = cd.CodecConfig(q1=q1, q2=q2, m3=3, update_interval=interval, fallback_update=policy)
    words, out, enc, dec = run(seq, m, cfg, depth=depth)
    assert enc.state.snapshot() == dec.state.snapshot()
    for s, d in zip(seq, out):
        if d.low_res is None:
            assert d.symbol == s


def test_markov_source_compresses():
    m = 8
    cfg = cd.CodecConfig(q1=0, q2=2, m3=8)
    seq = markov(12_000, m, 0.95, 2)
    low_index, project = fallback_pair(m - 1, cfg.m3)
    coder = cd.StreamCoder(m, cfg, 2, 0.5, project)
    coder.state.train(seq[:2000])
    bits = sum(len(coder.encode(s, low_index(s))) for s in seq[2000:])
    assert bits / 10_000 < math.log2(m)
    assert bits / 10_000 < 1.5


def test_truncated_stream():
    m = 9
    cfg = cd.CodecConfig(q1=0, q2=3)
    enc = cd.StreamCoder(m, cfg)
    word = enc.encode(5)
    dec = cd.StreamCoder(m, cfg)
    with pytest.raises(TruncatedStream):
        dec.decode(cd.BitReader(word[:-1]))
    with pytest.raises(TruncatedStream):
        cd.BitReader.from_bytes(b"\x01", 9)


def test_out_of_alphabet_rank_is_desync():
    dec = cd.StreamCoder(3, cd.CodecConfig(q1=0, q2=2, fallback=False))
    with pytest.raises(DesyncDetected):
        dec.decode(cd.BitReader("111"))


@given(st.text(alphabet="01", max_size=70))
def test_bit_packing_round_trip(bits):
    w = cd.BitWriter()
    w.write_bits(bits)
    data = w.to_bytes()
    assert len(data) == math.ceil(len(bits) / 8)
    r = cd.BitReader.from_bytes(data, len(bits))
    assert r.bits == bits


# -- low-res projection and ideal length ---------------------------------------------

def test_reproject_examples():
    q4 = ScalarQuantizer(4)
    assert [cd.reproject(s, q4, q4) for s in range(5)] == [0, 1, 2, 3, 4]
    assert cd.reproject(0, ScalarQuantizer(2), q4) == 1
    assert cd.reproject(2, ScalarQuantizer(3), ScalarQuantizer(8)) == 6
    assert cd.reproject(3, ScalarQuantizer(3), ScalarQuantizer(8)) == 8


def test_ctw_ideal_examples():
    with pytest.raises(ValueError):
        cd.ctw_ideal_code_length([], 2, 0)
    assert cd.ctw_ideal_code_length([0, 1], 2, 0) == 4


@given(st.lists(st.integers(0, 3), min_size=1, max_size=50))
def test_ctw_ideal_bounds(seq):
    from ctq.context_tree import ContextTree
    t = ContextTree(4, 2)
    t.extend(seq)
    n = cd.ctw_ideal_code_length(seq, 4, 2)
    assert n >= 1
    assert -t.ctw_log_prob() + 1 - 1e-9 <= n < -t.ctw_log_prob() + 2
