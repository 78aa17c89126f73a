import math

import numpy as np
import pytest

from ctq import pipeline as pl
from ctq.compander import BetaLaw, Identity
from ctq.multistream import CT_INDICATOR, INDIVIDUAL, SIMPLE_JOINT, JointConfig
from ctq.quantizer import QuantizerConfig, quantize_frames

SMALL = pl.EvalConfig(n_t=3, n_frames=1500, doppler_hz=30.0, seed=2, level_budgets=(16, 64))


@pytest.fixture(scope="module")
def small_rows():
    return pl.evaluate(SMALL)


def test_component_samples_exclude_strongest():
    x = np.array([[2.0, 1j, -0.5], [0.1, 0.2, 0.4j]])
    amp, phase = pl.component_samples(x)
    assert np.allclose(np.sort(amp), [0.25, 0.25, 0.5, 0.5])
    assert np.all((phase >= 0) & (phase <= 1))


def test_design_quantizer_families():
    x = pl.simulate(SMALL)[0]
    assert pl.design_quantizer(x, 4, 16).amp_compander == Identity()
    q = pl.design_quantizer(x, 4, 16, "beta")
    assert isinstance(q.amp_compander, BetaLaw) and isinstance(q.ang_compander, BetaLaw)


@pytest.mark.parametrize("strategy", [INDIVIDUAL, SIMPLE_JOINT, CT_INDICATOR])
def test_code_decode_sequence(strategy):
    x = pl.simulate(SMALL)[0]
    qcfg = QuantizerConfig(3, 4, 16)
    jcfg = JointConfig(strategy=strategy, n_t=3, m_L_abs=5, m_L_ang=17)
    run = pl.code_sequence(qcfg, jcfg, x, n_train=300, verify=True)
    _, amp, ang = quantize_frames(qcfg, x)
    # low-res grid equal to the high-res one: coding is lossless
    assert np.array_equal(run.amp, amp[300:]) and np.array_equal(run.ang, ang[300:])
    with pytest.raises(ValueError):
        pl.code_sequence(qcfg, jcfg, x, n_train=len(x))


def test_evaluate_rows(small_rows):
    names = [r.strategy for r in small_rows]
    assert names == ["uncompressed", "ctm_individual", "ctm_simple_joint",
                     "ctm_ct_indicator", "ctw_ideal"] * 2
    assert [(r.M_abs, r.M_ang) for r in small_rows[::5]] == [(2, 8), (4, 16)]
    for r in small_rows:
        assert 0 <= r.mscd <= 1 and r.bits_per_antenna > 0
        assert len(r.csv_values()) == len(pl.Row.CSV_FIELDS)
    by = {(r.strategy, r.M_abs): r for r in small_rows}
    for M in (2, 4):
        unc = by[("uncompressed", M)]
        assert unc.bits_per_antenna == math.log2(unc.M_abs * unc.M_ang)
        for s in ("ctm_simple_joint", "ctm_ct_indicator", "ctw_ideal"):
            assert by[(s, M)].bits_per_antenna < unc.bits_per_antenna


def test_evaluate_is_deterministic(small_rows):
    cfg = pl.EvalConfig(**{**SMALL.__dict__, "level_budgets": (16,)})
    a, b = pl.evaluate(cfg), pl.evaluate(cfg)
    assert [r.csv_values() for r in a] == [r.csv_values() for r in b]
    assert [r.csv_values() for r in a] == [r.csv_values() for r in small_rows[:5]]


def test_ctw_rate_matches_direct_length():
    x = pl.simulate(SMALL)[0]
    qcfg = QuantizerConfig(3, 2, 8)
    from ctq.codec import ctw_ideal_code_length
    _, amp, ang = quantize_frames(qcfg, x)
    total = sum(ctw_ideal_code_length(s[300:, i], m, 2, 0.5, prefix=s[:300, i])
                for s, m in ((amp, 3), (ang, 9)) for i in range(3))
    assert pl.ctw_rate(qcfg, x, 300) == pytest.approx(total / (1200 * 3))


def _row(name, rate, d):
    return pl.Row(name, 2, 8, rate, d, 5.0, 0.9)


def test_pareto_envelope():
    rows = [_row("a", 1, 0.5), _row("a", 2, 0.6), _row("a", 3, 0.1), _row("a", 2, 0.2),
            _row("b", 1, 0.9)]
    env = pl.pareto_envelope(rows)
    assert [(r.strategy, r.bits_per_antenna, r.mscd) for r in env] == [
        ("a", 1, 0.5), ("a", 2, 0.2), ("a", 3, 0.1), ("b", 1, 0.9)]


def test_rate_at_mscd_interpolates_in_log_distortion():
    rows = [_row("u", 4, 1e-2), _row("u", 6, 1e-4)]
    assert pl.rate_at_mscd(rows, 1e-3) == pytest.approx(5.0)
    assert pl.rate_at_mscd(rows, 1e-2) == pytest.approx(4.0)
    assert pl.rate_at_mscd(rows, 1e-1) is None
    assert pl.rate_at_mscd(rows, 1e-5) is None
    out = pl.equal_mscd_savings([_row("c", 1, 1e-3), _row("c", 0.5, 0.5)], rows)
    assert out == [(1e-3, 1, pytest.approx(5.0), pytest.approx(0.8))]


def test_eval_config_validation():
    with pytest.raises(ValueError):
        pl.EvalConfig(training_fraction=1.0)
    with pytest.raises(ValueError):
        pl.EvalConfig(strategies=("zip",))
    with pytest.raises(ValueError):
        pl.EvalConfig(level_budgets=())
