import numpy as np
import pytest
from scipy.special import j0

from ctq.channel_sim import PRESETS, FadingConfig, add_noise, exponential_correlation, generate

N = 100_000


def autocorr(g, lags):
    p = np.mean(np.abs(g) ** 2, axis=0)
    return np.array([np.mean(g[l:] * g[: len(g) - l].conj(), axis=0).real / p for l in lags])


def test_static_channel_is_constant():
    g = generate(FadingConfig(n_t=3, n_frames=50, doppler_hz=0.0, seed=2))
    assert np.all(g == g[0])


@pytest.mark.parametrize("doppler", [5.0, 30.0, 70.0])
def test_unit_power(doppler):
    g = generate(FadingConfig(n_t=4, n_frames=N, doppler_hz=doppler, correlation=0.9, seed=3))
    p = np.mean(np.abs(g) ** 2, axis=0)
    assert np.all((p >= 0.98) & (p <= 1.02))


def test_autocorrelation_follows_bessel():
    g = generate(FadingConfig(n_t=4, n_frames=N, doppler_hz=5.0, seed=4))
    lags = np.arange(51)
    ref = j0(2 * np.pi * 5.0 * lags * 1e-3)
    assert np.max(np.abs(autocorr(g, lags) - ref[:, None])) <= 0.05


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_uncorrelated_antennas(seed):
    g = generate(FadingConfig(n_t=4, n_frames=N, doppler_hz=30.0, correlation=0.0, seed=seed))
    c = g.conj().T @ g / N
    r = np.abs(c) / np.sqrt(np.outer(np.diag(c).real, np.diag(c).real))
    np.fill_diagonal(r, 0)
    assert r.max() <= 0.02


def test_spatial_correlation_imposed():
    g = generate(FadingConfig(n_t=3, n_frames=N, doppler_hz=70.0, correlation=0.9, seed=5))
    c = g.T @ g.conj() / N
    assert np.allclose(np.abs(c), exponential_correlation(3, 0.9), atol=0.03)


def test_full_matrix_accepted():
    R = np.array([[1, 0.5j], [-0.5j, 1]])
    g = generate(FadingConfig(n_t=2, n_frames=N, doppler_hz=70.0, correlation=R, seed=6))
    assert np.allclose(g.T @ g.conj() / N, R, atol=0.03)


def test_lag_one_ordering():
    r = [autocorr(generate(FadingConfig(n_t=2, n_frames=20_000, doppler_hz=f, seed=7)), [1])[0].mean()
         for f in (5.0, 30.0, 70.0)]
    assert r[0] > r[1] > r[2]
    lag1 = j0(2 * np.pi * np.array([5.0, 30.0, 70.0]) * 1e-3)
    assert np.allclose(r, lag1, atol=0.01)


def test_deterministic():
    cfg = FadingConfig(n_t=4, n_frames=1000, doppler_hz=30.0, correlation=0.3, seed=11)
    assert np.array_equal(generate(cfg), generate(cfg))
    other = FadingConfig(n_t=4, n_frames=1000, doppler_hz=30.0, correlation=0.3, seed=12)
    assert not np.array_equal(generate(cfg), generate(other))


def test_presets():
    assert PRESETS["eva70-high"] == (70.0, 0.9)
    assert PRESETS["epa5-low"] == (5.0, 0.3)


def test_config_validation():
    for bad in [dict(doppler_hz=-1), dict(correlation=1.0), dict(n_sinusoids=4),
                dict(n_t=2, correlation=np.eye(3)), dict(n_t=2, correlation=[[1, 2], [2, 1]]),
                dict(n_frames=0), dict(sample_period_s=0)]:
        with pytest.raises(ValueError):
            FadingConfig(**bad)


def test_noise():
    g = generate(FadingConfig(n_t=1, n_frames=N, doppler_hz=30.0, seed=8))
    assert np.array_equal(add_noise(g, np.inf), g)
    noisy = add_noise(g, 0.0, seed=9)
    noise_power = np.mean(np.abs(noisy - g) ** 2) / np.mean(np.abs(g) ** 2)
    assert noise_power == pytest.approx(1.0, rel=0.02)
    assert np.array_equal(noisy, add_noise(g, 0.0, seed=9))
    with pytest.raises(ValueError):
        add_noise(g, np.nan)
