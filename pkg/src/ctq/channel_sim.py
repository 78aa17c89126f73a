"""
Flat, time- and space-correlated Rayleigh fading for desk-scale experiments.

Each antenna carries a Clarke sum-of-sinusoids gain

    g(t) = N^{-1/2} sum_n exp(j (2 pi f_D cos(a_n) t + phi_n))

with arrival angles spread evenly over (0, pi) and a random per-antenna
offset, plus uniform random phases.  Angles in (0, pi) already cover every
Doppler shift in [-f_D, f_D]; keeping them distinct gives each antenna a
set of distinct Doppler lines, so time averages of power and
autocorrelation settle to their ensemble values (unit power,
J0(2 pi f_D tau)) over a long record.  Spatial correlation is imposed by
the Hermitian square root of the correlation matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["FadingConfig", "exponential_correlation", "PRESETS", "generate", "add_noise"]

HIGH_CORRELATION = 0.9
LOW_CORRELATION = 0.3

# (doppler_hz, rho): stand-ins for the EPA5 / EVA30 / EVA70 scenarios
PRESETS = {
    "epa5-high": (5.0, HIGH_CORRELATION),
    "epa5-low": (5.0, LOW_CORRELATION),
    "eva30-high": (30.0, HIGH_CORRELATION),
    "eva30-low": (30.0, LOW_CORRELATION),
    "eva70-high": (70.0, HIGH_CORRELATION),
    "eva70-low": (70.0, LOW_CORRELATION),
}


def exponential_correlation(n_t: int, rho: float) -> np.ndarray:
    """R[i, j] = rho ** |i - j|."""
    idx = np.arange(n_t)
    return rho ** np.abs(idx[:, None] - idx[None, :]).astype(float)


@dataclass(frozen=True)
class FadingConfig:
    n_t: int = 4
    n_frames: int = 10_000
    doppler_hz: float = 5.0
    sample_period_s: float = 1e-3
    correlation: object = 0.0      # rho in [0, 1) or an (n_t, n_t) matrix
    n_sinusoids: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.n_t < 1 or self.n_frames < 1:
            raise ValueError("n_t and n_frames must be positive")
        if not (self.doppler_hz >= 0 and np.isfinite(self.doppler_hz)):
            raise ValueError("doppler_hz must be finite and non-negative")
        if not self.sample_period_s > 0:
            raise ValueError("sample_period_s must be positive")
        if self.n_sinusoids < 8:
            raise ValueError("use at least 8 sinusoids")
        self.correlation_matrix()

    def correlation_matrix(self) -> np.ndarray:
        c = self.correlation
        if np.isscalar(c):
            if not 0.0 <= float(c) < 1.0:
                raise ValueError("scalar correlation must lie in [0, 1)")
            return exponential_correlation(self.n_t, float(c))
        R = np.asarray(c, dtype=complex)
        if R.shape != (self.n_t, self.n_t):
            raise ValueError("correlation matrix must be n_t x n_t")
        if not np.allclose(R, R.conj().T, atol=1e-12):
            raise ValueError("correlation matrix must be Hermitian")
        if np.linalg.eigvalsh(R).min() < -1e-10:
            raise ValueError("correlation matrix must be positive semidefinite")
        return R


def _psd_sqrt(R: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(R)
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.conj().T


def generate(cfg: FadingConfig) -> np.ndarray:
    """Fading sequence of shape ``(n_frames, n_t)``, deterministic in ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    N = cfg.n_sinusoids
    t = np.arange(cfg.n_frames) * cfg.sample_period_s
    offsets = (np.arange(cfg.n_t) + rng.random()) / cfg.n_t
    g = np.empty((cfg.n_frames, cfg.n_t), dtype=complex)
    for i in range(cfg.n_t):
        # interleaved angle grids keep Doppler lines distinct across antennas
        angles = np.pi * (np.arange(N) + offsets[i]) / N
        phases = rng.uniform(0.0, 2.0 * np.pi, N)
        w = 2.0 * np.pi * cfg.doppler_hz * np.cos(angles)
        g[:, i] = np.exp(1j * (np.outer(t, w) + phases)).sum(axis=1) / np.sqrt(N)
    R = cfg.correlation_matrix()
    if np.allclose(R, np.eye(cfg.n_t)):
        return g
    return g @ _psd_sqrt(R).T


def add_noise(frames, snr_db: float, seed: int = 0) -> np.ndarray:
    """Add circular complex Gaussian noise at ``snr_db`` relative to the mean signal power.

    ``snr_db = inf`` returns the frames unchanged.
    """
    x = np.asarray(frames, dtype=complex)
    if np.isposinf(snr_db):
        return x.copy()
    if not np.isfinite(snr_db):
        raise ValueError("snr_db must be finite or +inf")
    rng = np.random.default_rng(seed)
    power = float(np.mean(np.abs(x) ** 2))
    var = power / 10.0 ** (snr_db / 10.0)
    noise = rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape)
    return x + np.sqrt(var / 2.0) * noise
