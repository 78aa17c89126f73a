"""
Parametric companders on [0, 1].

A compander is a monotone map ``g: [0,1] -> [0,1]`` with ``g(0)=0`` and
``g(1)=1``; it is equivalently a cdf, and ``g'`` the matching pdf.  Three
families are provided:

    Identity    g(x) = x
    MuLaw       g(x) = ln(1 + mu x) / ln(1 + mu)
    BetaLaw     g(x) = I_x(alpha, beta)   (regularized incomplete beta)

Parameters are fitted to training data by maximizing the sample mean of
``log g'(x_i)`` (natural log), then optionally nudged toward the identity
so that the uniform quantizer applied after companding balances its
per-interval distortion (``adjust``).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import betainc, betaincinv, digamma, gammaln, polygamma

from .errors import DegenerateSample, NonConvergence

__all__ = [
    "Identity", "MuLaw", "BetaLaw", "CompanderParams", "FitConfig",
    "compress_value", "expand_value", "log_density",
    "fit_objective", "fit", "adjust", "adjust_predicate", "design",
    "format_record", "parse_record",
]

DOMAIN_TOL = 1e-12
CLAMP_DELTA = 1e-9
ADJUST_STEP = 0.9
ADJUST_MAX_ITER = 200

_INVERSE_TOL = 1e-12


# ---------------------------------------------------------------------------
# Compander families
# ---------------------------------------------------------------------------

def _check_unit(x, name="x"):
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x < -DOMAIN_TOL) or np.any(x > 1.0 + DOMAIN_TOL):
        raise ValueError(f"{name} must lie in [0, 1]")
    return np.clip(x, 0.0, 1.0)


def _out(x, value):
    return float(value) if np.ndim(x) == 0 else value


@dataclass(frozen=True)
class Identity:
    """The identity compander g(x) = x."""

    family = "identity"

    def compress(self, x):
        return _out(x, _check_unit(x) * 1.0)

    def expand(self, y):
        return _out(y, _check_unit(y, "y") * 1.0)

    def log_density(self, x):
        x = _check_unit(x)
        return _out(x, np.zeros_like(x))

    def params(self):
        return ()


@dataclass(frozen=True)
class MuLaw:
    mu: float

    family = "mu"

    def __post_init__(self):
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise ValueError("mu must be a positive finite number")

    def compress(self, x):
        x = _check_unit(x)
        y = np.clip(np.log1p(self.mu * x) / math.log1p(self.mu), 0.0, 1.0)
        return _out(x, np.where(x >= 1.0, 1.0, y))

    def expand(self, y):
        y = _check_unit(y, "y")
        x = np.clip(np.expm1(y * math.log1p(self.mu)) / self.mu, 0.0, 1.0)
        return _out(y, np.where(y >= 1.0, 1.0, x))

    def log_density(self, x):
        x = _check_unit(x)
        value = math.log(self.mu) - np.log1p(self.mu * x) - math.log(math.log1p(self.mu))
        return _out(x, value)

    def params(self):
        return (self.mu,)


@dataclass(frozen=True)
class BetaLaw:
    alpha: float
    beta: float

    family = "beta"

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be a positive finite number")

    def compress(self, x):
        x = _check_unit(x)
        return _out(x, betainc(self.alpha, self.beta, x))

    def expand(self, y):
        """Inverse cdf.

        scipy's inverse is used where it lands within 1e-12 of ``y``; the
        rest are bisected over the ordered bit patterns of doubles
        (positive doubles sort like their int64 patterns), which pins the
        root to adjacent floats regardless of its magnitude.
        """
        y = _check_unit(y, "y")
        yv = np.array(y, dtype=float).reshape(-1)
        x = np.clip(betaincinv(self.alpha, self.beta, yv), 0.0, 1.0)
        bad = ~(np.abs(betainc(self.alpha, self.beta, x) - yv) <= _INVERSE_TOL)
        if bad.any():
            x[bad] = self._bisect(yv[bad])
        x = np.where(yv <= 0.0, 0.0, np.where(yv >= 1.0, 1.0, x))
        return _out(y, x.reshape(np.shape(y)))

    def _bisect(self, yv):
        lo = np.zeros(yv.shape, dtype=np.int64)
        hi = np.full(yv.shape, np.float64(1.0).view(np.int64), dtype=np.int64)
        while True:
            open_ = hi - lo > 1
            if not open_.any():
                break
            mid = lo + (hi - lo) // 2
            below = betainc(self.alpha, self.beta, mid.view(np.float64)) < yv
            lo = np.where(open_ & below, mid, lo)
            hi = np.where(open_ & ~below, mid, hi)
        xl, xh = lo.view(np.float64), hi.view(np.float64)
        gl = betainc(self.alpha, self.beta, xl)
        gh = betainc(self.alpha, self.beta, xh)
        return np.where(np.abs(gl - yv) <= np.abs(gh - yv), xl, xh)

    def log_density(self, x):
        x = _check_unit(x)
        a, b = self.alpha, self.beta
        if (a < 1 and np.any(x <= 0.0)) or (b < 1 and np.any(x >= 1.0)):
            raise ValueError("beta-law density is unbounded at this endpoint")
        with np.errstate(divide="ignore", invalid="ignore"):
            ta = (a - 1.0) * np.log(x) if a != 1 else np.zeros_like(x)
            tb = (b - 1.0) * np.log1p(-x) if b != 1 else np.zeros_like(x)
        value = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + ta + tb
        return _out(x, value)

    def params(self):
        return (self.alpha, self.beta)


CompanderParams = Union[Identity, MuLaw, BetaLaw]


def compress_value(params: CompanderParams, x):
    """g(x); accepts scalars or arrays."""
    return params.compress(x)


def expand_value(params: CompanderParams, y):
    """g^{-1}(y); accepts scalars or arrays."""
    return params.expand(y)


def log_density(params: CompanderParams, x):
    """Natural log of g'(x)."""
    return params.log_density(x)


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FitConfig:
    max_iterations: int = 200
    gradient_tolerance: float = 1e-10
    mu_bounds: tuple = (1e-6, 1e6)
    alpha_bounds: tuple = (1e-3, 1e3)
    beta_bounds: tuple = (1e-3, 1e3)
    adjustment_enabled: bool = True

    def __post_init__(self):
        if self.max_iterations < 1 or not self.gradient_tolerance > 0:
            raise ValueError("max_iterations and gradient_tolerance must be positive")
        for lo, hi in (self.mu_bounds, self.alpha_bounds, self.beta_bounds):
            if not (0 < lo < hi):
                raise ValueError("parameter bounds must satisfy 0 < min < max")


def _prepare(samples):
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise DegenerateSample("need at least two samples")
    x = np.clip(x, CLAMP_DELTA, 1.0 - CLAMP_DELTA)
    if np.ptp(x) == 0.0:
        raise DegenerateSample("all samples are equal")
    return x


def fit_objective(params: CompanderParams, samples) -> float:
    """Sample mean of log g'(x_i) over clamped samples (natural log)."""
    x = np.clip(np.asarray(samples, dtype=float).ravel(), CLAMP_DELTA, 1.0 - CLAMP_DELTA)
    return float(np.mean(params.log_density(x)))


def _beta_objective(a, b, s1, s2):
    return gammaln(a + b) - gammaln(a) - gammaln(b) + (a - 1.0) * s1 + (b - 1.0) * s2


def _fit_beta(x, cfg: FitConfig) -> BetaLaw:
    s1 = float(np.mean(np.log(x)))
    s2 = float(np.mean(np.log1p(-x)))
    lo = np.log([cfg.alpha_bounds[0], cfg.beta_bounds[0]])
    hi = np.log([cfg.alpha_bounds[1], cfg.beta_bounds[1]])

    # method-of-moments start, pulled inside the box
    mean, var = float(np.mean(x)), float(np.var(x))
    common = mean * (1.0 - mean) / var - 1.0 if var > 0 else 1.0
    if common <= 0:
        common = 1.0
    theta = np.clip(np.log([mean * common, (1.0 - mean) * common]), lo, hi)

    def grad_hess(t):
        a, b = np.exp(t)
        psi_ab = digamma(a + b)
        g = np.array([psi_ab - digamma(a) + s1, psi_ab - digamma(b) + s2])
        t_ab = polygamma(1, a + b)
        h = np.array([[t_ab - polygamma(1, a), t_ab], [t_ab, t_ab - polygamma(1, b)]])
        return g, h

    def projected_norm(t, g):
        pg = g.copy()
        pg[(t <= lo) & (g < 0)] = 0.0
        pg[(t >= hi) & (g > 0)] = 0.0
        return float(np.max(np.abs(pg)))

    f = _beta_objective(*np.exp(theta), s1, s2)
    for _ in range(cfg.max_iterations):
        g, h = grad_hess(theta)
        if projected_norm(theta, g) <= cfg.gradient_tolerance:
            return BetaLaw(*map(float, np.exp(theta)))
        try:
            d = -np.linalg.solve(h, g)
        except np.linalg.LinAlgError:
            d = g
        if g @ d <= 0:
            d = g
        # Newton step in (alpha, beta), taken along log-parameters
        step = d / np.exp(theta)
        t = 1.0
        while True:
            cand = np.clip(theta + t * step, lo, hi)
            fc = _beta_objective(*np.exp(cand), s1, s2)
            if fc >= f or t < 1e-12:
                break
            t *= 0.5
        if np.array_equal(cand, theta):
            # pinned at the box: nothing further to gain along this direction
            g, _ = grad_hess(theta)
            if projected_norm(theta, g) <= max(cfg.gradient_tolerance, 1e-8):
                return BetaLaw(*map(float, np.exp(theta)))
            break
        theta, f = cand, fc
    g, _ = grad_hess(theta)
    if projected_norm(theta, g) <= cfg.gradient_tolerance:
        return BetaLaw(*map(float, np.exp(theta)))
    raise NonConvergence("beta-law fit exhausted its iteration budget")


def _mu_objective(log_mu, x):
    mu = math.exp(log_mu)
    return math.log(mu) - math.log(math.log1p(mu)) - float(np.mean(np.log1p(mu * x)))


def _fit_mu(x, cfg: FitConfig) -> MuLaw:
    lo, hi = math.log(cfg.mu_bounds[0]), math.log(cfg.mu_bounds[1])
    grid = np.linspace(lo, hi, 65)
    vals = [_mu_objective(t, x) for t in grid]
    k = int(np.argmax(vals))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = _mu_objective(c, x), _mu_objective(d, x)
    for _ in range(cfg.max_iterations):
        if b - a <= cfg.gradient_tolerance:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = _mu_objective(c, x)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = _mu_objective(d, x)
    else:
        if b - a > cfg.gradient_tolerance:
            raise NonConvergence("mu-law fit exhausted its iteration budget")
    cands = [a, b, 0.5 * (a + b), grid[k]]
    best = max(cands, key=lambda t: _mu_objective(t, x))
    return MuLaw(math.exp(best))


def fit(samples, family: str = "beta", cfg: FitConfig | None = None) -> CompanderParams:
    """Fit a compander by maximizing the sample mean log-density.

    Samples are clamped to ``[1e-9, 1 - 1e-9]`` first.  Raises
    ``DegenerateSample`` when no spread remains.
    """
    cfg = cfg or FitConfig()
    x = _prepare(samples)
    if family == "beta":
        return _fit_beta(x, cfg)
    if family == "mu":
        return _fit_mu(x, cfg)
    if family == "identity":
        return Identity()
    raise ValueError(f"unknown compander family {family!r}")


# ---------------------------------------------------------------------------
# Distortion-balancing adjustment
# ---------------------------------------------------------------------------

def _interval_stats(params: CompanderParams, x, M: int):
    edges = np.asarray(params.expand(np.arange(M + 1) / M), dtype=float)
    widths = np.diff(edges)
    idx = np.minimum((M * np.asarray(params.compress(x))).astype(int), M - 1)
    counts = np.bincount(idx, minlength=M)
    return widths, counts


def adjust_predicate(params: CompanderParams, samples, M: int) -> bool:
    """True when the narrowest interval's N*width^2 is at least the widest one's."""
    x = np.clip(np.asarray(samples, dtype=float).ravel(), 0.0, 1.0)
    widths, counts = _interval_stats(params, x, M)
    if widths.max() - widths.min() <= 1e-12:
        return True
    s, l = int(np.argmin(widths)), int(np.argmax(widths))
    return counts[s] * widths[s] ** 2 >= counts[l] * widths[l] ** 2


def _toward_identity(params: CompanderParams, k: int):
    f = ADJUST_STEP ** k
    if isinstance(params, MuLaw):
        return MuLaw(params.mu * f)
    if isinstance(params, BetaLaw):
        return BetaLaw(1.0 + f * (params.alpha - 1.0), 1.0 + f * (params.beta - 1.0))
    return params


def adjust(params: CompanderParams, samples, M: int) -> CompanderParams:
    """Shrink ``params`` toward the identity until interval distortions balance.

    Each iteration scales mu by 0.9, or moves (alpha, beta) 10% of the way to
    (1, 1).  If 200 iterations do not satisfy the stopping rule the identity
    member of the family is returned, for which it holds trivially.
    """
    if M < 2:
        raise ValueError("M must be at least 2")
    if isinstance(params, Identity):
        return params
    for k in range(ADJUST_MAX_ITER + 1):
        cand = _toward_identity(params, k)
        if adjust_predicate(cand, samples, M):
            return cand
    return BetaLaw(1.0, 1.0) if isinstance(params, BetaLaw) else MuLaw(CLAMP_DELTA)


def design(samples, family: str, M: int, cfg: FitConfig | None = None) -> CompanderParams:
    """fit() followed by adjust() when the config enables it."""
    cfg = cfg or FitConfig()
    params = fit(samples, family, cfg)
    if cfg.adjustment_enabled:
        params = adjust(params, samples, M)
    return params


# ---------------------------------------------------------------------------
# Text records
# ---------------------------------------------------------------------------

def format_record(params: CompanderParams) -> str:
    if isinstance(params, MuLaw):
        return f"family=mu mu={params.mu:.17g}"
    if isinstance(params, BetaLaw):
        return f"family=beta alpha={params.alpha:.17g} beta={params.beta:.17g}"
    return "family=identity"


_RECORD_RE = re.compile(r"(\w+)=(\S+)")


def parse_record(text: str) -> CompanderParams:
    fields = dict(_RECORD_RE.findall(text.strip()))
    family = fields.get("family")
    try:
        if family == "mu":
            return MuLaw(float(fields["mu"]))
        if family == "beta":
            return BetaLaw(float(fields["alpha"]), float(fields["beta"]))
        if family == "identity":
            return Identity()
    except KeyError as exc:
        raise ValueError(f"compander record missing field {exc}") from None
    raise ValueError(f"bad compander record: {text!r}")
