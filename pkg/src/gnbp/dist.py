"""Truncated negative binomial, logarithmic and generalized NB distributions."""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, replace

import mpmath
import numpy as np
from scipy.special import gammaln, logsumexp

from .special import StirlingTriangle, check_discount

__all__ = [
    "LIMIT_THRESHOLD",
    "ModelParams",
    "Parameterization",
    "ProbabilityClampWarning",
    "gnb_log_pmf",
    "gnb_moments",
    "gnb_pmf_series",
    "gnb_sample",
    "guard_prob",
    "levy_mass",
    "log_levy_mass",
    "nb_log_pmf",
    "tnb_log_pmf",
    "tnb_mean",
    "tnb_sample",
]

LIMIT_THRESHOLD = 1e-8
P_MIN = 1e-6
P_MAX = 1.0 - 1e-6
TNB_MAX_DRAW = 10**9


class ProbabilityClampWarning(RuntimeWarning):
    """Emitted when a probability parameter is pulled into the guarded range."""


def guard_prob(p: float) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0 or math.isnan(p):
        raise ValueError(f"probability parameter must lie in (0, 1), got {p!r}")
    if p < P_MIN or p > P_MAX:
        clamped = min(max(p, P_MIN), P_MAX)
        warnings.warn(
            f"p={p!r} clamped to {clamped!r}", ProbabilityClampWarning, stacklevel=3
        )
        return clamped
    return p


class Parameterization(str, enum.Enum):
    ORIGINAL = "original"
    REPARAMETERIZED = "reparameterized"


@dataclass(frozen=True)
class ModelParams:
    """Mass, discount and probability parameters of a gNBP.

    ``mass`` is gamma_0 under the original parameterization and h_0 under the
    reparameterized one; the two coincide when
    ``gamma_0 = h_0 * (p / (1 - p)) ** a``.
    """

    mass: float
    discount: float
    prob: float
    parameterization: Parameterization = Parameterization.ORIGINAL

    def __post_init__(self):
        if not (self.mass > 0 and math.isfinite(self.mass)):
            raise ValueError(f"mass must be positive, got {self.mass!r}")
        check_discount(self.discount)
        if not 0.0 < self.prob < 1.0:
            raise ValueError(f"prob must lie in (0, 1), got {self.prob!r}")
        object.__setattr__(self, "parameterization", Parameterization(self.parameterization))

    @property
    def reparameterized(self) -> bool:
        return self.parameterization is Parameterization.REPARAMETERIZED

    @property
    def log_new_weight(self) -> float:
        """Log of the new-cluster weight: gamma_0 p^-a or h_0 (1-p)^-a."""
        p = guard_prob(self.prob)
        a = self.discount
        if self.reparameterized:
            return math.log(self.mass) - a * math.log1p(-p)
        return math.log(self.mass) - a * math.log(p)

    @property
    def new_weight(self) -> float:
        return math.exp(self.log_new_weight)

    @property
    def gamma0(self) -> float:
        """Mass on the original scale."""
        if not self.reparameterized:
            return self.mass
        p = guard_prob(self.prob)
        return self.mass * math.exp(self.discount * (math.log(p) - math.log1p(-p)))

    def to_original(self) -> "ModelParams":
        return ModelParams(self.gamma0, self.discount, self.prob, Parameterization.ORIGINAL)

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


def _log_one_minus_q_over_a(a: float, p: float) -> float:
    """``log((1 - (1-p)^a) / a)``, with the a -> 0 limit ``log(-log(1-p))``."""
    if abs(a) < LIMIT_THRESHOLD:
        return math.log(-math.log1p(-p))
    t = a * math.log1p(-p)
    if a > 0:
        return math.log(-math.expm1(t)) - math.log(a)
    # t > 0 here; log(e^t - 1) without overflow
    if t > 30:
        log_em1 = t + math.log1p(-math.exp(-t))
    else:
        log_em1 = math.log(math.expm1(t))
    return log_em1 - math.log(-a)


def log_levy_mass(params: ModelParams) -> float:
    """Log of the Poisson rate of the number of clusters.

    ``gamma_0 (1 - (1-p)^a) / (a p^a)``, equal to ``new_weight * (1-(1-p)^a)/a``
    under either parameterization.
    """
    p = guard_prob(params.prob)
    return params.log_new_weight + _log_one_minus_q_over_a(params.discount, p)


def levy_mass(params: ModelParams) -> float:
    return math.exp(log_levy_mass(params))


# ---------------------------------------------------------------- TNB / Log(p)


def tnb_log_pmf(u, a: float, p: float):
    """Log PMF of the zero-truncated NB(a, p) cluster-size law.

    ``f(u) = Gamma(u-a)/(u! Gamma(1-a)) p^(u-1) a p / (1 - (1-p)^a)``; for
    ``|a| < 1e-8`` the logarithmic law ``-p^u / (u log(1-p))``.
    """
    a = check_discount(a)
    p = guard_prob(p)
    u_arr = np.asarray(u)
    if np.any(u_arr < 1):
        raise ValueError("support of the truncated NB starts at u = 1")
    if abs(a) < LIMIT_THRESHOLD:
        out = u_arr * math.log(p) - np.log(u_arr) - math.log(-math.log1p(-p))
    else:
        log_norm = math.log(p) - _log_one_minus_q_over_a(a, p)
        out = (
            gammaln(u_arr - a)
            - gammaln(u_arr + 1.0)
            - gammaln(1.0 - a)
            + (u_arr - 1) * math.log(p)
            + log_norm
        )
    if np.ndim(out) == 0:
        return float(out)
    return out


def tnb_mean(a: float, p: float) -> float:
    """``a (1-p)^a / (1 - (1-p)^a) * p / (1-p)``, logarithmic mean at a = 0."""
    a = check_discount(a)
    p = guard_prob(p)
    return math.exp(math.log(p) - math.log1p(-p) - _log_one_minus_q_over_a(a, p)
                    + a * math.log1p(-p))


def _tnb_cdf_table(a: float, p: float, upto: float, start_len: int = 64):
    """CDF of TNB(a, p) tabulated until it reaches ``upto`` (or the cap)."""
    n = start_len
    while True:
        u = np.arange(1, n + 1, dtype=float)
        cdf = np.cumsum(np.exp(tnb_log_pmf(u, a, p)))
        if cdf[-1] >= upto:
            return cdf
        if n >= TNB_MAX_DRAW:
            raise RuntimeError("truncated NB inversion exceeded the draw cap")
        # tail stalled below upto through rounding: treat as reached
        if n > 1024 and cdf[-1] - cdf[n // 2 - 1] <= 4 * np.finfo(float).eps:
            return cdf
        n = min(n * 4, TNB_MAX_DRAW)


def tnb_sample(a: float, p: float, rng: np.random.Generator, size=None):
    """Exact TNB(a, p) draws by inversion of the CDF.

    A scalar draw walks the ratio recurrence ``f(u+1)/f(u) = p (u-a)/(u+1)``;
    batched draws tabulate the CDF once and use ``searchsorted``.
    """
    a = check_discount(a)
    p = guard_prob(p)
    if size is None:
        target = rng.random()
        prob = math.exp(tnb_log_pmf(1, a, p))
        cdf = prob
        u = 1
        lim = abs(a) < LIMIT_THRESHOLD
        while cdf < target:
            prob *= p * (u if lim else (u - a)) / (u + 1)
            u += 1
            cdf += prob
            if u >= TNB_MAX_DRAW or (prob == 0.0):
                if prob == 0.0:
                    break
                raise RuntimeError("truncated NB inversion exceeded the draw cap")
        return u
    targets = rng.random(size)
    if targets.size == 0:
        return np.zeros(targets.shape, dtype=np.int64)
    cdf = _tnb_cdf_table(a, p, float(targets.max()))
    idx = np.searchsorted(cdf, targets, side="left")
    idx = np.minimum(idx, cdf.size - 1)
    return (idx + 1).astype(np.int64)


# ------------------------------------------------------------------ gNB / NB


def nb_log_pmf(m, r: float, p: float):
    """Log PMF of NB(r, p): ``Gamma(m+r)/(m! Gamma(r)) p^m (1-p)^r``."""
    m = np.asarray(m, dtype=float)
    out = gammaln(m + r) - gammaln(m + 1) - gammaln(r) + m * math.log(p) + r * math.log1p(-p)
    if np.ndim(out) == 0:
        return float(out)
    return out


def gnb_log_pmf(m: int, params: ModelParams, triangle: StirlingTriangle) -> float:
    """Log PMF of gNB(gamma_0, a, p) through generalized Stirling numbers.

    ``f(m) = p^m/m! exp(-rate) sum_l (gamma_0 p^-a)^l S_a(m, l)``.
    """
    m = int(m)
    if m < 0:
        raise ValueError("m must be >= 0")
    triangle.require(m, params.discount)
    p = guard_prob(params.prob)
    rate = levy_mass(params)
    if m == 0:
        return -rate
    ls = np.arange(1, m + 1)
    log_sum = logsumexp(ls * params.log_new_weight + triangle.row(m)[1:])
    return m * math.log(p) - math.lgamma(m + 1) - rate + float(log_sum)


def gnb_pmf_series(m: int, params: ModelParams, dps: int = 60, tol_digits: int = 40) -> float:
    """Alternating-series PMF of gNB in extended precision (test oracle).

    ``p^m/m! exp(gamma_0 (1-p)^a/(a p^a)) sum_k (1/k!) (-gamma_0/(a p^a))^k
    Gamma(m - a k)/Gamma(-a k)``. Requires ``a != 0``.
    """
    a = params.discount
    if abs(a) < LIMIT_THRESHOLD:
        raise ValueError("series form needs a != 0")
    p = guard_prob(params.prob)
    g = params.gamma0
    with mpmath.workdps(dps):
        am, pm, gm = mpmath.mpf(a), mpmath.mpf(p), mpmath.mpf(g)
        x = -gm / (am * pm**am)
        total = mpmath.mpf(0)
        term_scale = mpmath.mpf(1)
        k = 0
        small = mpmath.mpf(10) ** (-tol_digits)
        peak = mpmath.mpf(0)
        while True:
            term = term_scale * mpmath.rf(-am * k, m) if k else (mpmath.mpf(1) if m == 0 else mpmath.mpf(0))
            total += term
            peak = max(peak, abs(term))
            if k > abs(x) + m + 10 and abs(term) < small * max(peak, abs(total), mpmath.mpf(1e-300)):
                break
            k += 1
            term_scale = term_scale * x / k
            if k > 100000:
                raise RuntimeError("series did not converge")
        value = pm**m / mpmath.factorial(m) * mpmath.exp(gm * (1 - pm) ** am / (am * pm**am)) * total
        return float(value)


def gnb_sample(params: ModelParams, rng: np.random.Generator, size=None):
    """Draw gNB variates as a Poisson number of iid TNB cluster sizes."""
    rate = levy_mass(params)
    a, p = params.discount, guard_prob(params.prob)
    if size is None:
        l = int(rng.poisson(rate))
        if l == 0:
            return 0
        return int(tnb_sample(a, p, rng, size=l).sum())
    ls = rng.poisson(rate, size=size)
    flat = ls.ravel()
    total = int(flat.sum())
    sizes = tnb_sample(a, p, rng, size=total)
    owner = np.repeat(np.arange(flat.size), flat)
    out = np.bincount(owner, weights=sizes, minlength=flat.size).astype(np.int64)
    return out.reshape(ls.shape)


def gnb_moments(params: ModelParams) -> tuple[float, float]:
    """Closed-form mean and variance of gNB(gamma_0, a, p)."""
    a = params.discount
    p = guard_prob(params.prob)
    mean = params.gamma0 * math.exp((1.0 - a) * (math.log(p) - math.log1p(-p)))
    return mean, mean * (1.0 - a * p) / (1.0 - p)
