"""Prior cluster structures and analytic cluster-number/size laws."""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from typing import Iterable

import mpmath
import numpy as np
from scipy.special import logsumexp

from .dist import (
    LIMIT_THRESHOLD,
    ModelParams,
    Parameterization,
    guard_prob,
    levy_mass,
    tnb_sample,
)
from .special import StirlingTriangle, check_discount

__all__ = [
    "ClusterStructure",
    "Regime",
    "RegimeKind",
    "cluster_number_pmf",
    "cluster_weight_series",
    "expected_cluster_size",
    "expected_clusters",
    "simulate_prior",
    "simulate_prior_batch",
    "simulate_prior_given_m",
    "solve_prob",
    "sweep_rows",
    "unit_size_lower_bound",
    "write_sweep_csv",
]


@dataclass(frozen=True)
class ClusterStructure:
    sizes: tuple[int, ...]

    def __post_init__(self):
        if any(n < 1 for n in self.sizes):
            raise ValueError("cluster sizes must be >= 1")

    @property
    def l(self) -> int:
        return len(self.sizes)

    @property
    def m(self) -> int:
        return sum(self.sizes)


def simulate_prior(params: ModelParams, rng: np.random.Generator) -> ClusterStructure:
    """One compound-Poisson draw: ``l ~ Pois(rate)``, sizes iid TNB(a, p)."""
    l = int(rng.poisson(levy_mass(params)))
    if l == 0:
        return ClusterStructure(())
    sizes = tnb_sample(params.discount, params.prob, rng, size=l)
    return ClusterStructure(tuple(int(n) for n in sizes))


def simulate_prior_batch(params: ModelParams, n: int, rng: np.random.Generator):
    """``n`` independent draws, returned as ``(l, m, sizes_flat)`` arrays.

    ``sizes_flat`` concatenates the cluster sizes of every draw; draw ``i``
    owns ``sizes_flat[offsets[i]:offsets[i] + l[i]]`` with ``offsets = cumsum(l) - l``.
    """
    ls = rng.poisson(levy_mass(params), size=n).astype(np.int64)
    sizes = tnb_sample(params.discount, guard_prob(params.prob), rng, size=int(ls.sum()))
    owner = np.repeat(np.arange(n), ls)
    ms = np.bincount(owner, weights=sizes, minlength=n).astype(np.int64)
    return ls, ms, sizes


def simulate_prior_given_m(params: ModelParams, m: int, n: int, rng: np.random.Generator,
                           batch: int = 100_000, max_batches: int = 10_000) -> list[ClusterStructure]:
    """``n`` prior draws conditioned on sample size ``m`` by rejection."""
    out: list[ClusterStructure] = []
    for _ in range(max_batches):
        ls, ms, sizes = simulate_prior_batch(params, batch, rng)
        offsets = np.concatenate([[0], np.cumsum(ls)])
        for i in np.flatnonzero(ms == m):
            out.append(ClusterStructure(tuple(int(v) for v in sizes[offsets[i]:offsets[i + 1]])))
            if len(out) == n:
                return out
    raise RuntimeError(f"rejection sampler accepted only {len(out)} of {n} draws")


def cluster_number_pmf(m: int, params: ModelParams, triangle: StirlingTriangle) -> np.ndarray:
    """``f_L(l | m)`` for ``l = 0..m``, proportional to ``w^l S_a(m, l)``."""
    m = int(m)
    if m < 1:
        raise ValueError("m must be >= 1")
    triangle.require(m, params.discount)
    logw = np.arange(m + 1) * params.log_new_weight + triangle.row(m)
    logw[0] = -np.inf
    return np.exp(logw - logsumexp(logw))


def cluster_weight_series(m: int, params: ModelParams, dps: int = 60) -> float:
    """Log of ``e^{g} sum_k (1/k!) (-g)^k Gamma(m - a k)/Gamma(-a k)`` with
    ``g = gamma_0/(a p^a)``, the alternating form of ``sum_l w^l S_a(m, l)``.
    """
    a = params.discount
    if abs(a) < LIMIT_THRESHOLD:
        raise ValueError("series form needs a != 0")
    p = guard_prob(params.prob)
    with mpmath.workdps(dps):
        am = mpmath.mpf(a)
        g = mpmath.mpf(params.gamma0) / (am * mpmath.mpf(p) ** am)
        total = mpmath.mpf(0)
        scale = mpmath.mpf(1)
        peak = mpmath.mpf(0)
        k = 0
        while True:
            term = scale * mpmath.rf(-am * k, m) if k else mpmath.mpf(0)
            total += term
            peak = max(peak, abs(term))
            if k > abs(g) + m + 10 and abs(term) < mpmath.mpf(10) ** (-45) * max(peak, mpmath.mpf(1e-300)):
                break
            k += 1
            scale = scale * (-g) / k
        return float(g + mpmath.log(total))


# ------------------------------------------------------------- asymptotics


class RegimeKind(str, enum.Enum):
    POWER_LAW = "power-law"
    LOGARITHMIC = "logarithmic"
    BOUNDED = "bounded"


@dataclass(frozen=True)
class Regime:
    """Growth of an expectation as ``E[m] -> inf``.

    ``value`` is the exponent for ``POWER_LAW`` and the limit for ``BOUNDED``.
    """

    kind: RegimeKind
    value: float | None = None


def _log_beta(expected_m: float, params: ModelParams) -> float:
    """``log(p/(1-p))`` solved from ``E[m]``."""
    if not expected_m > 0:
        raise ValueError("expected_m must be positive")
    a = params.discount
    if params.reparameterized:
        return math.log(expected_m) - math.log(params.mass)
    return (math.log(expected_m) - math.log(params.mass)) / (1.0 - a)


def solve_prob(expected_m: float, mass: float, a: float,
               parameterization=Parameterization.ORIGINAL) -> float:
    """Probability parameter matching a target ``E[m]``.

    Original: ``p = 1 - (1 + (E[m]/gamma_0)^(1/(1-a)))^-1``;
    reparameterized: ``p = E[m]/(h_0 + E[m])``. Clamped to the guarded range.
    """
    a = check_discount(a)
    probe = ModelParams(mass, a, 0.5, parameterization)
    lb = _log_beta(expected_m, probe)
    p = 1.0 / (1.0 + math.exp(-lb)) if lb > -700 else 0.0
    return guard_prob(p)


def _log1p_exp(x: float) -> float:
    return x + math.log1p(math.exp(-x)) if x > 30 else math.log1p(math.exp(x))


def _log_abs_expm1(x: float) -> float:
    if x > 30:
        return x + math.log1p(-math.exp(-x))
    return math.log(abs(math.expm1(x)))


def _size_mean_from_log_beta(a: float, lb: float) -> float:
    """``a beta / ((1+beta)^a - 1)``, the TNB mean in terms of ``beta = p/(1-p)``."""
    big_l = _log1p_exp(lb)
    if abs(a) < LIMIT_THRESHOLD:
        return math.exp(lb - math.log(big_l))
    return math.exp(math.log(abs(a)) + lb - _log_abs_expm1(a * big_l))


def expected_clusters(expected_m: float, params: ModelParams) -> tuple[float, Regime]:
    """Prior ``E[l]`` at a given ``E[m]`` and its asymptotic regime."""
    a = params.discount
    h = params.mass
    lb = _log_beta(expected_m, params)
    if abs(a) < LIMIT_THRESHOLD:
        return h * _log1p_exp(lb), Regime(RegimeKind.LOGARITHMIC)
    if params.reparameterized:
        value = h / a * math.expm1(a * math.log1p(expected_m / h))
        regime = Regime(RegimeKind.BOUNDED, h / -a) if a < 0 else Regime(RegimeKind.POWER_LAW, a)
        return value, regime
    # gamma_0/a ((r^(1/(1-a)) + 1)^a - r^(a/(1-a))), r = gamma_0/E[m]; rewritten as
    # gamma_0/a r^(a/(1-a)) ((1 + beta)^a - 1) with beta = r^(-1/(1-a))
    value = math.exp(math.log(h) - a * lb + _log_abs_expm1(a * _log1p_exp(lb)) - math.log(abs(a)))
    regime = Regime(RegimeKind.POWER_LAW, -a / (1.0 - a)) if a < 0 else Regime(RegimeKind.BOUNDED, h / a)
    return value, regime


def expected_cluster_size(expected_m: float, params: ModelParams) -> tuple[float, Regime]:
    """Prior mean cluster size ``E[n_k]`` at a given ``E[m]`` and its regime."""
    a = params.discount
    lb = _log_beta(expected_m, params)
    value = _size_mean_from_log_beta(a, lb)
    if abs(a) < LIMIT_THRESHOLD:
        regime = Regime(RegimeKind.LOGARITHMIC)
    elif params.reparameterized:
        regime = Regime(RegimeKind.POWER_LAW, 1.0 if a < 0 else 1.0 - a)
    else:
        regime = Regime(RegimeKind.POWER_LAW, 1.0 / (1.0 - a) if a < 0 else 1.0)
    return value, regime


def unit_size_lower_bound(a: float) -> float:
    """Lower bound ``max(a, 0)`` on the prior share of unit-size clusters."""
    return max(check_discount(a), 0.0)


def sweep_rows(expected_m: float, mass: float, discounts: Iterable[float],
               parameterization=Parameterization.ORIGINAL) -> list[dict]:
    rows = []
    for a in discounts:
        params = ModelParams(mass, a, 0.5, parameterization)
        el, reg_l = expected_clusters(expected_m, params)
        en, reg_n = expected_cluster_size(expected_m, params)
        rows.append({
            "a": a,
            "p": solve_prob(expected_m, mass, a, parameterization),
            "mass": mass,
            "E_l": el,
            "E_n": en,
            "regime": reg_l.kind.value,
            "regime_value": "" if reg_l.value is None else reg_l.value,
        })
    return rows


def write_sweep_csv(rows: list[dict], path) -> None:
    fields = ["a", "p", "mass", "E_l", "E_n", "regime", "regime_value"]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
