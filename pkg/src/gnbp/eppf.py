"""Exchangeable cluster/partition probability functions of the gNBP.

Partitions are always held in canonical form: labels ``0..l-1`` assigned in
order of first appearance. Every probability function here depends on a
partition only through its cluster sizes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterator, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .dist import ModelParams, guard_prob, levy_mass
from .special import StirlingTriangle

__all__ = [
    "MAX_ENUMERATION",
    "Partition",
    "addition_rule_residual",
    "canonicalize",
    "enumerate_partitions",
    "log_ecpf",
    "log_eppf",
    "log_eppf_normalizer",
    "log_eppf_sizes",
    "log_ewens",
    "prediction_weights",
    "size_dependent_eppf",
]

MAX_ENUMERATION = 12


def canonicalize(labels: Sequence[int]) -> tuple[int, ...]:
    """Relabel in order of first appearance, starting at 0."""
    seen: dict = {}
    out = []
    for z in labels:
        if z not in seen:
            seen[z] = len(seen)
        out.append(seen[z])
    return tuple(out)


@dataclass(frozen=True)
class Partition:
    """A set partition of ``[m]`` stored as canonical cluster labels."""

    assignments: tuple[int, ...]

    def __post_init__(self):
        z = tuple(int(v) for v in self.assignments)
        if z != canonicalize(z):
            raise ValueError("assignments are not in order-of-appearance form")
        object.__setattr__(self, "assignments", z)

    @classmethod
    def from_labels(cls, labels: Sequence[int]) -> "Partition":
        return cls(canonicalize(list(labels)))

    @classmethod
    def from_blocks(cls, blocks: Sequence[Sequence[int]]) -> "Partition":
        """Build from blocks of 0-based element indices."""
        m = sum(len(b) for b in blocks)
        z = [-1] * m
        for k, block in enumerate(blocks):
            for i in block:
                z[i] = k
        if min(z, default=0) < 0:
            raise ValueError("blocks do not cover 0..m-1")
        return cls.from_labels(z)

    @property
    def m(self) -> int:
        return len(self.assignments)

    @property
    def l(self) -> int:
        return max(self.assignments) + 1 if self.assignments else 0

    @cached_property
    def sizes(self) -> tuple[int, ...]:
        counts = [0] * self.l
        for z in self.assignments:
            counts[z] += 1
        return tuple(counts)

    def blocks(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.l)]
        for i, z in enumerate(self.assignments):
            out[z].append(i)
        return out

    def restrict(self, j: int) -> "Partition":
        """The partition induced on the first ``j`` elements."""
        return Partition.from_labels(self.assignments[:j])


def enumerate_partitions(m: int) -> Iterator[Partition]:
    """Yield every set partition of ``[m]`` once (restricted growth strings)."""
    m = int(m)
    if m < 0:
        raise ValueError("m must be >= 0")
    if m > MAX_ENUMERATION:
        raise ValueError(f"enumeration refused for m > {MAX_ENUMERATION}")
    if m == 0:
        yield Partition(())
        return
    z = [0] * m
    maxes = [0] * m  # maxes[i] = max(z[:i+1])

    def rec(i: int):
        if i == m:
            yield Partition(tuple(z))
            return
        top = maxes[i - 1] + 1
        for v in range(top + 1):
            z[i] = v
            maxes[i] = max(maxes[i - 1], v)
            yield from rec(i + 1)

    yield from rec(1)


def _sizes_of(part) -> tuple[int, ...]:
    return part.sizes if isinstance(part, Partition) else tuple(part)


def _sum_log_gamma_ratio(sizes: Sequence[int], a: float) -> float:
    if not sizes:
        return 0.0
    # sorted so that the result depends on the size multiset only
    n = np.sort(np.asarray(sizes, dtype=float))
    return float(np.sum(gammaln(n - a)) - len(sizes) * math.lgamma(1.0 - a))


def log_ecpf(part, params: ModelParams) -> float:
    """Log ECPF ``f(z, m)`` of a partition (or its cluster sizes).

    ``-log m! - rate + m log p + l log w + sum_k log Gamma(n_k - a)/Gamma(1 - a)``
    with ``w`` the new-cluster weight; this covers both parameterizations.
    """
    sizes = _sizes_of(part)
    m = sum(sizes)
    p = guard_prob(params.prob)
    return (
        -math.lgamma(m + 1)
        - levy_mass(params)
        + m * math.log(p)
        + len(sizes) * params.log_new_weight
        + _sum_log_gamma_ratio(sizes, params.discount)
    )


def log_eppf_normalizer(m: int, params: ModelParams, triangle: StirlingTriangle) -> float:
    """``log sum_l w^l S_a(m, l)``."""
    if m == 0:
        return 0.0
    triangle.require(m, params.discount)
    ls = np.arange(1, m + 1)
    return float(logsumexp(ls * params.log_new_weight + triangle.row(m)[1:]))


def log_eppf_sizes(sizes: Sequence[int], m: int, params: ModelParams,
                   triangle: StirlingTriangle) -> float:
    return (
        len(sizes) * params.log_new_weight
        + _sum_log_gamma_ratio(sizes, params.discount)
        - log_eppf_normalizer(m, params, triangle)
    )


def log_eppf(part, params: ModelParams, triangle: StirlingTriangle) -> float:
    """Log EPPF ``f(z | m)``: the ECPF divided by the gNB marginal of ``m``."""
    sizes = _sizes_of(part)
    return log_eppf_sizes(sizes, sum(sizes), params, triangle)


def log_ewens(part, theta: float) -> float:
    """Ewens sampling formula ``theta^l Gamma(theta)/Gamma(m+theta) prod Gamma(n_k)``."""
    sizes = _sizes_of(part)
    m = sum(sizes)
    return (
        len(sizes) * math.log(theta)
        + math.lgamma(theta)
        - math.lgamma(m + theta)
        + sum(math.lgamma(n) for n in sizes)
    )


def prediction_weights(sizes: Sequence[int], params: ModelParams) -> np.ndarray:
    """Unnormalized prediction-rule weights ``[n_1 - a, ..., n_l - a, w]``."""
    n = np.asarray(sizes, dtype=float)
    if np.any(n < 1):
        raise ValueError("cluster sizes must be >= 1")
    return np.append(n - params.discount, params.new_weight)


def addition_rule_residual(part, params: ModelParams, triangle: StirlingTriangle) -> float:
    """``p_m(n) - p_{m+1}(n, 1) - sum_k p_{m+1}(.., n_k + 1, ..)``.

    Zero for a partition structure; generically nonzero when ``a != 0``.
    """
    sizes = list(_sizes_of(part))
    m = sum(sizes)
    triangle.require(m + 1, params.discount)
    total = math.exp(log_eppf_sizes(sizes, m, params, triangle))
    terms = [math.exp(log_eppf_sizes(sizes + [1], m + 1, params, triangle))]
    for k in range(len(sizes)):
        grown = sizes.copy()
        grown[k] += 1
        terms.append(math.exp(log_eppf_sizes(grown, m + 1, params, triangle)))
    return total - math.fsum(terms)


def size_dependent_eppf(sub, m: int, params: ModelParams, triangle: StirlingTriangle) -> float:
    """Log-probability that the first ``j`` elements of a size-``m`` sample form ``sub``.

    Sums the EPPF over every extension of ``sub`` to a partition of ``[m]``.
    Extensions that share a size multiset contribute identically, so the sum
    is memoized on (sorted sizes, elements left to place).
    """
    sizes = tuple(sorted(_sizes_of(sub)))
    j = sum(sizes)
    if m < j:
        raise ValueError("m must be >= the subsample size")
    if m > MAX_ENUMERATION:
        raise ValueError(f"enumeration refused for m > {MAX_ENUMERATION}")
    triangle.require(m, params.discount)
    a = params.discount
    log_w = params.log_new_weight

    @lru_cache(maxsize=None)
    def log_mass(state: tuple[int, ...], left: int) -> float:
        # log of sum over extensions of w^l' prod Gamma(n_k - a)/Gamma(1 - a), relative to state
        if left == 0:
            return 0.0
        branches = [log_w + log_mass(tuple(sorted(state + (1,))), left - 1)]
        for k, n in enumerate(state):
            grown = state[:k] + (n + 1,) + state[k + 1:]
            branches.append(math.log(n - a) + log_mass(tuple(sorted(grown)), left - 1))
        return float(logsumexp(branches))

    return (
        len(sizes) * log_w
        + _sum_log_gamma_ratio(sizes, a)
        + log_mass(sizes, m - j)
        - log_eppf_normalizer(m, params, triangle)
    )
