"""Log-space special functions: gamma ratios and generalized Stirling numbers.

The generalized Stirling numbers of the first kind ``S_a(m, l)`` satisfy

    S_a(m, 1) = Gamma(m - a) / Gamma(1 - a),   S_a(m, m) = 1,
    S_a(m + 1, l) = (m - a*l) S_a(m, l) + S_a(m, l - 1).

For ``a < 1`` every coefficient ``m - a*l`` with ``l <= m`` is positive, so
all entries are positive and the table is stored as logarithms.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy.special import gammaln

__all__ = [
    "StirlingTriangle",
    "build_stirling",
    "check_discount",
    "log_gamma_ratio",
    "stirling_alternating",
    "stirling_oracle",
]

ORACLE_MAX_M = 14


def check_discount(a: float) -> float:
    a = float(a)
    if not math.isfinite(a) or a >= 1.0:
        raise ValueError(f"discount must be a finite real < 1, got {a!r}")
    return a


def log_gamma_ratio(n, a: float):
    """Return ``log(Gamma(n - a) / Gamma(1 - a))``.

    Accepts a scalar or an array of positive integers. Equals
    ``sum_{j=1}^{n-1} log(j - a)``, so ``n = 1`` gives exactly 0.
    """
    a = check_discount(a)
    n_arr = np.asarray(n)
    if np.any(n_arr < 1):
        raise ValueError("n must be >= 1")
    out = gammaln(n_arr - a) - gammaln(1.0 - a)
    out = np.where(n_arr == 1, 0.0, out)
    if np.ndim(out) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class StirlingTriangle:
    """Table of ``log S_a(m, l)`` for ``0 <= l <= m <= m_max``.

    ``log_values[m, l]`` is ``-inf`` where ``S_a(m, l) = 0`` (``l > m``, or
    ``l = 0 < m``); ``log_values[0, 0] = 0`` by convention.
    """

    discount: float
    m_max: int
    log_values: np.ndarray

    def row(self, m: int) -> np.ndarray:
        if not 0 <= m <= self.m_max:
            raise ValueError(f"m={m} outside triangle (m_max={self.m_max})")
        return self.log_values[m, : m + 1]

    def __call__(self, m: int, l: int) -> float:
        if not 0 <= l <= m <= self.m_max:
            if 0 <= m <= self.m_max and l > m:
                return -math.inf
            raise ValueError(f"({m}, {l}) outside triangle (m_max={self.m_max})")
        return float(self.log_values[m, l])

    def covers(self, m: int, discount: float) -> bool:
        return m <= self.m_max and discount == self.discount

    def require(self, m: int, discount: float) -> None:
        if discount != self.discount:
            raise ValueError(
                f"triangle built for discount {self.discount}, params use {discount}"
            )
        if m > self.m_max:
            raise ValueError(f"triangle covers m <= {self.m_max}, need m = {m}")


def build_stirling(m_max: int, a: float) -> StirlingTriangle:
    """Fill the triangle of ``log S_a(m, l)`` by the forward recurrence."""
    a = check_discount(a)
    m_max = int(m_max)
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    table = np.full((m_max + 1, m_max + 1), -np.inf)
    table[0, 0] = 0.0
    table[1, 1] = 0.0
    ls = np.arange(1, m_max + 1, dtype=float)
    for m in range(1, m_max):
        # l = 1..m: (m - a l) S(m, l) + S(m, l - 1); S(m, 0) = 0 for m >= 1
        grow = np.log(m - a * ls[:m]) + table[m, 1 : m + 1]
        table[m + 1, 1 : m + 1] = np.logaddexp(grow, table[m, 0:m])
        table[m + 1, m + 1] = 0.0
    table.setflags(write=False)
    return StirlingTriangle(discount=a, m_max=m_max, log_values=table)


def _compositions(m: int, l: int):
    """All ordered tuples of ``l`` positive integers summing to ``m``."""
    for cuts in itertools.combinations(range(1, m), l - 1):
        bounds = (0,) + cuts + (m,)
        yield tuple(bounds[i + 1] - bounds[i] for i in range(l))


def stirling_oracle(m: int, l: int, a: float) -> float:
    """Composition-sum value of ``S_a(m, l)``, for testing the recurrence.

    ``(m!/l!) * sum over compositions (n_1..n_l) of m of
    prod_k Gamma(n_k - a) / (n_k! Gamma(1 - a))``.
    """
    a = check_discount(a)
    if not 1 <= l <= m:
        raise ValueError("need 1 <= l <= m")
    if m > ORACLE_MAX_M:
        raise ValueError(f"composition sum refused for m > {ORACLE_MAX_M}")
    lead = math.lgamma(m + 1) - math.lgamma(l + 1)
    # per-part log weights, indexed by part size
    part = [0.0] + [
        math.lgamma(n - a) - math.lgamma(1 - a) - math.lgamma(n + 1)
        for n in range(1, m + 1)
    ]
    terms = [math.exp(lead + sum(part[n] for n in comp)) for comp in _compositions(m, l)]
    return math.fsum(terms)


def stirling_alternating(m: int, l: int, a: float, dps: int = 60) -> float:
    """Alternating closed form of ``S_a(m, l)`` in extended precision.

    ``(1/(l! a^l)) sum_k (-1)^k C(l, k) Gamma(m - a k) / Gamma(-a k)``.
    Suffers cancellation that grows with ``m``; only for small test cases.
    """
    a = check_discount(a)
    if a == 0.0:
        raise ValueError("alternating form is undefined at a = 0")
    if not 1 <= l <= m:
        raise ValueError("need 1 <= l <= m")
    if m > ORACLE_MAX_M:
        raise ValueError(f"alternating sum refused for m > {ORACLE_MAX_M}")
    with mpmath.workdps(dps):
        am = mpmath.mpf(a)
        total = mpmath.mpf(0)
        for k in range(l + 1):
            # Gamma(m - ak)/Gamma(-ak) is the rising factorial (-ak)_m; k = 0 gives 0 for m >= 1
            total += (-1) ** k * mpmath.binomial(l, k) * mpmath.rf(-am * k, m)
        value = total / (mpmath.factorial(l) * am**l)
        return float(value)
