"""Generalized Polya urn samplers.

Two engines live here: prior-partition Gibbs chains driven only by the
prediction rule, and the collapsed sampler for the isotropic Gaussian
count-mixture model with conjugate updates for atoms and precisions and
gamma / griddy-Gibbs updates for the mass, discount and probability.
"""
from __future__ import annotations

import enum
import functools
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln

from . import _backend
from .dist import LIMIT_THRESHOLD, ModelParams, Parameterization, levy_mass
from .eppf import Partition, log_ecpf
from .special import check_discount

__all__ = [
    "ChainConfig",
    "MixtureState",
    "Priors",
    "Trace",
    "TraceRecord",
    "Variant",
    "assign_sweep",
    "collapsed_log_predictive",
    "discount_grid",
    "initial_state",
    "predictive_density",
    "prior_partition_sweep",
    "prob_grid",
    "run_chain",
    "run_prior_chain",
    "subsample_cluster_counts",
    "update_atoms",
    "update_discount",
    "update_hypers",
    "update_mass",
    "update_prob",
]

LOG_2PI = math.log(2.0 * math.pi)
MIN_MASS = 1e-300
INIT_MODES = ("random", "one", "singletons")


class Variant(str, enum.Enum):
    GNBP = "gnbp"
    REPARAM = "reparam"
    NRMI_AUX = "nrmi"

    @property
    def parameterization(self) -> Parameterization:
        if self is Variant.GNBP:
            return Parameterization.ORIGINAL
        return Parameterization.REPARAMETERIZED


@dataclass(frozen=True)
class Priors:
    """Hyperparameters of the Gaussian count-mixture model."""

    c0: float = 1e-3  # phi ~ Gamma(c0, 1/d0)
    d0: float = 1e-3
    base_mean_precision: float = 1e-3  # mu_0 ~ N(0, 1/1e-3 I)
    g0: float = 1e-3  # phi_0 ~ Gamma(g0, 1/h0)
    h0: float = 1e-3
    e0: float = 1.0  # mass ~ Gamma(e0, 1/f0)
    f0: float = 1.0
    a0: float = 0.01  # p ~ Beta(a0, b0) when a = 0
    b0: float = 0.01


@dataclass
class ChainConfig:
    """Settings of one MCMC chain.

    ``discount`` and ``prob`` are the fixed values, or the starting values
    when ``learn_discount`` / ``learn_prob`` is set.
    """

    iterations: int = 15000
    burn_in: int = 5000
    seed: int = 0
    grid_points: int = 9999
    variant: Variant = Variant.GNBP
    discount: float = 0.0
    learn_discount: bool = False
    prob: float = 0.5
    learn_prob: bool = True
    mass: float = 1.0
    learn_mass: bool = True
    learn_hypers: bool = True
    phi: float | None = None
    phi0: float | None = None
    mu0: Sequence[float] | None = None
    record_assignments: bool = False
    subsample_j: int | None = None
    init: str = "random"

    def __post_init__(self):
        self.variant = Variant(self.variant)
        if self.init not in INIT_MODES:
            raise ValueError(f"init must be one of {', '.join(INIT_MODES)}")
        if self.iterations < 1 or self.burn_in < 0:
            raise ValueError("iterations must be positive and burn_in non-negative")
        if self.burn_in >= self.iterations:
            raise ValueError("burn_in must be smaller than iterations")
        if self.grid_points < 10:
            raise ValueError("grid_points must be >= 10")
        check_discount(self.discount)
        if not 0.0 < self.prob < 1.0:
            raise ValueError("prob must lie in (0, 1)")
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if self.variant is Variant.NRMI_AUX and self.discount < 0:
            raise ValueError("the auxiliary-variable NRMI variant needs a >= 0")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["variant"] = self.variant.value
        if out["mu0"] is not None:
            out["mu0"] = [float(v) for v in out["mu0"]]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ChainConfig":
        return cls(**data)


@dataclass
class MixtureState:
    """Full sampler state.

    ``z`` holds canonical labels, ``atoms[k]`` the mean of cluster ``k``.
    """

    z: np.ndarray
    atoms: np.ndarray
    phi: float
    mu0: np.ndarray
    phi0: float
    params: ModelParams

    @property
    def partition(self) -> Partition:
        return Partition(tuple(int(v) for v in self.z))

    @property
    def counts(self) -> np.ndarray:
        return np.bincount(self.z, minlength=self.l)

    @property
    def l(self) -> int:
        return int(self.z.max()) + 1 if self.z.size else 0

    @property
    def m(self) -> int:
        return int(self.z.size)

    def check(self) -> None:
        if self.atoms.shape[0] != self.l:
            raise ValueError("one atom per occupied cluster is required")
        if not (self.phi > 0 and self.phi0 > 0):
            raise ValueError("precisions must be positive")
        if tuple(self.z.tolist()) != Partition.from_labels(self.z.tolist()).assignments:
            raise ValueError("labels are not canonical")


@dataclass
class TraceRecord:
    iteration: int
    l: int
    sizes: list[int]
    unit_count: int
    mass: float
    a: float
    p: float
    phi: float | None = None
    mu0: list[float] | None = None
    phi0: float | None = None
    log_ecpf: float | None = None
    atoms: list[list[float]] | None = None
    assignments: list[int] | None = None
    l_sub: int | None = None

    @property
    def non_unit_count(self) -> int:
        return self.l - self.unit_count


@dataclass
class Trace:
    """Post-burn-in records plus the settings that produced them."""

    m: int
    variant: Variant
    config: dict
    records: list[TraceRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


def _canonical(z: np.ndarray) -> np.ndarray:
    _, first = np.unique(z, return_index=True)
    ranks = np.empty(int(z.max()) + 1, dtype=np.int64)
    old_labels = z[np.sort(first)]
    ranks[old_labels] = np.arange(first.size)
    return ranks[z]


def subsample_cluster_counts(part, j: int) -> int:
    """Number of distinct clusters among the first ``j`` elements."""
    z = part.assignments if isinstance(part, Partition) else part
    if not 1 <= j <= len(z):
        raise ValueError("need 1 <= j <= m")
    return len(set(z[:j]))


# ------------------------------------------------------------ prior chains


def prior_partition_sweep(part: Partition, params: ModelParams, rng: np.random.Generator,
                          order: Sequence[int] | None = None) -> Partition:
    """One Gibbs sweep of the prediction rule over every element."""
    m = part.m
    if m < 1:
        raise ValueError("need m >= 1")
    z = np.asarray(part.assignments, dtype=np.int64).copy()
    counts = np.zeros(m + 1, dtype=np.int64)
    counts[: part.l] = part.sizes
    order_arr = np.arange(m, dtype=np.int64) if order is None else np.asarray(order, dtype=np.int64)
    u = rng.random(order_arr.size)
    _backend.prior_sweep(z, counts, part.l, order_arr, u, params.discount, params.new_weight)
    return Partition(tuple(_canonical(z).tolist()))


def run_prior_chain(m: int, params: ModelParams, iterations: int = 15000, burn_in: int = 5000,
                    seed: int = 0, j: int | None = None, init: Partition | None = None) -> Trace:
    """Prediction-rule Gibbs chain on partitions of ``[m]`` with no data.

    Starts from a uniformly random labelling unless ``init`` is given; records
    every post-burn-in sweep. With ``j`` set, each record also carries the
    number of clusters among the first ``j`` elements.
    """
    if burn_in >= iterations:
        raise ValueError("burn_in must be smaller than iterations")
    rng = np.random.default_rng(seed)
    if init is None:
        z = _canonical(rng.integers(0, m, size=m).astype(np.int64))
    else:
        z = np.asarray(init.assignments, dtype=np.int64).copy()
    L = int(z.max()) + 1
    counts = np.zeros(m + 1, dtype=np.int64)
    counts[:L] = np.bincount(z, minlength=L)
    order = np.arange(m, dtype=np.int64)
    a, w = params.discount, params.new_weight
    sweep = _backend.prior_sweep
    config = {"m": m, "iterations": iterations, "burn_in": burn_in, "seed": seed, "j": j,
              "mass": params.mass, "discount": a, "prob": params.prob,
              "parameterization": params.parameterization.value}
    variant = Variant.GNBP if not params.reparameterized else Variant.REPARAM
    trace = Trace(m=m, variant=variant, config=config)
    for it in range(iterations):
        L = sweep(z, counts, L, order, rng.random(m), a, w)
        if it < burn_in:
            continue
        sizes = counts[:L].tolist()
        trace.records.append(TraceRecord(
            iteration=it, l=L, sizes=sizes, unit_count=sizes.count(1),
            mass=params.mass, a=a, p=params.prob,
            l_sub=None if j is None else int(np.unique(z[:j]).size),
        ))
    return trace


# ---------------------------------------------------- Gaussian mixture model


def collapsed_log_predictive(x: np.ndarray, member_sum: np.ndarray, n: int, phi: float,
                             phi0: float, mu0: np.ndarray) -> float:
    """``log N(x; mu_post, (1/phi + 1/(phi0 + n phi)) I)`` for a cluster with
    ``n`` other members summing to ``member_sum``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    prec = phi0 + n * phi
    mean = (phi0 * np.asarray(mu0) + phi * np.asarray(member_sum)) / prec
    var = 1.0 / phi + 1.0 / prec
    d2 = float(np.sum((x - mean) ** 2))
    return -0.5 * x.size * (LOG_2PI + math.log(var)) - 0.5 * d2 / var


def _as_data(data) -> np.ndarray:
    x = np.asarray(data, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("data must be a non-empty (m, P) array")
    if not np.all(np.isfinite(x)):
        raise ValueError("data contain non-finite values")
    return np.ascontiguousarray(x)


def _cluster_stats(x: np.ndarray, z: np.ndarray, l: int):
    counts = np.bincount(z, minlength=l)
    sums = np.zeros((l, x.shape[1]))
    np.add.at(sums, z, x)
    return counts, sums


def _posterior_atoms(state: MixtureState, x: np.ndarray):
    counts, sums = _cluster_stats(x, state.z, state.l)
    prec = state.phi0 + counts * state.phi
    mean = (state.phi0 * state.mu0[None, :] + state.phi * sums) / prec[:, None]
    return mean, prec


def initial_state(data, config: ChainConfig, rng: np.random.Generator | None = None) -> MixtureState:
    """Starting state for ``run_chain``.

    ``init`` picks the labels: ``one`` cluster, ``singletons``, or ``random``
    (uniform over ``ceil(sqrt(m))`` labels). Precisions come from the data
    spread unless set; atoms are the cluster means.
    """
    x = _as_data(data)
    m, dim = x.shape
    if config.init == "one":
        z = np.zeros(m, dtype=np.int64)
    elif config.init == "singletons":
        z = np.arange(m, dtype=np.int64)
    else:
        rng = np.random.default_rng(config.seed) if rng is None else rng
        z = _canonical(rng.integers(0, math.ceil(math.sqrt(m)), size=m).astype(np.int64))
    spread = float(np.mean(np.var(x, axis=0))) if m > 1 else 1.0
    spread = spread if spread > 0 else 1.0
    mu0 = np.asarray(config.mu0, dtype=float) if config.mu0 is not None else x.mean(axis=0)
    params = ModelParams(config.mass, config.discount, config.prob,
                         config.variant.parameterization)
    counts, sums = _cluster_stats(x, z, int(z.max()) + 1)
    return MixtureState(
        z=z,
        atoms=sums / counts[:, None],
        phi=config.phi if config.phi is not None else 1.0 / spread,
        mu0=mu0.reshape(dim),
        phi0=config.phi0 if config.phi0 is not None else 1.0 / spread,
        params=params,
    )


def assign_sweep(state: MixtureState, data, rng: np.random.Generator,
                 order: Sequence[int] | None = None) -> MixtureState:
    """Resample every label with the atoms integrated out.

    Elements are visited in a fresh random order unless ``order`` is given.
    The returned state carries the conditional posterior means as atoms;
    ``update_atoms`` draws them.
    """
    x = _as_data(data)
    m = x.shape[0]
    if state.z.size != m:
        raise ValueError("state and data disagree on m")
    order_arr = rng.permutation(m).astype(np.int64) if order is None else np.asarray(order, dtype=np.int64)
    u = rng.random(order_arr.size)
    l = state.l
    counts = np.zeros(m + 1, dtype=np.int64)
    sums = np.zeros((m + 1, x.shape[1]))
    c, s = _cluster_stats(x, state.z, l)
    counts[:l] = c
    sums[:l] = s
    z = state.z.copy()
    _backend.gauss_sweep(x, z, counts, sums, l, order_arr, u, state.params.discount,
                         state.params.new_weight, state.phi, state.phi0,
                         np.ascontiguousarray(state.mu0, dtype=float))
    new = replace(state, z=_canonical(z))
    mean, _ = _posterior_atoms(new, x)
    return replace(new, atoms=mean)


def update_atoms(state: MixtureState, data, rng: np.random.Generator) -> MixtureState:
    """Draw each occupied atom from its conjugate normal conditional."""
    x = _as_data(data)
    mean, prec = _posterior_atoms(state, x)
    atoms = mean + rng.standard_normal(mean.shape) / np.sqrt(prec)[:, None]
    return replace(state, atoms=atoms)


def update_hypers(state: MixtureState, data, rng: np.random.Generator,
                  priors: Priors = Priors()) -> MixtureState:
    """Redraw phi, then mu_0, then phi_0 from their conditionals."""
    x = _as_data(data)
    m, dim = x.shape
    l = state.l
    resid = x - state.atoms[state.z]
    ss = float(np.sum(resid * resid))
    phi = rng.gamma(priors.c0 + 0.5 * m * dim, 1.0 / (priors.d0 + 0.5 * ss))
    prec = priors.base_mean_precision + l * state.phi0
    mean = state.phi0 * state.atoms.sum(axis=0) / prec
    mu0 = mean + rng.standard_normal(dim) / math.sqrt(prec)
    spread = float(np.sum((state.atoms - mu0[None, :]) ** 2))
    phi0 = rng.gamma(priors.g0 + 0.5 * l * dim, 1.0 / (priors.h0 + 0.5 * spread))
    return replace(state, phi=float(phi), mu0=mu0, phi0=float(phi0))


def mass_conditional(l: int, params: ModelParams, priors: Priors = Priors()) -> tuple[float, float]:
    """Shape and rate of the gamma conditional of gamma_0 (or h_0).

    The rate is ``f0 + (1-(1-p)^a)/(a p^a)``, or ``f0 + (1-(1-p)^a)/(a (1-p)^a)``
    when reparameterized; at ``a = 0`` both become ``f0 - log(1-p)``.
    """
    unit = levy_mass(params.with_(mass=1.0))
    return priors.e0 + l, priors.f0 + unit


def update_mass(state: MixtureState, rng: np.random.Generator,
                priors: Priors = Priors()) -> MixtureState:
    shape, rate = mass_conditional(state.l, state.params, priors)
    mass = max(float(rng.gamma(shape, 1.0 / rate)), MIN_MASS)
    return replace(state, params=state.params.with_(mass=mass))


def _log_one_minus_q_over_a(a: np.ndarray, log1m_p) -> np.ndarray:
    """Vectorized ``log((1 - (1-p)^a)/a)`` with the a -> 0 limit."""
    a = np.asarray(a, dtype=float)
    log1m_p = np.broadcast_to(np.asarray(log1m_p, dtype=float), np.broadcast(a, log1m_p).shape)
    a = np.broadcast_to(a, log1m_p.shape)
    t = a * log1m_p
    out = np.empty(t.shape)
    small = np.abs(a) < LIMIT_THRESHOLD
    pos = (a > 0) & ~small
    neg = (a < 0) & ~small
    out[small] = np.log(-log1m_p[small])
    out[pos] = np.log(-np.expm1(t[pos])) - np.log(a[pos])
    tn = t[neg]
    with np.errstate(over="ignore"):
        out[neg] = np.where(tn > 30, tn + np.log1p(-np.exp(-np.minimum(tn, 700.0))),
                            np.log(np.expm1(np.minimum(tn, 30.0)))) - np.log(-a[neg])
    return out


@functools.lru_cache(maxsize=16)
def discount_grid(grid_points: int, nonnegative: bool = False) -> np.ndarray:
    """Discounts ``a = 2 - 1/t`` for ``t = k/(G+1)``, ``k = 1..G``."""
    t = np.arange(1, grid_points + 1) / (grid_points + 1)
    a = 2.0 - 1.0 / t
    a = a[a >= 0] if nonnegative else a
    a.setflags(write=False)
    return a


@functools.lru_cache(maxsize=16)
def prob_grid(grid_points: int) -> np.ndarray:
    p = np.arange(1, grid_points + 1) / (grid_points + 1)
    p.setflags(write=False)
    return p


@functools.lru_cache(maxsize=1024)
def _size_row(grid_points: int, nonnegative: bool, size: int) -> np.ndarray:
    # log Gamma(n - a)/Gamma(1 - a) over the discount grid
    grid = discount_grid(grid_points, nonnegative)
    row = gammaln(size - grid) - gammaln(1.0 - grid)
    row.setflags(write=False)
    return row


@functools.lru_cache(maxsize=16)
def _prob_terms(grid_points: int, a: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    grid = prob_grid(grid_points)
    log_p, log1m_p = np.log(grid), np.log1p(-grid)
    return log_p, log1m_p, _log_one_minus_q_over_a(a, log1m_p)


def _categorical(log_w: np.ndarray, rng: np.random.Generator) -> int:
    cdf = np.cumsum(np.exp(log_w - log_w.max()))
    return int(min(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"), cdf.size - 1))


def discount_log_weights(sizes: Sequence[int], params: ModelParams, grid: np.ndarray,
                         rows: Sequence[np.ndarray] | None = None) -> np.ndarray:
    """Log ECPF of the current cluster sizes at every grid discount.

    ``rows`` optionally supplies ``log Gamma(u - a)/Gamma(1 - a)`` over the
    grid for each distinct size ``u`` in ascending order.
    """
    n = np.asarray(sizes, dtype=float)
    m, l = float(n.sum()), n.size
    p = params.prob
    log_p, log1m_p = math.log(p), math.log1p(-p)
    if params.reparameterized:
        log_w = math.log(params.mass) - grid * log1m_p
    else:
        log_w = math.log(params.mass) - grid * log_p
    uniq, mult = np.unique(n, return_counts=True)
    if rows is None:
        log_ratio = (gammaln(uniq[None, :] - grid[:, None]) * mult[None, :]).sum(axis=1) \
            - l * gammaln(1.0 - grid)
    else:
        log_ratio = np.zeros(grid.size)
        for row, k in zip(rows, mult):
            log_ratio += k * row
    with np.errstate(over="ignore"):
        rate = np.exp(log_w + _log_one_minus_q_over_a(grid, log1m_p))
    out = -math.lgamma(m + 1) - rate + m * log_p + l * log_w + log_ratio
    return np.where(np.isnan(out), -np.inf, out)


def update_discount(state: MixtureState, rng: np.random.Generator, grid_points: int = 9999,
                    variant: Variant = Variant.GNBP) -> MixtureState:
    """Griddy-Gibbs draw of ``a`` under a uniform prior on ``1/(2 - a)``."""
    if grid_points <= 1:
        return state
    nonneg = variant is Variant.NRMI_AUX
    grid = discount_grid(grid_points, nonneg)
    sizes = np.bincount(state.z)
    rows = [_size_row(grid_points, nonneg, int(u)) for u in np.unique(sizes)]
    lw = discount_log_weights(sizes, state.params, grid, rows)
    a = float(grid[_categorical(lw, rng)])
    return replace(state, params=state.params.with_(discount=a))


def prob_log_weights(m: int, l: int, params: ModelParams, grid: np.ndarray | int,
                     variant: Variant = Variant.GNBP) -> np.ndarray:
    """Unnormalized log conditional of ``p`` on a grid (``a != 0``).

    An integer ``grid`` selects the standard grid of that many points.
    """
    a = params.discount
    if isinstance(grid, (int, np.integer)):
        log_p, log1m_p, base = _prob_terms(int(grid), a)
    else:
        log_p, log1m_p = np.log(grid), np.log1p(-grid)
        base = _log_one_minus_q_over_a(a, log1m_p)
    with np.errstate(over="ignore"):
        if variant is Variant.GNBP:
            rate = np.exp(math.log(params.mass) - a * log_p + base)
            out = -rate + (m - a * l) * log_p
        else:
            rate = np.exp(math.log(params.mass) - a * log1m_p + base)
            out = -rate + m * log_p - a * l * log1m_p
            if variant is Variant.NRMI_AUX:
                out = out - log_p + log1m_p
    return np.where(np.isnan(out), -np.inf, out)


def update_prob(state: MixtureState, rng: np.random.Generator, grid_points: int = 9999,
                variant: Variant = Variant.GNBP, priors: Priors = Priors()) -> MixtureState:
    """Draw ``p``: beta conditional at ``a = 0``, griddy-Gibbs otherwise."""
    a = state.params.discount
    m, l = state.m, state.l
    mass = state.params.mass
    if variant is Variant.NRMI_AUX and a < 0:
        raise ValueError("the auxiliary-variable NRMI variant needs a >= 0")
    if abs(a) < LIMIT_THRESHOLD:
        if variant is Variant.NRMI_AUX:
            p = rng.beta(m, 2.0 + mass)
        else:
            p = rng.beta(priors.a0 + m, priors.b0 + mass)
        p = min(max(float(p), 1e-12), 1.0 - 1e-12)
    else:
        grid = prob_grid(grid_points)
        p = float(grid[_categorical(prob_log_weights(m, l, state.params, grid_points, variant), rng)])
    return replace(state, params=state.params.with_(prob=p))


def _record(it: int, state: MixtureState, config: ChainConfig) -> TraceRecord:
    sizes = np.bincount(state.z).tolist()
    params = state.params
    return TraceRecord(
        iteration=it,
        l=len(sizes),
        sizes=sizes,
        unit_count=sizes.count(1),
        mass=params.mass,
        a=params.discount,
        p=params.prob,
        phi=state.phi,
        mu0=state.mu0.tolist(),
        phi0=state.phi0,
        log_ecpf=log_ecpf(sizes, params),
        atoms=state.atoms.tolist(),
        assignments=state.z.tolist() if config.record_assignments else None,
        l_sub=None if config.subsample_j is None else int(np.unique(state.z[: config.subsample_j]).size),
    )


def run_chain(data, config: ChainConfig, priors: Priors = Priors(),
              state: MixtureState | None = None) -> Trace:
    """Run the Gaussian count-mixture sampler and keep post-burn-in records.

    Each iteration: shuffled collapsed label sweep, atoms, (phi, mu_0, phi_0),
    mass, discount, probability; disabled updates are skipped.
    """
    x = _as_data(data)
    if config.subsample_j is not None and not 1 <= config.subsample_j <= x.shape[0]:
        raise ValueError("subsample_j must lie in 1..m")
    rng = np.random.default_rng(config.seed)
    state = initial_state(x, config, rng) if state is None else state
    variant = config.variant
    trace = Trace(m=x.shape[0], variant=variant, config=config.to_dict())
    for it in range(config.iterations):
        state = assign_sweep(state, x, rng)
        state = update_atoms(state, x, rng)
        if config.learn_hypers:
            state = update_hypers(state, x, rng, priors)
        if config.learn_mass:
            state = update_mass(state, rng, priors)
        if config.learn_discount:
            state = update_discount(state, rng, config.grid_points, variant)
        if config.learn_prob:
            state = update_prob(state, rng, config.grid_points, variant, priors)
        if it >= config.burn_in:
            trace.records.append(_record(it, state, config))
    return trace


def _new_weight(record: TraceRecord, variant: Variant) -> float:
    return ModelParams(record.mass, record.a, record.p, variant.parameterization).new_weight


def predictive_density(trace: Trace | Iterable[TraceRecord], grid,
                       variant: Variant | None = None) -> np.ndarray:
    """Posterior predictive density of a new observation on ``grid``.

    Averages over records ``[sum_k (n_k - a) N(x; mu_k, 1/phi)
    + w N(x; mu_0, 1/phi_0 + 1/phi)] / (m - a l + w)``.
    """
    records = trace.records if isinstance(trace, Trace) else list(trace)
    if variant is None:
        variant = trace.variant if isinstance(trace, Trace) else Variant.GNBP
    if not records:
        raise ValueError("no recorded states")
    g = np.asarray(grid, dtype=float)
    pts = g[:, None] if g.ndim == 1 else g
    dim = pts.shape[1]
    total = np.zeros(pts.shape[0])
    for r in records:
        if r.atoms is None or r.phi is None:
            raise ValueError("records lack atoms; predictive density needs mixture traces")
        n = np.asarray(r.sizes, dtype=float)
        atoms = np.asarray(r.atoms, dtype=float).reshape(len(n), dim)
        mu0 = np.asarray(r.mu0, dtype=float)
        w = _new_weight(r, variant)
        d2 = ((pts[:, None, :] - atoms[None, :, :]) ** 2).sum(axis=2)
        comp = np.exp(-0.5 * dim * (LOG_2PI - math.log(r.phi)) - 0.5 * r.phi * d2)
        var0 = 1.0 / r.phi0 + 1.0 / r.phi
        d20 = ((pts - mu0[None, :]) ** 2).sum(axis=1)
        base = np.exp(-0.5 * dim * (LOG_2PI + math.log(var0)) - 0.5 * d20 / var0)
        dens = comp @ (n - r.a) + w * base
        total += dens / (n.sum() - r.a * n.size + w)
    return total / len(records)
