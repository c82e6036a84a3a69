"""Shrinkage rules for heteroscedastic normal means.

Every estimator here takes a :class:`Dataset` of ``(x_i, v_i)`` pairs, where
``x_i ~ N(theta_i, v_i)`` with ``v_i`` known, and returns an
:class:`EstimateResult`.  The group-linear rule applies a spherically
symmetric block shrinker inside each variance bin; the remaining rules
(James-Stein, parametric and semi-parametric SURE, naive, grand mean) are the
usual competitors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

if TYPE_CHECKING:
    from .binning import BinPartition


class DegenerateBlockError(ValueError):
    """Raised when a block-level constant is requested for fewer than two observations."""


class InvalidPartitionError(ValueError):
    """Raised when a bin partition has overlapping or malformed intervals."""


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


class Observation(NamedTuple):
    x: float
    v: float


@dataclass(frozen=True, eq=False)
class Dataset:
    """Observed values ``x`` with their known sampling variances ``v``."""

    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float).reshape(-1)
        v = np.array(self.v, dtype=float).reshape(-1)
        if x.shape != v.shape:
            raise ValueError(f"x and v differ in length ({x.size} vs {v.size})")
        if x.size == 0:
            raise ValueError("dataset must contain at least one observation")
        if not np.all(np.isfinite(x)):
            raise ValueError("x must be finite")
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise ValueError("variances must be finite and strictly positive")
        x.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)

    @classmethod
    def from_observations(cls, observations: Iterable[Observation]) -> "Dataset":
        obs = list(observations)
        return cls([o[0] for o in obs], [o[1] for o in obs])

    @property
    def n(self) -> int:
        return int(self.x.size)

    def __len__(self) -> int:
        return self.n

    @property
    def observations(self) -> list[Observation]:
        return [Observation(float(a), float(b)) for a, b in zip(self.x, self.v)]

    def subset(self, index) -> "Dataset":
        return Dataset(self.x[index], self.v[index])


@dataclass(frozen=True)
class BlockStats:
    """Per-block diagnostics of a spherically symmetric shrinker."""

    n_k: int
    v_bar: float
    x_bar: float
    s_sq: float
    v_max: float
    c: float
    b_hat: float
    block: int = 0


@dataclass(frozen=True, eq=False)
class EstimateResult:
    """Estimates plus whatever diagnostics the rule produced.

    ``shrinkage[i]`` is the realized factor ``b_i`` in
    ``estimate_i = x_i - b_i * (x_i - center_i)``; ``blocks[i]`` is the bin
    index of observation ``i`` for grouped rules and ``-1`` otherwise.
    """

    estimates: np.ndarray
    method_label: str
    block_diagnostics: tuple[BlockStats, ...] = ()
    shrinkage: Optional[np.ndarray] = None
    blocks: Optional[np.ndarray] = None
    warning: Optional[str] = None

    def __len__(self) -> int:
        return int(self.estimates.size)


@dataclass(frozen=True)
class NormalNormalParams:
    mu: float
    gamma: float

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ValueError("gamma must be nonnegative")


# ---------------------------------------------------------------------------
# Spherically symmetric block shrinker
# ---------------------------------------------------------------------------


def c_star(n: int, v_max: float, v_bar: float) -> float:
    """Largest constant for which the block shrinker is guaranteed minimax.

    ``max(0, 1 - 2 (v_max / v_bar) / (n - 1))``; equals ``(n-3)/(n-1)`` in the
    homoscedastic case.
    """
    if n < 2:
        raise DegenerateBlockError(f"c_star needs at least 2 observations, got {n}")
    if not v_bar > 0:
        raise ValueError("v_bar must be positive")
    return max(0.0, 1.0 - 2.0 * (v_max / v_bar) / (n - 1))


def _shrinkage_factor(s_sq: float, v_bar: float, c: float) -> float:
    # c = 0 means "leave the block alone", which wins over the s_sq = 0 rule
    if c <= 0.0:
        return 0.0
    if s_sq <= 0.0:
        return 1.0
    return min(1.0, c * v_bar / s_sq)


def _block_stats(x: np.ndarray, v: np.ndarray, c: Optional[float], block: int = 0):
    """Return (BlockStats, centered x) for one block; ``c=None`` means use c_star."""
    n = x.size
    x_bar = float(np.mean(x))
    v_bar = float(np.mean(v))
    v_max = float(np.max(v))
    d = x - x_bar
    s_sq = float(np.dot(d, d)) / (max(n, 2) - 1)
    if n == 1:
        return BlockStats(1, v_bar, x_bar, 0.0, v_max, 0.0, 0.0, block), d
    if c is None:
        c = c_star(n, v_max, v_bar)
    b_hat = _shrinkage_factor(s_sq, v_bar, c)
    return BlockStats(n, v_bar, x_bar, s_sq, v_max, float(c), b_hat, block), d


def spherical_shrink(block: Dataset, c: float) -> EstimateResult:
    """Shrink every observation of ``block`` toward the block mean by one common factor.

    The factor is ``min(1, c * mean(v) / s^2)`` with ``s^2`` the sample
    variance of ``x`` (divisor ``n - 1``).  A single observation is returned
    unchanged.  ``c`` may range over ``[0, 2 c_star]``; the minimax guarantee
    holds on that whole range.
    """
    if not c >= 0:
        raise ValueError("c must be nonnegative")
    stats, d = _block_stats(block.x, block.v, c)
    b = stats.b_hat
    est = block.x - b * d
    return EstimateResult(
        estimates=est,
        method_label="spherical",
        block_diagnostics=(stats,),
        shrinkage=np.full(block.n, b),
        blocks=np.zeros(block.n, dtype=int),
    )


def block_sure(block: Dataset) -> float:
    """Unbiased estimate of the summed squared-error risk of the block shrinker with c = c_star.

    Derived from Stein's lemma:
    ``sum v + b^2 sum (x - xbar)^2
    - 2 sum v [(1 - 1/n) b - 2/(n-1) b 1{b<1} (x - xbar)^2 / s^2]``.
    A single observation costs its variance (the naive risk).
    """
    x, v = block.x, block.v
    n = x.size
    if n == 1:
        return float(v[0])
    stats, d = _block_stats(x, v, None)
    b = stats.b_hat
    d2 = d * d
    sum_v = float(np.sum(v))
    total = sum_v + b * b * float(np.sum(d2)) - 2.0 * (1.0 - 1.0 / n) * b * sum_v
    if 0.0 < b < 1.0:
        total += 4.0 / (n - 1) * b * float(np.dot(v, d2)) / stats.s_sq
    return total


# ---------------------------------------------------------------------------
# Group-linear
# ---------------------------------------------------------------------------


def group_linear(data: Dataset, partition: "BinPartition") -> EstimateResult:
    """Apply the block shrinker separately within each variance bin.

    Membership is by interval (``v_i in J_k``); observations whose variance
    falls outside every interval are returned unchanged.  Each block uses
    ``c_k = c_star(n_k, max v, mean v)``.
    """
    partition.validate()
    labels = partition.assign_many(data.v)
    est = np.array(data.x, dtype=float)
    shrink = np.zeros(data.n)
    diagnostics = []
    for k in range(partition.m):
        idx = np.flatnonzero(labels == k)
        if idx.size == 0:
            continue
        stats, d = _block_stats(data.x[idx], data.v[idx], None, block=k)
        diagnostics.append(stats)
        if stats.b_hat > 0.0:
            est[idx] = data.x[idx] - stats.b_hat * d
            shrink[idx] = stats.b_hat
    return EstimateResult(
        estimates=est,
        method_label="group-linear",
        block_diagnostics=tuple(diagnostics),
        shrinkage=shrink,
        blocks=labels,
    )


# ---------------------------------------------------------------------------
# Competitors
# ---------------------------------------------------------------------------


def naive(data: Dataset) -> EstimateResult:
    return EstimateResult(
        estimates=np.array(data.x, dtype=float),
        method_label="naive",
        shrinkage=np.zeros(data.n),
    )


def grand_mean(data: Dataset) -> EstimateResult:
    return EstimateResult(
        estimates=np.full(data.n, float(np.mean(data.x))),
        method_label="grand-mean",
        shrinkage=np.ones(data.n),
    )


def james_stein_plus(data: Dataset) -> EstimateResult:
    """Positive-part James-Stein toward the precision-weighted mean.

    ``mu = sum(x/v) / sum(1/v)`` and every residual is multiplied by
    ``(1 - (n - 3) / sum((x - mu)^2 / v))_+``.  With fewer than four
    observations the data are returned unchanged and ``warning`` is set.
    """
    n = data.n
    if n < 4:
        res = naive(data)
        return EstimateResult(
            estimates=res.estimates,
            method_label="james-stein",
            shrinkage=res.shrinkage,
            warning="james-stein needs n >= 4; returned the naive estimate",
        )
    w = 1.0 / data.v
    mu = float(np.dot(w, data.x) / np.sum(w))
    r = data.x - mu
    q = float(np.dot(w, r * r))
    factor = max(0.0, 1.0 - (n - 3) / q) if q > 0 else 0.0
    return EstimateResult(
        estimates=mu + factor * r,
        method_label="james-stein",
        shrinkage=np.full(n, 1.0 - factor),
    )


# Parametric SURE -----------------------------------------------------------

_LOG_GAMMA_SPAN = math.log(1e6)


def _profile_objective(t, z, a, rho):
    """Objective and its derivative in t = log(gamma), with mu profiled out.

    Objective per observation is ``B^2 (z - mu)^2 + a (1 - 2B + rho B^2)`` where
    ``B = a / (a + gamma)``.  ``rho = 0`` gives SURE, ``rho = 1`` gives the
    population risk with Y integrated out.
    """
    g = math.exp(t)
    b = a / (a + g)
    w = b * b
    mu = float(np.dot(w, z) / np.sum(w))
    r2 = (z - mu) ** 2
    value = float(np.dot(w, r2) + np.sum(a * (1.0 - 2.0 * b + rho * w)))
    # d/dgamma of B is -B^2/a; envelope theorem handles mu
    deriv = -2.0 * g * float(np.sum((w / a) * (b * r2 - a * (1.0 - rho * b))))
    return value, deriv, mu


def _grid_values(ts, z, a, rho, max_cells=4_000_000):
    out = np.empty(ts.size)
    rows = max(1, max_cells // a.size)
    inv_a = 1.0 / a
    cols = np.stack([np.ones_like(z), z, z * z, a], axis=1)
    for start in range(0, ts.size, rows):
        g = np.exp(ts[start:start + rows])
        b = np.multiply.outer(g, inv_a)
        b += 1.0
        np.reciprocal(b, out=b)
        ba = b @ a
        np.multiply(b, b, out=b)
        sw, swz, swzz, swa = (b @ cols).T
        fit = np.maximum(swzz - swz * swz / sw, 0.0)
        out[start:start + rows] = fit + a.sum() - 2.0 * ba + rho * swa
    return out


def _fit_normal_prior(z, a, rho, grid_size):
    """Minimize the profiled objective over gamma in [0, inf].

    Works on standardized data (z centered, a scaled by its median) so the
    search is translation and scale equivariant.  Returns (mu, gamma, value).
    """
    z = np.asarray(z, dtype=float)
    a = np.asarray(a, dtype=float)
    center = float(np.mean(z))
    scale = float(np.median(a))
    root = math.sqrt(scale)
    zs = (z - center) / root
    as_ = a / scale

    ts = np.linspace(-_LOG_GAMMA_SPAN, _LOG_GAMMA_SPAN, grid_size)
    vals = _grid_values(ts, zs, as_, rho)
    k = int(np.argmin(vals))

    t_best = ts[k]
    best_val, _, best_mu = _profile_objective(t_best, zs, as_, rho)
    if 0 < k < grid_size - 1:
        lo, hi = ts[k - 1], ts[k + 1]
        d_lo = _profile_objective(lo, zs, as_, rho)[1]
        d_hi = _profile_objective(hi, zs, as_, rho)[1]
        if d_lo < 0.0 < d_hi:
            t_new = brentq(lambda t: _profile_objective(t, zs, as_, rho)[1], lo, hi,
                           xtol=1e-14, rtol=4 * np.finfo(float).eps)
        else:
            t_new = minimize_scalar(lambda t: _profile_objective(t, zs, as_, rho)[0],
                                    bounds=(lo, hi), method="bounded",
                                    options={"xatol": 1e-12}).x
        val, _, mu = _profile_objective(t_new, zs, as_, rho)
        if val <= best_val:
            t_best, best_val, best_mu = t_new, val, mu
    gamma = math.exp(t_best)

    # closed-form ends of the search range: full pooling and no shrinkage
    zero_mu = float(np.mean(zs))
    zero_val = float(np.sum((zs - zero_mu) ** 2) + np.sum(as_ * (rho - 1.0)))
    if zero_val < best_val:
        gamma, best_val, best_mu = 0.0, zero_val, zero_mu
    inf_val = float(np.sum(as_))
    if inf_val < best_val:
        gamma, best_val, best_mu = math.inf, inf_val, zero_mu

    return center + root * best_mu, gamma * scale, best_val * scale


def sure_parametric(data: Dataset, grid_size: int = 2000) -> tuple[EstimateResult, NormalNormalParams]:
    """Normal-prior Bayes rule with (mu, gamma) chosen by minimizing SURE.

    ``estimate_i = x_i - v_i / (v_i + gamma) (x_i - mu)``.  For fixed gamma
    the SURE-optimal mu is the mean of x weighted by ``(v/(v+gamma))^2``, so
    the search is over gamma only: a log grid spanning ``1e-6..1e6`` times
    the median variance, a root-find on the derivative next to the best grid
    point, and the two limits gamma = 0 and gamma = inf.
    """
    if data.n < 2:
        raise ValueError("sure_parametric needs at least 2 observations")
    mu, gamma, _ = _fit_normal_prior(data.x, data.v, 0.0, grid_size)
    if math.isinf(gamma):
        b = np.zeros(data.n)
        est = np.array(data.x, dtype=float)
    else:
        b = data.v / (data.v + gamma)
        est = data.x - b * (data.x - mu)
    result = EstimateResult(estimates=est, method_label="sure-parametric", shrinkage=b)
    return result, NormalNormalParams(mu, gamma)


def sure_parametric_objective(data: Dataset, mu: float, gamma: float) -> float:
    """Mean SURE of the rule ``x - v/(v+gamma) (x - mu)``."""
    b = np.ones(data.n) if gamma == 0 else data.v / (data.v + gamma)
    return float(np.mean(b * b * (data.x - mu) ** 2 + data.v - 2.0 * data.v * b))


# Semi-parametric SURE (grand mean) -----------------------------------------


def _pava_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """Nondecreasing fit minimizing ``sum den_g b_g^2 - 2 num_g b_g``.

    Pool-adjacent-violators on block values ``num/den``; ``den`` may be zero
    (value +inf), ``num`` is positive.  Comparisons are cross-multiplied so
    zero denominators need no special casing.
    """
    s_blocks: list[float] = []
    w_blocks: list[float] = []
    sizes: list[int] = []
    for s, w in zip(num.tolist(), den.tolist()):
        s_blocks.append(s)
        w_blocks.append(w)
        sizes.append(1)
        while len(s_blocks) > 1 and s_blocks[-2] * w_blocks[-1] > s_blocks[-1] * w_blocks[-2]:
            s = s_blocks.pop()
            w = w_blocks.pop()
            c = sizes.pop()
            s_blocks[-1] += s
            w_blocks[-1] += w
            sizes[-1] += c
    out = np.empty(num.size)
    pos = 0
    for s, w, c in zip(s_blocks, w_blocks, sizes):
        out[pos:pos + c] = s / w if w > 0 else math.inf
        pos += c
    return out


def sure_grand_mean_objective(data: Dataset, b) -> float:
    """SURE (up to the constant ``sum v``) of ``x - b (x - xbar)``."""
    b = np.asarray(b, dtype=float)
    d = data.x - np.mean(data.x)
    return float(np.sum(b * b * d * d - 2.0 * b * data.v * (1.0 - 1.0 / data.n)))


def sure_grand_mean(data: Dataset) -> EstimateResult:
    """Shrink toward the grand mean with factors nondecreasing in the variance.

    The factors minimize ``sum b_i^2 (x_i - xbar)^2 - 2 b_i v_i (1 - 1/n)``
    over ``0 <= b <= 1`` monotone in ``v``.  Tied variances share a factor.
    This is a weighted isotonic regression solved exactly by PAVA, followed
    by clipping to ``[0, 1]``.
    """
    n = data.n
    if n < 2:
        raise ValueError("sure_grand_mean needs at least 2 observations")
    x_bar = float(np.mean(data.x))
    d = data.x - x_bar
    weight = d * d
    target_num = data.v * (1.0 - 1.0 / n)

    order = np.argsort(data.v, kind="stable")
    v_sorted = data.v[order]
    starts = np.flatnonzero(np.r_[True, v_sorted[1:] != v_sorted[:-1]])
    num = np.add.reduceat(target_num[order], starts)
    den = np.add.reduceat(weight[order], starts)

    fitted = np.minimum(_pava_ratio(num, den), 1.0)
    sizes = np.diff(np.r_[starts, n])
    b = np.empty(n)
    b[order] = np.repeat(fitted, sizes)
    return EstimateResult(
        estimates=data.x - b * d,
        method_label="sure-grand-mean",
        shrinkage=b,
    )


def loss(estimates: Sequence[float], truth: Sequence[float]) -> float:
    """Mean squared error ``n^-1 ||estimates - truth||^2``."""
    e = np.asarray(estimates, dtype=float)
    t = np.asarray(truth, dtype=float)
    if e.shape != t.shape:
        raise ValueError(f"length mismatch: {e.size} estimates vs {t.size} truths")
    return float(np.mean((e - t) ** 2))
