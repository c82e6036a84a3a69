"""Partitions of variance space into bins for the group-linear estimator."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .estimators import Dataset, InvalidPartitionError, block_sure


def floor_root(n: int, num: int, den: int) -> int:
    """Exact ``floor(n ** (num / den))`` for nonnegative integers."""
    target = n ** num
    k = int(round(n ** (num / den)))
    while k > 0 and k ** den > target:
        k -= 1
    while (k + 1) ** den <= target:
        k += 1
    return k


@dataclass(frozen=True, eq=False)
class BinPartition:
    """Ordered disjoint intervals ``[lo, hi)`` over variance, the last one closed.

    ``membership[k]`` holds the indices (into the dataset the partition was
    built from) whose variance lies in interval ``k``.
    """

    intervals: tuple[tuple[float, float], ...]
    membership: tuple[np.ndarray, ...] = ()
    sure: Optional[float] = None

    @property
    def m(self) -> int:
        return len(self.intervals)

    def validate(self) -> None:
        prev_hi = -math.inf
        for k, (lo, hi) in enumerate(self.intervals):
            if not lo < hi:
                raise InvalidPartitionError(f"interval {k} is empty: [{lo}, {hi})")
            if lo < prev_hi:
                raise InvalidPartitionError(f"interval {k} overlaps interval {k - 1}")
            prev_hi = hi

    def assign_many(self, v) -> np.ndarray:
        """Block index for each variance, ``-1`` where no interval contains it."""
        v = np.asarray(v, dtype=float)
        if self.m == 0:
            return np.full(v.shape, -1, dtype=int)
        los = np.array([iv[0] for iv in self.intervals])
        his = np.array([iv[1] for iv in self.intervals])
        k = np.searchsorted(los, v, side="right") - 1
        kc = np.clip(k, 0, self.m - 1)
        inside = (k >= 0) & ((v < his[kc]) | ((kc == self.m - 1) & (v == his[kc])))
        return np.where(inside, kc, -1)

    def assign(self, v: float) -> Optional[int]:
        k = int(self.assign_many(np.array([v]))[0])
        return None if k < 0 else k

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "intervals": [[lo, hi] for lo, hi in self.intervals],
            "last_interval_closed": True,
            "members": [idx.tolist() for idx in self.membership],
            "sure": self.sure,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _from_edges(data: Dataset, edges: Sequence[float]) -> BinPartition:
    intervals = tuple((float(edges[i]), float(edges[i + 1])) for i in range(len(edges) - 1))
    part = BinPartition(intervals)
    labels = part.assign_many(data.v)
    members = tuple(np.flatnonzero(labels == k) for k in range(part.m))
    return BinPartition(intervals, members)


def _single_bin(data: Dataset) -> BinPartition:
    lo = float(np.min(data.v))
    hi = float(np.max(data.v))
    if hi <= lo:
        hi = float(np.nextafter(lo, math.inf))
    return _from_edges(data, [lo, hi])


def bins_equal_log(data: Dataset, n_bins: Optional[int] = None) -> BinPartition:
    """``floor(n^(1/3))`` bins of equal length in ``log v``."""
    m = floor_root(data.n, 1, 3) if n_bins is None else int(n_bins)
    v_min, v_max = float(np.min(data.v)), float(np.max(data.v))
    if m <= 1 or v_max <= v_min:
        return _single_bin(data)
    # geometric edges v_min * (v_max/v_min)^(k/m): equal steps in log v, and
    # rescaling v by a power of two rescales every edge exactly
    edges = v_min * (v_max / v_min) ** (np.arange(m + 1) / m)
    edges[0], edges[-1] = v_min, v_max
    edges = np.unique(edges)  # a nearly flat range can collapse edges
    if edges.size < 2:
        return _single_bin(data)
    return _from_edges(data, edges)


def equal_width(n: int, v_max: float, lipschitz: float) -> float:
    """Bin width ``(10 v_max^2 / (n L))^(1/3)``."""
    if not lipschitz > 0:
        raise ValueError("lipschitz constant must be positive")
    return (10.0 * v_max ** 2 / (n * lipschitz)) ** (1.0 / 3.0)


def bins_equal_width(data: Dataset, lipschitz: float) -> BinPartition:
    """Contiguous bins of width ``(10 v_max^2/(n L))^(1/3)`` starting at ``min v``."""
    v_min = float(np.min(data.v))
    v_max = float(np.max(data.v))
    width = equal_width(data.n, v_max, lipschitz)
    span = v_max - v_min
    if width >= span:
        return _single_bin(data)
    m = max(1, math.ceil(span / width))
    edges = v_min + width * np.arange(m + 1)
    if edges[-1] < v_max:
        edges = np.append(edges, edges[-1] + width)
    return _from_edges(data, edges)


def partition_sure(data: Dataset, partition: BinPartition) -> float:
    """Total SURE of the group-linear estimator under ``partition``.

    Observations outside every interval contribute their variance.
    """
    labels = partition.assign_many(data.v)
    total = float(np.sum(data.v[labels < 0]))
    for k in range(partition.m):
        idx = np.flatnonzero(labels == k)
        if idx.size:
            total += block_sure(data.subset(idx))
    return total


def _segment_costs(xs: np.ndarray, vs: np.ndarray, j: int, length: int) -> np.ndarray:
    """SURE of the sorted segments ``[j - L, j)`` for ``L = 1..length``.

    Vectorized form of :func:`block_sure` using running sums over the
    segment, anchored at ``xs[j-1]`` to limit cancellation.
    """
    seg_x = xs[j - length:j][::-1] - xs[j - 1]
    seg_v = vs[j - length:j][::-1]
    L = np.arange(1, length + 1, dtype=float)
    s_x = np.cumsum(seg_x)
    s_xx = np.cumsum(seg_x * seg_x)
    s_v = np.cumsum(seg_v)
    s_vx = np.cumsum(seg_v * seg_x)
    s_vxx = np.cumsum(seg_v * seg_x * seg_x)

    cost = s_v.copy()
    if length == 1:
        return cost
    Lm = L[1:]
    mean_x = s_x[1:] / Lm
    ss = np.maximum(s_xx[1:] - s_x[1:] * mean_x, 0.0)
    s_sq = ss / (Lm - 1.0)
    v_bar = s_v[1:] / Lm
    v_max = vs[j - 1]
    c = np.maximum(0.0, 1.0 - 2.0 * (v_max / v_bar) / (Lm - 1.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        b = np.where(c <= 0.0, 0.0, np.where(ss <= 0.0, 1.0, np.minimum(1.0, c * v_bar / s_sq)))
        weighted = np.maximum(s_vxx[1:] - 2.0 * mean_x * s_vx[1:] + mean_x * mean_x * s_v[1:], 0.0)
        corr = np.where((b > 0.0) & (b < 1.0), 4.0 / (Lm - 1.0) * b * weighted / s_sq, 0.0)
    cost[1:] = s_v[1:] + b * b * ss - 2.0 * (1.0 - 1.0 / Lm) * b * s_v[1:] + corr
    return cost


def bins_dynamic(data: Dataset, max_block: Optional[int] = None) -> BinPartition:
    """SURE-optimal partition into contiguous bins of at most ``floor(n^(2/3))`` observations.

    Observations are sorted by variance.  A cut is allowed only between
    distinct variances, so tied variances always share a bin; a tie group
    larger than the cap forms a bin on its own.  Interval bounds sit at the
    midpoints between the variances on either side of each cut.
    """
    n = data.n
    cap = floor_root(n, 2, 3) if max_block is None else int(max_block)
    cap = max(cap, 1)
    order = np.argsort(data.v, kind="stable")
    xs = data.x[order]
    vs = data.v[order]

    can_cut = np.ones(n + 1, dtype=bool)
    can_cut[1:n] = vs[1:] != vs[:-1]
    # start of the tie group containing each sorted position
    tie_start = np.maximum.accumulate(np.where(np.r_[True, vs[1:] != vs[:-1]], np.arange(n), 0))

    best = np.full(n + 1, math.inf)
    best[0] = 0.0
    back = np.full(n + 1, -1, dtype=int)
    for j in range(1, n + 1):
        if not can_cut[j]:
            continue
        g0 = int(tie_start[j - 1])
        length = max(min(cap, j), j - g0)
        costs = _segment_costs(xs, vs, j, length)
        starts = j - np.arange(1, length + 1)
        ok = can_cut[starts] & ((np.arange(1, length + 1) <= cap) | (starts == g0))
        totals = np.where(ok, best[starts] + costs, math.inf)
        i = int(np.argmin(totals))
        best[j] = totals[i]
        back[j] = starts[i]

    cuts = [n]
    while cuts[-1] > 0:
        cuts.append(int(back[cuts[-1]]))
    cuts.reverse()

    edges = [float(vs[0])]
    for c in cuts[1:-1]:
        a, b = float(vs[c - 1]), float(vs[c])
        mid = a + (b - a) / 2.0
        edges.append(mid if a < mid <= b else b)
    edges.append(float(vs[-1]))
    if edges[-1] <= edges[-2]:
        edges[-1] = float(np.nextafter(edges[-2], math.inf))
    part = _from_edges(data, edges)
    total = sum(block_sure(data.subset(idx)) for idx in part.membership)
    return BinPartition(part.intervals, part.membership, sure=float(total))


def parse_binning(text: str):
    """Turn ``log``, ``dynamic`` or ``width:L`` into a partition builder."""
    text = text.strip().lower()
    if text == "log":
        return bins_equal_log
    if text == "dynamic":
        return bins_dynamic
    if text.startswith("width:"):
        lip = float(text.split(":", 1)[1])
        if not lip > 0:
            raise ValueError("width:L needs L > 0")
        return lambda data: bins_equal_width(data, lip)
    raise ValueError(f"unknown binning {text!r}; expected log, dynamic or width:L")
