"""Batting-average pipeline: ingest counts, transform, estimate, validate by TSE.

Estimation uses first-half records with at least 11 at-bats; validation
scores the players with at least 11 at-bats in both halves.  A permutation
analysis redraws each player's first-half hits from the hypergeometric law
given season totals.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np
from scipy.special import gammaln

from .estimators import Dataset, EstimateResult
from .methods import Estimator, get_estimator
from .simulation import seed_stream

MIN_AT_BATS = 11
SUBSETS = ("all", "pitchers", "non-pitchers")
BATTING_COLUMNS = ("id", "h1", "n1", "h2", "n2", "pitcher")


class DataError(ValueError):
    """Malformed input data."""


@dataclass(frozen=True)
class BattingRecord:
    id: str
    h1: int
    n1: int
    h2: int
    n2: int
    pitcher: bool

    def __post_init__(self):
        for h, n, half in ((self.h1, self.n1, 1), (self.h2, self.n2, 2)):
            if n < 0 or h < 0 or h > n:
                raise DataError(f"record {self.id}: need 0 <= h{half} <= n{half}, got h={h}, n={n}")


@dataclass(frozen=True)
class TransformedRecord:
    x: float
    v: float


def arcsine_transform(h: int, n: int) -> TransformedRecord:
    """``x = arcsin(sqrt((h + 1/4) / (n + 1/2)))`` with variance ``1/(4n)``."""
    if n < 1:
        raise DataError("at-bats must be at least 1")
    if h < 0 or h > n:
        raise DataError(f"hits {h} outside [0, {n}]")
    return TransformedRecord(math.asin(math.sqrt((h + 0.25) / (n + 0.5))), 1.0 / (4.0 * n))


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "t", "yes", "y"):
        return True
    if t in ("0", "false", "f", "no", "n", ""):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def read_batting_csv(source: Union[str, Path, io.TextIOBase]) -> list[BattingRecord]:
    """Read ``id,h1,n1,h2,n2,pitcher`` rows; raises :class:`DataError` with the line number."""
    if isinstance(source, (str, Path)):
        with open(source, newline="") as fh:
            return read_batting_csv(fh)
    reader = csv.DictReader(source)
    missing = [c for c in BATTING_COLUMNS if c not in (reader.fieldnames or [])]
    if missing:
        raise DataError(f"batting file lacks columns: {', '.join(missing)}")
    records = []
    for line, row in enumerate(reader, start=2):
        try:
            records.append(BattingRecord(
                id=row["id"].strip(),
                h1=int(row["h1"]), n1=int(row["n1"]),
                h2=int(row["h2"]), n2=int(row["n2"]),
                pitcher=_parse_bool(row["pitcher"]),
            ))
        except (TypeError, ValueError) as exc:
            raise DataError(f"line {line}: {exc}") from None
    ids = [r.id for r in records]
    if len(set(ids)) != len(ids):
        raise DataError("duplicate player ids")
    return records


def write_batting_csv(records: Iterable[BattingRecord], target) -> None:
    w = csv.writer(target, lineterminator="\n")
    w.writerow(BATTING_COLUMNS)
    for r in records:
        w.writerow([r.id, r.h1, r.n1, r.h2, r.n2, int(r.pitcher)])


def filter_eligibility(records: Iterable[BattingRecord], phase: str) -> list[BattingRecord]:
    if phase == "estimation":
        return [r for r in records if r.n1 >= MIN_AT_BATS]
    if phase == "validation":
        return [r for r in records if r.n1 >= MIN_AT_BATS and r.n2 >= MIN_AT_BATS]
    raise ValueError(f"phase must be 'estimation' or 'validation', got {phase!r}")


def select_subset(records: Iterable[BattingRecord], subset: str) -> list[BattingRecord]:
    if subset == "all":
        return list(records)
    if subset == "pitchers":
        return [r for r in records if r.pitcher]
    if subset == "non-pitchers":
        return [r for r in records if not r.pitcher]
    raise ValueError(f"unknown subset {subset!r}")


def first_half_dataset(records: Sequence[BattingRecord]) -> Dataset:
    t = [arcsine_transform(r.h1, r.n1) for r in records]
    return Dataset([r.x for r in t], [r.v for r in t])


@dataclass(frozen=True)
class TSEResult:
    tse: float
    tse_naive: float

    @property
    def ratio(self) -> float:
        return self.tse / self.tse_naive


def tse(estimates: Mapping[str, float], validation_records: Iterable[BattingRecord]) -> TSEResult:
    """Total squared error ``sum (X2 - est)^2 - 1/(4 N2)`` over the validation set.

    The naive reference predicts ``X2`` by ``X1``.
    """
    total = 0.0
    total_naive = 0.0
    for r in validation_records:
        if r.id not in estimates:
            raise KeyError(f"no estimate for validation player {r.id!r}")
        x2 = arcsine_transform(r.h2, r.n2)
        x1 = arcsine_transform(r.h1, r.n1)
        total += (x2.x - float(estimates[r.id])) ** 2 - x2.v
        total_naive += (x2.x - x1.x) ** 2 - x2.v
    return TSEResult(total, total_naive)


# ---------------------------------------------------------------------------
# Hypergeometric permutation
# ---------------------------------------------------------------------------


def _log_choose(n, k):
    return gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)


def hypergeometric_draw(rng: np.random.Generator, population: int, successes: int, draws: int) -> int:
    """Number of successes in ``draws`` taken without replacement, by inverse CDF.

    Probabilities are built from log-factorials and normalized after
    subtracting the largest log-mass, so large counts do not overflow.
    """
    lo = max(0, draws - (population - successes))
    hi = min(draws, successes)
    if lo == hi:
        return lo
    k = np.arange(lo, hi + 1, dtype=float)
    logp = _log_choose(successes, k) + _log_choose(population - successes, draws - k)
    p = np.exp(logp - logp.max())
    cdf = np.cumsum(p)
    u = rng.random() * cdf[-1]
    return int(lo + min(int(np.searchsorted(cdf, u, side="right")), hi - lo))


def hypergeometric_shuffle(record: BattingRecord, seed: Union[int, np.random.Generator]) -> BattingRecord:
    """Redraw first-half hits given the season totals; at-bats stay fixed."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    hits = record.h1 + record.h2
    h1 = hypergeometric_draw(rng, record.n1 + record.n2, hits, record.n1)
    return replace(record, h1=h1, h2=hits - h1)


def shuffle_records(records: Sequence[BattingRecord], rng: np.random.Generator) -> list[BattingRecord]:
    return [hypergeometric_shuffle(r, rng) for r in records]


# ---------------------------------------------------------------------------
# Table
# ---------------------------------------------------------------------------


def evaluate(records: Sequence[BattingRecord], estimator: Estimator) -> TSEResult:
    """Estimate from first-half data and score on the validation players."""
    est_set = filter_eligibility(records, "estimation")
    val_set = filter_eligibility(est_set, "validation")
    if not est_set or not val_set:
        raise DataError("no eligible players")
    result: EstimateResult = estimator(first_half_dataset(est_set))
    estimates = {r.id: float(e) for r, e in zip(est_set, result.estimates)}
    return tse(estimates, val_set)


@dataclass
class BaseballReport:
    methods: list[str]
    subsets: list[str]
    original: dict          # (method, subset) -> relative TSE
    shuffled: dict          # (method, subset) -> mean relative TSE over rounds
    shuffles: int
    metadata: dict

    def columns(self) -> list[str]:
        cols = ["method"] + list(self.subsets)
        if self.shuffles:
            cols += [f"{s} (shuffled)" for s in self.subsets]
        return cols

    def rows(self) -> list[list]:
        out = []
        for m in self.methods:
            row = [m] + [self.original[(m, s)] for s in self.subsets]
            if self.shuffles:
                row += [self.shuffled[(m, s)] for s in self.subsets]
            out.append(row)
        return out

    def to_csv(self, precision: int = 6) -> str:
        buf = io.StringIO()
        for key, value in self.metadata.items():
            buf.write(f"# {key}={value}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns())
        for row in self.rows():
            w.writerow([row[0]] + [format(v, f".{precision}g") for v in row[1:]])
        return buf.getvalue()

    def to_json(self, precision: int = 6) -> str:
        cols = self.columns()
        rows = [dict(zip(cols, [r[0]] + [float(format(v, f".{precision}g")) for v in r[1:]]))
                for r in self.rows()]
        return json.dumps({"metadata": self.metadata, "rows": rows}, indent=2)


def run_table(
    records: Sequence[BattingRecord],
    estimators: Union[Sequence[str], Mapping[str, Estimator]],
    subsets: Sequence[str] = SUBSETS,
    shuffles: int = 1000,
    seed: int = 0,
) -> BaseballReport:
    """Relative TSE per (estimator, subset), on the data and averaged over shuffled copies.

    Shuffle round ``r`` draws from ``seed_stream(seed, r)`` and shuffles every
    record once; all estimators and subsets then see that same shuffled
    season.
    """
    if not records:
        raise DataError("no records")
    if isinstance(estimators, Mapping):
        named = list(estimators.items())
    else:
        named = [(m, get_estimator(m)) for m in estimators]
    subsets = list(subsets)
    for s in subsets:
        if s not in SUBSETS:
            raise ValueError(f"unknown subset {s!r}")

    def table(recs):
        out = {}
        for s in subsets:
            part = select_subset(recs, s)
            for name, fn in named:
                out[(name, s)] = evaluate(part, fn).ratio
        return out

    original = table(records)
    shuffled: dict = {}
    if shuffles > 0:
        acc = {key: 0.0 for key in original}
        for r in range(shuffles):
            round_table = table(shuffle_records(records, seed_stream(seed, r)))
            for key, value in round_table.items():
                acc[key] += value
        shuffled = {key: value / shuffles for key, value in acc.items()}
    return BaseballReport(
        methods=[name for name, _ in named],
        subsets=subsets,
        original=original,
        shuffled=shuffled,
        shuffles=shuffles,
        metadata={"seed": seed, "shuffles": shuffles},
    )
