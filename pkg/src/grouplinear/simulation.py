"""Generative scenarios, Monte Carlo risk estimation and oracle benchmarks.

Each scenario draws i.i.d. triples ``(Y, xi, A)`` with ``E[Y | xi, A] = xi``
and ``Var(Y | xi, A) = A``; the estimators see ``(Y, A)`` and are scored
against ``xi`` with the normalized squared-error loss.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Mapping, NamedTuple, Optional, Sequence, Union

import numpy as np
from scipy import integrate, stats

from .estimators import Dataset, EstimateResult, NormalNormalParams, _fit_normal_prior, loss
from .methods import Estimator, get_estimator

Sampler = Callable[[np.random.Generator, int], np.ndarray]


def seed_stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, key...)``; replicate results do not depend on run order."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


@dataclass(frozen=True)
class Scenario:
    """A population for ``(Y, xi, A)``.

    ``expect_over_variance(f)`` returns ``E[f(A)]`` exactly (quadrature or a
    finite sum).  ``a_star``/``b_star`` are the best linear-in-Y location and
    shrinkage functions; ``mu_star``/``gamma_star`` are the reference values
    for the best normal-prior rule.
    """

    label: str
    description: str
    sample_variance: Sampler
    sample_mean: Callable[[np.random.Generator, np.ndarray], np.ndarray]
    sample_noise: Callable[[np.random.Generator, np.ndarray], np.ndarray]
    expect_over_variance: Optional[Callable[[Callable[[np.ndarray], np.ndarray]], float]] = None
    a_star: Optional[Callable[[np.ndarray], np.ndarray]] = None
    b_star: Optional[Callable[[np.ndarray], np.ndarray]] = None
    mu_star: Optional[float] = None
    gamma_star: Optional[float] = None


@dataclass(frozen=True, eq=False)
class LatentDataset:
    data: Dataset
    theta: np.ndarray

    def __post_init__(self):
        if self.theta.shape != self.data.x.shape:
            raise ValueError("theta and data lengths disagree")


@dataclass(frozen=True)
class RiskReport:
    scenario: str
    method: str
    n: Optional[int]
    replications: int
    risk: float
    mcse: float


class XKBOracle(NamedTuple):
    value: float
    params: NormalNormalParams
    mcse: float


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------


def _uniform_expectation(lo: float, hi: float):
    def expect(f):
        val, _ = integrate.quad(lambda a: float(f(np.asarray(a))), lo, hi, epsabs=1e-13, epsrel=1e-12)
        return val / (hi - lo)
    return expect


def _inv_chi2_expectation(df: int):
    dist = stats.invgamma(a=df / 2.0, scale=0.5)

    def expect(f):
        val, _ = integrate.quad(lambda a: float(f(np.asarray(a))) * dist.pdf(a), 0.0, np.inf,
                                epsabs=1e-13, epsrel=1e-10, limit=200)
        return val
    return expect


def _two_point_expectation(a0: float, a1: float):
    def expect(f):
        return 0.5 * float(f(np.asarray(a0))) + 0.5 * float(f(np.asarray(a1)))
    return expect


def _unif_var(rng, n):
    return rng.uniform(0.1, 1.0, n)


def _gauss_noise(rng, a):
    return rng.normal(0.0, 1.0, a.size) * np.sqrt(a)


def _uniform_noise(rng, a):
    half = np.sqrt(3.0 * a)
    return rng.uniform(-1.0, 1.0, a.size) * half


def _xi_equals_a(rng, a):
    return a.copy()


def _e_variance(rng, n):
    return np.where(rng.random(n) < 0.5, 0.1, 0.5)


def _e_mean(rng, a):
    z = rng.normal(0.0, 1.0, a.size)
    return np.where(a == 0.1, 2.0 + math.sqrt(0.1) * z, math.sqrt(0.5) * z)


def _one(v):
    return np.ones_like(np.asarray(v, dtype=float))


def _identity(v):
    return np.asarray(v, dtype=float)


SCENARIOS: dict[str, Scenario] = {
    "a": Scenario(
        "a", "A ~ U(0.1, 1), xi ~ N(0, 1) independent, Y ~ N(xi, A)",
        _unif_var, lambda rng, a: rng.normal(0.0, 1.0, a.size), _gauss_noise,
        _uniform_expectation(0.1, 1.0),
        a_star=lambda v: np.zeros_like(np.asarray(v, dtype=float)),
        b_star=lambda v: v / (v + 1.0),
        mu_star=0.0, gamma_star=1.0,
    ),
    "b": Scenario(
        "b", "A ~ U(0.1, 1), xi ~ U(0, 1) independent, Y ~ N(xi, A)",
        _unif_var, lambda rng, a: rng.uniform(0.0, 1.0, a.size), _gauss_noise,
        _uniform_expectation(0.1, 1.0),
        a_star=lambda v: np.full_like(np.asarray(v, dtype=float), 0.5),
        b_star=lambda v: v / (v + 1.0 / 12.0),
        mu_star=0.5, gamma_star=0.083,
    ),
    "c": Scenario(
        "c", "A ~ U(0.1, 1), xi = A, Y ~ N(xi, A)",
        _unif_var, _xi_equals_a, _gauss_noise,
        _uniform_expectation(0.1, 1.0),
        a_star=_identity, b_star=_one,
        mu_star=0.6, gamma_star=0.078,
    ),
    "d": Scenario(
        "d", "A ~ 1/chi2_10, xi = A, Y ~ N(xi, A)",
        lambda rng, n: 1.0 / rng.chisquare(10, n), _xi_equals_a, _gauss_noise,
        _inv_chi2_expectation(10),
        a_star=_identity, b_star=_one,
        mu_star=0.13, gamma_star=0.0032,
    ),
    "e": Scenario(
        "e", "A in {0.1, 0.5} equally likely, xi|A=0.1 ~ N(2, 0.1), xi|A=0.5 ~ N(0, 0.5), Y ~ N(xi, A)",
        _e_variance, _e_mean, _gauss_noise,
        _two_point_expectation(0.1, 0.5),
        a_star=lambda v: np.where(np.asarray(v) == 0.1, 2.0, 0.0),
        b_star=lambda v: np.full_like(np.asarray(v, dtype=float), 0.5),
        mu_star=0.15, gamma_star=0.84,
    ),
    "f": Scenario(
        "f", "A ~ U(0.1, 1), xi = A, Y ~ U(xi - sqrt(3A), xi + sqrt(3A))",
        _unif_var, _xi_equals_a, _uniform_noise,
        _uniform_expectation(0.1, 1.0),
        a_star=_identity, b_star=_one,
        mu_star=0.6, gamma_star=0.078,
    ),
}


def get_scenario(label: Union[str, Scenario]) -> Scenario:
    if isinstance(label, Scenario):
        return label
    try:
        return SCENARIOS[label.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown scenario {label!r}; choose from {', '.join(SCENARIOS)}") from None


def _draw(scenario: Scenario, n: int, rng: np.random.Generator):
    a = scenario.sample_variance(rng, n)
    xi = scenario.sample_mean(rng, a)
    y = xi + scenario.sample_noise(rng, a)
    return y, xi, a


def sample_scenario(scenario, n: int, seed: Union[int, np.random.Generator]) -> LatentDataset:
    """Draw ``n`` independent ``(X_i, theta_i, V_i)`` triples."""
    sc = get_scenario(scenario)
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    y, xi, a = _draw(sc, n, rng)
    return LatentDataset(Dataset(y, a), xi)


# ---------------------------------------------------------------------------
# Risk estimation
# ---------------------------------------------------------------------------


def _resolve(estimator) -> tuple[str, Estimator]:
    if isinstance(estimator, str):
        return estimator, get_estimator(estimator)
    return getattr(estimator, "__name__", "estimator"), estimator


def _report(scenario: str, method: str, n: int, losses: Sequence[float]) -> RiskReport:
    arr = np.asarray(losses, dtype=float)
    N = arr.size
    se = float(arr.std(ddof=1) / math.sqrt(N)) if N > 1 else 0.0
    return RiskReport(scenario, method, n, N, float(arr.mean()), se)


def _replicate_losses(sc: Scenario, fns: Sequence[Estimator], n: int, replications: int, seed: int):
    out = np.empty((len(fns), replications))
    for r in range(replications):
        latent = sample_scenario(sc, n, seed_stream(seed, r))
        for k, fn in enumerate(fns):
            out[k, r] = loss(fn(latent.data).estimates, latent.theta)
    return out


def estimate_risk(scenario, estimator, n: int, replications: int, seed: int = 0) -> RiskReport:
    """Monte Carlo risk of ``estimator``; replicate ``r`` uses ``seed_stream(seed, r)``."""
    if replications < 1:
        raise ValueError("need at least one replication")
    sc = get_scenario(scenario)
    name, fn = _resolve(estimator)
    losses = _replicate_losses(sc, [fn], n, replications, seed)[0]
    return _report(sc.label, name, n, losses)


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------


def oracle_linear(scenario, mc_size: int = 10**6, seed: int = 0) -> float:
    """Risk ``E[A (1 - b*(A))]`` of the best rule linear in Y given A.

    Exact when the scenario provides ``expect_over_variance``; otherwise a
    Monte Carlo average over ``mc_size`` draws of A.
    """
    sc = get_scenario(scenario)
    if sc.b_star is None:
        raise ValueError(f"scenario {sc.label!r} does not define b*")
    f = lambda a: a * (1.0 - sc.b_star(a))  # noqa: E731
    if sc.expect_over_variance is not None:
        return float(sc.expect_over_variance(f))
    a = sc.sample_variance(np.random.default_rng(seed), mc_size)
    return float(np.mean(f(a)))


def oracle_xkb(scenario, mc_size: int = 10**6, seed: int = 0, grid_size: int = 241) -> XKBOracle:
    """Best rule of the form ``Y - A/(A+gamma) (Y - mu)`` and its risk.

    Sample-average approximation over ``mc_size`` draws of ``(xi, A)``; the
    inner expectation over Y is done analytically (only ``Var(Y|xi,A) = A``
    is needed, so the non-Gaussian scenario is handled the same way).  The
    search profiles out mu exactly as in the parametric SURE estimator.
    """
    sc = get_scenario(scenario)
    rng = np.random.default_rng(seed)
    a = sc.sample_variance(rng, mc_size)
    xi = sc.sample_mean(rng, a)
    mu, gamma, total = _fit_normal_prior(xi, a, 1.0, grid_size)
    if math.isinf(gamma):
        per = a
    else:
        b = a / (a + gamma)
        per = (1.0 - b) ** 2 * a + b * b * (xi - mu) ** 2
    mcse = float(per.std(ddof=1) / math.sqrt(mc_size))
    return XKBOracle(float(total / mc_size), NormalNormalParams(mu, gamma), mcse)


# ---------------------------------------------------------------------------
# Risk curves
# ---------------------------------------------------------------------------


@dataclass
class RiskTable:
    rows: list[RiskReport]
    metadata: dict = field(default_factory=dict)

    COLUMNS = ("scenario", "method", "n", "N", "risk", "mcse")

    def _cells(self, row: RiskReport, precision: int):
        fmt = lambda v: "" if v is None else format(v, f".{precision}g")  # noqa: E731
        return [row.scenario, row.method, "" if row.n is None else str(row.n),
                str(row.replications), fmt(row.risk), fmt(row.mcse)]

    def to_csv(self, precision: int = 6) -> str:
        buf = io.StringIO()
        for key, value in self.metadata.items():
            buf.write(f"# {key}={value}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for row in self.rows:
            w.writerow(self._cells(row, precision))
        return buf.getvalue()

    def to_json(self, precision: int = 6) -> str:
        rnd = lambda v: None if v is None else float(format(v, f".{precision}g"))  # noqa: E731
        rows = [{"scenario": r.scenario, "method": r.method, "n": r.n, "N": r.replications,
                 "risk": rnd(r.risk), "mcse": rnd(r.mcse)} for r in self.rows]
        return json.dumps({"metadata": self.metadata, "rows": rows}, indent=2)

    def lookup(self, method: str, n: Optional[int] = None) -> RiskReport:
        for r in self.rows:
            if r.method == method and (n is None or r.n == n):
                return r
        raise KeyError((method, n))


def risk_curve(
    scenario,
    estimators: Union[Sequence[str], Mapping[str, Estimator]],
    n_grid: Iterable[int],
    replications: int,
    seed: int = 0,
    oracles: bool = True,
    oracle_mc_size: int = 10**6,
) -> RiskTable:
    """Risk of every estimator at every ``n``, plus the two oracle reference levels.

    All estimators see the same simulated datasets at each ``(n, r)``.
    Rows are ordered by ``n`` then by the order of ``estimators``.
    """
    sc = get_scenario(scenario)
    grid = [int(n) for n in n_grid]
    if not grid:
        raise ValueError("n_grid must not be empty")
    if isinstance(estimators, Mapping):
        named = list(estimators.items())
    else:
        named = [_resolve(e) for e in estimators]
    rows: list[RiskReport] = []
    for n in grid:
        losses = _replicate_losses(sc, [fn for _, fn in named], n, replications, seed)
        rows.extend(_report(sc.label, name, n, losses[k]) for k, (name, _) in enumerate(named))
    if oracles:
        xkb = oracle_xkb(sc, mc_size=oracle_mc_size, seed=seed)
        rows.append(RiskReport(sc.label, "oracle-xkb", None, oracle_mc_size, xkb.value, xkb.mcse))
        rows.append(RiskReport(sc.label, "oracle-linear", None, oracle_mc_size, oracle_linear(sc, oracle_mc_size, seed), 0.0))
    return RiskTable(rows)
