"""Name-based lookup of estimators, shared by the simulation harness and the CLI."""

from __future__ import annotations

from typing import Callable

from .binning import parse_binning
from .estimators import (
    Dataset,
    EstimateResult,
    grand_mean,
    group_linear,
    james_stein_plus,
    naive,
    sure_grand_mean,
    sure_parametric,
)

Estimator = Callable[[Dataset], EstimateResult]

METHOD_NAMES = ("naive", "grand-mean", "js", "sure-m", "sure-sg", "gl", "gl-dynamic")

_ALIASES = {
    "james-stein": "js",
    "sure-parametric": "sure-m",
    "sure-grand-mean": "sure-sg",
    "group-linear": "gl",
    "dynamic": "gl-dynamic",
}


def _sure_m(data: Dataset) -> EstimateResult:
    return sure_parametric(data)[0]


def make_group_linear(binning: str = "log") -> Estimator:
    build = parse_binning(binning)

    def estimator(data: Dataset) -> EstimateResult:
        return group_linear(data, build(data))

    estimator.__name__ = f"group_linear[{binning}]"
    return estimator


def canonical_method(name: str) -> str:
    """Resolve aliases such as ``group-linear`` to the short method name."""
    key = name.strip().lower()
    key = _ALIASES.get(key, key)
    if key not in METHOD_NAMES:
        raise ValueError(f"unknown method {name!r}; choose from {', '.join(METHOD_NAMES)}")
    return key


def get_estimator(name: str, binning: str = "log") -> Estimator:
    """Return the estimator registered under ``name``.

    ``binning`` only affects ``gl``; ``gl-dynamic`` always uses the SURE-optimal bins.
    """
    key = canonical_method(name)
    if key == "naive":
        return naive
    if key == "grand-mean":
        return grand_mean
    if key == "js":
        return james_stein_plus
    if key == "sure-m":
        return _sure_m
    if key == "sure-sg":
        return sure_grand_mean
    if key == "gl":
        return make_group_linear(binning)
    if key == "gl-dynamic":
        return make_group_linear("dynamic")
    raise ValueError(f"unknown method {name!r}; choose from {', '.join(METHOD_NAMES)}")
