"""Group-linear empirical Bayes estimation of heteroscedastic normal means."""

__version__ = "0.1.0"

from .binning import (
    BinPartition,
    bins_dynamic,
    bins_equal_log,
    bins_equal_width,
    parse_binning,
    partition_sure,
)
from .estimators import (
    BlockStats,
    Dataset,
    DegenerateBlockError,
    EstimateResult,
    InvalidPartitionError,
    NormalNormalParams,
    Observation,
    block_sure,
    c_star,
    grand_mean,
    group_linear,
    james_stein_plus,
    loss,
    naive,
    spherical_shrink,
    sure_grand_mean,
    sure_grand_mean_objective,
    sure_parametric,
    sure_parametric_objective,
)
from .methods import METHOD_NAMES, get_estimator
from .simulation import (
    SCENARIOS,
    RiskReport,
    RiskTable,
    Scenario,
    estimate_risk,
    oracle_linear,
    oracle_xkb,
    risk_curve,
    sample_scenario,
)

__all__ = [
    "BinPartition", "BlockStats", "Dataset", "DegenerateBlockError", "EstimateResult",
    "InvalidPartitionError", "METHOD_NAMES", "NormalNormalParams", "Observation", "RiskReport",
    "RiskTable", "SCENARIOS", "Scenario", "bins_dynamic", "bins_equal_log", "bins_equal_width",
    "block_sure", "c_star", "estimate_risk", "get_estimator", "grand_mean", "group_linear",
    "james_stein_plus", "loss", "naive", "oracle_linear", "oracle_xkb", "parse_binning",
    "partition_sure", "risk_curve", "sample_scenario", "spherical_shrink", "sure_grand_mean",
    "sure_grand_mean_objective", "sure_parametric", "sure_parametric_objective",
]
