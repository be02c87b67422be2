"""Distribution testers over simulated conditional-sampling oracles.

The package provides simulated SAMP, COND and PAIRCOND oracles with exact
query accounting, the testers built on them, exact reference values and
an experiment harness.
"""

from .config import DEFAULT_CONFIG, Config, ConfigError
from .dist_core import (
    ArgumentError,
    BlockView,
    Distribution,
    OracleHandle,
    PiecewiseDistribution,
    QueryLedger,
    SubsetView,
    ZeroMassError,
    cond,
    load_distribution,
    make_distribution,
    make_piecewise,
    pcond,
    restrict,
    samp,
    save_distribution,
)
from .monotonicity import (
    Decomposition,
    ReducedView,
    dist_to_flat,
    expo_tester,
    flatten,
    oblivious_decomposition,
    reduce_distribution,
    test_monotone,
)
from .paircond_identity import bucket_partition, pcond_id, small_support_identity
from .primitives import INFINITY, CompareResult, EmptyGridError, Verdict, compare, dyadic_levels, geometric_count
from .tolerant_identity import tolerant_id
from .tolerant_uniformity import tolerant_unif
from .truth import (
    LPResult,
    exact_dist_to_expo,
    exact_dist_to_monotone,
    exact_min_sum,
    exact_tv,
    expo_witness_expectation,
    pair_expectation,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_CONFIG",
    "Config",
    "ConfigError",
    "ArgumentError",
    "ZeroMassError",
    "Distribution",
    "PiecewiseDistribution",
    "OracleHandle",
    "SubsetView",
    "BlockView",
    "QueryLedger",
    "make_distribution",
    "make_piecewise",
    "restrict",
    "load_distribution",
    "save_distribution",
    "samp",
    "cond",
    "pcond",
    "INFINITY",
    "Verdict",
    "CompareResult",
    "EmptyGridError",
    "compare",
    "geometric_count",
    "dyadic_levels",
    "tolerant_unif",
    "tolerant_id",
    "Decomposition",
    "ReducedView",
    "oblivious_decomposition",
    "flatten",
    "reduce_distribution",
    "dist_to_flat",
    "expo_tester",
    "test_monotone",
    "bucket_partition",
    "small_support_identity",
    "pcond_id",
    "LPResult",
    "exact_tv",
    "exact_min_sum",
    "exact_dist_to_monotone",
    "exact_dist_to_expo",
    "expo_witness_expectation",
    "pair_expectation",
]
