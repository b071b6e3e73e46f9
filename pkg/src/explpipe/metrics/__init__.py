from explpipe.metrics.ranking import (
    UndefinedMetricError,
    average_precision,
    average_precision_tie_range,
    constant_baseline,
    oracle_select1,
    random_baseline_ap,
    random_baseline_select1,
    select1_accuracy,
)
from explpipe.metrics.stats import (
    SpearmanResult,
    WilcoxonResult,
    head_to_head_tally,
    spearman_rho,
    wilcoxon_signed_rank_one_sided,
)

__all__ = [
    "SpearmanResult",
    "UndefinedMetricError",
    "WilcoxonResult",
    "average_precision",
    "average_precision_tie_range",
    "constant_baseline",
    "head_to_head_tally",
    "oracle_select1",
    "random_baseline_ap",
    "random_baseline_select1",
    "select1_accuracy",
    "spearman_rho",
    "wilcoxon_signed_rank_one_sided",
]
