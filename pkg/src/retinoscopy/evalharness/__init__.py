"""Dataset ingestion and agreement/screening statistics."""

from .dataset import GroundTruthRecord, join_predictions, load_dataset, load_predictions, write_dataset
from .metrics import (
    CLASS_ORDER,
    ClassMetrics,
    MetricsReport,
    bland_altman,
    bland_altman_csv,
    class_metrics,
    evaluate,
    limits_of_agreement,
    mae_stats,
    pct_within,
    pearson,
    write_metrics,
)

__all__ = [
    "CLASS_ORDER",
    "ClassMetrics",
    "GroundTruthRecord",
    "MetricsReport",
    "bland_altman",
    "bland_altman_csv",
    "class_metrics",
    "evaluate",
    "join_predictions",
    "limits_of_agreement",
    "load_dataset",
    "load_predictions",
    "mae_stats",
    "pct_within",
    "pearson",
    "write_dataset",
    "write_metrics",
]
