"""fairsift: fairness metrics, redundancy clustering, and sensitivity analysis."""

from .datamodel import (
    ConfigError,
    DataError,
    DatasetSpec,
    EncodedDataset,
    GroupCoverageError,
    GroupedConfusionMatrix,
    build_grouped_confusion,
    encode_dataset,
    load_dataset,
)
from .harness import (
    CvPlan,
    ExperimentConfig,
    MetricSampleMatrix,
    make_cv_plan,
    read_results_csv,
    run_experiment,
    write_results_csv,
)
from .metrics import (
    METRIC_CATALOG,
    MetricDef,
    compute_classification_metrics,
    compute_dataset_metrics,
    label_fair,
)
from .models import (
    LogisticConfig,
    LogisticModel,
    Mitigator,
    ReweighingMitigator,
    reweigh,
    train_logistic,
)
from .report import AnalysisConfig, build_analysis

__version__ = "0.1.0"

__all__ = [
    "AnalysisConfig",
    "ConfigError",
    "CvPlan",
    "DataError",
    "DatasetSpec",
    "EncodedDataset",
    "ExperimentConfig",
    "GroupCoverageError",
    "GroupedConfusionMatrix",
    "LogisticConfig",
    "LogisticModel",
    "METRIC_CATALOG",
    "MetricDef",
    "MetricSampleMatrix",
    "Mitigator",
    "ReweighingMitigator",
    "build_analysis",
    "build_grouped_confusion",
    "compute_classification_metrics",
    "compute_dataset_metrics",
    "encode_dataset",
    "label_fair",
    "load_dataset",
    "make_cv_plan",
    "read_results_csv",
    "reweigh",
    "run_experiment",
    "train_logistic",
    "write_results_csv",
    "__version__",
]
