"""Feature subset selection and kernel ridge regression for effort estimation.

The package reproduces a full comparison protocol: ingest tabular project
data, draw repeated 80/20 partitions, select cost-driver subsets on each
training split with nine selection methods (greedy wrappers and filters,
stepwise regression, connection-weight elimination, genetic search), then
score dual-form kernel ridge regression on the full and selected feature
sets with MMRE and PRED metrics.
"""

__version__ = "0.1.0"

from .ann import MlpModel, TrainConfig, architecture_sweep, garson_eliminate, garson_importance, mlp_train
from .dataset import (
    Dataset,
    FeatureDescriptor,
    PreprocessRules,
    RawTable,
    SplitPlan,
    ingest,
    make_splits,
    minmax_normalize,
    one_hot,
    read_csv,
)
from .errors import ComputeError, DataError, Error
from .harness import (
    ExperimentConfig,
    ExperimentReport,
    MethodId,
    PartitionResult,
    exhaustive_oracle,
    run_experiment,
    run_method,
)
from .linreg import LinearModel, StepwiseConfig, ls_fit, partial_f_pvalue, stepwise
from .metrics import EvalResult, evaluate, mmre, pred, relative_error
from .ridge import KernelConfig, RidgeConfig, RidgeModel, cv_score, fit, kernel_eval, predict
from .search import (
    WORST_SCORE,
    Evaluator,
    FeatureSubset,
    GaConfig,
    backward_eliminate,
    forward_select,
    ga_select,
)

__all__ = [
    "__version__",
    "ComputeError",
    "DataError",
    "Dataset",
    "Error",
    "EvalResult",
    "Evaluator",
    "ExperimentConfig",
    "ExperimentReport",
    "FeatureDescriptor",
    "FeatureSubset",
    "GaConfig",
    "KernelConfig",
    "LinearModel",
    "MethodId",
    "MlpModel",
    "PartitionResult",
    "PreprocessRules",
    "RawTable",
    "RidgeConfig",
    "RidgeModel",
    "SplitPlan",
    "StepwiseConfig",
    "TrainConfig",
    "WORST_SCORE",
    "architecture_sweep",
    "backward_eliminate",
    "cv_score",
    "evaluate",
    "exhaustive_oracle",
    "fit",
    "forward_select",
    "ga_select",
    "garson_eliminate",
    "garson_importance",
    "ingest",
    "kernel_eval",
    "ls_fit",
    "make_splits",
    "minmax_normalize",
    "mlp_train",
    "mmre",
    "one_hot",
    "partial_f_pvalue",
    "pred",
    "predict",
    "read_csv",
    "relative_error",
    "run_experiment",
    "run_method",
    "stepwise",
]
