"""Decide whether missing values must be imputed before training, and learn certain models."""

__version__ = "0.1.0"

from .acm import (  # noqa: E402
    AcmConfig,
    AcmReport,
    EdgeRepair,
    enumerate_edge_repairs,
    h_value,
    learn_acm_linreg_exact,
    learn_acm_sampled,
    sample_edge_repairs,
    worst_edge_per_example,
)
from .baselines import drop_incomplete, mean_impute  # noqa: E402
from .certain_kernel_svm import (  # noqa: E402
    KernelRange,
    check_certain_arccos_svm,
    check_certain_poly_svm,
    check_certain_rbf_svm,
    kernel_range_arccos,
    kernel_range_rbf,
    lower_bound_margins,
)
from .certain_linear_svm import check_certain_linear_svm  # noqa: E402
from .certain_linreg import CertainReport, Witness, check_certain_linreg  # noqa: E402
from .dataset import (  # noqa: E402
    ContractError,
    DataError,
    IncompleteDataset,
    Repair,
    RepairBounds,
    apply_repair,
    derive_bounds,
    load_csv,
    missing_factor,
    missing_sets,
    submatrices,
)
from .oracle import GridSpec, grid_repairs, oracle_certain, oracle_g, oracle_kernel_range  # noqa: E402
from .trainers import (  # noqa: E402
    DualModel,
    KernelSpec,
    LinearModel,
    SolverError,
    train_kernel_svm_dual,
    train_linear_svm,
    train_ols,
)
