"""Latent-variable time-series regression toolkit.

Block-structured matrix operators, constrained fixed-point estimators
for latent-variable ARX models, their closed-form special cases, and a
rolling out-of-sample forecasting harness with CSV/JSON/figure output.
"""

from .blockops import (
    BlockStructure,
    BlockVec,
    blockwise_inner,
    direct_sum,
    factor_khatri_rao,
    khatri_rao_vec,
)
from .clarx import FitResult, fit, predict
from .design import (
    Dataset,
    DependentSpec,
    ExogenousGroup,
    ModelSpec,
    SampleOptions,
    SeriesTable,
    SolverOptions,
    assemble_dataset,
    build_versions,
    log_returns,
    quarter_end_sample,
)
from .errors import LarxError
from .harness import (
    ForecastRun,
    naive_benchmark,
    oos_r2,
    pca_redundancy_check,
    rolling_oos_forecast,
    synth_generate,
)
from .moments import (
    MomentSet,
    WeightVector,
    build_moment_set,
    exp_decay_weights,
    weighted_cov,
    weighted_mean,
)
from .special import (
    caa_decompose,
    cca_decompose,
    fit_lar1,
    fit_lsr,
    fit_lvmr,
    trivial_sdm,
)

__version__ = "0.1.0"

__all__ = [
    "BlockStructure",
    "BlockVec",
    "Dataset",
    "DependentSpec",
    "ExogenousGroup",
    "FitResult",
    "ForecastRun",
    "LarxError",
    "ModelSpec",
    "MomentSet",
    "SampleOptions",
    "SeriesTable",
    "SolverOptions",
    "WeightVector",
    "assemble_dataset",
    "blockwise_inner",
    "build_moment_set",
    "build_versions",
    "caa_decompose",
    "cca_decompose",
    "direct_sum",
    "exp_decay_weights",
    "factor_khatri_rao",
    "fit",
    "fit_lar1",
    "fit_lsr",
    "fit_lvmr",
    "khatri_rao_vec",
    "log_returns",
    "naive_benchmark",
    "oos_r2",
    "pca_redundancy_check",
    "predict",
    "quarter_end_sample",
    "rolling_oos_forecast",
    "synth_generate",
    "trivial_sdm",
    "weighted_cov",
    "weighted_mean",
]
