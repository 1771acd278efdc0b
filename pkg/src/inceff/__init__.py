"""Conditional causal effects under incremental propensity-score interventions.

An incremental intervention multiplies each subject's odds of treatment by a
factor delta. This package estimates the counterfactual mean curve, contrasts
between two shifts, the derivative effect, and the variance of the derivative
effect (a heterogeneity summary with a one-sided test), all with
influence-function-based de-biasing and cross-fitted nuisance estimation.
"""

__version__ = "0.1.0"

from .crossfit import (
    AverageEffectEstimate,
    FoldPlan,
    crossfit_nuisances,
    estimate_average_effect,
    make_folds,
)
from .data import Dataset, NuisanceValues, Observation
from .effects import (
    EffectKind,
    EifComponents,
    PseudoOutcomeTable,
    eif_components,
    plugin_value,
    pseudo_outcome,
    pseudo_outcome_cide,
    pseudo_outcome_cie,
    pseudo_outcome_table,
    shift_propensity,
    weight_omega,
)
from .exceptions import ConfigError, DataError, InceffError, NumericalError
from .heterogeneity import (
    VcideResult,
    estimate_vcide_full,
    estimate_vcide_subset,
    heterogeneity_test,
)
from .idr import IdrLearner, SmootherSpec, baseline_tlearner, fit_idr
from .io import ColumnRoles, ResultDocument, diagnose_positivity, ingest_csv
from .nuisance import (
    KnnRegressor,
    NadarayaWatson,
    NoiseRates,
    NuisanceModel,
    NuisanceSpecs,
    PenalizedGlm,
    RegressorSpec,
    TrueNuisances,
    fit_nuisances,
    predict_nuisances,
    synthesize_noisy_nuisances,
)
from .projection import Basis, ProjectionLearner, fit_projection

__all__ = [
    "__version__",
    "AverageEffectEstimate",
    "Basis",
    "ColumnRoles",
    "ConfigError",
    "DataError",
    "Dataset",
    "EffectKind",
    "EifComponents",
    "FoldPlan",
    "IdrLearner",
    "InceffError",
    "KnnRegressor",
    "NadarayaWatson",
    "NoiseRates",
    "NuisanceModel",
    "NuisanceSpecs",
    "NuisanceValues",
    "NumericalError",
    "Observation",
    "PenalizedGlm",
    "ProjectionLearner",
    "PseudoOutcomeTable",
    "RegressorSpec",
    "ResultDocument",
    "SmootherSpec",
    "TrueNuisances",
    "VcideResult",
    "baseline_tlearner",
    "crossfit_nuisances",
    "diagnose_positivity",
    "eif_components",
    "estimate_average_effect",
    "estimate_vcide_full",
    "estimate_vcide_subset",
    "fit_idr",
    "fit_nuisances",
    "fit_projection",
    "heterogeneity_test",
    "ingest_csv",
    "make_folds",
    "plugin_value",
    "predict_nuisances",
    "pseudo_outcome",
    "pseudo_outcome_cide",
    "pseudo_outcome_cie",
    "pseudo_outcome_table",
    "shift_propensity",
    "synthesize_noisy_nuisances",
    "weight_omega",
]
