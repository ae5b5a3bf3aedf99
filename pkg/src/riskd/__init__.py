"""riskd: a population-health risk analysis engine.

Studies are declared as small JSON cartridges (response, cohort, risk
factors, workflow), executed as survey-weighted association scans or
supervised cadre models, and persisted with full provenance links in a
content-addressed store.
"""

from .cartridges import (
    CohortCartridge,
    PositiveRule,
    ResponseCartridge,
    RiskFactorCartridge,
    StudyPlan,
    WorkflowCartridge,
    parse_cartridge,
    resolve_study,
    serialize_cartridge,
)
from .datastore import (
    Clause,
    CohortFilter,
    Dataset,
    VariableDef,
    apply_cohort,
    load_dataset,
    serialize_dataset,
)
from .errors import AnalysisError, RiskdError, StorageError, ValidationError
from .pipeline import StudyOutcome, dataset_fingerprint, run_study
from .preprocess import DesignMatrix, build_design
from .provenance import ProvenanceChain, ProvenanceStore, ResultsCartridge
from .scm import (
    CadreModelParams,
    ScmFitResult,
    ScmHyperparams,
    assign_cadre,
    gate_probabilities,
    loss_and_gradients,
    risk_score,
    train_scm,
)
from .swglm import (
    AssociationResult,
    GlmFit,
    adjust_fdr,
    ewas_scan,
    fit_weighted_logistic,
    wald_test,
)
from .synthetic import SyntheticSpec, generate_synthetic
from .version import VERSION as __version__

__all__ = [
    "AnalysisError",
    "AssociationResult",
    "CadreModelParams",
    "Clause",
    "CohortCartridge",
    "CohortFilter",
    "Dataset",
    "DesignMatrix",
    "GlmFit",
    "PositiveRule",
    "ProvenanceChain",
    "ProvenanceStore",
    "ResponseCartridge",
    "ResultsCartridge",
    "RiskFactorCartridge",
    "RiskdError",
    "ScmFitResult",
    "ScmHyperparams",
    "StorageError",
    "StudyOutcome",
    "StudyPlan",
    "SyntheticSpec",
    "ValidationError",
    "VariableDef",
    "WorkflowCartridge",
    "adjust_fdr",
    "apply_cohort",
    "assign_cadre",
    "build_design",
    "dataset_fingerprint",
    "ewas_scan",
    "fit_weighted_logistic",
    "gate_probabilities",
    "generate_synthetic",
    "load_dataset",
    "loss_and_gradients",
    "parse_cartridge",
    "resolve_study",
    "risk_score",
    "run_study",
    "serialize_cartridge",
    "serialize_dataset",
    "train_scm",
    "wald_test",
    "__version__",
]
