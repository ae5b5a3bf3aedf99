import numpy as np
import pytest

from riskd.cartridges import (
    CohortCartridge,
    PositiveRule,
    ResponseCartridge,
    RiskFactorCartridge,
    WorkflowCartridge,
)
from riskd.datastore import Clause, CohortFilter
from riskd.preprocess import INTERCEPT_NAME, ColumnMeta, DesignMatrix
from riskd.synthetic import (
    OutcomeSpec,
    PlantedCadre,
    SyntheticSpec,
    default_exposures,
    generate_synthetic,
)

EWAS_HP = {"alpha": 0.05, "fdr_method": "benjamini-hochberg"}


def make_design(X, y, w=None):
    """Intercept-plus-factors design straight from arrays."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n, k = X.shape
    if w is None:
        w = np.ones(n)
    meta = [ColumnMeta(name=INTERCEPT_NAME, source_var="", role="intercept")]
    meta += [ColumnMeta(name=f"X{j}", source_var=f"X{j}", role="factor")
             for j in range(k)]
    return DesignMatrix(
        values=np.column_stack([np.ones(n), X]),
        column_meta=tuple(meta),
        response=np.asarray(y, dtype=np.float64),
        weights=np.asarray(w, dtype=np.float64),
        row_index=tuple(range(n)),
        subject_ids=tuple(range(100001, 100001 + n)))


def everyone_cohort():
    return CohortCartridge(
        id="coh-all", label="all ages",
        filter=CohortFilter(clauses=(Clause("RIDAGEYR", ">=", 0.0),)))


def binary_response(var="Y1"):
    return ResponseCartridge(
        id="resp-y", disease_label="synthetic outcome", response_var=var,
        positive_rule=PositiveRule(codes=(1.0,)),
        required_controls=(), domain_axioms=())


def exposure_factors(p):
    return RiskFactorCartridge(
        id="rf-x", category_label="synthetic exposures",
        factors=tuple(e.id for e in default_exposures(p)),
        per_factor_axioms={})


def ewas_workflow(preprocessing=("complete-case", "standardize")):
    return WorkflowCartridge(id="wf-scan", preprocessing=tuple(preprocessing),
                             method="swglm-ewas", hyperparams=dict(EWAS_HP))


def scm_workflow(**hp):
    base = {"M": 2, "gamma": 1.0, "learning_rate": 0.1, "epochs": 50,
            "batch_size": 128, "lambda_w": (0.0, 0.0), "lambda_d": (0.0, 0.0),
            "seed": 0}
    base.update(hp)
    base.update(EWAS_HP)
    return WorkflowCartridge(id="wf-cadres",
                             preprocessing=("complete-case", "standardize"),
                             method="scm", hyperparams=base)


def single_cadre_dataset(n, p, betas, intercept=-0.3, seed=0,
                         missing_rate=0.0):
    """One-cadre binary-outcome dataset; weights all equal."""
    spec = SyntheticSpec(
        n_subjects=n, exposures=default_exposures(p),
        cadres=(PlantedCadre(),),
        outcomes=(OutcomeSpec(id="Y1", label="synthetic outcome",
                              kind="binary", intercepts=(intercept,),
                              coefficients=(tuple(betas),)),),
        include_creatinine=False, missing_rate=missing_rate)
    return generate_synthetic(spec, seed)


@pytest.fixture
def store_path(tmp_path):
    return tmp_path / "test.store"


@pytest.fixture
def small_logistic_design():
    rng = np.random.default_rng(11)
    n = 300
    X = rng.normal(size=(n, 2))
    eta = 0.2 + X @ np.array([0.8, -0.5])
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-eta))).astype(float)
    w = rng.uniform(0.5, 2.5, size=n)
    return make_design(X, y, w)
