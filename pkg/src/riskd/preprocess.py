"""Turn a resolved study plan plus raw data into a fitted-model-ready design.

Execution order per factor: cohort filter, complete-case drop over every
model variable, then the column transforms the plan resolved for that
factor (log-transform, standardize), in order. Continuous controls enter
raw; categorical controls are dummy-coded against the modal category;
urinary creatinine, when requested, is appended once as a log-standardized
control.

Every transform records its exact parameters in column_meta, so replaying
the metadata against the raw dataset reproduces the matrix bitwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cartridges import StudyPlan
from .datastore import Dataset, cohort_mask
from .errors import (
    AllOneClass,
    DegenerateVariable,
    EmptyCohort,
    InsufficientData,
    TypeMismatch,
)

ROLES = ("intercept", "factor", "control", "cadre-feature")
INTERCEPT_NAME = "(intercept)"


@dataclass(frozen=True)
class ColumnMeta:
    """One design column: where it came from and what was done to it."""

    name: str
    source_var: str  # "" for the intercept
    role: str
    transforms: tuple = ()  # ordered ({"op": ..., params...}, ...)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "source_var": self.source_var,
            "role": self.role,
            "transforms": [dict(t) for t in self.transforms],
        }


@dataclass(frozen=True)
class DesignMatrix:
    values: np.ndarray  # N x K, float64, no missing
    column_meta: tuple
    response: np.ndarray  # length N, values in {0.0, 1.0}
    weights: np.ndarray  # length N, > 0
    row_index: tuple  # indices into the source dataset's rows
    subject_ids: tuple

    def __post_init__(self):
        for arr in (self.values, self.response, self.weights):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return self.values.shape[1]

    @property
    def column_names(self) -> tuple:
        return tuple(c.name for c in self.column_meta)

    def columns_with_role(self, *roles) -> tuple:
        return tuple(i for i, c in enumerate(self.column_meta)
                     if c.role in roles)

    @property
    def feature_columns(self) -> tuple:
        """Columns the cadre model uses for distance computation."""
        return self.columns_with_role("factor", "control", "cadre-feature")

    def validate(self) -> None:
        n, k = self.values.shape
        if len(self.column_meta) != k:
            raise DegenerateVariable("column_meta length does not match K")
        if not np.all(np.isfinite(self.values)):
            raise DegenerateVariable("design matrix has non-finite entries")
        intercepts = self.columns_with_role("intercept")
        if len(intercepts) != 1:
            raise DegenerateVariable(
                f"expected exactly one intercept column, found {len(intercepts)}")
        if self.response.shape != (n,) or self.weights.shape != (n,):
            raise DegenerateVariable("response/weights length mismatch")
        if not np.all((self.response == 0.0) | (self.response == 1.0)):
            raise DegenerateVariable("response is not binary")
        if not np.all(self.weights > 0):
            raise DegenerateVariable("weights must be strictly positive")


# --- column transforms ---------------------------------------------------------

def weighted_moments(values: np.ndarray, weights: np.ndarray):
    """Survey-weighted mean and variance (denominator sum of weights)."""
    total = float(np.sum(weights))
    mean = float(np.sum(weights * values) / total)
    var = float(np.sum(weights * (values - mean) ** 2) / total)
    return mean, var


def standardize(column: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Scale to weighted mean 0, weighted variance 1; missing stays missing."""
    column = np.asarray(column, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    present = ~np.isnan(column)
    if int(present.sum()) < 2:
        raise InsufficientData(
            "standardize needs at least 2 non-missing values")
    mean, var = weighted_moments(column[present], weights[present])
    if var <= 0.0:
        raise DegenerateVariable("weighted variance is zero")
    out = column.copy()
    out[present] = (column[present] - mean) / np.sqrt(var)
    return out


def log_shift(values: np.ndarray) -> float:
    """Shift for log-transform: 0, or half the smallest positive when zeros occur."""
    present = values[~np.isnan(values)]
    if np.any(present < 0):
        raise DegenerateVariable(
            "log-transform requires non-negative values")
    if not np.any(present == 0):
        return 0.0
    positive = present[present > 0]
    if positive.size == 0:
        raise DegenerateVariable("log-transform on an all-zero column")
    return float(positive.min()) / 2.0


def apply_transforms(raw: np.ndarray, transforms) -> np.ndarray:
    """Apply recorded transforms to a raw column. Shared by build and replay."""
    col = np.asarray(raw, dtype=np.float64)
    for t in transforms:
        op = t["op"]
        if op == "log":
            col = np.log(col + t["shift"])
        elif op == "standardize":
            col = (col - t["mean"]) / t["sd"]
        elif op == "dummy":
            col = (col == t["code"]).astype(np.float64)
        else:
            raise DegenerateVariable(f"unknown transform op {op!r}")
    return col


def _fit_transforms(raw: np.ndarray, weights: np.ndarray, steps,
                    var_id: str) -> tuple:
    """Resolve pipeline steps into parameterized transforms for one column."""
    transforms = []
    col = raw
    for step in steps:
        if step == "log-transform":
            try:
                shift = log_shift(col)
            except DegenerateVariable as exc:
                raise DegenerateVariable(f"{var_id}: {exc.message}") from exc
            t = {"op": "log", "shift": shift}
        elif step == "standardize":
            present = col[~np.isnan(col)]
            if present.size < 2:
                raise InsufficientData(
                    f"{var_id}: standardize needs at least 2 values")
            mean, var = weighted_moments(col, weights)
            if var <= 0.0:
                raise DegenerateVariable(
                    f"{var_id}: weighted variance is zero")
            t = {"op": "standardize", "mean": mean, "sd": float(np.sqrt(var))}
        else:
            raise DegenerateVariable(f"unknown pipeline step {step!r}")
        transforms.append(t)
        col = apply_transforms(raw, transforms)
    return tuple(transforms)


def _modal_code(column: np.ndarray) -> float:
    """Most frequent value; ties broken by the lowest code."""
    codes, counts = np.unique(column, return_counts=True)
    return float(codes[np.argmax(counts)])  # np.unique sorts, argmax keeps first


def binarize_response(values: np.ndarray, rule) -> np.ndarray:
    if rule.op:
        ops = {"<": np.less, "<=": np.less_equal,
               ">": np.greater, ">=": np.greater_equal}
        return ops[rule.op](values, rule.value).astype(np.float64)
    return np.isin(values, np.asarray(rule.codes)).astype(np.float64)


# --- design assembly -----------------------------------------------------------

def _model_variables(plan: StudyPlan, factor_ids) -> list:
    used = [plan.response.response_var, *factor_ids, *plan.controls]
    if plan.creatinine_var and set(factor_ids) & set(plan.creatinine_factors):
        used.append(plan.creatinine_var)
    return used


def build_design(plan: StudyPlan, ds: Dataset,
                 factor: str | None = None) -> DesignMatrix:
    """Assemble the design matrix for one factor, or all factors when None.

    Applies the cohort filter, drops rows missing any model variable,
    executes the per-factor transform pipeline, dummy-codes categorical
    controls, binarizes the response, and prepends the intercept.
    """
    if factor is None:
        factor_ids = plan.factor_ids
    else:
        if factor not in plan.factor_ids:
            raise TypeMismatch(f"{factor!r} is not a factor in this plan")
        factor_ids = (factor,)
    for f in factor_ids:
        if ds.variable(f).kind != "continuous":
            raise TypeMismatch(
                f"factor {f!r} is {ds.variable(f).kind}; factors must be "
                "continuous")

    mask = cohort_mask(ds, plan.cohort.filter)
    if not mask.any():
        raise EmptyCohort(f"cohort {plan.cohort.id!r} keeps 0 rows")

    # complete-case over every variable the model touches
    used_vars = _model_variables(plan, factor_ids)
    for v in used_vars:
        mask &= ~np.isnan(ds.column(v))
    rows = np.flatnonzero(mask)
    if rows.size == 0:
        raise EmptyCohort("no rows survive the complete-case drop")

    weights = ds.column(ds.weight_var)[rows]
    y = binarize_response(ds.column(plan.response.response_var)[rows],
                          plan.response.positive_rule)
    classes = np.unique(y)
    if classes.size < 2:
        label = int(classes[0]) if classes.size else "none"
        raise AllOneClass(f"response has a single class ({label}) after "
                          "filtering")

    columns = [np.ones(rows.size)]
    meta = [ColumnMeta(name=INTERCEPT_NAME, source_var="", role="intercept")]

    for f in factor_ids:
        raw = ds.column(f)[rows]
        transforms = _fit_transforms(raw, weights, plan.factor_pipelines[f], f)
        columns.append(apply_transforms(raw, transforms))
        meta.append(ColumnMeta(name=f, source_var=f, role="factor",
                               transforms=transforms))

    for ctl in plan.controls:
        var = ds.variable(ctl)
        raw = ds.column(ctl)[rows]
        if var.kind == "continuous":
            columns.append(raw.copy())
            meta.append(ColumnMeta(name=ctl, source_var=ctl, role="control"))
            continue
        # categorical / binary: one dummy per observed non-reference code
        reference = _modal_code(raw)
        for code in np.unique(raw):
            if code == reference:
                continue
            t = ({"op": "dummy", "code": float(code),
                  "reference": reference},)
            columns.append(apply_transforms(raw, t))
            meta.append(ColumnMeta(name=f"{ctl}={int(code)}", source_var=ctl,
                                   role="control", transforms=t))

    if plan.creatinine_var and set(factor_ids) & set(plan.creatinine_factors):
        raw = ds.column(plan.creatinine_var)[rows]
        transforms = _fit_transforms(raw, weights,
                                     ("log-transform", "standardize"),
                                     plan.creatinine_var)
        columns.append(apply_transforms(raw, transforms))
        meta.append(ColumnMeta(name=plan.creatinine_var,
                               source_var=plan.creatinine_var, role="control",
                               transforms=transforms))

    design = DesignMatrix(
        values=np.column_stack(columns),
        column_meta=tuple(meta),
        response=y,
        weights=weights.copy(),
        row_index=tuple(int(i) for i in rows),
        subject_ids=tuple(ds.subject_ids[i] for i in rows),
    )
    design.validate()
    return design


def creatinine_control(plan: StudyPlan, design: DesignMatrix,
                       ds: Dataset) -> DesignMatrix:
    """Append the log-standardized creatinine control column exactly once."""
    if plan.creatinine_var is None:
        return design
    if any(c.source_var == plan.creatinine_var for c in design.column_meta):
        return design
    rows = np.asarray(design.row_index)
    raw = ds.column(plan.creatinine_var)[rows]
    transforms = _fit_transforms(raw, design.weights,
                                 ("log-transform", "standardize"),
                                 plan.creatinine_var)
    values = np.column_stack([design.values,
                              apply_transforms(raw, transforms)])
    meta = design.column_meta + (ColumnMeta(
        name=plan.creatinine_var, source_var=plan.creatinine_var,
        role="control", transforms=transforms),)
    out = DesignMatrix(values=values, column_meta=meta,
                       response=design.response, weights=design.weights,
                       row_index=design.row_index,
                       subject_ids=design.subject_ids)
    out.validate()
    return out


def replay_design(design: DesignMatrix, ds: Dataset) -> np.ndarray:
    """Rebuild the value matrix from raw data + recorded transforms.

    Bitwise-identical to design.values; the reproducibility check for
    stored studies.
    """
    rows = np.asarray(design.row_index)
    columns = []
    for c in design.column_meta:
        if c.role == "intercept":
            columns.append(np.ones(rows.size))
            continue
        raw = ds.column(c.source_var)[rows]
        columns.append(apply_transforms(raw, c.transforms))
    return np.column_stack(columns)
