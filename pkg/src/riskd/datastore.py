"""Codebook-annotated tabular survey data with per-subject sampling weights.

A dataset is a numeric matrix (one row per subject, NaN for missing) plus a
variable dictionary describing every column: kind (continuous, categorical,
binary), codebook for coded values, and a category tag that marks which
column carries the survey weight. Datasets are immutable once loaded and
safe to share across threads.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    InvalidCode,
    MalformedFile,
    MissingWeights,
    TypeMismatch,
    UnknownVariable,
)

MISSING_MARKERS = {"", ".", "NA"}
VARIABLE_KINDS = ("continuous", "categorical", "binary")
VARIABLE_CATEGORIES = ("exposure", "lifestyle", "demographic", "outcome",
                       "weight", "laboratory")
COMPARATORS = ("=", "!=", "<", "<=", ">", ">=", "in")
ORDERED_COMPARATORS = ("<", "<=", ">", ">=")

SUBJECT_ID_VAR = "SEQN"


@dataclass(frozen=True)
class VariableDef:
    """One dictionary entry: how a column is named, typed, and coded."""

    id: str
    label: str
    kind: str
    unit: str = ""
    codebook: dict = field(default_factory=dict)
    ontology_term: str = ""
    category: str = "exposure"

    def validate(self) -> None:
        if not self.id:
            raise MalformedFile("variable id must be non-empty")
        if self.kind not in VARIABLE_KINDS:
            raise MalformedFile(
                f"variable {self.id!r}: unknown kind {self.kind!r}")
        if self.category not in VARIABLE_CATEGORIES:
            raise MalformedFile(
                f"variable {self.id!r}: unknown category {self.category!r}")
        if self.kind == "categorical" and len(self.codebook) < 2:
            raise MalformedFile(
                f"categorical variable {self.id!r} needs >= 2 codebook entries")
        if self.kind == "continuous" and self.codebook:
            raise MalformedFile(
                f"continuous variable {self.id!r} must have an empty codebook")
        for code in self.codebook:
            try:
                int(code)
            except ValueError:
                raise MalformedFile(
                    f"variable {self.id!r}: codebook code {code!r} is not an "
                    "integer string") from None

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "label": self.label,
            "kind": self.kind,
            "unit": self.unit,
            "codebook": dict(self.codebook),
            "ontology_term": self.ontology_term,
            "category": self.category,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "VariableDef":
        if not isinstance(obj, dict):
            raise MalformedFile("dictionary entries must be objects")
        known = {"id", "label", "kind", "unit", "codebook", "ontology_term",
                 "category"}
        extra = set(obj) - known
        if extra:
            raise MalformedFile(
                f"dictionary entry has unknown keys: {sorted(extra)}")
        missing = {"id", "label", "kind", "category"} - set(obj)
        if missing:
            raise MalformedFile(
                f"dictionary entry missing keys: {sorted(missing)}")
        var = cls(
            id=str(obj["id"]),
            label=str(obj["label"]),
            kind=str(obj["kind"]),
            unit=str(obj.get("unit", "")),
            codebook={str(k): str(v) for k, v in (obj.get("codebook") or {}).items()},
            ontology_term=str(obj.get("ontology_term", "")),
            category=str(obj["category"]),
        )
        var.validate()
        return var


@dataclass(frozen=True)
class Dataset:
    """Immutable subject-by-variable matrix with its dictionary and weights."""

    dictionary: tuple
    rows: np.ndarray
    subject_ids: tuple
    weight_var: str

    def __post_init__(self):
        self.rows.setflags(write=False)

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    @property
    def n_vars(self) -> int:
        return self.rows.shape[1]

    @property
    def variable_ids(self) -> tuple:
        return tuple(v.id for v in self.dictionary)

    def has_variable(self, var_id: str) -> bool:
        return var_id in self.variable_ids

    def variable(self, var_id: str) -> VariableDef:
        for v in self.dictionary:
            if v.id == var_id:
                return v
        raise UnknownVariable(f"variable {var_id!r} not in dictionary")

    def var_index(self, var_id: str) -> int:
        for i, v in enumerate(self.dictionary):
            if v.id == var_id:
                return i
        raise UnknownVariable(f"variable {var_id!r} not in dictionary")

    def column(self, var_id: str) -> np.ndarray:
        return self.rows[:, self.var_index(var_id)]

    @property
    def weights(self) -> np.ndarray:
        return self.column(self.weight_var)

    def validate(self) -> None:
        ids = [v.id for v in self.dictionary]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise MalformedFile(f"duplicate variable ids: {dupes}")
        for v in self.dictionary:
            v.validate()
        if self.rows.ndim != 2 or self.rows.shape[1] != len(self.dictionary):
            raise MalformedFile("row width does not match dictionary length")
        if len(self.subject_ids) != self.n_rows:
            raise MalformedFile("subject id count does not match row count")
        if not self.has_variable(self.weight_var):
            raise MissingWeights(f"weight variable {self.weight_var!r} absent")
        w = self.weights
        if np.isnan(w).any() or not np.isfinite(w).all() or (w <= 0).any():
            raise MissingWeights(
                f"weights in {self.weight_var!r} must all be finite and > 0")
        for j, v in enumerate(self.dictionary):
            if not v.codebook and v.kind == "continuous":
                continue
            col = self.rows[:, j]
            present = col[~np.isnan(col)]
            allowed = _allowed_codes(v)
            for val in np.unique(present):
                if float(val) not in allowed:
                    raise InvalidCode(
                        f"variable {v.id!r}: value {val!r} not in codebook")

    def subset(self, indices: np.ndarray) -> "Dataset":
        indices = np.asarray(indices)
        return Dataset(
            dictionary=self.dictionary,
            rows=self.rows[indices].copy(),
            subject_ids=tuple(self.subject_ids[i] for i in indices),
            weight_var=self.weight_var,
        )

    def cells_equal(self, other: "Dataset") -> bool:
        """Cell-for-cell equality, treating NaN == NaN."""
        if self.variable_ids != other.variable_ids:
            return False
        if self.subject_ids != other.subject_ids:
            return False
        a, b = self.rows, other.rows
        if a.shape != b.shape:
            return False
        both_nan = np.isnan(a) & np.isnan(b)
        return bool(np.all((a == b) | both_nan))


def _allowed_codes(var: VariableDef) -> set:
    if var.codebook:
        return {float(int(c)) for c in var.codebook}
    if var.kind == "binary":
        return {0.0, 1.0}
    return set()


@dataclass(frozen=True)
class Clause:
    var: str
    op: str
    value: object  # scalar for comparators, tuple of scalars for "in"

    def validate(self) -> None:
        if self.op not in COMPARATORS:
            raise TypeMismatch(f"unknown comparator {self.op!r}")
        if self.op == "in":
            if not isinstance(self.value, tuple) or not self.value:
                raise TypeMismatch(
                    f"clause on {self.var!r}: 'in' needs a non-empty value set")
        else:
            if isinstance(self.value, (tuple, list)):
                raise TypeMismatch(
                    f"clause on {self.var!r}: comparator {self.op!r} needs a "
                    "scalar value")


@dataclass(frozen=True)
class CohortFilter:
    """Conjunction of inclusion clauses over dictionary variables."""

    clauses: tuple = ()

    def validate(self) -> None:
        for c in self.clauses:
            c.validate()

    def validate_against(self, dictionary: Sequence[VariableDef]) -> None:
        self.validate()
        by_id = {v.id: v for v in dictionary}
        for c in self.clauses:
            var = by_id.get(c.var)
            if var is None:
                raise UnknownVariable(
                    f"cohort filter references unknown variable {c.var!r}")
            if c.op in ORDERED_COMPARATORS and var.kind != "continuous":
                raise TypeMismatch(
                    f"ordered comparator {c.op!r} on non-continuous variable "
                    f"{c.var!r}")


def cohort_mask(ds: Dataset, filt: CohortFilter) -> np.ndarray:
    """Boolean keep-mask for a filter. Rows missing a filtered value drop."""
    filt.validate_against(ds.dictionary)
    mask = np.ones(ds.n_rows, dtype=bool)
    for c in filt.clauses:
        col = ds.column(c.var)
        present = ~np.isnan(col)
        if c.op == "=":
            ok = col == float(c.value)
        elif c.op == "!=":
            ok = col != float(c.value)
        elif c.op == "<":
            ok = col < float(c.value)
        elif c.op == "<=":
            ok = col <= float(c.value)
        elif c.op == ">":
            ok = col > float(c.value)
        elif c.op == ">=":
            ok = col >= float(c.value)
        else:  # in
            ok = np.isin(col, [float(v) for v in c.value])
        mask &= present & ok
    return mask


def apply_cohort(ds: Dataset, filt: CohortFilter):
    """Keep exactly the rows satisfying every clause.

    Returns (subset, kept_count, dropped_count). Rows with a missing value
    in any filtered variable are dropped. An empty result is not an error
    here; downstream analysis raises EmptyCohort.
    """
    mask = cohort_mask(ds, filt)
    kept = int(mask.sum())
    subset = ds.subset(np.flatnonzero(mask))
    return subset, kept, ds.n_rows - kept


# --- file I/O ----------------------------------------------------------------

def load_dictionary(path) -> tuple:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedFile(f"cannot parse dictionary {path}: {exc}") from exc
    if not isinstance(raw, list):
        raise MalformedFile("dictionary file must be a JSON list")
    defs = tuple(VariableDef.from_json(obj) for obj in raw)
    ids = [v.id for v in defs]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise MalformedFile(f"duplicate variable ids in dictionary: {dupes}")
    return defs


def _decode_cell(token: str, var: VariableDef, row_num: int) -> float:
    token = token.strip()
    if token in MISSING_MARKERS:
        return math.nan
    try:
        value = float(token)
    except ValueError:
        raise MalformedFile(
            f"row {row_num}, variable {var.id!r}: cannot parse {token!r}"
        ) from None
    if var.kind == "continuous":
        return value
    if value != int(value):
        raise InvalidCode(
            f"row {row_num}, variable {var.id!r}: non-integer code {token!r}")
    allowed = _allowed_codes(var)
    if value not in allowed:
        raise InvalidCode(
            f"row {row_num}, variable {var.id!r}: code {token!r} not in codebook")
    return value


def load_dataset(data_path, dictionary_path) -> Dataset:
    """Load a delimited extract plus its dictionary into a validated Dataset.

    The data file is UTF-8 CSV with a header row of variable ids. Missing
    markers (empty cell, ".", "NA") normalize to NaN. Every header column
    must appear in the dictionary; the returned dictionary is restricted to
    the columns present, in file order.
    """
    dictionary = load_dictionary(dictionary_path)
    by_id = {v.id: v for v in dictionary}
    data_path = Path(data_path)
    try:
        text = data_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise MalformedFile(f"cannot read {data_path}: {exc}") from exc

    reader = csv.reader(text.splitlines())
    try:
        header = next(reader)
    except StopIteration:
        raise MalformedFile(f"{data_path}: empty file") from None
    header = [h.strip() for h in header]
    if len(set(header)) != len(header):
        raise MalformedFile(f"{data_path}: duplicate header columns")
    for col in header:
        if col not in by_id:
            raise UnknownVariable(
                f"data column {col!r} absent from dictionary")
    columns = tuple(by_id[c] for c in header)

    matrix = []
    for row_num, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(header):
            raise MalformedFile(
                f"{data_path}: row {row_num} has {len(row)} cells, "
                f"expected {len(header)}")
        matrix.append([_decode_cell(tok, var, row_num)
                       for tok, var in zip(row, columns)])
    rows = np.asarray(matrix, dtype=np.float64).reshape(len(matrix), len(header))

    weight_vars = [v.id for v in columns if v.category == "weight"]
    if len(weight_vars) != 1:
        raise MissingWeights(
            f"expected exactly one weight-category column, found {weight_vars}")
    weight_var = weight_vars[0]

    if SUBJECT_ID_VAR in header:
        idx = header.index(SUBJECT_ID_VAR)
        subject_ids = tuple(_format_cell(v, columns[idx]) for v in rows[:, idx])
    else:
        subject_ids = tuple(str(i + 1) for i in range(len(matrix)))

    ds = Dataset(dictionary=columns, rows=rows, subject_ids=subject_ids,
                 weight_var=weight_var)
    ds.validate()
    return ds


def _format_cell(value: float, var: VariableDef) -> str:
    if math.isnan(value):
        return ""
    if var.kind != "continuous" or value == int(value):
        return str(int(value))
    return repr(float(value))


def serialize_dataset(ds: Dataset, data_path, dictionary_path) -> None:
    """Write a Dataset back to CSV + dictionary JSON.

    Output is deterministic and round-trips: load(serialize(ds)) equals ds
    cell-for-cell. Continuous cells use shortest-round-trip float repr,
    coded cells print as bare integers, missing cells are empty.
    """
    data_path, dictionary_path = Path(data_path), Path(dictionary_path)
    lines = [",".join(ds.variable_ids)]
    for i in range(ds.n_rows):
        lines.append(",".join(_format_cell(ds.rows[i, j], var)
                              for j, var in enumerate(ds.dictionary)))
    data_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    doc = [v.to_json() for v in ds.dictionary]
    dictionary_path.write_text(
        json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
