"""Declarative study cartridges: response, cohort, risk-factor, workflow.

Cartridges are small JSON documents that together define a study. Parsing
is strict: unknown keys are hard errors because cartridges double as
provenance artifacts, and silently dropped fields would corrupt
reproducibility. Serialization is canonical (sorted keys, compact), so
byte equality implies value equality.

The axiom vocabulary is closed and versioned here:

  standardize         scale a column to weighted mean 0 / variance 1
  log-transform       natural log with half-minimum shift when zeros occur
  creatinine-control  add log-standardized urinary creatinine as a control
  complete-case       drop subjects with missing values in any model column
  urinary             marker: the factor is a urine measurement

Workflow cartridges list preprocessing steps that apply to every factor;
per-factor axioms add factor-specific steps on top. ``urinary`` is
informational only.
"""

from __future__ import annotations

import datetime as _dt
import json
from dataclasses import dataclass, field
from pathlib import Path

from .canonical import canonical_json, content_hash
from .datastore import (
    Clause,
    CohortFilter,
    Dataset,
    apply_cohort,
)
from .errors import (
    EmptyCohort,
    FactorControlCollision,
    MalformedCartridge,
    MissingCreatinine,
    SchemaViolation,
    TypeMismatch,
    UnknownAxiom,
    UnknownVariable,
)

AXIOM_VOCABULARY = frozenset({
    "standardize", "log-transform", "creatinine-control", "complete-case",
    "urinary",
})
WORKFLOW_STEPS = ("standardize", "log-transform", "creatinine-control",
                  "complete-case")
METHODS = ("swglm-ewas", "scm")
CARTRIDGE_KINDS = ("response", "cohort", "risk-factor", "workflow", "results")
FDR_METHODS = ("benjamini-hochberg",)

CREATININE_VAR = "URXUCR"


@dataclass(frozen=True)
class PositiveRule:
    """Binarization rule for a response: threshold comparator or code set."""

    op: str = ""
    value: float | None = None
    codes: tuple = ()

    def validate(self) -> None:
        has_threshold = bool(self.op)
        has_codes = bool(self.codes)
        if has_threshold == has_codes:
            raise SchemaViolation(
                "positive_rule needs exactly one of (op, value) or codes")
        if has_threshold:
            if self.op not in ("<", "<=", ">", ">="):
                raise SchemaViolation(
                    f"positive_rule comparator {self.op!r} not in <, <=, >, >=")
            if self.value is None:
                raise SchemaViolation("positive_rule threshold value missing")

    def to_json(self) -> dict:
        if self.op:
            return {"op": self.op, "value": self.value}
        return {"codes": list(self.codes)}

    @classmethod
    def from_json(cls, obj) -> "PositiveRule":
        if not isinstance(obj, dict):
            raise SchemaViolation("positive_rule must be an object")
        extra = set(obj) - {"op", "value", "codes"}
        if extra:
            raise SchemaViolation(
                f"positive_rule has unknown keys: {sorted(extra)}")
        rule = cls(
            op=str(obj.get("op", "")),
            value=(None if obj.get("value") is None else _number(obj["value"],
                                                                 "positive_rule.value")),
            codes=tuple(_number(v, "positive_rule.codes")
                        for v in obj.get("codes", ())),
        )
        rule.validate()
        return rule


@dataclass(frozen=True)
class ResponseCartridge:
    id: str
    disease_label: str
    response_var: str
    positive_rule: PositiveRule
    required_controls: tuple = ()
    domain_axioms: tuple = ()

    kind = "response"

    def validate(self) -> None:
        _require_id(self.id)
        self.positive_rule.validate()
        if self.response_var in self.required_controls:
            raise SchemaViolation(
                f"response_var {self.response_var!r} cannot also be a control")
        if len(set(self.required_controls)) != len(self.required_controls):
            raise SchemaViolation("required_controls contains duplicates")
        _check_axioms(self.domain_axioms)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "id": self.id,
            "disease_label": self.disease_label,
            "response_var": self.response_var,
            "positive_rule": self.positive_rule.to_json(),
            "required_controls": list(self.required_controls),
            "domain_axioms": list(self.domain_axioms),
        }


@dataclass(frozen=True)
class CohortCartridge:
    id: str
    label: str
    filter: CohortFilter

    kind = "cohort"

    def validate(self) -> None:
        _require_id(self.id)
        self.filter.validate()

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "id": self.id,
            "label": self.label,
            "filter": {"clauses": [
                {"var": c.var, "op": c.op,
                 "value": list(c.value) if c.op == "in" else c.value}
                for c in self.filter.clauses
            ]},
        }


@dataclass(frozen=True)
class RiskFactorCartridge:
    id: str
    category_label: str
    factors: tuple
    per_factor_axioms: dict = field(default_factory=dict)

    kind = "risk-factor"

    def validate(self) -> None:
        _require_id(self.id)
        if not self.factors:
            raise SchemaViolation(f"risk-factor cartridge {self.id!r}: "
                                  "factors must be non-empty")
        if len(set(self.factors)) != len(self.factors):
            raise SchemaViolation(f"risk-factor cartridge {self.id!r}: "
                                  "factors contain duplicates")
        for factor, axioms in self.per_factor_axioms.items():
            if factor not in self.factors:
                raise SchemaViolation(
                    f"per_factor_axioms references {factor!r}, which is not "
                    "in factors")
            _check_axioms(axioms)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "id": self.id,
            "category_label": self.category_label,
            "factors": list(self.factors),
            "per_factor_axioms": {k: list(v)
                                  for k, v in sorted(self.per_factor_axioms.items())},
        }


@dataclass(frozen=True)
class WorkflowCartridge:
    id: str
    preprocessing: tuple
    method: str
    hyperparams: dict

    kind = "workflow"

    def validate(self) -> None:
        _require_id(self.id)
        for step in self.preprocessing:
            if step not in WORKFLOW_STEPS:
                raise UnknownAxiom(f"unknown preprocessing step {step!r}")
        if len(set(self.preprocessing)) != len(self.preprocessing):
            raise SchemaViolation("preprocessing steps contain duplicates")
        if self.method not in METHODS:
            raise SchemaViolation(f"unknown method {self.method!r}")
        _check_hyperparams(self.method, self.hyperparams)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "id": self.id,
            "preprocessing": list(self.preprocessing),
            "method": self.method,
            "hyperparams": _hyperparams_json(self.hyperparams),
        }


# --- schema helpers ----------------------------------------------------------

def _require_id(value: str) -> None:
    if not value or not isinstance(value, str):
        raise SchemaViolation("cartridge id must be a non-empty string")


def _check_axioms(axioms) -> None:
    for a in axioms:
        if a not in AXIOM_VOCABULARY:
            raise UnknownAxiom(f"unknown axiom tag {a!r}")


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaViolation(f"{where}: expected a number, got {value!r}")
    return float(value)


def _require(obj: dict, key: str, typ, where: str):
    if key not in obj:
        raise SchemaViolation(f"{where}: missing field {key!r}")
    value = obj[key]
    if typ is float:
        return _number(value, f"{where}.{key}")
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise SchemaViolation(f"{where}.{key}: expected an integer")
        return value
    if not isinstance(value, typ):
        raise SchemaViolation(
            f"{where}.{key}: expected {typ.__name__}, got {type(value).__name__}")
    return value


def _reject_unknown(obj: dict, allowed, where: str) -> None:
    extra = set(obj) - set(allowed)
    if extra:
        raise SchemaViolation(f"{where}: unknown keys {sorted(extra)}")


EWAS_HYPERPARAM_KEYS = ("alpha", "fdr_method")
SCM_HYPERPARAM_KEYS = ("M", "gamma", "learning_rate", "epochs", "batch_size",
                       "lambda_w", "lambda_d", "seed", "alpha", "fdr_method")


def _check_hyperparams(method: str, hp: dict) -> None:
    where = f"hyperparams[{method}]"
    if not isinstance(hp, dict):
        raise SchemaViolation(f"{where}: must be an object")
    if method == "swglm-ewas":
        _reject_unknown(hp, EWAS_HYPERPARAM_KEYS, where)
        required = EWAS_HYPERPARAM_KEYS
    else:
        _reject_unknown(hp, SCM_HYPERPARAM_KEYS, where)
        required = SCM_HYPERPARAM_KEYS
    for key in required:
        if key not in hp:
            raise SchemaViolation(f"{where}: missing field {key!r}")
    alpha = _number(hp["alpha"], f"{where}.alpha")
    if not (0.0 < alpha < 1.0):
        raise SchemaViolation(f"{where}.alpha must be in (0, 1)")
    if hp["fdr_method"] not in FDR_METHODS:
        raise SchemaViolation(
            f"{where}.fdr_method must be one of {FDR_METHODS}")
    if method == "scm":
        if _require(hp, "M", int, where) < 1:
            raise SchemaViolation(f"{where}.M must be >= 1")
        if _number(hp["gamma"], f"{where}.gamma") <= 0:
            raise SchemaViolation(f"{where}.gamma must be > 0")
        if _number(hp["learning_rate"], f"{where}.learning_rate") <= 0:
            raise SchemaViolation(f"{where}.learning_rate must be > 0")
        for key in ("epochs", "batch_size"):
            if _require(hp, key, int, where) < 1:
                raise SchemaViolation(f"{where}.{key} must be >= 1")
        _require(hp, "seed", int, where)
        for key in ("lambda_w", "lambda_d"):
            pair = hp[key]
            if (not isinstance(pair, (list, tuple)) or len(pair) != 2
                    or any(isinstance(v, bool) or not isinstance(v, (int, float))
                           or v < 0 for v in pair)):
                raise SchemaViolation(
                    f"{where}.{key} must be a [l1, l2] pair of strengths >= 0")


def _hyperparams_json(hp: dict) -> dict:
    out = {}
    for k, v in hp.items():
        out[k] = list(v) if isinstance(v, tuple) else v
    return out


# --- parse / serialize --------------------------------------------------------

def _parse_clause(obj, where: str) -> Clause:
    if not isinstance(obj, dict):
        raise SchemaViolation(f"{where}: clause must be an object")
    _reject_unknown(obj, ("var", "op", "value"), where)
    for key in ("var", "op", "value"):
        if key not in obj:
            raise SchemaViolation(f"{where}: missing field {key!r}")
    op = obj["op"]
    value = obj["value"]
    if op == "in":
        if not isinstance(value, list) or not value:
            raise SchemaViolation(f"{where}: 'in' value must be a non-empty list")
        value = tuple(_number(v, f"{where}.value") for v in value)
    else:
        value = _number(value, f"{where}.value")
    clause = Clause(var=str(obj["var"]), op=str(op), value=value)
    clause.validate()
    return clause


def _parse_response(obj: dict) -> ResponseCartridge:
    where = "response cartridge"
    _reject_unknown(obj, ("kind", "id", "disease_label", "response_var",
                          "positive_rule", "required_controls",
                          "domain_axioms"), where)
    c = ResponseCartridge(
        id=_require(obj, "id", str, where),
        disease_label=_require(obj, "disease_label", str, where),
        response_var=_require(obj, "response_var", str, where),
        positive_rule=PositiveRule.from_json(_require(obj, "positive_rule",
                                                      dict, where)),
        required_controls=tuple(_require(obj, "required_controls", list, where)),
        domain_axioms=tuple(obj.get("domain_axioms", ())),
    )
    c.validate()
    return c


def _parse_cohort(obj: dict) -> CohortCartridge:
    where = "cohort cartridge"
    _reject_unknown(obj, ("kind", "id", "label", "filter"), where)
    filt = _require(obj, "filter", dict, where)
    _reject_unknown(filt, ("clauses",), f"{where}.filter")
    clauses = filt.get("clauses", [])
    if not isinstance(clauses, list):
        raise SchemaViolation(f"{where}: filter.clauses must be a list")
    c = CohortCartridge(
        id=_require(obj, "id", str, where),
        label=_require(obj, "label", str, where),
        filter=CohortFilter(clauses=tuple(
            _parse_clause(cl, f"{where}.filter.clauses[{i}]")
            for i, cl in enumerate(clauses))),
    )
    c.validate()
    return c


def _parse_risk_factor(obj: dict) -> RiskFactorCartridge:
    where = "risk-factor cartridge"
    _reject_unknown(obj, ("kind", "id", "category_label", "factors",
                          "per_factor_axioms"), where)
    axioms = obj.get("per_factor_axioms", {})
    if not isinstance(axioms, dict):
        raise SchemaViolation(f"{where}: per_factor_axioms must be an object")
    c = RiskFactorCartridge(
        id=_require(obj, "id", str, where),
        category_label=_require(obj, "category_label", str, where),
        factors=tuple(_require(obj, "factors", list, where)),
        per_factor_axioms={str(k): tuple(v) for k, v in axioms.items()},
    )
    c.validate()
    return c


def _parse_workflow(obj: dict) -> WorkflowCartridge:
    where = "workflow cartridge"
    _reject_unknown(obj, ("kind", "id", "preprocessing", "method",
                          "hyperparams"), where)
    hp = _require(obj, "hyperparams", dict, where)
    parsed_hp = {}
    for k, v in hp.items():
        parsed_hp[k] = tuple(v) if isinstance(v, list) else v
    c = WorkflowCartridge(
        id=_require(obj, "id", str, where),
        preprocessing=tuple(_require(obj, "preprocessing", list, where)),
        method=_require(obj, "method", str, where),
        hyperparams=parsed_hp,
    )
    c.validate()
    return c


_PARSERS = {
    "response": _parse_response,
    "cohort": _parse_cohort,
    "risk-factor": _parse_risk_factor,
    "workflow": _parse_workflow,
}


def parse_cartridge(document):
    """Parse one cartridge from JSON text or a file path.

    A ``Path`` argument is read from disk; a ``str`` is treated as the
    document itself. Unknown keys anywhere in the document are rejected.
    """
    if isinstance(document, Path):
        try:
            text = document.read_text(encoding="utf-8")
        except OSError as exc:
            raise MalformedCartridge(f"cannot read {document}: {exc}") from exc
    else:
        text = document
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedCartridge(f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise MalformedCartridge("cartridge document must be a JSON object")
    kind = obj.get("kind")
    if kind == "results":
        from .provenance import parse_results_cartridge
        return parse_results_cartridge(obj)
    parser = _PARSERS.get(kind)
    if parser is None:
        raise SchemaViolation(f"unknown cartridge kind {kind!r}")
    return parser(obj)


def load_cartridge(path):
    return parse_cartridge(Path(path))


def serialize_cartridge(cartridge) -> str:
    """Canonical JSON text; parse(serialize(c)) == c and bytes are stable."""
    cartridge.validate()
    return canonical_json(cartridge.to_json())


def cartridge_hash(cartridge) -> str:
    return content_hash(cartridge.to_json())


# --- study resolution ----------------------------------------------------------

@dataclass(frozen=True)
class StudyPlan:
    """All cartridges cross-checked against a dataset, ready to execute.

    ``factor_pipelines`` maps each factor id to the ordered column
    transforms that apply to it; ``creatinine_factors`` lists the factors
    that pull in the urinary-creatinine control.
    """

    response: ResponseCartridge
    cohort: CohortCartridge
    factors: tuple  # RiskFactorCartridge, >= 1
    workflow: WorkflowCartridge
    dataset: Dataset
    created_at: str
    factor_ids: tuple
    factor_pipelines: dict
    creatinine_factors: frozenset
    creatinine_var: str | None

    @property
    def controls(self) -> tuple:
        return self.response.required_controls

    @property
    def alpha(self) -> float:
        return float(self.workflow.hyperparams["alpha"])


def find_creatinine_var(ds: Dataset) -> str | None:
    """Locate a urinary creatinine variable by id or label convention."""
    if ds.has_variable(CREATININE_VAR):
        return CREATININE_VAR
    for v in ds.dictionary:
        if v.kind == "continuous" and "creatinine" in v.label.lower():
            return v.id
    return None


def _factor_pipeline(workflow: WorkflowCartridge, axioms: tuple) -> tuple:
    """Merge workflow steps with one factor's axioms into column transforms.

    Workflow steps apply to every factor; axiom steps extend them for this
    factor. Only log-transform and standardize are column transforms; the
    relative order follows the workflow's declared order, with an
    axiom-requested log-transform defaulting to before standardize.
    """
    steps = []
    for step in workflow.preprocessing:
        if step in ("log-transform", "standardize"):
            steps.append(step)
    if "log-transform" in axioms and "log-transform" not in steps:
        steps.insert(0, "log-transform")
    if "standardize" in axioms and "standardize" not in steps:
        steps.append("standardize")
    return tuple(steps)


def resolve_study(response: ResponseCartridge, cohort: CohortCartridge,
                  factors, workflow: WorkflowCartridge,
                  ds: Dataset) -> StudyPlan:
    """Cross-reference cartridges against a dataset into an executable plan."""
    if isinstance(factors, RiskFactorCartridge):
        factors = (factors,)
    factors = tuple(factors)
    if not factors:
        raise SchemaViolation("a study needs at least one risk-factor cartridge")
    for c in (response, cohort, *factors, workflow):
        c.validate()

    response_kind = ds.variable(response.response_var).kind
    if response.positive_rule.op and response_kind != "continuous":
        raise TypeMismatch(
            f"threshold positive_rule needs a continuous response, "
            f"{response.response_var!r} is {response_kind}")
    if response.positive_rule.codes and response_kind == "continuous":
        raise TypeMismatch(
            f"code-set positive_rule needs a coded response, "
            f"{response.response_var!r} is continuous")

    for ctl in response.required_controls:
        ds.variable(ctl)  # raises UnknownVariable
    cohort.filter.validate_against(ds.dictionary)

    factor_ids = []
    merged_axioms = {}
    for rf in factors:
        for f in rf.factors:
            ds.variable(f)
            if f in factor_ids:
                continue  # same factor in two cartridges: keep first
            factor_ids.append(f)
            merged_axioms[f] = tuple(rf.per_factor_axioms.get(f, ()))
    factor_ids = tuple(factor_ids)

    collisions = set(factor_ids) & set(response.required_controls)
    if collisions:
        raise FactorControlCollision(
            f"factors also listed as controls: {sorted(collisions)}")
    if response.response_var in factor_ids:
        raise FactorControlCollision(
            f"factor {response.response_var!r} is the response variable")

    workflow_wants_creatinine = "creatinine-control" in workflow.preprocessing
    response_wants_creatinine = "creatinine-control" in response.domain_axioms
    creatinine_factors = {
        f for f in factor_ids
        if "creatinine-control" in merged_axioms[f]
        or workflow_wants_creatinine or response_wants_creatinine
    }
    creatinine_var = find_creatinine_var(ds)
    if creatinine_factors and creatinine_var is None:
        raise MissingCreatinine(
            "a factor requires creatinine-control but the dataset has no "
            "urinary creatinine variable")
    if creatinine_var in factor_ids and creatinine_factors:
        raise FactorControlCollision(
            f"creatinine variable {creatinine_var!r} cannot be both factor "
            "and control")

    _, kept, _ = apply_cohort(ds, cohort.filter)
    if kept == 0:
        raise EmptyCohort(f"cohort {cohort.id!r} keeps 0 rows")

    pipelines = {f: _factor_pipeline(workflow, merged_axioms[f])
                 for f in factor_ids}

    return StudyPlan(
        response=response,
        cohort=cohort,
        factors=factors,
        workflow=workflow,
        dataset=ds,
        created_at=_dt.datetime.now(_dt.timezone.utc)
                      .strftime("%Y-%m-%dT%H:%M:%SZ"),
        factor_ids=factor_ids,
        factor_pipelines=pipelines,
        creatinine_factors=frozenset(creatinine_factors),
        creatinine_var=creatinine_var if creatinine_factors else None,
    )
