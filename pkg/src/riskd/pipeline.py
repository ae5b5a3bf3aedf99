"""End-to-end study execution: cartridges + data in, results cartridge out.

The pipeline resolves the study, dispatches to the configured method,
assembles the results cartridge with references to every input, and
optionally persists it. The CLI and the HTTP service both run studies
through here, which is what keeps their outputs value-identical.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .canonical import canonical_json
from .cartridges import StudyPlan, cartridge_hash, resolve_study
from .datastore import Dataset
from .errors import InvalidSpec
from .preprocess import build_design
from .provenance import InputRef, ProvenanceStore, ResultsCartridge
from .scm import (
    ScmFitResult,
    ScmHyperparams,
    cadre_summaries,
    per_cadre_association,
    train_scm,
)
from .swglm import ScanReport, ewas_scan


def dataset_fingerprint(ds: Dataset) -> str:
    """Stable identity for a dataset: dictionary + shape + column contents."""
    h = hashlib.sha256()
    dictionary = [v.to_json() for v in ds.dictionary]
    h.update(canonical_json(dictionary).encode("utf-8"))
    h.update(f"rows:{ds.n_rows}".encode("ascii"))
    for var_id in ds.variable_ids:
        column = np.ascontiguousarray(ds.column(var_id), dtype="<f8")
        h.update(var_id.encode("utf-8"))
        h.update(hashlib.sha256(column.tobytes()).digest())
    return h.hexdigest()


@dataclass(frozen=True)
class StudyOutcome:
    plan: StudyPlan
    result: ResultsCartridge
    result_id: str | None  # set when persisted
    scan: ScanReport | None  # swglm-ewas studies
    scm: ScmFitResult | None  # scm studies


def _input_refs(plan: StudyPlan) -> tuple:
    refs = [
        InputRef(kind="response", ref_id=plan.response.id,
                 hash=cartridge_hash(plan.response)),
        InputRef(kind="cohort", ref_id=plan.cohort.id,
                 hash=cartridge_hash(plan.cohort)),
    ]
    for rf in plan.factors:
        refs.append(InputRef(kind="risk-factor", ref_id=rf.id,
                             hash=cartridge_hash(rf)))
    refs.append(InputRef(kind="workflow", ref_id=plan.workflow.id,
                         hash=cartridge_hash(plan.workflow)))
    return tuple(refs)


def run_study(response, cohort, factors, workflow, ds: Dataset,
              store: ProvenanceStore | None = None,
              progress=None) -> StudyOutcome:
    """Resolve, execute, and (when a store is given) persist one study.

    ``progress(stage, current, total)`` receives per-factor ticks for
    scans and per-epoch ticks for cadre training.
    """
    plan = resolve_study(response, cohort, factors, workflow, ds)
    method = plan.workflow.method

    scan = None
    scm_fit = None
    if method == "swglm-ewas":
        scan = ewas_scan(plan, ds, progress=_stage(progress, "factor"))
        findings = scan.results
        skipped = scan.skipped
        seed = 0
        scm_payload = None
    elif method == "scm":
        hp = ScmHyperparams.from_workflow(plan.workflow.hyperparams)
        design = build_design(plan, ds, None)
        epoch_tick = _stage(progress, "epoch", total=hp.epochs)
        fit = train_scm(design, hp, progress=epoch_tick)
        summaries = cadre_summaries(design, ds, fit.cadre_assignments, hp.m)
        per_cadre = per_cadre_association(plan, ds, fit.cadre_assignments,
                                          plan.alpha, design.row_index, hp.m)
        scm_fit = ScmFitResult(
            params=fit.params, hyperparams=fit.hyperparams,
            loss_trace=fit.loss_trace,
            cadre_assignments=fit.cadre_assignments,
            feature_names=fit.feature_names,
            summaries=summaries, per_cadre_results=per_cadre)
        findings = ()
        skipped = ()
        seed = hp.seed
        scm_payload = {
            "model": scm_fit.model_json(),
            "summaries": [s.to_json() for s in summaries],
            "per_cadre": [c.to_json() for c in per_cadre],
            "cadre_assignments": [int(a) for a in fit.cadre_assignments],
            "subject_ids": list(design.subject_ids),
        }
    else:
        raise InvalidSpec(f"unknown method {method!r}")

    result = ResultsCartridge(
        input_refs=_input_refs(plan),
        dataset_fingerprint=dataset_fingerprint(ds),
        method=method,
        seed=seed,
        disease_label=plan.response.disease_label,
        alpha=plan.alpha,
        findings=tuple(findings),
        skipped=tuple(skipped),
        scm_payload=scm_payload,
    )

    result_id = None
    if store is not None:
        inputs = [plan.response, plan.cohort, *plan.factors, plan.workflow]
        result_id = store.persist_results(result, inputs)

    return StudyOutcome(plan=plan, result=result, result_id=result_id,
                        scan=scan, scm=scm_fit)


def _stage(progress, stage: str, total: int | None = None):
    if progress is None:
        return None

    def tick(current, extra=None, _stage=stage, _total=total):
        progress(_stage, int(current), _total if _total is not None else extra)

    return tick
