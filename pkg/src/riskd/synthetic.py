"""Deterministic generator for NHANES-like survey extracts.

Ships in the library (not test-only) so the CLI can demo the whole pipeline
without real survey data. The generator plants known structure (cadre
membership, per-cadre logistic coefficients, oversampled strata with
compensating weights) and returns that ground truth alongside the dataset
so tests can use it as an oracle.

Subjects are assigned to cadres by the *sample* shares; survey weights are
the ratio population_share / sample_share, making the weighted sample
unbiased for the declared population. Exposure latents are unit-variance
normals centered on the cadre offsets; a "lognormal" exposure stores
exp(latent) so concentration-style variables stay positive and a
log-transform recovers the latent scale. Outcome linear predictors act on
the latent scale.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datastore import Dataset, VariableDef
from .errors import InvalidSpec

DEFAULT_ETHNICITY_PROBS = (0.20, 0.11, 0.39, 0.24, 0.06)

GENDER_CODEBOOK = {"1": "Male", "2": "Female"}
ETHNICITY_CODEBOOK = {
    "1": "Mexican American",
    "2": "Other Hispanic",
    "3": "Non-Hispanic White",
    "4": "Non-Hispanic Black",
    "5": "Other Race - Including Multi-Racial",
}
YES_NO_CODEBOOK = {"1": "Yes", "2": "No"}


@dataclass(frozen=True)
class ExposureSpec:
    id: str
    label: str
    unit: str = ""
    distribution: str = "normal"  # or "lognormal": value = exp(latent)
    category: str = "exposure"
    ontology_term: str = ""


@dataclass(frozen=True)
class PlantedCadre:
    """One planted subpopulation: where its exposures sit and how it is sampled."""

    offsets: tuple = ()
    population_share: float = 1.0
    sample_share: float | None = None
    female_prob: float = 0.5
    ethnicity_probs: tuple | None = None


@dataclass(frozen=True)
class OutcomeSpec:
    """A response drawn from a per-cadre linear model on exposure latents.

    Binary outcomes are Bernoulli(sigmoid(eta)) stored NHANES-style as
    1 = yes, 2 = no. Continuous outcomes are eta + Gaussian noise on the
    measurement scale.
    """

    id: str
    label: str
    kind: str  # "binary" | "continuous"
    intercepts: tuple = (0.0,)
    coefficients: tuple = ()  # per-cadre rows; single row broadcasts
    noise_sd: float = 1.0
    age_slope: float = 0.0
    unit: str = ""


@dataclass(frozen=True)
class SyntheticSpec:
    n_subjects: int
    exposures: tuple
    cadres: tuple = (PlantedCadre(),)
    outcomes: tuple = ()
    include_creatinine: bool = False
    missing_rate: float = 0.0
    weight_scale: float = 1.0
    id_start: int = 100001

    def to_json(self) -> dict:
        return {
            "n_subjects": self.n_subjects,
            "exposures": [
                {"id": e.id, "label": e.label, "unit": e.unit,
                 "distribution": e.distribution, "category": e.category,
                 "ontology_term": e.ontology_term}
                for e in self.exposures
            ],
            "cadres": [
                {"offsets": list(c.offsets),
                 "population_share": c.population_share,
                 "sample_share": c.sample_share,
                 "female_prob": c.female_prob,
                 "ethnicity_probs": (list(c.ethnicity_probs)
                                     if c.ethnicity_probs else None)}
                for c in self.cadres
            ],
            "outcomes": [
                {"id": o.id, "label": o.label, "kind": o.kind,
                 "intercepts": list(o.intercepts),
                 "coefficients": [list(row) for row in o.coefficients],
                 "noise_sd": o.noise_sd, "age_slope": o.age_slope,
                 "unit": o.unit}
                for o in self.outcomes
            ],
            "include_creatinine": self.include_creatinine,
            "missing_rate": self.missing_rate,
            "weight_scale": self.weight_scale,
            "id_start": self.id_start,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SyntheticSpec":
        try:
            exposures = tuple(
                ExposureSpec(
                    id=e["id"], label=e.get("label", e["id"]),
                    unit=e.get("unit", ""),
                    distribution=e.get("distribution", "normal"),
                    category=e.get("category", "exposure"),
                    ontology_term=e.get("ontology_term", ""))
                for e in obj["exposures"])
            cadres = tuple(
                PlantedCadre(
                    offsets=tuple(c.get("offsets", ())),
                    population_share=float(c.get("population_share", 1.0)),
                    sample_share=(None if c.get("sample_share") is None
                                  else float(c["sample_share"])),
                    female_prob=float(c.get("female_prob", 0.5)),
                    ethnicity_probs=(tuple(c["ethnicity_probs"])
                                     if c.get("ethnicity_probs") else None))
                for c in obj.get("cadres", [{}]))
            outcomes = tuple(
                OutcomeSpec(
                    id=o["id"], label=o.get("label", o["id"]), kind=o["kind"],
                    intercepts=tuple(o.get("intercepts", (0.0,))),
                    coefficients=tuple(tuple(row)
                                       for row in o.get("coefficients", ())),
                    noise_sd=float(o.get("noise_sd", 1.0)),
                    age_slope=float(o.get("age_slope", 0.0)),
                    unit=o.get("unit", ""))
                for o in obj.get("outcomes", ()))
            return cls(
                n_subjects=int(obj["n_subjects"]),
                exposures=exposures,
                cadres=cadres,
                outcomes=outcomes,
                include_creatinine=bool(obj.get("include_creatinine", False)),
                missing_rate=float(obj.get("missing_rate", 0.0)),
                weight_scale=float(obj.get("weight_scale", 1.0)),
                id_start=int(obj.get("id_start", 100001)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidSpec(f"bad synthetic spec: {exc}") from exc


@dataclass
class SyntheticTruth:
    """Planted structure returned next to the generated dataset."""

    cadre_labels: np.ndarray
    exposure_latents: np.ndarray
    population_shares: tuple
    sample_shares: tuple
    outcome_models: dict
    exposure_population_means: tuple


def default_exposures(p: int, distribution: str = "normal") -> tuple:
    return tuple(
        ExposureSpec(id=f"EXPO{i + 1:02d}", label=f"Synthetic exposure {i + 1}",
                     distribution=distribution)
        for i in range(p))


def _per_cadre(rows, m: int, p: int, what: str):
    rows = tuple(tuple(float(v) for v in row) for row in rows)
    if not rows:
        rows = (tuple(0.0 for _ in range(p)),)
    if len(rows) == 1:
        rows = rows * m
    if len(rows) != m:
        raise InvalidSpec(f"{what}: expected 1 or {m} rows, got {len(rows)}")
    for row in rows:
        if len(row) != p:
            raise InvalidSpec(
                f"{what}: row length {len(row)} does not match {p} exposures")
    return rows


def _validate(spec: SyntheticSpec):
    if spec.n_subjects <= 0:
        raise InvalidSpec(f"n_subjects must be > 0, got {spec.n_subjects}")
    if not spec.exposures:
        raise InvalidSpec("at least one exposure is required")
    ids = [e.id for e in spec.exposures] + [o.id for o in spec.outcomes]
    if len(set(ids)) != len(ids):
        raise InvalidSpec("exposure/outcome ids must be unique")
    for e in spec.exposures:
        if e.distribution not in ("normal", "lognormal"):
            raise InvalidSpec(f"exposure {e.id!r}: bad distribution")
    for o in spec.outcomes:
        if o.kind not in ("binary", "continuous"):
            raise InvalidSpec(f"outcome {o.id!r}: bad kind {o.kind!r}")
        if o.noise_sd < 0:
            raise InvalidSpec(f"outcome {o.id!r}: noise_sd must be >= 0")
    if not (0.0 <= spec.missing_rate < 1.0):
        raise InvalidSpec("missing_rate must be in [0, 1)")
    if spec.weight_scale <= 0:
        raise InvalidSpec("weight_scale must be > 0")
    pop = [c.population_share for c in spec.cadres]
    if any(s <= 0 for s in pop) or abs(sum(pop) - 1.0) > 1e-9:
        raise InvalidSpec("cadre population shares must be > 0 and sum to 1")
    samp = [c.sample_share if c.sample_share is not None else c.population_share
            for c in spec.cadres]
    if any(s <= 0 for s in samp) or abs(sum(samp) - 1.0) > 1e-9:
        raise InvalidSpec("cadre sample shares must be > 0 and sum to 1")
    for c in spec.cadres:
        if not (0.0 <= c.female_prob <= 1.0):
            raise InvalidSpec("female_prob must be in [0, 1]")
        probs = c.ethnicity_probs or DEFAULT_ETHNICITY_PROBS
        if len(probs) != 5 or any(v < 0 for v in probs) or \
                abs(sum(probs) - 1.0) > 1e-9:
            raise InvalidSpec("ethnicity_probs must be 5 values summing to 1")


def _categorical_draw(rng, probs_per_row: np.ndarray) -> np.ndarray:
    # inverse-CDF draw so the rng stream stays one uniform per subject
    u = rng.random(probs_per_row.shape[0])
    cum = np.cumsum(probs_per_row, axis=1)
    return (u[:, None] > cum).sum(axis=1) + 1  # codes 1..K


def generate_synthetic(spec: SyntheticSpec, seed: int):
    """Generate (Dataset, SyntheticTruth), bitwise-deterministic per (spec, seed)."""
    _validate(spec)
    rng = np.random.default_rng(seed)
    n = spec.n_subjects
    m = len(spec.cadres)
    p = len(spec.exposures)

    pop = np.array([c.population_share for c in spec.cadres])
    samp = np.array([c.sample_share if c.sample_share is not None
                     else c.population_share for c in spec.cadres])
    offsets = np.zeros((m, p))
    for i, c in enumerate(spec.cadres):
        if c.offsets:
            if len(c.offsets) != p:
                raise InvalidSpec(
                    f"cadre {i}: offsets length {len(c.offsets)} does not "
                    f"match {p} exposures")
            offsets[i] = c.offsets

    labels = (rng.random(n)[:, None] > np.cumsum(samp)[None, :]).sum(axis=1)

    age = np.floor(rng.uniform(18, 80, n))
    female_probs = np.array([c.female_prob for c in spec.cadres])[labels]
    gender = np.where(rng.random(n) < female_probs, 2.0, 1.0)
    eth_probs = np.array([list(c.ethnicity_probs or DEFAULT_ETHNICITY_PROBS)
                          for c in spec.cadres])[labels]
    ethnicity = _categorical_draw(rng, eth_probs).astype(float)
    bmi = np.round(np.clip(rng.normal(28.0, 5.5, n), 15.0, 60.0), 1)
    creatinine = None
    if spec.include_creatinine:
        creatinine = np.round(np.exp(rng.normal(math.log(120.0), 0.55, n)), 1)

    latents = offsets[labels] + rng.standard_normal((n, p))
    values = latents.copy()
    for j, e in enumerate(spec.exposures):
        if e.distribution == "lognormal":
            values[:, j] = np.exp(latents[:, j])

    outcome_cols = {}
    outcome_models = {}
    for o in spec.outcomes:
        coefs = np.array(_per_cadre(o.coefficients or ((0.0,) * p,), m, p,
                                    f"outcome {o.id} coefficients"))
        icpts = tuple(float(v) for v in o.intercepts)
        if len(icpts) == 1:
            icpts = icpts * m
        if len(icpts) != m:
            raise InvalidSpec(
                f"outcome {o.id}: expected 1 or {m} intercepts")
        eta = (np.array(icpts)[labels]
               + np.einsum("np,np->n", latents, coefs[labels])
               + o.age_slope * (age - 45.0))
        if o.kind == "binary":
            prob = 1.0 / (1.0 + np.exp(-eta))
            positive = rng.random(n) < prob
            outcome_cols[o.id] = np.where(positive, 1.0, 2.0)
        else:
            outcome_cols[o.id] = eta + o.noise_sd * rng.standard_normal(n)
        outcome_models[o.id] = {
            "kind": o.kind,
            "intercepts": icpts,
            "coefficients": tuple(tuple(row) for row in coefs),
        }

    if spec.missing_rate > 0:
        holes = rng.random((n, p)) < spec.missing_rate
        values[holes] = np.nan

    weights = (pop / samp)[labels] * spec.weight_scale

    dictionary = [
        VariableDef("SEQN", "Respondent sequence number", "continuous",
                    category="demographic"),
        VariableDef("RIDAGEYR", "Age in years at screening", "continuous",
                    unit="years", category="demographic"),
        VariableDef("RIAGENDR", "Gender", "categorical",
                    codebook=dict(GENDER_CODEBOOK), category="demographic"),
        VariableDef("RIDRETH1", "Race/Hispanic origin", "categorical",
                    codebook=dict(ETHNICITY_CODEBOOK), category="demographic"),
        VariableDef("BMXBMI", "Body mass index", "continuous",
                    unit="kg/m**2", category="lifestyle"),
        VariableDef("WTMEC2YR", "Full sample 2 year MEC exam weight",
                    "continuous", category="weight"),
    ]
    columns = [
        np.arange(spec.id_start, spec.id_start + n, dtype=float),
        age, gender, ethnicity, bmi, weights,
    ]
    if spec.include_creatinine:
        dictionary.append(VariableDef(
            "URXUCR", "Urinary creatinine", "continuous", unit="mg/dL",
            category="laboratory"))
        columns.append(creatinine)
    for j, e in enumerate(spec.exposures):
        dictionary.append(VariableDef(
            e.id, e.label, "continuous", unit=e.unit, category=e.category,
            ontology_term=e.ontology_term))
        columns.append(values[:, j])
    for o in spec.outcomes:
        if o.kind == "binary":
            dictionary.append(VariableDef(
                o.id, o.label, "binary", codebook=dict(YES_NO_CODEBOOK),
                category="outcome"))
        else:
            dictionary.append(VariableDef(
                o.id, o.label, "continuous", unit=o.unit, category="outcome"))
        columns.append(outcome_cols[o.id])

    rows = np.column_stack(columns)
    ds = Dataset(
        dictionary=tuple(dictionary),
        rows=rows,
        subject_ids=tuple(str(spec.id_start + i) for i in range(n)),
        weight_var="WTMEC2YR",
    )
    ds.validate()

    pop_means = []
    for j, e in enumerate(spec.exposures):
        mus = offsets[:, j]
        if e.distribution == "lognormal":
            pop_means.append(float(np.sum(pop * np.exp(mus + 0.5))))
        else:
            pop_means.append(float(np.sum(pop * mus)))

    truth = SyntheticTruth(
        cadre_labels=labels,
        exposure_latents=latents,
        population_shares=tuple(float(v) for v in pop),
        sample_shares=tuple(float(v) for v in samp),
        outcome_models=outcome_models,
        exposure_population_means=tuple(pop_means),
    )
    return ds, truth


def load_spec(path) -> SyntheticSpec:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidSpec(f"cannot parse spec {path}: {exc}") from exc
    return SyntheticSpec.from_json(obj)
