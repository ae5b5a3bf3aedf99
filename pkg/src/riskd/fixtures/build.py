"""Regenerate the bundled fixture files. Run: python -m riskd.fixtures.build

Cartridges are written in canonical form; the extract CSV and dictionary
come from the synthetic generator with a frozen spec and seed, so a
rebuild is byte-identical unless this file changes.
"""

from __future__ import annotations

import json
from pathlib import Path

from ..cartridges import (
    CohortCartridge,
    PositiveRule,
    ResponseCartridge,
    RiskFactorCartridge,
    WorkflowCartridge,
    serialize_cartridge,
)
from ..datastore import Clause, CohortFilter, serialize_dataset
from ..synthetic import (
    ExposureSpec,
    OutcomeSpec,
    PlantedCadre,
    SyntheticSpec,
    generate_synthetic,
)
from . import CARTRIDGE_DIR, DATA_DIR

EXTRACT_SEED = 7

CONTROLS = ("RIDAGEYR", "RIAGENDR", "RIDRETH1", "BMXBMI")

URINARY_AXIOMS = ("urinary", "log-transform", "creatinine-control")


def fixture_cartridges() -> list:
    return [
        ResponseCartridge(
            id="resp-t2d", disease_label="type 2 diabetes",
            response_var="LBXGLU",
            positive_rule=PositiveRule(op=">=", value=126.0),
            required_controls=CONTROLS),
        ResponseCartridge(
            id="resp-breast-cancer", disease_label="breast cancer",
            response_var="MCQ220BC",
            positive_rule=PositiveRule(codes=(1.0,)),
            required_controls=CONTROLS),
        ResponseCartridge(
            id="resp-heart-disease", disease_label="heart disease",
            response_var="MCQ160C",
            positive_rule=PositiveRule(codes=(1.0,)),
            required_controls=CONTROLS),
        ResponseCartridge(
            id="resp-thyroid", disease_label="thyroid disease",
            response_var="MCQ160M",
            positive_rule=PositiveRule(codes=(1.0,)),
            required_controls=CONTROLS),
        ResponseCartridge(
            id="resp-hypertension", disease_label="hypertension",
            response_var="BPXSY1",
            positive_rule=PositiveRule(op=">=", value=130.0),
            required_controls=CONTROLS),
        CohortCartridge(
            id="coh-adults", label="Adults 20 and older",
            filter=CohortFilter(clauses=(
                Clause(var="RIDAGEYR", op=">=", value=20.0),))),
        CohortCartridge(
            id="coh-women", label="Women",
            filter=CohortFilter(clauses=(
                Clause(var="RIAGENDR", op="=", value=2.0),))),
        RiskFactorCartridge(
            id="rf-heavy-metals", category_label="heavy metals",
            factors=("LBXBPB", "LBXBCD", "LBXTHG", "URXUMO", "URXUUR"),
            per_factor_axioms={
                "LBXBPB": ("log-transform",),
                "LBXBCD": ("log-transform",),
                "LBXTHG": ("log-transform",),
                "URXUMO": URINARY_AXIOMS,
                "URXUUR": URINARY_AXIOMS,
            }),
        RiskFactorCartridge(
            id="rf-urinary-pahs",
            category_label="polycyclic aromatic hydrocarbons",
            factors=("URXP07", "URXP01", "URXP04"),
            per_factor_axioms={
                "URXP07": URINARY_AXIOMS,
                "URXP01": URINARY_AXIOMS,
                "URXP04": URINARY_AXIOMS,
            }),
        RiskFactorCartridge(
            id="rf-lifestyle", category_label="lifestyle",
            factors=("PAQ_MINS", "ALQ_DRINKS", "SMD_PACKYRS")),
        WorkflowCartridge(
            id="wf-ewas",
            preprocessing=("complete-case", "standardize"),
            method="swglm-ewas",
            hyperparams={"alpha": 0.05,
                         "fdr_method": "benjamini-hochberg"}),
        WorkflowCartridge(
            id="wf-scm",
            preprocessing=("complete-case", "standardize"),
            method="scm",
            hyperparams={"M": 2, "gamma": 0.5, "learning_rate": 0.1,
                         "epochs": 250, "batch_size": 32,
                         "lambda_w": (0.0, 1e-4),
                         "lambda_d": (0.04, 0.0),
                         "seed": 7, "alpha": 0.05,
                         "fdr_method": "benjamini-hochberg"}),
    ]


def extract_spec() -> SyntheticSpec:
    # index:      0        1        2        3        4        5        6        7        8          9           10
    exposures = (
        ExposureSpec("LBXBPB", "Blood lead", unit="ug/dL",
                     distribution="lognormal"),
        ExposureSpec("LBXBCD", "Blood cadmium", unit="ug/L",
                     distribution="lognormal"),
        ExposureSpec("LBXTHG", "Blood mercury, total", unit="ug/L",
                     distribution="lognormal"),
        ExposureSpec("URXUMO", "Urinary molybdenum", unit="ug/L",
                     distribution="lognormal"),
        ExposureSpec("URXUUR", "Urinary uranium", unit="ug/L",
                     distribution="lognormal"),
        ExposureSpec("URXP07", "Urinary 2-hydroxyfluorene", unit="ng/L",
                     distribution="lognormal"),
        ExposureSpec("URXP01", "Urinary 1-hydroxynaphthalene", unit="ng/L",
                     distribution="lognormal"),
        ExposureSpec("URXP04", "Urinary 3-hydroxyfluorene", unit="ng/L",
                     distribution="lognormal"),
        ExposureSpec("PAQ_MINS", "Weekly minutes of physical activity",
                     unit="minutes", category="lifestyle"),
        ExposureSpec("ALQ_DRINKS", "Alcoholic drinks per week",
                     unit="drinks", category="lifestyle"),
        ExposureSpec("SMD_PACKYRS", "Cigarette pack years",
                     unit="pack years", category="lifestyle"),
    )
    p = len(exposures)

    def row(**effects) -> tuple:
        ids = [e.id for e in exposures]
        out = [0.0] * p
        for var, beta in effects.items():
            out[ids.index(var)] = beta
        return tuple(out)

    # cadre 1 carries a co-elevated pair of PAH metabolites
    offsets_cadre1 = row(URXP07=3.0, URXP04=2.0)

    return SyntheticSpec(
        n_subjects=200,
        exposures=exposures,
        cadres=(
            # keep demographic mixes matched so the planted split is the
            # URXP07 shift, and no ethnicity cell gets too small to model
            PlantedCadre(population_share=0.6, sample_share=0.5,
                         female_prob=0.45,
                         ethnicity_probs=(0.27, 0.20, 0.25, 0.17, 0.11)),
            PlantedCadre(offsets=offsets_cadre1, population_share=0.4,
                         sample_share=0.5, female_prob=0.55,
                         ethnicity_probs=(0.27, 0.20, 0.25, 0.17, 0.11)),
        ),
        outcomes=(
            OutcomeSpec(
                id="LBXGLU", label="Plasma fasting glucose",
                kind="continuous", unit="mg/dL",
                intercepts=(112.0,),
                coefficients=(row(URXUMO=9.0, URXUUR=-6.0),),
                noise_sd=14.0, age_slope=0.15),
            # cadre 1 intercept offsets the URXP07 latent mean (+3), so both
            # cadres sit on the same blood-pressure margin and the planted
            # effect shows up within cadre 1 rather than between cadres
            OutcomeSpec(
                id="BPXSY1", label="Systolic blood pressure",
                kind="continuous", unit="mm Hg",
                intercepts=(124.0, 106.0),
                coefficients=(row(LBXBPB=6.0),
                              row(LBXBPB=6.0, URXP07=6.0)),
                noise_sd=9.0, age_slope=0.25),
            OutcomeSpec(
                id="MCQ220BC", label="Ever told you had breast cancer",
                kind="binary", intercepts=(-1.7,), age_slope=0.04),
            OutcomeSpec(
                id="MCQ160C", label="Ever told you had coronary heart disease",
                kind="binary", intercepts=(-1.8,),
                coefficients=(row(SMD_PACKYRS=0.5),), age_slope=0.05),
            OutcomeSpec(
                id="MCQ160M", label="Ever told you had a thyroid problem",
                kind="binary", intercepts=(-1.6,)),
        ),
        include_creatinine=True,
        missing_rate=0.02,
    )


def main() -> None:
    CARTRIDGE_DIR.mkdir(parents=True, exist_ok=True)
    DATA_DIR.mkdir(parents=True, exist_ok=True)

    for cartridge in fixture_cartridges():
        path = CARTRIDGE_DIR / f"{cartridge.id}.json"
        path.write_text(serialize_cartridge(cartridge) + "\n",
                        encoding="utf-8")
        print(f"wrote {path}")

    spec = extract_spec()
    spec_path = DATA_DIR / "extract-spec.json"
    spec_path.write_text(json.dumps(spec.to_json(), indent=2, sort_keys=True)
                         + "\n", encoding="utf-8")
    print(f"wrote {spec_path}")

    ds, _ = generate_synthetic(spec, EXTRACT_SEED)
    csv_path = DATA_DIR / "extract.csv"
    dict_path = DATA_DIR / "extract.dict.json"
    serialize_dataset(ds, csv_path, dict_path)
    print(f"wrote {csv_path} ({ds.n_rows} rows)")
    print(f"wrote {dict_path}")


if __name__ == "__main__":
    main()
