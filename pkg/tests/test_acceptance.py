"""Shipping gate: one test per release criterion, at the stated tolerance.

These are intentionally heavier than the module tests (multi-seed
synthetic reproductions, full CLI passes). Each test carries its runtime
budget as an assertion so a regression that blows the budget fails loudly
rather than quietly slowing the suite. Expect a few minutes total.
"""

import json
import time
from dataclasses import replace

import numpy as np
import pytest

from riskd import fixtures
from riskd.cartridges import parse_cartridge, resolve_study, serialize_cartridge
from riskd.cli import main as cli_main
from riskd.datastore import load_dataset
from riskd.pipeline import run_study
from riskd.preprocess import build_design
from riskd.provenance import ProvenanceStore
from riskd.scm import (
    CadreModelParams,
    ScmHyperparams,
    gate_probabilities,
    loss_and_gradients,
    per_cadre_association,
    train_scm,
)
from riskd.swglm import ewas_scan, fit_weighted_logistic
from riskd.synthetic import (
    OutcomeSpec,
    PlantedCadre,
    SyntheticSpec,
    default_exposures,
    generate_synthetic,
)

from conftest import (
    binary_response,
    everyone_cohort,
    ewas_workflow,
    exposure_factors,
    make_design,
    scm_workflow,
    single_cadre_dataset,
)
from oracles import (
    BIAS_SCENARIO,
    POP_TARGET,
    central_difference,
    newton_logistic,
    pseudo_true_logistic,
)


def resolved_design(ds, p, workflow):
    plan = resolve_study(binary_response(), everyone_cohort(),
                         [exposure_factors(p)], workflow, ds)
    return plan, build_design(plan, ds)


def two_cadre_dataset(n, p, offsets_on, coef_on, offset, coef, seed):
    """Two equal cadres; cadre 1 shifted on offsets_on, coefficients
    opposite-signed on coef_on."""
    offs = [0.0] * p
    for j in offsets_on:
        offs[j] = offset
    c0 = [0.0] * p
    c1 = [0.0] * p
    for j in coef_on:
        c0[j] = coef
        c1[j] = -coef
    spec = SyntheticSpec(
        n_subjects=n, exposures=default_exposures(p),
        cadres=(PlantedCadre(population_share=0.5, sample_share=0.5),
                PlantedCadre(offsets=tuple(offs), population_share=0.5,
                             sample_share=0.5)),
        outcomes=(OutcomeSpec(id="Y1", label="synthetic outcome",
                              kind="binary", intercepts=(0.0,),
                              coefficients=(tuple(c0), tuple(c1))),),
        include_creatinine=False)
    return generate_synthetic(spec, seed)


def test_gate_normalization_random_draws():
    rng = np.random.default_rng(0)
    start = time.monotonic()
    for _ in range(1000):
        m = int(rng.integers(1, 7))
        p = int(rng.integers(1, 9))
        params = CadreModelParams(
            centers=rng.normal(scale=3.0, size=(m, p)),
            expert_weights=rng.normal(size=(m, p)),
            expert_bias=rng.normal(size=m),
            seminorm_diag=rng.uniform(-2.0, 2.0, p),
            gamma=float(rng.uniform(0.05, 5.0)))
        g = gate_probabilities(rng.normal(scale=3.0, size=p), params)
        assert abs(g.sum() - 1.0) <= 1e-9
        assert g.min() >= 0.0 and g.max() <= 1.0
    assert time.monotonic() - start < 1.0


def test_gradients_match_finite_differences_50_points():
    m, p, n = 3, 4, 6
    rng = np.random.default_rng(1)
    start = time.monotonic()
    hp_pen = dict(lambda_w=(0.003, 0.002), lambda_d=(0.004, 0.001))
    worst = 0.0
    for _ in range(50):
        gamma = float(rng.uniform(0.3, 1.2))
        d = rng.uniform(0.01, 1.5, p) * rng.choice([-1.0, 1.0], p)
        params = CadreModelParams(
            centers=rng.normal(size=(m, p)),
            expert_weights=rng.normal(size=(m, p)),
            expert_bias=rng.normal(size=m),
            seminorm_diag=d, gamma=gamma)
        X = rng.normal(size=(n, p))
        y = rng.integers(0, 2, n).astype(float)
        w = rng.uniform(0.5, 3.0, n)
        hp = ScmHyperparams(m=m, gamma=gamma, learning_rate=0.1, epochs=1,
                            batch_size=n, **hp_pen)

        sizes = [m * p, 2 * m * p, 2 * m * p + m]

        def unpack(theta):
            c, ew, b, sd = np.split(theta, sizes)
            return CadreModelParams(centers=c.reshape(m, p),
                                    expert_weights=ew.reshape(m, p),
                                    expert_bias=b, seminorm_diag=sd,
                                    gamma=gamma)

        theta = np.concatenate([params.centers.ravel(),
                                params.expert_weights.ravel(),
                                params.expert_bias, params.seminorm_diag])
        _, grads = loss_and_gradients(X, y, w, params, hp)
        analytic = np.concatenate([grads.centers.ravel(),
                                   grads.expert_weights.ravel(),
                                   grads.expert_bias, grads.seminorm_diag])
        numeric = central_difference(
            lambda t: loss_and_gradients(X, y, w, unpack(t), hp)[0], theta)
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)),
                           1e-3)
        worst = max(worst, float(np.max(np.abs(analytic - numeric) / denom)))
    assert worst <= 1e-5
    assert time.monotonic() - start < 30.0


def test_single_cadre_model_matches_weighted_glm():
    start = time.monotonic()
    ds, _ = single_cadre_dataset(2000, 6, [0.8, -0.6, 0.5, 0.0, 0.3, -0.2],
                                 intercept=-0.4, seed=0)
    wf = scm_workflow(M=1, learning_rate=0.5, epochs=300, batch_size=256)
    _, design = resolved_design(ds, 6, wf)
    glm = fit_weighted_logistic(design)
    fit = train_scm(design, ScmHyperparams.from_workflow(wf.hyperparams))
    scm_beta = np.concatenate(([fit.params.expert_bias[0]],
                               fit.params.expert_weights[0]))
    assert float(np.max(np.abs(scm_beta - glm.coefficients))) <= 0.05
    assert time.monotonic() - start < 60.0


def test_planted_cadre_recovery_across_seeds():
    recovered = 0
    per_seed = []
    for ds_seed in range(10):
        start = time.monotonic()
        ds, truth = two_cadre_dataset(5000, 20, offsets_on=(0, 1),
                                      coef_on=(0, 2), offset=3.0, coef=0.8,
                                      seed=ds_seed)
        wf = scm_workflow(epochs=150, batch_size=256, lambda_w=(0.0, 1e-4),
                          lambda_d=(0.01, 0.0))
        _, design = resolved_design(ds, 20, wf)
        labels = np.asarray(truth.cadre_labels)[list(design.row_index)]
        # restarts: keep the lowest final training loss
        picks = []
        for r in range(6):
            hp = ScmHyperparams.from_workflow(
                {**wf.hyperparams, "seed": ds_seed + 100 * r})
            fit = train_scm(design, hp)
            a = fit.cadre_assignments
            acc = max(float(np.mean(a == labels)),
                      float(np.mean(a == 1 - labels)))
            picks.append((fit.loss_trace[-1], acc))
        accuracy = min(picks)[1]
        per_seed.append(time.monotonic() - start)
        recovered += accuracy >= 0.90
    assert recovered >= 8, f"recovered {recovered}/10"
    assert max(per_seed) < 120.0


def test_per_cadre_association_found_only_in_planted_cadre():
    start = time.monotonic()
    p = 8
    planted = default_exposures(p)[0].id
    hits = 0
    for seed in range(100):
        offs = (1.5,) + (0.0,) * (p - 1)
        c1 = [0.0] * p
        c1[0] = 0.9
        spec = SyntheticSpec(
            n_subjects=2000, exposures=default_exposures(p),
            cadres=(PlantedCadre(population_share=0.5, sample_share=0.5),
                    PlantedCadre(offsets=offs, population_share=0.5,
                                 sample_share=0.5)),
            outcomes=(OutcomeSpec(id="Y1", label="synthetic outcome",
                                  kind="binary", intercepts=(0.0,),
                                  coefficients=((0.0,) * p, tuple(c1))),),
            include_creatinine=False)
        ds, truth = generate_synthetic(spec, seed)
        plan, design = resolved_design(ds, p, ewas_workflow())
        labels = np.asarray(truth.cadre_labels)[list(design.row_index)]
        scans = per_cadre_association(plan, ds, labels, 0.05,
                                      design.row_index, 2)
        sig = [{r.factor_id for r in sc.results if r.significant}
               if sc.testable else None for sc in scans]
        if sig[0] is not None and sig[1] is not None \
                and planted in sig[1] and planted not in sig[0]:
            hits += 1
    assert hits >= 90, f"cadre-specific signal isolated in {hits}/100"
    assert time.monotonic() - start < 1200.0


def test_weighted_glm_matches_references():
    rng = np.random.default_rng(5)
    n = 500
    X = rng.normal(size=(n, 3))
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-(0.3 + X @ [0.8, -0.5, 0.2]))))
    design = make_design(X, y.astype(float))

    fit = fit_weighted_logistic(design)
    ref, score_norm = newton_logistic(design.values, design.response,
                                      design.weights)
    assert score_norm < 1e-8
    assert float(np.max(np.abs(fit.coefficients - ref))) <= 1e-6

    # splitting every row into two half-weight copies changes nothing
    w = rng.uniform(0.5, 2.5, n)
    weighted = make_design(X, y.astype(float), w)
    doubled = make_design(np.repeat(X, 2, axis=0),
                          np.repeat(y.astype(float), 2),
                          np.repeat(w / 2.0, 2))
    fit_one = fit_weighted_logistic(weighted)
    fit_two = fit_weighted_logistic(doubled)
    assert float(np.max(np.abs(fit_one.coefficients
                               - fit_two.coefficients))) <= 1e-8

    y0 = np.array([1.0] * 30 + [0.0] * 70)
    w0 = np.linspace(0.5, 1.5, 100)
    intercept_only = make_design(np.empty((100, 0)), y0, w0)
    fit0 = fit_weighted_logistic(intercept_only)
    prop = float(np.sum(w0 * y0) / np.sum(w0))
    assert abs(fit0.coefficients[0]
               - np.log(prop / (1.0 - prop))) <= 1e-12


def test_ewas_controls_false_discoveries():
    p = 20
    planted = default_exposures(p)[0].id
    discovered = 0
    fdps = []
    for seed in range(20):
        coefs = [0.0] * p
        coefs[0] = 0.7
        ds, _ = single_cadre_dataset(1500, p, coefs, intercept=-0.2,
                                     seed=seed)
        plan, _ = resolved_design(ds, p, ewas_workflow())
        scan = ewas_scan(plan, ds)
        sig = {r.factor_id for r in scan.results if r.significant}
        discovered += planted in sig
        fdps.append(len(sig - {planted}) / max(1, len(sig)))
    assert discovered >= 18, f"planted factor found in {discovered}/20"
    assert float(np.mean(fdps)) <= 0.10


def test_survey_weights_correct_sampling_bias():
    # the frozen population slope comes from quadrature over the stratum mix
    a_pop, b_pop = pseudo_true_logistic(
        BIAS_SCENARIO["shares_pop"], BIAS_SCENARIO["mus"],
        BIAS_SCENARIO["intercepts"], BIAS_SCENARIO["slopes"])
    assert (a_pop, b_pop) == pytest.approx(POP_TARGET, rel=0, abs=1e-12)

    wins = 0
    for seed in range(20):
        spec = SyntheticSpec(
            n_subjects=3000, exposures=default_exposures(1),
            cadres=(PlantedCadre(population_share=0.9, sample_share=0.5),
                    PlantedCadre(offsets=(0.8,), population_share=0.1,
                                 sample_share=0.5)),
            outcomes=(OutcomeSpec(id="Y1", label="synthetic outcome",
                                  kind="binary",
                                  intercepts=BIAS_SCENARIO["intercepts"],
                                  coefficients=((0.8,), (-0.6,))),),
            include_creatinine=False)
        ds, _ = generate_synthetic(spec, seed)
        plan, design = resolved_design(
            ds, 1, ewas_workflow(preprocessing=("complete-case",)))
        fit_w = fit_weighted_logistic(design)
        fit_u = fit_weighted_logistic(
            replace(design, weights=np.ones(design.n)))
        err_w = abs(fit_w.coefficients[1] - b_pop)
        err_u = abs(fit_u.coefficients[1] - b_pop)
        wins += err_w < err_u
    assert wins >= 16, f"weighted fit closer to population truth in {wins}/20"


def test_cartridge_corpus_and_provenance_integrity(tmp_path):
    # bundled corpus round-trips byte for byte
    corpus = fixtures.all_cartridges()
    assert len(corpus) == 12
    for fixture_id, cartridge in corpus.items():
        path = fixtures.cartridge_path(fixture_id)
        assert serialize_cartridge(cartridge) + "\n" == path.read_text()
        assert parse_cartridge(serialize_cartridge(cartridge)) == cartridge

    ds = load_dataset(*fixtures.extract_paths())
    factors = [corpus["rf-heavy-metals"], corpus["rf-urinary-pahs"],
               corpus["rf-lifestyle"]]

    store = ProvenanceStore(tmp_path / "acc.store")
    ewas = run_study(corpus["resp-hypertension"], corpus["coh-adults"],
                     factors, corpus["wf-ewas"], ds, store=store)
    scm = run_study(corpus["resp-t2d"], corpus["coh-adults"],
                    factors, corpus["wf-scm"], ds, store=store)
    reloaded = ProvenanceStore(tmp_path / "acc.store")
    assert reloaded.audit() == []
    for outcome in (ewas, scm):
        chain = reloaded.provenance_chain(outcome.result_id)
        assert chain.entries and all(e.resolved for e in chain.entries)

    # same study, same seed: identical result identity and finding values
    rerun = run_study(corpus["resp-hypertension"], corpus["coh-adults"],
                      factors, corpus["wf-ewas"], ds,
                      store=ProvenanceStore(tmp_path / "other.store"))
    assert rerun.result_id == ewas.result_id
    assert [f.to_json() for f in rerun.result.findings] == \
           [f.to_json() for f in ewas.result.findings]


def test_cli_smoke_all_disease_fixtures(tmp_path, capsys):
    dest = tmp_path / "fixtures"
    assert cli_main(["fixtures", "export", "--dest", str(dest)]) == 0
    capsys.readouterr()
    carts = dest / "cartridges"
    data = dest / "data"
    expected_hits = {"resp-hypertension": "LBXBPB", "resp-t2d": "URXUMO",
                     "resp-heart-disease": "SMD_PACKYRS"}

    start = time.monotonic()
    for resp_id in fixtures.RESPONSE_IDS:
        cohort = "coh-women" if resp_id == "resp-breast-cancer" \
            else "coh-adults"
        code = cli_main([
            "run",
            "--response", str(carts / f"{resp_id}.json"),
            "--cohort", str(carts / f"{cohort}.json"),
            "--factors", str(carts / "rf-heavy-metals.json"),
            str(carts / "rf-urinary-pahs.json"),
            str(carts / "rf-lifestyle.json"),
            "--workflow", str(carts / "wf-ewas.json"),
            "--data", str(data / "extract.csv"),
            "--dict", str(data / "extract.dict.json"),
            "--store", str(tmp_path / "smoke.store"),
            "--format", "json"])
        out = capsys.readouterr().out
        assert code == 0, f"{resp_id} exited {code}"
        body = json.loads(out)
        flagged = {f["factor_id"] for f in body["findings"]
                   if f["significant"]}
        if resp_id in expected_hits:
            assert expected_hits[resp_id] in flagged, resp_id
    assert time.monotonic() - start < 60.0
