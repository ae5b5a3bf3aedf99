"""HTTP API: cartridge CRUD, study jobs, results, provenance, cadres."""

import json
import time

import pytest
from fastapi.testclient import TestClient

from riskd.cartridges import CohortCartridge, serialize_cartridge
from riskd.datastore import Clause, CohortFilter, serialize_dataset
from riskd.service import create_app

from conftest import (
    binary_response,
    everyone_cohort,
    ewas_workflow,
    exposure_factors,
    scm_workflow,
    single_cadre_dataset,
)

DATASET_ID = "synth"


@pytest.fixture
def client(tmp_path):
    data_dir = tmp_path / "data"
    data_dir.mkdir()
    ds, _ = single_cadre_dataset(400, 3, [0.9, 0.0, 0.0], seed=2)
    serialize_dataset(ds, data_dir / f"{DATASET_ID}.csv",
                      data_dir / f"{DATASET_ID}.dict.json")
    app = create_app(tmp_path / "svc.store", dataset_dir=data_dir)
    with TestClient(app) as c:
        yield c


def upload(client, cartridge):
    r = client.post("/v1/cartridges", content=serialize_cartridge(cartridge))
    assert r.status_code == 201, r.text
    return r.json()


def upload_study_inputs(client, workflow=None):
    ids = {}
    for c in (binary_response(), everyone_cohort(), exposure_factors(3),
              workflow or ewas_workflow()):
        ids[c.kind] = upload(client, c)
    return ids


def submit(client, ids, dataset_id=DATASET_ID, **overrides):
    body = {
        "response_id": ids["response"]["id"],
        "cohort_id": ids["cohort"]["id"],
        "factor_ids": [ids["risk-factor"]["id"]],
        "workflow_id": ids["workflow"]["id"],
        "dataset_id": dataset_id,
    }
    body.update(overrides)
    return client.post("/v1/studies", json=body)


def wait_job(client, job_id, timeout=30.0):
    deadline = time.monotonic() + timeout
    snapshots = []
    while time.monotonic() < deadline:
        r = client.get(f"/v1/jobs/{job_id}")
        assert r.status_code == 200
        snap = r.json()
        snapshots.append(snap)
        if snap["status"] in ("done", "failed"):
            return snap, snapshots
        time.sleep(0.02)
    raise AssertionError(f"job {job_id} did not finish: {snapshots[-1]}")


# --- cartridges ----------------------------------------------------------------

def test_cartridge_crud(client):
    resp = binary_response()
    created = upload(client, resp)
    assert created["kind"] == "response"
    assert created["id"] == "resp-y"
    assert len(created["hash"]) == 64

    fetched = client.get(f"/v1/cartridges/{created['hash']}")
    assert fetched.status_code == 200
    assert fetched.text == serialize_cartridge(resp)
    # user-facing id resolves too
    assert client.get("/v1/cartridges/resp-y").status_code == 200

    listing = client.get("/v1/cartridges", params={"kind": "response"})
    assert listing.status_code == 200
    rows = listing.json()["cartridges"]
    assert [r["id"] for r in rows] == ["resp-y"]
    assert rows[0]["hash"] == created["hash"]
    assert rows[0]["body"]["disease_label"] == "synthetic outcome"


def test_cartridge_listing_guards(client):
    r = client.get("/v1/cartridges", params={"kind": "potion"})
    assert r.status_code == 400
    assert r.json()["code"] == "unknown-kind"
    r = client.get("/v1/cartridges", params={"sort": "asc"})
    assert r.status_code == 400
    assert r.json()["code"] == "unknown-query-param"
    r = client.get("/v1/cartridges/" + "0" * 64)
    assert r.status_code == 404
    assert r.json()["code"] == "not-found"


def test_upload_rejections(client):
    r = client.post("/v1/cartridges", content="{not json")
    assert r.status_code == 400
    assert r.json()["code"] == "malformed-cartridge"

    doc = json.loads(serialize_cartridge(binary_response()))
    doc["surprise"] = 1
    r = client.post("/v1/cartridges", content=json.dumps(doc))
    assert r.status_code == 400
    assert r.json()["code"] == "schema-violation"

    results_doc = {"kind": "results"}
    r = client.post("/v1/cartridges", content=json.dumps(results_doc))
    assert r.status_code == 400


def test_datasets_endpoint(client):
    r = client.get("/v1/datasets")
    assert r.status_code == 200
    rows = r.json()["datasets"]
    assert len(rows) == 1
    assert rows[0]["id"] == DATASET_ID
    assert rows[0]["n_rows"] == 400
    assert len(rows[0]["fingerprint"]) == 64


# --- studies -------------------------------------------------------------------

def test_study_lifecycle_ewas(client):
    ids = upload_study_inputs(client)
    r = submit(client, ids)
    assert r.status_code == 202, r.text
    job_id = r.json()["job_id"]
    final, snapshots = wait_job(client, job_id)
    assert final["status"] == "done"
    assert final["error"] is None
    assert final["request"]["dataset_id"] == DATASET_ID
    result_id = final["result_id"]
    assert result_id

    seen = [s["progress"] for s in snapshots if s["progress"]]
    assert all(p["stage"] == "factor" for p in seen)
    currents = [p["current"] for p in seen]
    assert currents == sorted(currents)

    r = client.get(f"/v1/results/{result_id}")
    assert r.status_code == 200
    body = r.json()
    assert body["id"] == result_id
    assert body["method"] == "swglm-ewas"
    top = body["findings"][0]
    assert top["factor_id"] == "EXPO01" and top["significant"]

    r = client.get(f"/v1/results/{result_id}/provenance")
    assert r.status_code == 200
    chain = r.json()
    assert chain["result_id"] == result_id
    assert len(chain["entries"]) == 4
    assert all(e["resolved"] for e in chain["entries"])

    r = client.get(f"/v1/results/{result_id}/cadres")
    assert r.status_code == 409
    assert r.json()["code"] == "wrong-method"

    r = client.get("/v1/results", params={"disease_label":
                                          "synthetic outcome"})
    assert [h["id"] for h in r.json()["results"]] == [result_id]
    r = client.get("/v1/results", params={"factor": "EXPO01",
                                          "significant_only": "true"})
    assert [h["id"] for h in r.json()["results"]] == [result_id]
    r = client.get("/v1/results", params={"factor": "EXPO03",
                                          "significant_only": "true"})
    assert r.json()["results"] == []


def test_study_lifecycle_scm(client):
    ids = upload_study_inputs(client, workflow=scm_workflow(epochs=6, M=2))
    r = submit(client, ids)
    assert r.status_code == 202, r.text
    final, snapshots = wait_job(client, r.json()["job_id"])
    assert final["status"] == "done", final
    result_id = final["result_id"]

    seen = [s["progress"] for s in snapshots if s["progress"]]
    assert all(p["stage"] == "epoch" and p["total"] == 6 for p in seen)

    r = client.get(f"/v1/results/{result_id}/cadres")
    assert r.status_code == 200
    body = r.json()
    assert body["result_id"] == result_id
    assert body["model"]["M"] == 2
    assert len(body["summaries"]) == 2
    assert len(body["per_cadre"]) == 2

    r = client.get("/v1/results", params={"method": "scm"})
    assert [h["id"] for h in r.json()["results"]] == [result_id]


def test_submit_validation(client):
    ids = upload_study_inputs(client)

    r = client.post("/v1/studies", content="{oops")
    assert r.status_code == 400
    assert r.json()["code"] == "malformed-cartridge"

    body = {"response_id": "resp-y", "cohort_id": "coh-all",
            "factor_ids": ["rf-x"], "workflow_id": "wf-scan"}
    r = client.post("/v1/studies", json=body)  # dataset_id missing
    assert r.status_code == 400
    assert r.json()["code"] == "schema-violation"

    r = submit(client, ids, extra_field=1)
    assert r.status_code == 400

    r = submit(client, ids, factor_ids=[])
    assert r.status_code == 400

    r = submit(client, ids, factor_ids="rf-x")
    assert r.status_code == 400

    r = submit(client, ids, dataset_id="nope")
    assert r.status_code == 404
    assert r.json()["code"] == "not-found"

    r = submit(client, ids, response_id="wf-scan")
    assert r.status_code == 400
    assert r.json()["code"] == "wrong-kind"

    r = submit(client, ids, response_id="ghost")
    assert r.status_code == 404


def test_submit_fails_fast_on_resolution(client):
    ids = upload_study_inputs(client)
    nobody = CohortCartridge(
        id="coh-none", label="nobody",
        filter=CohortFilter(clauses=(Clause("RIDAGEYR", ">=", 500.0),)))
    upload(client, nobody)
    r = submit(client, ids, cohort_id="coh-none")
    assert r.status_code == 422
    assert r.json()["code"] == "empty-cohort"


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_failed_job_reports_error(client):
    bad_wf = scm_workflow(epochs=2, learning_rate=1e15,
                          lambda_w=(0.0, 1e9))
    ids = upload_study_inputs(client, workflow=bad_wf)
    r = submit(client, ids)
    assert r.status_code == 202
    final, _ = wait_job(client, r.json()["job_id"])
    assert final["status"] == "failed"
    assert final["result_id"] is None
    assert "DivergedLoss" in final["error"]


def test_job_unknown_and_result_params(client):
    assert client.get("/v1/jobs/ghost").status_code == 404
    r = client.get("/v1/results", params={"significant_only": "maybe"})
    assert r.status_code == 400
    r = client.get("/v1/results", params={"limit": "5"})
    assert r.status_code == 400
    assert r.json()["code"] == "unknown-query-param"
    assert client.get("/v1/results/" + "0" * 64).status_code == 404
