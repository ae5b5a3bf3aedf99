"""HTTP front end: cartridge management, study jobs, results, provenance.

The API lives under /v1 and returns a uniform {code, message, detail}
body on every error. Studies run on a small worker pool; submissions are
validated synchronously (bad requests fail fast with 400/404) and the
fitting work happens in the background job.
"""

from __future__ import annotations

import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from .canonical import canonical_json
from .cartridges import CARTRIDGE_KINDS, parse_cartridge, resolve_study
from .datastore import Dataset, load_dataset
from .errors import NotFound, RiskdError, StorageError, ValidationError
from .pipeline import dataset_fingerprint, run_study
from .provenance import ProvenanceStore
from .version import ENGINE

DEFAULT_WORKERS = 2


def error_body(code: str, message: str, detail=None) -> dict:
    return {"code": code, "message": message, "detail": detail}


def _error_response(status: int, code: str, message: str,
                    detail=None) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content=error_body(code, message, detail))


class DatasetRegistry:
    """Datasets found in a directory as {id}.csv + {id}.dict.json pairs."""

    def __init__(self, directory=None):
        self.directory = Path(directory) if directory else None
        self._cache: dict = {}
        self._lock = threading.Lock()

    def ids(self) -> list:
        if self.directory is None or not self.directory.is_dir():
            return []
        found = []
        for csv_path in sorted(self.directory.glob("*.csv")):
            if csv_path.with_suffix(".dict.json").exists():
                found.append(csv_path.stem)
        return found

    def load(self, dataset_id: str) -> Dataset:
        with self._lock:
            if dataset_id in self._cache:
                return self._cache[dataset_id]
        if self.directory is None:
            raise NotFound("service has no dataset directory configured")
        csv_path = self.directory / f"{dataset_id}.csv"
        dict_path = self.directory / f"{dataset_id}.dict.json"
        if not csv_path.exists() or not dict_path.exists():
            raise NotFound(f"unknown dataset {dataset_id!r}")
        ds = load_dataset(csv_path, dict_path)
        with self._lock:
            self._cache[dataset_id] = ds
        return ds


@dataclass
class StudyJob:
    job_id: str
    status: str = "queued"  # queued -> running -> done | failed
    request: dict = field(default_factory=dict)
    result_id: str | None = None
    error: str | None = None
    progress: dict = field(default_factory=dict)


class JobManager:
    def __init__(self, workers: int = DEFAULT_WORKERS):
        self._pool = ThreadPoolExecutor(max_workers=workers)
        self._jobs: dict = {}
        self._lock = threading.Lock()

    def submit(self, request: dict, runner) -> StudyJob:
        job = StudyJob(job_id=uuid.uuid4().hex[:16], request=request)
        with self._lock:
            self._jobs[job.job_id] = job
        self._pool.submit(self._run, job, runner)
        return job

    def _run(self, job: StudyJob, runner) -> None:
        with self._lock:
            job.status = "running"

        def tick(stage, current, total):
            with self._lock:
                job.progress = {"stage": stage, "current": current,
                                "total": total}

        try:
            result_id = runner(tick)
        except Exception as exc:  # noqa: BLE001 - job surface, not a crash
            with self._lock:
                job.status = "failed"
                job.error = f"{type(exc).__name__}: {exc}"
            return
        with self._lock:
            job.status = "done"
            job.result_id = result_id

    def get(self, job_id: str) -> StudyJob:
        with self._lock:
            job = self._jobs.get(job_id)
        if job is None:
            raise NotFound(f"unknown job {job_id!r}")
        return job

    def snapshot(self, job_id: str) -> dict:
        job = self.get(job_id)
        with self._lock:
            return {
                "job_id": job.job_id,
                "status": job.status,
                "request": dict(job.request),
                "result_id": job.result_id,
                "error": job.error,
                "progress": dict(job.progress),
            }

    def shutdown(self) -> None:
        self._pool.shutdown(wait=False, cancel_futures=True)


def _enforce_params(request: Request, allowed: set) -> JSONResponse | None:
    unknown = set(request.query_params) - allowed
    if unknown:
        return _error_response(
            400, "unknown-query-param",
            f"unknown query parameters: {sorted(unknown)}")
    return None


def create_app(store_path, dataset_dir=None,
               workers: int = DEFAULT_WORKERS) -> FastAPI:
    app = FastAPI(title="riskd", version=ENGINE.split()[-1],
                  docs_url=None, redoc_url=None, openapi_url=None)
    store = ProvenanceStore(store_path)
    datasets = DatasetRegistry(dataset_dir)
    jobs = JobManager(workers=workers)
    app.state.store = store
    app.state.datasets = datasets
    app.state.jobs = jobs

    @app.exception_handler(RiskdError)
    async def riskd_error(_request, exc: RiskdError):
        if isinstance(exc, NotFound):
            status = 404
        elif isinstance(exc, ValidationError):
            status = 400
        elif isinstance(exc, StorageError):
            status = 500
        else:
            status = 422
        return _error_response(status, exc.code, exc.message)

    @app.get("/v1/cartridges")
    async def list_cartridges(request: Request):
        bad = _enforce_params(request, {"kind"})
        if bad:
            return bad
        kind = request.query_params.get("kind")
        if kind is not None and kind not in CARTRIDGE_KINDS:
            return _error_response(400, "unknown-kind",
                                   f"unknown cartridge kind {kind!r}")
        records = store.list_cartridges(kind)
        return {"cartridges": [
            {"hash": r.record_id, "kind": r.kind,
             "id": r.body.get("id", r.record_id), "body": r.body}
            for r in records if r.kind != "results"
        ]}

    @app.post("/v1/cartridges", status_code=201)
    async def upload_cartridge(request: Request):
        bad = _enforce_params(request, set())
        if bad:
            return bad
        text = (await request.body()).decode("utf-8")
        cartridge = parse_cartridge(text)  # RiskdError -> 400 handler
        if cartridge.kind == "results":
            return _error_response(
                400, "wrong-kind",
                "results cartridges are produced by studies, not uploaded")
        record_id = store.put_cartridge(cartridge)
        return {"hash": record_id, "id": cartridge.id,
                "kind": cartridge.kind}

    @app.get("/v1/cartridges/{cartridge_id}")
    async def get_cartridge(cartridge_id: str, request: Request):
        bad = _enforce_params(request, set())
        if bad:
            return bad
        record = store.get(cartridge_id)
        return Response(content=canonical_json(record.body),
                        media_type="application/json")

    @app.get("/v1/datasets")
    async def list_datasets(request: Request):
        bad = _enforce_params(request, set())
        if bad:
            return bad
        out = []
        for dataset_id in datasets.ids():
            ds = datasets.load(dataset_id)
            out.append({"id": dataset_id, "n_rows": ds.n_rows,
                        "n_vars": ds.n_vars,
                        "fingerprint": dataset_fingerprint(ds)})
        return {"datasets": out}

    @app.post("/v1/studies", status_code=202)
    async def submit_study(request: Request):
        bad = _enforce_params(request, set())
        if bad:
            return bad
        try:
            body = await request.json()
        except Exception:  # noqa: BLE001
            return _error_response(400, "malformed-cartridge",
                                   "request body is not valid JSON")
        required = {"response_id", "cohort_id", "factor_ids", "workflow_id",
                    "dataset_id"}
        if not isinstance(body, dict) or set(body) != required:
            return _error_response(
                400, "schema-violation",
                f"study request needs exactly the fields {sorted(required)}")
        factor_ids = body["factor_ids"]
        if not isinstance(factor_ids, list) or not factor_ids:
            return _error_response(400, "schema-violation",
                                   "factor_ids must be a non-empty list")

        response = store.get_cartridge(body["response_id"])
        cohort = store.get_cartridge(body["cohort_id"])
        factors = [store.get_cartridge(fid) for fid in factor_ids]
        workflow = store.get_cartridge(body["workflow_id"])
        for cartridge, kind in ((response, "response"), (cohort, "cohort"),
                                (workflow, "workflow")):
            if cartridge.kind != kind:
                return _error_response(
                    400, "wrong-kind",
                    f"{cartridge.id!r} is a {cartridge.kind} cartridge, "
                    f"expected {kind}")
        for cartridge in factors:
            if cartridge.kind != "risk-factor":
                return _error_response(
                    400, "wrong-kind",
                    f"{cartridge.id!r} is a {cartridge.kind} cartridge, "
                    "expected risk-factor")
        ds = datasets.load(body["dataset_id"])

        # surface resolution errors now; only fitting happens in the job
        resolve_study(response, cohort, factors, workflow, ds)

        def runner(tick):
            outcome = run_study(response, cohort, factors, workflow, ds,
                                store=store, progress=tick)
            return outcome.result_id

        job = jobs.submit(dict(body), runner)
        return {"job_id": job.job_id, "status": job.status}

    @app.get("/v1/jobs/{job_id}")
    async def job_status(job_id: str, request: Request):
        bad = _enforce_params(request, set())
        if bad:
            return bad
        return jobs.snapshot(job_id)

    @app.get("/v1/results")
    async def query_results(request: Request):
        allowed = {"disease_label", "factor", "significant_only", "method"}
        bad = _enforce_params(request, allowed)
        if bad:
            return bad
        params = request.query_params
        significant_only = params.get("significant_only", "false")
        if significant_only not in ("true", "false"):
            return _error_response(400, "schema-violation",
                                   "significant_only must be true or false")
        headers = store.query_results(
            disease_label=params.get("disease_label"),
            factor_id=params.get("factor"),
            significant_only=significant_only == "true",
            method=params.get("method"),
        )
        return {"results": headers}

    @app.get("/v1/results/{result_id}")
    async def get_result(result_id: str, request: Request):
        bad = _enforce_params(request, set())
        if bad:
            return bad
        result = store.get_result(result_id)
        body = result.to_json()
        body["id"] = result.result_id
        return body

    @app.get("/v1/results/{result_id}/provenance")
    async def get_provenance(result_id: str, request: Request):
        bad = _enforce_params(request, set())
        if bad:
            return bad
        chain = store.provenance_chain(result_id)
        return chain.to_json()

    @app.get("/v1/results/{result_id}/cadres")
    async def get_cadres(result_id: str, request: Request):
        bad = _enforce_params(request, set())
        if bad:
            return bad
        result = store.get_result(result_id)
        if result.method != "scm" or result.scm_payload is None:
            return _error_response(
                409, "wrong-method",
                f"result {result_id!r} is a {result.method} study; cadre "
                "summaries exist only for scm results")
        return {
            "result_id": result.result_id,
            "summaries": result.scm_payload.get("summaries", []),
            "per_cadre": result.scm_payload.get("per_cadre", []),
            "model": result.scm_payload.get("model", {}),
        }

    return app
