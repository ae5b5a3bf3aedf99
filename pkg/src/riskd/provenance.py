"""Content-addressed, append-only store for cartridges and study results.

Every record is one line in a single log file:

    <sha256 hex> <kind> <canonical JSON body>

The id is the hash of the canonical body; for results the volatile
created_at field is excluded from hashing so identical studies produce
identical ids. An in-memory index is rebuilt on open, and the log is never
rewritten: re-persisting existing content is a no-op that returns the same
id. Results carry references to every input cartridge (by user id and
content hash) plus a dataset fingerprint, so a stored finding can always
be traced back to exactly what produced it.
"""

from __future__ import annotations

import datetime as _dt
import json
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .canonical import canonical_json, content_hash
from .errors import DanglingRef, NotFound, SchemaViolation, StorageFailure
from .swglm import AssociationResult, SkippedFactor
from .version import ENGINE

REF_KINDS = ("response", "cohort", "risk-factor", "workflow")


def utc_now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class InputRef:
    kind: str
    ref_id: str  # the cartridge's user-facing id
    hash: str  # content hash of its canonical body

    def to_json(self) -> dict:
        return {"id": self.ref_id, "hash": self.hash}


@dataclass(frozen=True)
class ResultsCartridge:
    input_refs: tuple  # InputRef, ordered: response, cohort, factors..., workflow
    dataset_fingerprint: str
    method: str
    seed: int
    disease_label: str
    alpha: float
    findings: tuple  # AssociationResult
    skipped: tuple = ()  # SkippedFactor
    scm_payload: dict | None = None
    created_at: str = field(default_factory=utc_now)
    engine_version: str = ENGINE

    kind = "results"

    def hash_body(self) -> dict:
        """Canonical body without the volatile timestamp; hashing target."""
        refs = {}
        factors = []
        for ref in self.input_refs:
            if ref.kind == "risk-factor":
                factors.append(ref.to_json())
            else:
                refs[ref.kind] = ref.to_json()
        refs["risk_factors"] = factors
        refs["dataset_fingerprint"] = self.dataset_fingerprint
        body = {
            "kind": self.kind,
            "input_refs": refs,
            "method": self.method,
            "seed": self.seed,
            "engine_version": self.engine_version,
            "disease_label": self.disease_label,
            "alpha": self.alpha,
            "findings": [f.to_json() for f in self.findings],
            "skipped": [s.to_json() for s in self.skipped],
        }
        if self.scm_payload is not None:
            body["scm_payload"] = self.scm_payload
        return body

    def to_json(self) -> dict:
        body = self.hash_body()
        body["created_at"] = self.created_at
        return body

    @property
    def result_id(self) -> str:
        return content_hash(self.hash_body())

    def validate(self) -> None:
        kinds = [r.kind for r in self.input_refs]
        for required in ("response", "cohort", "workflow"):
            if kinds.count(required) != 1:
                raise SchemaViolation(
                    f"results cartridge needs exactly one {required} ref")
        if "risk-factor" not in kinds:
            raise SchemaViolation(
                "results cartridge needs at least one risk-factor ref")
        if self.method not in ("swglm-ewas", "scm"):
            raise SchemaViolation(f"unknown method {self.method!r}")
        if self.method == "scm" and self.scm_payload is None:
            raise SchemaViolation("scm results need an scm_payload")

    def significant_factors(self) -> set:
        found = {f.factor_id for f in self.findings if f.significant}
        for scan in (self.scm_payload or {}).get("per_cadre", ()):
            for f in scan.get("results", ()):
                if f.get("significant"):
                    found.add(f["factor_id"])
        return found

    def mentions_factor(self, factor_id: str) -> bool:
        if any(f.factor_id == factor_id for f in self.findings):
            return True
        for scan in (self.scm_payload or {}).get("per_cadre", ()):
            if any(f.get("factor_id") == factor_id
                   for f in scan.get("results", ())):
                return True
        return False


def parse_results_cartridge(obj: dict) -> ResultsCartridge:
    refs_obj = obj.get("input_refs")
    if not isinstance(refs_obj, dict):
        raise SchemaViolation("results cartridge: input_refs missing")
    refs = []
    for kind in ("response", "cohort"):
        entry = refs_obj.get(kind)
        if not isinstance(entry, dict):
            raise SchemaViolation(f"results cartridge: input_refs.{kind} missing")
        refs.append(InputRef(kind=kind, ref_id=entry["id"], hash=entry["hash"]))
    for entry in refs_obj.get("risk_factors", ()):
        refs.append(InputRef(kind="risk-factor", ref_id=entry["id"],
                             hash=entry["hash"]))
    wf = refs_obj.get("workflow")
    if not isinstance(wf, dict):
        raise SchemaViolation("results cartridge: input_refs.workflow missing")
    refs.append(InputRef(kind="workflow", ref_id=wf["id"], hash=wf["hash"]))

    cartridge = ResultsCartridge(
        input_refs=tuple(refs),
        dataset_fingerprint=str(refs_obj.get("dataset_fingerprint", "")),
        method=obj.get("method", ""),
        seed=int(obj.get("seed", 0)),
        disease_label=str(obj.get("disease_label", "")),
        alpha=float(obj.get("alpha", 0.05)),
        findings=tuple(AssociationResult.from_json(f)
                       for f in obj.get("findings", ())),
        skipped=tuple(SkippedFactor(factor_id=s["factor_id"],
                                    reason=s["reason"])
                      for s in obj.get("skipped", ())),
        scm_payload=obj.get("scm_payload"),
        created_at=obj.get("created_at", utc_now()),
        engine_version=obj.get("engine_version", ENGINE),
    )
    cartridge.validate()
    return cartridge


@dataclass(frozen=True)
class ChainEntry:
    kind: str
    ref_id: str
    hash: str
    resolved: bool

    def to_json(self) -> dict:
        return {"kind": self.kind, "id": self.ref_id, "hash": self.hash,
                "resolved": self.resolved}


@dataclass(frozen=True)
class ProvenanceChain:
    result_id: str
    entries: tuple  # ChainEntry, one per input cartridge
    dataset_fingerprint: str

    def fully_resolved(self) -> bool:
        return all(e.resolved for e in self.entries)

    def to_json(self) -> dict:
        return {
            "result_id": self.result_id,
            "entries": [e.to_json() for e in self.entries],
            "dataset_fingerprint": self.dataset_fingerprint,
        }


@dataclass(frozen=True)
class StoreRecord:
    record_id: str
    kind: str
    body: dict


class ProvenanceStore:
    """Single-file append-only log with an in-memory index.

    One writer at a time (serialized by a lock); readers see only fully
    appended records because the index is updated after a successful
    flush. Opening verifies that every line's id matches its body.
    """

    def __init__(self, path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._records: dict = {}  # id -> StoreRecord, insertion-ordered
        self._by_user_id: dict = {}  # user id -> latest record id
        if self.path.exists():
            self._load()

    def _load(self) -> None:
        try:
            text = self.path.read_text(encoding="utf-8")
        except OSError as exc:
            raise StorageFailure(f"cannot read store: {exc}") from exc
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                record_id, kind, payload = line.split(" ", 2)
                body = json.loads(payload)
            except ValueError as exc:
                raise StorageFailure(
                    f"corrupt store record at line {lineno}") from exc
            expected = self._body_hash(kind, body)
            if expected != record_id:
                raise StorageFailure(
                    f"store record at line {lineno} fails its hash check")
            self._index(StoreRecord(record_id=record_id, kind=kind, body=body))

    @staticmethod
    def _body_hash(kind: str, body: dict) -> str:
        if kind == "results":
            hashable = {k: v for k, v in body.items() if k != "created_at"}
            return content_hash(hashable)
        return content_hash(body)

    def _index(self, record: StoreRecord) -> None:
        self._records[record.record_id] = record
        user_id = record.body.get("id")
        if user_id:
            self._by_user_id[user_id] = record.record_id

    def _append(self, records) -> None:
        lines = "".join(
            f"{r.record_id} {r.kind} {canonical_json(r.body)}\n"
            for r in records)
        data = lines.encode("utf-8")
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            fd = os.open(self.path, os.O_WRONLY | os.O_CREAT | os.O_APPEND,
                         0o644)
            try:
                os.write(fd, data)
                os.fsync(fd)
            finally:
                os.close(fd)
        except OSError as exc:
            raise StorageFailure(f"cannot append to store: {exc}") from exc
        for r in records:
            self._index(r)

    # --- cartridges ---------------------------------------------------------

    def put_cartridge(self, cartridge) -> str:
        """Store an input cartridge; returns its content hash."""
        from .cartridges import cartridge_hash

        cartridge.validate()
        record_id = cartridge_hash(cartridge)
        with self._lock:
            if record_id not in self._records:
                self._append([StoreRecord(record_id=record_id,
                                          kind=cartridge.kind,
                                          body=cartridge.to_json())])
        return record_id

    def get(self, record_id: str) -> StoreRecord:
        """Fetch by content hash, falling back to the latest user id match."""
        with self._lock:
            record = self._records.get(record_id)
            if record is None:
                mapped = self._by_user_id.get(record_id)
                record = self._records.get(mapped) if mapped else None
        if record is None:
            raise NotFound(f"no stored record {record_id!r}")
        return record

    def get_cartridge(self, record_id: str):
        from .cartridges import parse_cartridge

        record = self.get(record_id)
        return parse_cartridge(canonical_json(record.body))

    def list_cartridges(self, kind: str | None = None) -> list:
        with self._lock:
            records = list(self._records.values())
        if kind is not None:
            records = [r for r in records if r.kind == kind]
        return records

    def __len__(self) -> int:
        with self._lock:
            return len(self._records)

    # --- results ------------------------------------------------------------

    def persist_results(self, result: ResultsCartridge, inputs=()) -> str:
        """Write a results cartridge and any missing inputs atomically.

        Every input_ref must resolve either in the store or among the
        supplied input cartridges; otherwise nothing is written.
        """
        from .cartridges import cartridge_hash

        result.validate()
        supplied = {}
        for cartridge in inputs:
            cartridge.validate()
            supplied[cartridge_hash(cartridge)] = cartridge

        with self._lock:
            pending = []
            for ref in result.input_refs:
                if ref.hash in self._records:
                    continue
                cartridge = supplied.get(ref.hash)
                if cartridge is None:
                    raise DanglingRef(
                        f"input ref {ref.kind}/{ref.ref_id} ({ref.hash[:12]}...) "
                        "is neither stored nor supplied")
                pending.append(StoreRecord(record_id=ref.hash,
                                           kind=cartridge.kind,
                                           body=cartridge.to_json()))
            result_id = result.result_id
            if result_id not in self._records:
                pending.append(StoreRecord(record_id=result_id, kind="results",
                                           body=result.to_json()))
            if pending:
                self._append(pending)
        return result_id

    def get_result(self, result_id: str) -> ResultsCartridge:
        record = self.get(result_id)
        if record.kind != "results":
            raise NotFound(f"{result_id!r} is a {record.kind} cartridge, "
                           "not a result")
        return parse_results_cartridge(record.body)

    def query_results(self, disease_label: str | None = None,
                      factor_id: str | None = None,
                      significant_only: bool = False,
                      method: str | None = None) -> list:
        """Result headers matching every supplied filter, oldest first."""
        with self._lock:
            records = [r for r in self._records.values() if r.kind == "results"]
        headers = []
        for record in records:
            result = parse_results_cartridge(record.body)
            if disease_label is not None and result.disease_label != disease_label:
                continue
            if method is not None and result.method != method:
                continue
            significant = result.significant_factors()
            if factor_id is not None:
                if significant_only:
                    if factor_id not in significant:
                        continue
                elif not result.mentions_factor(factor_id):
                    continue
            elif significant_only and not significant:
                continue
            headers.append({
                "id": record.record_id,
                "created_at": result.created_at,
                "method": result.method,
                "disease_label": result.disease_label,
                "seed": result.seed,
                "n_findings": len(result.findings),
                "n_significant": sum(1 for f in result.findings
                                     if f.significant),
                "significant_factors": sorted(significant),
            })
        headers.sort(key=lambda h: (h["created_at"], h["id"]))
        return headers

    def provenance_chain(self, result_id: str) -> ProvenanceChain:
        result = self.get_result(result_id)
        with self._lock:
            entries = tuple(
                ChainEntry(kind=ref.kind, ref_id=ref.ref_id, hash=ref.hash,
                           resolved=ref.hash in self._records)
                for ref in result.input_refs)
        return ProvenanceChain(result_id=result.result_id, entries=entries,
                               dataset_fingerprint=result.dataset_fingerprint)

    def audit(self) -> list:
        """Referential-integrity sweep; returns problems (empty = healthy)."""
        problems = []
        with self._lock:
            records = list(self._records.values())
            known = set(self._records)
        for record in records:
            if record.kind != "results":
                continue
            result = parse_results_cartridge(record.body)
            for ref in result.input_refs:
                if ref.hash not in known:
                    problems.append(
                        f"result {record.record_id[:12]}... has unresolved "
                        f"{ref.kind} ref {ref.ref_id!r}")
        return problems
