"""Command-line front door for running studies and inspecting the store.

Exit codes mirror the error families: 2 for validation problems, 3 when
the data cannot support the requested analysis, 4 for storage faults, and
1 when a requested record does not exist.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .canonical import canonical_json
from .cartridges import load_cartridge
from .datastore import load_dataset, serialize_dataset
from .errors import AnalysisError, NotFound, StorageError, ValidationError
from .pipeline import run_study
from .provenance import ProvenanceStore
from .synthetic import generate_synthetic, load_spec
from .version import ENGINE

DEFAULT_STORE = "riskd.store"


def default_store_path() -> str:
    return os.environ.get("RISKD_STORE", DEFAULT_STORE)


def _stars(q: float, alpha: float) -> str:
    if q < 0.001:
        return "***"
    if q < 0.01:
        return "**"
    if q < alpha:
        return "*"
    return ""


def _print_table(rows, header) -> None:
    widths = [max(len(str(r[i])) for r in [header, *rows])
              for i in range(len(header))]
    for row in [header, *rows]:
        line = "  ".join(str(cell).ljust(w) for cell, w in zip(row, widths))
        print(line.rstrip())


def _print_findings(findings, skipped, alpha: float) -> None:
    rows = [(f.factor_id, f"{f.coefficient:.4f}", f"{f.robust_se:.4f}",
             f"{f.p_value:.3g}", f"{f.adjusted_p:.3g}", f.n_used,
             _stars(f.adjusted_p, alpha)) for f in findings]
    _print_table(rows, ("factor", "coef", "robust_se", "p", "adj_p", "n",
                        "sig"))
    for s in skipped:
        print(f"skipped: {s.factor_id} ({s.reason})")


def cmd_run(args) -> int:
    response = load_cartridge(args.response)
    cohort = load_cartridge(args.cohort)
    factors = [load_cartridge(p) for p in args.factors]
    workflow = load_cartridge(args.workflow)
    ds = load_dataset(args.data, args.dict)
    store = ProvenanceStore(args.store)

    outcome = run_study(response, cohort, factors, workflow, ds, store=store)

    if args.format == "json":
        body = outcome.result.to_json()
        body["id"] = outcome.result_id
        print(canonical_json(body))
        return 0

    if outcome.scan is not None:
        _print_findings(outcome.scan.results, outcome.scan.skipped,
                        outcome.result.alpha)
    if outcome.scm is not None:
        for summary in outcome.scm.summaries:
            print(f"cadre {summary.cadre}: n={summary.count} "
                  f"(weighted {summary.weighted_count:.1f})")
        for scan in outcome.scm.per_cadre_results:
            if not scan.testable:
                print(f"cadre {scan.cadre}: untestable ({scan.reason})")
                continue
            print(f"cadre {scan.cadre}:")
            _print_findings(scan.results, scan.skipped, outcome.result.alpha)
    print(f"result: {outcome.result_id}")
    return 0


def cmd_results_query(args) -> int:
    store = ProvenanceStore(args.store)
    headers = store.query_results(
        disease_label=args.disease,
        factor_id=args.factor,
        significant_only=args.significant_only,
        method=args.method,
    )
    if args.format == "json":
        print(canonical_json({"results": headers}))
        return 0
    rows = [(h["id"][:12], h["created_at"], h["method"], h["disease_label"],
             h["n_findings"], h["n_significant"]) for h in headers]
    _print_table(rows, ("id", "created_at", "method", "disease", "findings",
                        "significant"))
    return 0


def cmd_provenance_show(args) -> int:
    store = ProvenanceStore(args.store)
    chain = store.provenance_chain(args.result_id)
    for entry in chain.entries:
        status = "resolved" if entry.resolved else "MISSING"
        print(f"{entry.kind:<12} {entry.ref_id:<24} {entry.hash[:12]} "
              f"{status}")
    return 0


def cmd_synth_generate(args) -> int:
    spec = load_spec(args.spec)
    ds, _truth = generate_synthetic(spec, args.seed)
    serialize_dataset(ds, args.out_data, args.out_dict)
    print(f"wrote {args.out_data} ({ds.n_rows} rows, {ds.n_vars} variables)")
    return 0


def cmd_fixtures_export(args) -> int:
    from . import fixtures

    dest = Path(args.dest)
    written = fixtures.export_all(dest)
    for path in written:
        print(path)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(store_path=args.store, dataset_dir=args.data_dir,
                     workers=args.workers)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riskd",
        description="population-health risk analysis engine")
    parser.add_argument("--version", action="version", version=ENGINE)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a study from cartridge files")
    run.add_argument("--response", required=True)
    run.add_argument("--cohort", required=True)
    run.add_argument("--factors", required=True, nargs="+")
    run.add_argument("--workflow", required=True)
    run.add_argument("--data", required=True)
    run.add_argument("--dict", required=True)
    run.add_argument("--store", default=default_store_path())
    run.add_argument("--format", choices=("table", "json"), default="table")
    run.set_defaults(handler=cmd_run)

    results = sub.add_parser("results", help="query stored results")
    results_sub = results.add_subparsers(dest="subcommand", required=True)
    query = results_sub.add_parser("query")
    query.add_argument("--disease")
    query.add_argument("--factor")
    query.add_argument("--significant-only", action="store_true")
    query.add_argument("--method", choices=("swglm-ewas", "scm"))
    query.add_argument("--store", default=default_store_path())
    query.add_argument("--format", choices=("table", "json"),
                       default="table")
    query.set_defaults(handler=cmd_results_query)

    provenance = sub.add_parser("provenance", help="inspect result lineage")
    prov_sub = provenance.add_subparsers(dest="subcommand", required=True)
    show = prov_sub.add_parser("show")
    show.add_argument("result_id")
    show.add_argument("--store", default=default_store_path())
    show.set_defaults(handler=cmd_provenance_show)

    synth = sub.add_parser("synth", help="generate synthetic survey data")
    synth_sub = synth.add_subparsers(dest="subcommand", required=True)
    generate = synth_sub.add_parser("generate")
    generate.add_argument("--spec", required=True)
    generate.add_argument("--seed", type=int, required=True)
    generate.add_argument("--out-data", required=True)
    generate.add_argument("--out-dict", required=True)
    generate.set_defaults(handler=cmd_synth_generate)

    fixtures = sub.add_parser("fixtures", help="bundled demo cartridges")
    fixtures_sub = fixtures.add_subparsers(dest="subcommand", required=True)
    export = fixtures_sub.add_parser("export")
    export.add_argument("--dest", required=True)
    export.set_defaults(handler=cmd_fixtures_export)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8350)
    serve.add_argument("--store", default=default_store_path())
    serve.add_argument("--data-dir", default=None)
    serve.add_argument("--workers", type=int, default=2)
    serve.set_defaults(handler=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except NotFound as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except ValidationError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except AnalysisError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except StorageError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
