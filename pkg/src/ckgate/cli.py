"""Operator command line: generate and ingest graphs, run submitted apps,
serve sessions, evaluate predictions offline, and inspect audits.

Exit codes: 0 success, 2 usage or configuration error, 3 workflow
failure. Human-readable output goes to stdout, diagnostics to stderr;
--format json emits a single JSON document instead.
"""

from __future__ import annotations

import argparse
import json
import subprocess
import sys
from pathlib import Path
from typing import Optional

from . import gateway, report, storage, synth
from .evaluation import (
    EvaluationError,
    compute_metrics,
    ground_truth_task_a,
    ground_truth_task_b,
    parse_predictions,
)
from .graph import EdgeType, GraphError, NodeLabel
from .qlang import Budget


def _err(message: str) -> None:
    print(f"error: {message}", file=sys.stderr)


def _emit(payload: dict, fmt: str) -> None:
    if fmt == "json":
        print(json.dumps(payload, ensure_ascii=False, indent=2))
    else:
        print(" ".join(f"{key}={value}" for key, value in payload.items()))


def _load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        config = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SystemExit(_usage_error(f"cannot read config {path}: {exc}"))
    if not isinstance(config, dict):
        raise SystemExit(_usage_error("config file must hold a JSON object"))
    return config


def _usage_error(message: str) -> int:
    _err(message)
    return 2


def _limits_from(args, config: dict) -> gateway.SessionLimits:
    conf = config.get("limits", {})
    budget_conf = conf.get("query_budget", {})
    budget = Budget(
        max_steps=args.max_steps if args.max_steps is not None else budget_conf.get("max_steps", Budget().max_steps),
        max_rows=args.max_rows if args.max_rows is not None else budget_conf.get("max_rows", Budget().max_rows),
        wall_clock_ms=args.query_wall_clock_ms
        if args.query_wall_clock_ms is not None
        else budget_conf.get("wall_clock_ms", Budget().wall_clock_ms),
    )
    return gateway.SessionLimits(
        query_budget=budget,
        max_queries=args.max_queries
        if args.max_queries is not None
        else conf.get("max_queries", gateway.DEFAULT_MAX_QUERIES),
        session_wall_clock_ms=args.session_wall_clock_ms
        if args.session_wall_clock_ms is not None
        else conf.get("session_wall_clock_ms", gateway.DEFAULT_SESSION_WALL_CLOCK_MS),
    )


def _add_limit_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--max-queries", type=int, default=None)
    parser.add_argument("--session-wall-clock-ms", type=int, default=None)
    parser.add_argument("--max-steps", type=int, default=None)
    parser.add_argument("--max-rows", type=int, default=None)
    parser.add_argument("--query-wall-clock-ms", type=int, default=None)


def _load_graph(path: str):
    try:
        return storage.load_jsonl(path)
    except storage.StorageError as exc:
        raise SystemExit(_usage_error(f"cannot load graph: {exc}"))


def _summarize(graph) -> dict:
    stats = graph.graph_stats()
    control_links = 0
    diseased_links = 0
    control_ids = {
        node_id
        for node_id in graph.nodes_by_label(NodeLabel.DISEASE)
        if graph.node(node_id).properties.get("name") == "control"
    }
    for edge in graph.edges():
        if edge.type is EdgeType.HAS_DISEASE:
            if edge.dst in control_ids:
                control_links += 1
            else:
                diseased_links += 1
    return {
        "subjects": stats.nodes_by_label[NodeLabel.SUBJECT],
        "samples": stats.nodes_by_label[NodeLabel.BIOLOGICAL_SAMPLE],
        "diseased": diseased_links,
        "control": control_links,
        "nodes": graph.node_count,
        "edges": graph.edge_count,
    }


def cmd_generate(args) -> int:
    config = synth.GeneratorConfig(
        seed=args.seed,
        n_subjects=args.subjects,
        n_control_samples=args.control_samples,
        disease_vocab_size=args.diseases,
        n_genes=args.genes,
        n_proteins=args.proteins,
        n_phenotypes=args.phenotypes,
        mean_genes_per_sample=args.mean_genes,
        mean_proteins_per_sample=args.mean_proteins,
        mean_phenotypes_per_sample=args.mean_phenotypes,
    )
    vocab = None
    if args.vocab:
        try:
            vocab = storage.read_vocab(args.vocab)
        except storage.StorageError as exc:
            return _usage_error(str(exc))
    try:
        graph = synth.generate(config, vocab)
    except synth.SynthError as exc:
        return _usage_error(str(exc))
    try:
        storage.export_jsonl(graph, args.out)
        if args.csv_dir:
            storage.export_csv(graph, args.csv_dir)
    except storage.IoFailure as exc:
        return _usage_error(str(exc))
    _emit(_summarize(graph), args.format)
    return 0


def cmd_ingest(args) -> int:
    try:
        bundle = storage.read_bundle(args.dir)
        vocab = storage.read_vocab(args.vocab) if args.vocab else None
    except storage.StorageError as exc:
        return _usage_error(str(exc))
    try:
        graph = synth.ingest(bundle, vocab)
    except (synth.SynthError, GraphError) as exc:
        return _usage_error(str(exc))
    try:
        storage.export_jsonl(graph, args.out)
    except storage.IoFailure as exc:
        return _usage_error(str(exc))
    _emit(_summarize(graph), args.format)
    return 0


def cmd_run(args) -> int:
    config = _load_config(args.config)
    try:
        manifest = gateway.Manifest.from_file(args.manifest)
    except gateway.GatewayError as exc:
        return _usage_error(str(exc))
    graph = _load_graph(args.graph)
    audit = gateway.AuditLog(args.audit_log or config.get("audit_log"))
    limits = _limits_from(args, config)
    hold = args.hold_for_approval or bool(config.get("hold_for_approval"))
    launcher = gateway.SubprocessLauncher(stderr=None if args.app_stderr else subprocess.DEVNULL)
    try:
        outcome = gateway.run_workflow(
            graph,
            manifest,
            launcher,
            limits=limits,
            audit=audit,
            hold_for_approval=hold,
            scan_disease_names=not args.allow_disease_names,
        )
    except gateway.EgressViolation as exc:
        _err(f"egress violation, report withheld: {exc}")
        return 3
    if isinstance(outcome, gateway.PendingEvaluation):
        pending_path = args.pending_out or f"pending_{outcome.session_id}.json"
        Path(pending_path).write_text(
            json.dumps(outcome.to_dict(), ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
        )
        _emit({"state": "AwaitingEvaluation", "pending": pending_path}, args.format)
        return 0
    _print_report(outcome, args.format)
    if args.report_dir and outcome.metrics:
        report.write_metrics_report(outcome, args.report_dir)
    return 0 if outcome.state == "Released" else 3


def _print_report(egress: gateway.EgressReport, fmt: str) -> None:
    if fmt == "json":
        print(json.dumps(egress.to_dict(), ensure_ascii=False, indent=2))
        return
    print(f"app={egress.app_name} version={egress.version} state={egress.state}")
    if egress.failure_reason:
        print(f"failure_reason={egress.failure_reason}")
    for task in sorted(egress.metrics):
        m = egress.metrics[task]
        parts = [f"accuracy={m.accuracy:.4f}"]
        if m.precision is not None:
            parts.append(f"precision={m.precision:.4f}")
        parts.append(f"recall={m.recall:.4f}")
        if m.f1 is not None:
            parts.append(f"f1={m.f1:.4f}")
        parts.append(f"n_scored={m.n_scored}")
        parts.append(f"n_missing={m.n_missing}")
        print(f"task {task}: " + " ".join(parts))
    if egress.score_total is not None:
        print(f"score_total={egress.score_total:.4f}")
    print(f"queries_issued={egress.queries_issued} rows_returned_total={egress.rows_returned_total}")


def cmd_approve(args) -> int:
    try:
        pending = gateway.PendingEvaluation.from_dict(
            json.loads(Path(args.pending).read_text(encoding="utf-8"))
        )
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        return _usage_error(f"cannot read pending file: {exc}")
    graph = _load_graph(args.graph)
    audit = gateway.AuditLog(args.audit_log)
    try:
        egress = gateway.approve_pending(pending, graph, audit=audit)
    except gateway.EgressViolation as exc:
        _err(f"egress violation, report withheld: {exc}")
        return 3
    _print_report(egress, args.format)
    if args.report_dir and egress.metrics:
        report.write_metrics_report(egress, args.report_dir)
    return 0


def cmd_serve(args) -> int:
    config = _load_config(args.config)
    graph = _load_graph(args.graph)
    listen = args.listen or config.get("listen", "127.0.0.1:7411")
    host, _, port = listen.rpartition(":")
    try:
        port_num = int(port)
    except ValueError:
        return _usage_error(f"bad listen endpoint {listen!r}")
    audit = gateway.AuditLog(args.audit_log or config.get("audit_log"))
    server = gateway.GatewayServer(
        graph,
        host=host or "127.0.0.1",
        port=port_num,
        limits=_limits_from(args, config),
        audit=audit,
        report_dir=args.report_dir or config.get("report_dir"),
        hold_for_approval=args.hold_for_approval,
        concurrent=args.concurrent,
        scan_disease_names=not args.allow_disease_names,
    )
    print(f"listening on {server.endpoint}", file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.stop()
    return 0


def cmd_evaluate(args) -> int:
    graph = _load_graph(args.graph)
    try:
        text = Path(args.predictions).read_text(encoding="utf-8")
    except OSError as exc:
        return _usage_error(f"cannot read predictions: {exc}")
    try:
        table = parse_predictions(text, args.task)
        truth = ground_truth_task_a(graph) if args.task == "A" else ground_truth_task_b(graph)
        metrics = compute_metrics(table, truth)
    except EvaluationError as exc:
        return _usage_error(str(exc))
    _emit(metrics.to_dict(), args.format)
    if args.report_dir:
        holder = gateway.EgressReport(
            app_name="offline", version="0", state="Released", metrics={args.task: metrics}
        )
        report.write_metrics_report(holder, args.report_dir)
    return 0


def cmd_audit(args) -> int:
    if args.kind and args.kind not in gateway.AUDIT_KINDS:
        return _usage_error(
            f"unknown kind {args.kind!r}; expected one of {', '.join(gateway.AUDIT_KINDS)}"
        )
    if not Path(args.log).exists():
        return _usage_error(f"audit log {args.log} not found")
    try:
        entries = gateway.read_audit_log(args.log)
    except gateway.AuditReplayError as exc:
        return _usage_error(str(exc))
    selected = [
        e
        for e in entries
        if (not args.session or e["session"] == args.session)
        and (not args.kind or e["kind"] == args.kind)
    ]
    if args.format == "json":
        print(json.dumps(selected, ensure_ascii=False, indent=2))
    else:
        for entry in selected:
            print(f"{entry['ts']} {entry['session']} {entry['kind']} {entry['detail']}")
    return 0


def cmd_inspect(args) -> int:
    graph = _load_graph(args.graph)
    stats = graph.graph_stats().to_dict()
    if args.format == "json":
        print(json.dumps(stats, ensure_ascii=False, indent=2))
    else:
        for section, values in stats.items():
            for name, value in values.items():
                print(f"{section}.{name}={value}")
    if args.figures:
        paths = report.write_graph_overview(graph, args.figures)
        print(f"wrote {', '.join(str(p) for p in paths)}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ckgate", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--format", choices=["json", "table"], default="table")

    p = sub.add_parser("generate", help="write a seeded synthetic cohort graph")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--subjects", type=int, default=100)
    p.add_argument("--control-samples", type=int, default=1)
    p.add_argument("--diseases", type=int, default=synth.DEFAULT_DISEASE_TOTAL,
                   help="total disease nodes including control (ignored with --vocab)")
    p.add_argument("--genes", type=int, default=5000)
    p.add_argument("--proteins", type=int, default=5000)
    p.add_argument("--phenotypes", type=int, default=1000)
    p.add_argument("--mean-genes", type=float, default=5.0)
    p.add_argument("--mean-proteins", type=float, default=50.0)
    p.add_argument("--mean-phenotypes", type=float, default=3.0)
    p.add_argument("--vocab", help="disease vocabulary CSV (name,icd10,icd9)")
    p.add_argument("--out", required=True, help="JSONL output path")
    p.add_argument("--csv-dir", help="also export per-label/per-type CSV files here")
    common(p)
    p.set_defaults(handler=cmd_generate)

    p = sub.add_parser("ingest", help="build a graph from subjects/diagnoses/phenotypes CSVs")
    p.add_argument("--dir", required=True)
    p.add_argument("--vocab")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(handler=cmd_ingest)

    p = sub.add_parser("run", help="run a submitted app against a graph")
    p.add_argument("--manifest", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--audit-log")
    p.add_argument("--config")
    p.add_argument("--hold-for-approval", action="store_true")
    p.add_argument("--pending-out")
    p.add_argument("--report-dir", help="write metrics.csv and figures here")
    p.add_argument("--allow-disease-names", action="store_true",
                   help="drop disease names from the egress scan")
    p.add_argument("--app-stderr", action="store_true", help="pass the app's stderr through")
    _add_limit_flags(p)
    common(p)
    p.set_defaults(handler=cmd_run)

    p = sub.add_parser("approve", help="evaluate and release a held run")
    p.add_argument("--pending", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--audit-log")
    p.add_argument("--report-dir")
    common(p)
    p.set_defaults(handler=cmd_approve)

    p = sub.add_parser("serve", help="serve protocol sessions over TCP")
    p.add_argument("--graph", required=True)
    p.add_argument("--listen", help="host:port (default 127.0.0.1:7411)")
    p.add_argument("--audit-log")
    p.add_argument("--config")
    p.add_argument("--report-dir")
    p.add_argument("--hold-for-approval", action="store_true")
    p.add_argument("--concurrent", action="store_true")
    p.add_argument("--allow-disease-names", action="store_true")
    _add_limit_flags(p)
    common(p)
    p.set_defaults(handler=cmd_serve)

    p = sub.add_parser("evaluate", help="score a prediction CSV against a graph offline")
    p.add_argument("--graph", required=True)
    p.add_argument("--task", required=True, choices=["A", "B"])
    p.add_argument("--predictions", required=True)
    p.add_argument("--report-dir")
    common(p)
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("audit", help="filter and print an audit log")
    p.add_argument("--log", required=True)
    p.add_argument("--session")
    p.add_argument("--kind")
    common(p)
    p.set_defaults(handler=cmd_audit)

    p = sub.add_parser("inspect", help="print graph statistics, optionally with figures")
    p.add_argument("--graph", required=True)
    p.add_argument("--figures", help="directory for overview figures and stats CSV")
    common(p)
    p.set_defaults(handler=cmd_inspect)

    return parser


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else 2
    except BrokenPipeError:
        return 0


if __name__ == "__main__":
    sys.exit(main())
