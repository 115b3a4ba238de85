from __future__ import annotations

import json
import socket
import sys
import time

import pytest

from ckgate import proto
from ckgate.gateway import (
    AuditLog,
    CallableLauncher,
    EgressReport,
    EgressViolation,
    GatewayServer,
    GatewaySession,
    Manifest,
    PendingEvaluation,
    SessionLimits,
    approve_pending,
    enforce_egress,
    next_session_id,
    read_audit_log,
    replay_state_transitions,
    run_workflow,
    validate_manifest,
)
from ckgate.qlang import Budget
from ckgate.refapp import run_baseline
from ckgate.synth import generate
from conftest import small_config

REFAPP_ENTRYPOINT = f"{sys.executable} -m ckgate.refapp"


def manifest(**overrides) -> Manifest:
    base = dict(
        app_name="refapp-baseline",
        version="1.0",
        tasks=("A", "B"),
        entrypoint=REFAPP_ENTRYPOINT,
    )
    base.update(overrides)
    return Manifest(**base)


def baseline_launcher(**kwargs) -> CallableLauncher:
    return CallableLauncher(lambda channel: run_baseline(channel, **kwargs))


class TestValidateManifest:
    def test_well_formed(self):
        assert validate_manifest(manifest(), SessionLimits()).ok

    def test_raising_limits_rejected(self):
        result = validate_manifest(
            manifest(limits_override={"max_queries": 10_000}), SessionLimits()
        )
        assert not result.ok
        assert "limits exceed gateway policy" in result.reasons

    def test_empty_tasks(self):
        result = validate_manifest(manifest(tasks=()), SessionLimits())
        assert "no tasks declared" in result.reasons

    def test_all_reasons_collected(self):
        result = validate_manifest(
            Manifest(app_name="BAD NAME", version="", tasks=(), entrypoint=""),
            SessionLimits(),
        )
        assert len(result.reasons) >= 4

    def test_tightening_is_fine(self):
        result = validate_manifest(
            manifest(limits_override={"max_queries": 2, "query_budget": {"max_steps": 10}}),
            SessionLimits(),
        )
        assert result.ok

    def test_unknown_fields_flagged(self):
        payload = {"app_name": "x", "version": "1", "tasks": ["A"],
                   "entrypoint": "e", "docker_image": "no"}
        result = validate_manifest(Manifest.from_dict(payload), SessionLimits())
        assert any("unknown manifest fields" in r for r in result.reasons)


class TestRunWorkflow:
    def test_baseline_released_with_both_tasks(self, default_graph, session_audit_dir):
        audit = AuditLog(session_audit_dir / "baseline.jsonl")
        report = run_workflow(default_graph, manifest(), baseline_launcher(), audit=audit)
        assert report.state == "Released"
        assert set(report.metrics) == {"A", "B"}
        assert report.metrics["A"].f1 == pytest.approx(198 / 199)
        assert report.queries_issued == 2

    def test_immediate_exit_is_no_submission(self, default_graph, session_audit_dir):
        audit = AuditLog(session_audit_dir / "nosub.jsonl")
        launcher = CallableLauncher(lambda channel: 0)
        report = run_workflow(default_graph, manifest(), launcher, audit=audit)
        assert report.state == "Failed"
        assert report.failure_reason == "NoSubmission"
        assert report.metrics == {}

    def test_crash_before_submission(self, default_graph, session_audit_dir):
        audit = AuditLog(session_audit_dir / "crash.jsonl")

        def crashing(channel):
            proto.handshake_app(channel, "crashy")
            return 9

        report = run_workflow(default_graph, manifest(), CallableLauncher(crashing), audit=audit)
        assert (report.state, report.failure_reason) == ("Failed", "AppCrash")

    def test_bad_entrypoint_is_app_crash(self, default_graph, session_audit_dir):
        audit = AuditLog(session_audit_dir / "badentry.jsonl")
        report = run_workflow(
            default_graph, manifest(entrypoint="/no/such/binary --flag"), audit=audit
        )
        assert (report.state, report.failure_reason) == ("Failed", "AppCrash")

    def test_query_before_hello_is_out_of_order(self, default_graph, session_audit_dir):
        audit = AuditLog(session_audit_dir / "noorder.jsonl")

        def eager(channel):
            channel.send(proto.Query(id=1, text="MATCH (s:Subject) RETURN s"))
            answer = channel.recv()
            assert isinstance(answer, proto.Fatal)
            assert answer.code == "OUT_OF_ORDER"
            return 0

        report = run_workflow(default_graph, manifest(), CallableLauncher(eager), audit=audit)
        assert (report.state, report.failure_reason) == ("Failed", "ProtocolViolation")

    def test_malformed_frame_is_protocol_violation(self, default_graph, session_audit_dir):
        audit = AuditLog(session_audit_dir / "badframe.jsonl")

        def evil(channel):
            channel._write(b"\x00\x00\x00\x04junk")
            channel.recv()
            return 0

        report = run_workflow(default_graph, manifest(), CallableLauncher(evil), audit=audit)
        assert (report.state, report.failure_reason) == ("Failed", "ProtocolViolation")

    def test_rejected_manifest(self, default_graph, session_audit_dir):
        audit = AuditLog(session_audit_dir / "rejected.jsonl")
        report = run_workflow(default_graph, manifest(tasks=()), audit=audit)
        assert (report.state, report.failure_reason) == ("Failed", "Rejected")

    def test_session_timeout(self, default_graph, session_audit_dir):
        audit = AuditLog(session_audit_dir / "timeout.jsonl")

        def sleepy(channel):
            proto.handshake_app(channel, "sleepy")
            time.sleep(1.5)
            return 0

        limits = SessionLimits(session_wall_clock_ms=150)
        started = time.monotonic()
        report = run_workflow(
            default_graph, manifest(), CallableLauncher(sleepy), limits=limits, audit=audit
        )
        assert (report.state, report.failure_reason) == ("Failed", "Timeout")
        assert time.monotonic() - started < 1.5

    def test_crash_after_submission_still_evaluates(self, default_graph, session_audit_dir):
        audit = AuditLog(session_audit_dir / "latecrash.jsonl")
        launcher = baseline_launcher(final_exit_code=3, send_done=False)
        report = run_workflow(default_graph, manifest(), launcher, audit=audit)
        assert report.state == "Released"
        assert set(report.metrics) == {"A", "B"}

    def test_duplicate_submission_fatal(self, default_graph, session_audit_dir):
        audit = AuditLog(session_audit_dir / "dupsub.jsonl")

        def duplicating(channel):
            proto.handshake_app(channel, "dup")
            csv_text = "subject_id,prediction\nX,1\n"
            channel.send(proto.SubmitPredictions(task="A", csv=csv_text))
            channel.recv()
            channel.send(proto.SubmitPredictions(task="A", csv=csv_text))
            answer = channel.recv()
            assert isinstance(answer, proto.Fatal)
            assert answer.code == "DUPLICATE_SUBMISSION"
            return 0

        report = run_workflow(default_graph, manifest(), CallableLauncher(duplicating), audit=audit)
        assert (report.state, report.failure_reason) == ("Failed", "ProtocolViolation")

    def test_invalid_csv_submission_fatal(self, default_graph, session_audit_dir):
        audit = AuditLog(session_audit_dir / "badcsv.jsonl")

        def garbage(channel):
            proto.handshake_app(channel, "garbage")
            channel.send(proto.SubmitPredictions(task="A", csv="not,a header\n"))
            channel.recv()
            return 0

        report = run_workflow(default_graph, manifest(), CallableLauncher(garbage), audit=audit)
        assert (report.state, report.failure_reason) == ("Failed", "ProtocolViolation")

    def test_query_errors_do_not_kill_session(self, default_graph, session_audit_dir):
        audit = AuditLog(session_audit_dir / "recover.jsonl")
        report = run_workflow(
            default_graph, manifest(), baseline_launcher(bad_queries=3), audit=audit
        )
        assert report.state == "Released"
        assert report.queries_issued == 5

    def test_timeout_query_then_successful_submission(self, default_graph, session_audit_dir):
        # exhausting max_steps answers TIMEOUT in-band; the session goes on
        audit = AuditLog(session_audit_dir / "qtimeout.jsonl")
        limits = SessionLimits(query_budget=Budget(max_steps=450))
        report = run_workflow(
            default_graph,
            manifest(),
            baseline_launcher(heavy_query=True),
            limits=limits,
            audit=audit,
        )
        assert report.state == "Released"
        codes = [e for e in audit.entries if e["kind"] == "query_error"]
        assert any("code=TIMEOUT" in e["detail"] for e in codes)

    def test_oversize_rows_is_fatal(self, default_graph, session_audit_dir, monkeypatch):
        # an outbound ROWS frame larger than the cap ends the session
        audit = AuditLog(session_audit_dir / "oversize.jsonl")
        real_send = proto.Channel.send

        def tight_send(self, message):
            if isinstance(message, proto.Rows):
                raise proto.OversizeBody(proto.MAX_FRAME_BYTES + 1)
            return real_send(self, message)

        monkeypatch.setattr(proto.Channel, "send", tight_send)

        def querying(channel):
            proto.handshake_app(channel, "big-reader")
            channel.send(proto.Query(id=1, text="MATCH (s:Subject) RETURN s"))
            answer = channel.recv()
            assert isinstance(answer, proto.Fatal) and answer.code == "OVERSIZE"
            return 0

        report = run_workflow(default_graph, manifest(), CallableLauncher(querying), audit=audit)
        assert (report.state, report.failure_reason) == ("Failed", "ProtocolViolation")

    def test_audit_completeness(self, default_graph, session_audit_dir):
        audit = AuditLog(session_audit_dir / "complete.jsonl")
        report = run_workflow(
            default_graph, manifest(), baseline_launcher(bad_queries=2), audit=audit
        )
        assert len(audit.query_entries()) == report.queries_issued

    def test_subprocess_refapp_end_to_end(self, default_graph, session_audit_dir):
        audit = AuditLog(session_audit_dir / "subprocess.jsonl")
        report = run_workflow(default_graph, manifest(), audit=audit)
        assert report.state == "Released"
        assert report.metrics["A"].f1 == pytest.approx(198 / 199)

    def test_hold_for_approval_then_approve(self, default_graph, session_audit_dir):
        audit = AuditLog(session_audit_dir / "hold.jsonl")
        pending = run_workflow(
            default_graph, manifest(), baseline_launcher(), audit=audit, hold_for_approval=True
        )
        assert isinstance(pending, PendingEvaluation)
        round_tripped = PendingEvaluation.from_dict(json.loads(json.dumps(pending.to_dict())))
        report = approve_pending(round_tripped, default_graph, audit=audit)
        assert report.state == "Released"
        assert report.metrics["A"].f1 == pytest.approx(198 / 199)


class TestSessionBudgets:
    def session(self, graph, **limit_kwargs):
        limits = SessionLimits(**limit_kwargs)
        return GatewaySession(next_session_id(), graph, limits, ("A", "B"), AuditLog())

    def test_session_limit_code(self, default_graph):
        session = self.session(default_graph, max_queries=2)
        for i in (1, 2):
            answer = session.handle_query(proto.Query(id=i, text="MATCH (s:Subject) RETURN s"))
            assert isinstance(answer, proto.Rows)
        answer = session.handle_query(proto.Query(id=3, text="MATCH (s:Subject) RETURN s"))
        assert isinstance(answer, proto.QueryErrorMsg)
        assert answer.code == "SESSION_LIMIT"

    def test_steps_pool_drains_across_queries(self, default_graph):
        # each HAS_DISEASE expansion costs a step: 100 per full scan
        session = self.session(default_graph, query_budget=Budget(max_steps=150))
        text = "MATCH (b:Biological_Sample)-[:HAS_DISEASE]->(d) RETURN b"
        first = session.handle_query(proto.Query(id=1, text=text))
        assert isinstance(first, proto.Rows)
        assert session.steps_remaining == 50
        second = session.handle_query(proto.Query(id=2, text=text))
        assert isinstance(second, proto.QueryErrorMsg)
        assert second.code == "TIMEOUT"
        assert session.steps_remaining == 0
        third = session.handle_query(proto.Query(id=3, text=text))
        assert isinstance(third, proto.QueryErrorMsg)  # session still alive

    def test_out_of_order_ids_fatal(self, default_graph):
        session = self.session(default_graph)
        session.handle_query(proto.Query(id=5, text="MATCH (s:Subject) RETURN s"))
        with pytest.raises(proto.ProtocolError) as err:
            session.handle_query(proto.Query(id=5, text="MATCH (s:Subject) RETURN s"))
        assert err.value.code == "OUT_OF_ORDER"

    def test_parse_and_type_codes(self, default_graph):
        session = self.session(default_graph)
        bad = session.handle_query(proto.Query(id=1, text="MATCH oops"))
        assert bad.code == "PARSE"
        unknown = session.handle_query(proto.Query(id=2, text="MATCH (a:Alien) RETURN a"))
        assert unknown.code == "PARSE"
        mismatch = session.handle_query(
            proto.Query(id=3, text="MATCH (d:Disease) WHERE d.name < 2 RETURN d")
        )
        assert mismatch.code == "TYPE"


class TestEgress:
    def test_clean_report_passes(self, default_graph):
        report = EgressReport(app_name="app", version="1", state="Released")
        assert enforce_egress(report, default_graph) is report

    def test_injected_subject_id_detected(self, default_graph):
        report = EgressReport(app_name="app", version="S0042", state="Released")
        with pytest.raises(EgressViolation):
            enforce_egress(report, default_graph)

    def test_injected_node_id_detected(self, default_graph):
        report = EgressReport(app_name="app", version="n17", state="Released")
        with pytest.raises(EgressViolation):
            enforce_egress(report, default_graph)

    def test_disease_name_scan_configurable(self, default_graph):
        report = EgressReport(app_name="app", version="disease_00001", state="Released")
        with pytest.raises(EgressViolation):
            enforce_egress(report, default_graph)
        assert enforce_egress(report, default_graph, scan_disease_names=False) is report

    def test_fuzzed_runs_leak_nothing(self, session_audit_dir):
        audit = AuditLog(session_audit_dir / "fuzz-small.jsonl")
        for seed in range(40):
            graph = generate(small_config(seed))
            identifiers = graph.identifier_strings()
            report = run_workflow(
                graph,
                manifest(),
                baseline_launcher(bad_queries=seed % 3, flip_a=seed % 2 == 0),
                audit=audit,
            )
            blob = json.dumps(report.to_dict())
            assert report.state == "Released"
            for identifier in identifiers:
                assert identifier not in blob


class TestAuditReplay:
    def test_suite_logs_are_sound(self, session_audit_dir):
        total = 0
        for path in sorted(session_audit_dir.glob("*.jsonl")):
            entries = read_audit_log(path)
            total += len(entries)
            assert replay_state_transitions(entries) == []
        assert total > 0

    def test_replay_flags_illegal_transition(self):
        entries = [
            {"ts": 0, "session": "sX", "kind": "state_transition", "detail": "Submitted->Running"},
        ]
        assert replay_state_transitions(entries)

    def test_replay_flags_broken_continuity(self):
        entries = [
            {"ts": 0, "session": "sX", "kind": "state_transition", "detail": "Submitted->Validated"},
            {"ts": 1, "session": "sX", "kind": "state_transition", "detail": "Running->AwaitingEvaluation"},
        ]
        assert replay_state_transitions(entries)

    def test_replay_flags_bad_failure_reason(self):
        entries = [
            {"ts": 0, "session": "sX", "kind": "state_transition", "detail": "Submitted->Failed(Timeout)"},
        ]
        assert replay_state_transitions(entries)


class TestGatewayServer:
    def test_tcp_session_writes_report(self, default_graph, tmp_path, session_audit_dir):
        audit = AuditLog(session_audit_dir / "server.jsonl")
        server = GatewayServer(
            default_graph, audit=audit, report_dir=tmp_path / "reports"
        ).start()
        try:
            sock = socket.create_connection(("127.0.0.1", server.port))
            code = run_baseline(proto.SocketChannel(sock))
            assert code == 0
            deadline = time.time() + 5
            reports = []
            while time.time() < deadline:
                reports = list((tmp_path / "reports").glob("report_*.json"))
                if reports:
                    break
                time.sleep(0.05)
            assert reports
            payload = json.loads(reports[0].read_text())
            assert payload["state"] == "Released"
            assert payload["metrics"]["A"]["f1"] == pytest.approx(198 / 199)
        finally:
            server.stop()

    def test_concurrent_sessions_overlap_when_enabled(self, default_graph):
        import threading

        server = GatewayServer(default_graph, concurrent=True).start()
        barrier = threading.Barrier(3, timeout=10)

        def client():
            sock = socket.create_connection(("127.0.0.1", server.port))
            channel = proto.SocketChannel(sock)
            proto.handshake_app(channel, "parallel-probe")
            barrier.wait()  # both sessions must be live at once to pass
            channel.send(proto.Query(id=1, text="MATCH (s:Subject) RETURN s LIMIT 1"))
            answer = channel.recv()
            assert isinstance(answer, proto.Rows)
            channel.close()

        try:
            threads = [threading.Thread(target=client) for _ in range(2)]
            for t in threads:
                t.start()
            barrier.wait()
            for t in threads:
                t.join(timeout=10)
                assert not t.is_alive()
        finally:
            server.stop()

    def test_version_mismatch_gets_fatal(self, default_graph):
        server = GatewayServer(default_graph).start()
        try:
            sock = socket.create_connection(("127.0.0.1", server.port))
            channel = proto.SocketChannel(sock)
            with pytest.raises(proto.ProtocolError) as err:
                proto.handshake_app(channel, "old-client", version="0")
            assert err.value.code == "BAD_VERSION"
            channel.close()
        finally:
            server.stop()
