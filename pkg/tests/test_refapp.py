from __future__ import annotations

import socket
import threading
import time

import pytest

from ckgate import proto
from ckgate.evaluation import compute_metrics, ground_truth_task_a, parse_predictions
from ckgate.gateway import (
    AuditLog,
    GatewaySession,
    SessionLimits,
    _serve_session,
    next_session_id,
)
from ckgate.refapp import run_baseline
from ckgate.synth import GeneratorConfig, generate


def drive(graph, **baseline_kwargs):
    """Run the baseline against a live session over a socket pair."""
    gw_sock, app_sock = socket.socketpair()
    session = GatewaySession(
        next_session_id(), graph.freeze(), SessionLimits(), ("A", "B"), AuditLog()
    )
    gw_channel = proto.SocketChannel(gw_sock)
    deadline = time.monotonic() + 30

    result = {}

    def serve():
        result["failure"] = _serve_session(session, gw_channel, deadline)
        gw_channel.close()

    thread = threading.Thread(target=serve)
    thread.start()
    code = run_baseline(proto.SocketChannel(app_sock), **baseline_kwargs)
    thread.join(timeout=30)
    return code, session, result.get("failure")


@pytest.fixture(scope="module")
def small_graph():
    return generate(GeneratorConfig(seed=11, n_subjects=20, disease_vocab_size=30,
                                    n_genes=40, n_proteins=40, n_phenotypes=15))


class TestBaseline:
    def test_constant_one_on_mostly_diseased(self, small_graph):
        code, session, failure = drive(small_graph)
        assert code == 0 and failure is None
        assert set(session.submissions) == {"A", "B"}
        table = session.submissions["A"]
        assert {p for _, p in table.rows} == {"1"}
        assert len(table.rows) == 20

    def test_constant_zero_on_all_control(self):
        graph = generate(GeneratorConfig(seed=7, n_subjects=3, n_control_samples=3,
                                         disease_vocab_size=5, n_genes=5, n_proteins=5,
                                         n_phenotypes=5))
        code, session, _ = drive(graph)
        assert code == 0
        assert {p for _, p in session.submissions["A"].rows} == {"0"}
        truth = ground_truth_task_a(graph)
        report = compute_metrics(session.submissions["A"], truth)
        assert report.f1 == 0.0  # zero-denominator convention

    def test_two_runs_byte_identical(self, small_graph):
        _, first, _ = drive(small_graph)
        _, second, _ = drive(small_graph)
        assert first.submission_csvs == second.submission_csvs

    def test_submissions_always_parse(self, small_graph):
        _, session, _ = drive(small_graph)
        for task, csv_text in session.submission_csvs.items():
            table = parse_predictions(csv_text, task)
            assert table.source_row_count == 20

    def test_query_budget_modest(self, small_graph):
        _, session, _ = drive(small_graph, bad_queries=2, heavy_query=True)
        assert session.queries_issued <= 10

    def test_skip_task(self, small_graph):
        _, session, _ = drive(small_graph, skip_tasks=("B",))
        assert set(session.submissions) == {"A"}

    def test_exit_code_on_fatal(self, small_graph):
        gw_sock, app_sock = socket.socketpair()
        gw_channel = proto.SocketChannel(gw_sock)

        def hostile():
            gw_channel.recv()
            gw_channel.send(proto.Fatal(code="BAD_VERSION", message="go away"))
            gw_channel.close()

        thread = threading.Thread(target=hostile)
        thread.start()
        code = run_baseline(proto.SocketChannel(app_sock))
        thread.join()
        assert code == 2
