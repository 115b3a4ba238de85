"""Workflow orchestration: validate a submitted app, run it against the
private graph under budgets, evaluate its predictions, and release only
the scrubbed metrics report.

The app process is sandboxed at the process level: it is launched from
the manifest entrypoint with the protocol channel as its only
gateway-provided interface. OS-level confinement is a deployment
concern. Query errors (parse failures, budget timeouts, the per-session
query cap) are answered in-band and the session continues; protocol
violations end the session.

Everything observable by the app's developers flows through
EgressReport, which is scrubbed: its serialized form must not contain
any subject_id, any node id in the "n<id>" rendering, or (by default)
any disease name from the graph it reports on.
"""

from __future__ import annotations

import itertools
import json
import re
import shlex
import socket
import subprocess
import threading
import time
from contextlib import nullcontext
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Optional, Union

from . import proto
from .evaluation import (
    EvaluationError,
    MetricsReport,
    PredictionTable,
    compute_metrics,
    ground_truth_task_a,
    ground_truth_task_b,
    parse_predictions,
)
from .graph import PropertyGraph
from .qlang import (
    Budget,
    BudgetExceeded,
    BudgetMeter,
    EvalError,
    QueryError,
    TypeMismatch,
    evaluate,
    parse,
)

APP_NAME_PATTERN = re.compile(r"^[a-z0-9-]{1,64}$")

DEFAULT_MAX_QUERIES = 256
DEFAULT_SESSION_WALL_CLOCK_MS = 600_000

_session_counter = itertools.count(1)


class GatewayError(Exception):
    pass


class LaunchError(GatewayError):
    pass


class EgressViolation(GatewayError):
    """An outbound report contained graph material; it was withheld."""


class AuditReplayError(GatewayError):
    pass


# -- session limits and manifests -------------------------------------------


@dataclass(frozen=True)
class SessionLimits:
    query_budget: Budget = field(default_factory=Budget)
    max_queries: int = DEFAULT_MAX_QUERIES
    session_wall_clock_ms: int = DEFAULT_SESSION_WALL_CLOCK_MS

    def to_payload(self) -> dict:
        return {
            "max_queries": self.max_queries,
            "session_wall_clock_ms": self.session_wall_clock_ms,
            "query_budget": {
                "max_steps": self.query_budget.max_steps,
                "max_rows": self.query_budget.max_rows,
                "wall_clock_ms": self.query_budget.wall_clock_ms,
            },
        }

    def apply_override(self, override: Optional[dict]) -> "SessionLimits":
        """Tighten limits with a manifest override; validation has already
        checked that nothing is being raised."""
        if not override:
            return self
        budget = self.query_budget
        budget_override = override.get("query_budget") or {}
        budget = Budget(
            max_steps=budget_override.get("max_steps", budget.max_steps),
            max_rows=budget_override.get("max_rows", budget.max_rows),
            wall_clock_ms=budget_override.get("wall_clock_ms", budget.wall_clock_ms),
        )
        return SessionLimits(
            query_budget=budget,
            max_queries=override.get("max_queries", self.max_queries),
            session_wall_clock_ms=override.get(
                "session_wall_clock_ms", self.session_wall_clock_ms
            ),
        )


@dataclass(frozen=True)
class Manifest:
    app_name: str = ""
    version: str = ""
    tasks: tuple = ()
    entrypoint: str = ""
    limits_override: Optional[dict] = None
    extra_fields: tuple = ()

    @classmethod
    def from_dict(cls, payload: dict) -> "Manifest":
        if not isinstance(payload, dict):
            raise GatewayError("manifest must be a JSON object")
        known = {"app_name", "version", "tasks", "entrypoint", "limits_override"}
        tasks = payload.get("tasks", [])
        return cls(
            app_name=str(payload.get("app_name", "")),
            version=str(payload.get("version", "")),
            tasks=tuple(tasks) if isinstance(tasks, list) else (tasks,),
            entrypoint=str(payload.get("entrypoint", "")),
            limits_override=payload.get("limits_override"),
            extra_fields=tuple(sorted(set(payload) - known)),
        )

    @classmethod
    def from_file(cls, path) -> "Manifest":
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise GatewayError(f"cannot read manifest {path}: {exc}") from exc
        return cls.from_dict(payload)


@dataclass
class ValidationResult:
    ok: bool
    reasons: list = field(default_factory=list)


_OVERRIDE_KEYS = {"max_queries", "session_wall_clock_ms", "query_budget"}
_BUDGET_KEYS = {"max_steps", "max_rows", "wall_clock_ms"}


def validate_manifest(manifest: Manifest, defaults: SessionLimits) -> ValidationResult:
    """Static checks on a submission; collects every reason, not just the first."""
    reasons = []
    if not APP_NAME_PATTERN.match(manifest.app_name):
        reasons.append("app_name must match [a-z0-9-]{1,64}")
    if not manifest.version:
        reasons.append("version must be non-empty")
    if not manifest.tasks:
        reasons.append("no tasks declared")
    else:
        bad = [t for t in manifest.tasks if t not in ("A", "B")]
        if bad:
            reasons.append(f"unknown tasks: {', '.join(map(str, bad))}")
        if len(set(manifest.tasks)) != len(manifest.tasks):
            reasons.append("tasks contain duplicates")
    if not manifest.entrypoint.strip():
        reasons.append("entrypoint must be non-empty")
    if manifest.extra_fields:
        reasons.append(f"unknown manifest fields: {', '.join(manifest.extra_fields)}")
    reasons.extend(_validate_override(manifest.limits_override, defaults))
    return ValidationResult(ok=not reasons, reasons=reasons)


def _validate_override(override: Optional[dict], defaults: SessionLimits) -> list:
    if override is None:
        return []
    if not isinstance(override, dict):
        return ["limits_override must be an object"]
    reasons = []
    unknown = set(override) - _OVERRIDE_KEYS
    if unknown:
        reasons.append(f"unknown limit fields: {', '.join(sorted(unknown))}")
    defaults_payload = defaults.to_payload()
    for key in ("max_queries", "session_wall_clock_ms"):
        if key in override:
            value = override[key]
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                reasons.append(f"{key} must be a positive integer")
            elif value > defaults_payload[key]:
                reasons.append("limits exceed gateway policy")
    budget = override.get("query_budget")
    if budget is not None:
        if not isinstance(budget, dict):
            reasons.append("query_budget must be an object")
        else:
            unknown = set(budget) - _BUDGET_KEYS
            if unknown:
                reasons.append(f"unknown budget fields: {', '.join(sorted(unknown))}")
            for key in _BUDGET_KEYS & set(budget):
                value = budget[key]
                if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                    reasons.append(f"query_budget.{key} must be a positive integer")
                elif value > defaults_payload["query_budget"][key]:
                    reasons.append("limits exceed gateway policy")
    # de-duplicate the policy reason if several fields exceeded
    seen: set = set()
    return [r for r in reasons if not (r in seen or seen.add(r))]


# -- workflow states and audit ----------------------------------------------


class WorkflowState(Enum):
    SUBMITTED = "Submitted"
    VALIDATED = "Validated"
    PROVISIONED = "Provisioned"
    RUNNING = "Running"
    AWAITING_EVALUATION = "AwaitingEvaluation"
    EVALUATED = "Evaluated"
    RELEASED = "Released"
    FAILED = "Failed"


class FailureReason(Enum):
    REJECTED = "Rejected"
    TIMEOUT = "Timeout"
    PROTOCOL_VIOLATION = "ProtocolViolation"
    APP_CRASH = "AppCrash"
    NO_SUBMISSION = "NoSubmission"


LEGAL_TRANSITIONS = {
    (WorkflowState.SUBMITTED, WorkflowState.VALIDATED),
    (WorkflowState.SUBMITTED, WorkflowState.FAILED),
    (WorkflowState.VALIDATED, WorkflowState.PROVISIONED),
    (WorkflowState.PROVISIONED, WorkflowState.RUNNING),
    (WorkflowState.RUNNING, WorkflowState.AWAITING_EVALUATION),
    (WorkflowState.RUNNING, WorkflowState.FAILED),
    (WorkflowState.AWAITING_EVALUATION, WorkflowState.EVALUATED),
    (WorkflowState.EVALUATED, WorkflowState.RELEASED),
}

LEGAL_FAILURE_REASONS = {
    WorkflowState.SUBMITTED: {FailureReason.REJECTED},
    WorkflowState.RUNNING: {
        FailureReason.TIMEOUT,
        FailureReason.PROTOCOL_VIOLATION,
        FailureReason.APP_CRASH,
        FailureReason.NO_SUBMISSION,
    },
}

AUDIT_KINDS = ("state_transition", "query", "query_error", "submission", "egress")


class AuditLog:
    """Append-only event log; one JSONL line per entry when a path is set."""

    def __init__(self, path=None):
        self.path = Path(path) if path is not None else None
        self.entries: list = []
        self._lock = threading.Lock()

    def record(self, session_id: str, kind: str, detail: str) -> None:
        if kind not in AUDIT_KINDS:
            raise ValueError(f"unknown audit kind {kind!r}")
        entry = {
            "ts": time.monotonic_ns() // 1_000_000,
            "session": session_id,
            "kind": kind,
            "detail": detail,
        }
        with self._lock:
            self.entries.append(entry)
            if self.path is not None:
                with open(self.path, "a", encoding="utf-8") as handle:
                    handle.write(json.dumps(entry, ensure_ascii=False) + "\n")

    def query_entries(self, session_id: Optional[str] = None) -> list:
        with self._lock:
            return [
                e
                for e in self.entries
                if e["kind"] in ("query", "query_error")
                and (session_id is None or e["session"] == session_id)
            ]


def read_audit_log(path) -> list:
    entries = []
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            entry = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise AuditReplayError(f"line {line_no}: invalid JSON ({exc.msg})") from exc
        for key in ("ts", "session", "kind", "detail"):
            if key not in entry:
                raise AuditReplayError(f"line {line_no}: missing field {key!r}")
        entries.append(entry)
    return entries


_TRANSITION_RE = re.compile(r"^(\w+)->(\w+)(?:\((\w+)\))?$")


def replay_state_transitions(entries: list) -> list:
    """Check recorded transitions against the legal set.

    Returns a list of violation descriptions (empty when sound). A
    session's first transition in the replayed material may start from
    any state, since a log can begin at an approval resume; after that,
    each transition must continue where the previous one ended.
    """
    violations = []
    current: dict = {}
    by_name = {state.value: state for state in WorkflowState}
    reasons = {reason.value: reason for reason in FailureReason}
    for entry in entries:
        if entry["kind"] != "state_transition":
            continue
        match = _TRANSITION_RE.match(entry["detail"])
        if not match:
            violations.append(f"unparseable transition {entry['detail']!r}")
            continue
        src_name, dst_name, reason_name = match.groups()
        src = by_name.get(src_name)
        dst = by_name.get(dst_name)
        if src is None or dst is None:
            violations.append(f"unknown state in {entry['detail']!r}")
            continue
        if (src, dst) not in LEGAL_TRANSITIONS:
            violations.append(f"illegal transition {entry['detail']!r}")
            continue
        if dst is WorkflowState.FAILED:
            reason = reasons.get(reason_name or "")
            if reason is None or reason not in LEGAL_FAILURE_REASONS.get(src, set()):
                violations.append(f"illegal failure reason in {entry['detail']!r}")
                continue
        session = entry["session"]
        if session in current and current[session] is not src:
            violations.append(
                f"session {session}: transition {entry['detail']!r} does not "
                f"continue from {current[session].value}"
            )
        current[session] = dst
    return violations


class _Workflow:
    """Tracks the state machine for one session and audits transitions."""

    def __init__(self, audit: AuditLog, session_id: str):
        self.audit = audit
        self.session_id = session_id
        self.state = WorkflowState.SUBMITTED
        self.failure_reason: Optional[FailureReason] = None

    def to(self, new_state: WorkflowState) -> None:
        if (self.state, new_state) not in LEGAL_TRANSITIONS:
            raise GatewayError(
                f"illegal transition {self.state.value}->{new_state.value}"
            )
        self.audit.record(
            self.session_id,
            "state_transition",
            f"{self.state.value}->{new_state.value}",
        )
        self.state = new_state

    def fail(self, reason: FailureReason) -> None:
        if reason not in LEGAL_FAILURE_REASONS.get(self.state, set()):
            raise GatewayError(
                f"illegal failure {reason.value} from {self.state.value}"
            )
        self.audit.record(
            self.session_id,
            "state_transition",
            f"{self.state.value}->Failed({reason.value})",
        )
        self.state = WorkflowState.FAILED
        self.failure_reason = reason

    def resume_at(self, state: WorkflowState) -> None:
        self.state = state


# -- the egress boundary -----------------------------------------------------


@dataclass
class EgressReport:
    """The only object permitted to cross the trust boundary."""

    app_name: str
    version: str
    state: str
    failure_reason: Optional[str] = None
    metrics: dict = field(default_factory=dict)  # task -> MetricsReport
    queries_issued: int = 0
    rows_returned_total: int = 0

    def to_dict(self) -> dict:
        return {
            "app_name": self.app_name,
            "version": self.version,
            "state": self.state,
            "failure_reason": self.failure_reason,
            "metrics": {
                task: report.to_dict() for task, report in sorted(self.metrics.items())
            },
            "counts": {
                "queries_issued": self.queries_issued,
                "rows_returned_total": self.rows_returned_total,
            },
        }

    @property
    def score_total(self) -> Optional[float]:
        if not self.metrics:
            return None
        a = self.metrics.get("A")
        b = self.metrics.get("B")
        total = 0.0
        if a is not None and a.f1 is not None:
            total += a.f1
        if b is not None:
            total += b.recall
        return total


def enforce_egress(
    report: EgressReport, graph: PropertyGraph, *, scan_disease_names: bool = True
) -> EgressReport:
    """Whitelist plus string-scan check before anything leaves.

    Serializes the whitelisted report fields and scans the bytes for
    every graph identifier. Any hit withholds the report entirely.
    """
    serialized = json.dumps(report.to_dict(), ensure_ascii=False)
    identifiers = graph.identifier_strings()
    if not scan_disease_names:
        from .graph import NodeLabel

        names = {
            graph.node(node_id).properties["name"]
            for node_id in graph.nodes_by_label(NodeLabel.DISEASE)
        }
        identifiers -= names
    for identifier in identifiers:
        if identifier and identifier in serialized:
            raise EgressViolation(
                f"serialized report contains graph identifier {identifier!r}"
            )
    return report


# -- sessions ----------------------------------------------------------------


class GatewaySession:
    """Query and submission handling for one connected app."""

    def __init__(
        self,
        session_id: str,
        graph: PropertyGraph,
        limits: SessionLimits,
        tasks: tuple,
        audit: AuditLog,
    ):
        self.session_id = session_id
        self.graph = graph
        self.limits = limits
        self.tasks = tasks
        self.audit = audit
        self.queries_issued = 0
        self.rows_returned_total = 0
        self.steps_remaining = limits.query_budget.max_steps
        self.submissions: dict = {}  # task -> PredictionTable
        self.submission_csvs: dict = {}  # task -> raw csv text
        self.last_query_id: Optional[int] = None
        self.app_name = ""

    def handle_query(self, message: proto.Query) -> Union[proto.Rows, proto.QueryErrorMsg]:
        """Answer one QUERY; budget errors are in-band, never fatal."""
        if self.last_query_id is not None and message.id <= self.last_query_id:
            raise proto.ProtocolError(
                "OUT_OF_ORDER", f"query id {message.id} does not increase"
            )
        self.last_query_id = message.id
        self.queries_issued += 1
        if self.queries_issued > self.limits.max_queries:
            return self._query_error(message, "SESSION_LIMIT", "session query limit reached")
        try:
            query = parse(message.text)
        except QueryError as exc:
            return self._query_error(message, "PARSE", str(exc))
        meter = BudgetMeter()
        budget = replace(self.limits.query_budget, max_steps=self.steps_remaining)
        try:
            table = evaluate(self.graph, query, budget, meter)
        except BudgetExceeded as exc:
            return self._query_error(message, "TIMEOUT", str(exc))
        except TypeMismatch as exc:
            return self._query_error(message, "TYPE", str(exc))
        except EvalError as exc:
            # unknown labels and edge types: statically invalid queries
            return self._query_error(message, "PARSE", str(exc))
        finally:
            self.steps_remaining -= min(meter.steps_used, self.steps_remaining)
        self.rows_returned_total += len(table.rows)
        self.audit.record(
            self.session_id,
            "query",
            f"id={message.id} rows={len(table.rows)} text={message.text}",
        )
        return proto.Rows(
            id=message.id,
            columns=tuple(table.columns),
            rows=tuple(tuple(row) for row in table.rows),
            truncated=table.truncated,
        )

    def _query_error(self, message: proto.Query, code: str, detail: str) -> proto.QueryErrorMsg:
        self.audit.record(
            self.session_id,
            "query_error",
            f"id={message.id} code={code} text={message.text}",
        )
        return proto.QueryErrorMsg(id=message.id, code=code, message=detail)

    def handle_submission(self, message: proto.SubmitPredictions) -> proto.SubmitAck:
        if message.task not in self.tasks:
            raise proto.ProtocolError(
                "BAD_FRAME", f"task {message.task} was not declared for this session"
            )
        if message.task in self.submissions:
            raise proto.ProtocolError(
                "DUPLICATE_SUBMISSION", f"task {message.task} already submitted"
            )
        try:
            table = parse_predictions(message.csv, message.task)
        except EvaluationError as exc:
            raise proto.ProtocolError("BAD_FRAME", f"invalid prediction table: {exc}") from exc
        self.submissions[message.task] = table
        self.submission_csvs[message.task] = message.csv
        self.audit.record(
            self.session_id,
            "submission",
            f"task={message.task} rows={table.source_row_count}",
        )
        return proto.SubmitAck(task=message.task, row_count=table.source_row_count)


def _serve_session(
    session: GatewaySession, channel: proto.Channel, deadline: float
) -> Optional[FailureReason]:
    """Drive one session to completion.

    Returns a failure reason for protocol violations, None when the app
    finished cleanly (WORKFLOW_DONE or EOF). Raises TimeoutError when
    the session wall clock runs out.
    """
    try:
        first = channel.recv(deadline)
        if first is None:
            return None
        if not isinstance(first, proto.Hello):
            channel.send(proto.Fatal(code="OUT_OF_ORDER", message="expected HELLO first"))
            return FailureReason.PROTOCOL_VIOLATION
        if first.protocol_version != proto.PROTOCOL_VERSION:
            channel.send(
                proto.Fatal(
                    code="BAD_VERSION",
                    message=f"unsupported protocol version {first.protocol_version!r}",
                )
            )
            return FailureReason.PROTOCOL_VIOLATION
        session.app_name = first.app_name
        channel.send(
            proto.HelloAck(
                session_id=session.session_id,
                tasks=tuple(session.tasks),
                limits=session.limits.to_payload(),
            )
        )
        while True:
            message = channel.recv(deadline)
            if message is None or isinstance(message, proto.WorkflowDone):
                return None
            if isinstance(message, proto.Query):
                answer = session.handle_query(message)
                try:
                    channel.send(answer)
                except proto.OversizeBody:
                    raise proto.ProtocolError(
                        "OVERSIZE", "result table exceeds the frame size cap"
                    ) from None
            elif isinstance(message, proto.SubmitPredictions):
                channel.send(session.handle_submission(message))
            else:
                raise proto.ProtocolError(
                    "OUT_OF_ORDER", f"unexpected {type(message).__name__} frame"
                )
    except proto.ProtocolError as exc:
        try:
            channel.send(proto.Fatal(code=exc.code, message=exc.message))
        except (proto.ChannelClosed, OSError):
            pass
        return FailureReason.PROTOCOL_VIOLATION
    except proto.ChannelClosed:
        return None


# -- app launchers -----------------------------------------------------------


class SubprocessLauncher:
    """Launches the app as a child process speaking the protocol on stdio."""

    def __init__(self, stderr=subprocess.DEVNULL):
        self._stderr = stderr

    def launch(self, entrypoint: str):
        args = shlex.split(entrypoint)
        if not args:
            raise LaunchError("empty entrypoint")
        try:
            process = subprocess.Popen(
                args,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=self._stderr,
            )
        except OSError as exc:
            raise LaunchError(f"cannot launch {args[0]!r}: {exc}") from exc
        return _ProcessHandle(process), proto.PipeChannel(process.stdout, process.stdin)


class _ProcessHandle:
    def __init__(self, process: subprocess.Popen):
        self._process = process

    def wait(self, timeout: Optional[float] = None) -> Optional[int]:
        try:
            return self._process.wait(timeout)
        except subprocess.TimeoutExpired:
            return None

    def kill(self) -> None:
        if self._process.poll() is None:
            self._process.kill()
            self._process.wait()

    @property
    def exit_code(self) -> Optional[int]:
        return self._process.poll()


class CallableLauncher:
    """Runs a Python callable as the "app" in a thread over a socket pair.

    The callable receives a Channel and returns an exit code. Used by
    tests and fuzz harnesses to avoid per-run process startup cost.
    """

    def __init__(self, target: Callable[[proto.Channel], int]):
        self._target = target

    def launch(self, entrypoint: str):
        gateway_sock, app_sock = socket.socketpair()
        app_channel = proto.SocketChannel(app_sock)
        handle = _ThreadHandle(self._target, app_channel)
        handle.start()
        return handle, proto.SocketChannel(gateway_sock)


class _ThreadHandle:
    def __init__(self, target, channel):
        self._channel = channel
        self._code: Optional[int] = None

        def runner():
            try:
                self._code = int(target(channel) or 0)
            except Exception:
                self._code = 1
            finally:
                channel.close()

        self._thread = threading.Thread(target=runner, daemon=True)

    def start(self) -> None:
        self._thread.start()

    def wait(self, timeout: Optional[float] = None) -> Optional[int]:
        self._thread.join(timeout)
        return None if self._thread.is_alive() else self._code

    def kill(self) -> None:
        # closing the channel unblocks protocol reads; a thread stuck in
        # unrelated work is left to the daemon flag
        self._channel.close()
        self._thread.join(timeout=0.5)

    @property
    def exit_code(self) -> Optional[int]:
        return None if self._thread.is_alive() else self._code


# -- the workflow driver ------------------------------------------------------


@dataclass
class PendingEvaluation:
    """A run parked at AwaitingEvaluation under --hold-for-approval."""

    session_id: str
    app_name: str
    version: str
    submissions: dict  # task -> csv text
    queries_issued: int
    rows_returned_total: int

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "app_name": self.app_name,
            "version": self.version,
            "submissions": self.submissions,
            "queries_issued": self.queries_issued,
            "rows_returned_total": self.rows_returned_total,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "PendingEvaluation":
        return cls(
            session_id=payload["session_id"],
            app_name=payload["app_name"],
            version=payload["version"],
            submissions=dict(payload["submissions"]),
            queries_issued=int(payload["queries_issued"]),
            rows_returned_total=int(payload["rows_returned_total"]),
        )


def next_session_id() -> str:
    return f"s{next(_session_counter)}"


def run_workflow(
    graph: PropertyGraph,
    manifest: Manifest,
    launcher=None,
    *,
    limits: Optional[SessionLimits] = None,
    audit: Optional[AuditLog] = None,
    session_id: Optional[str] = None,
    hold_for_approval: bool = False,
    scan_disease_names: bool = True,
) -> Union[EgressReport, PendingEvaluation]:
    """Drive one submission end to end and return its scrubbed report.

    With hold_for_approval the workflow parks at AwaitingEvaluation and
    returns a PendingEvaluation for approve_pending() to finish later.
    """
    audit = audit if audit is not None else AuditLog()
    defaults = limits if limits is not None else SessionLimits()
    sid = session_id or next_session_id()
    workflow = _Workflow(audit, sid)

    def failure_report(session: Optional[GatewaySession]) -> EgressReport:
        report = EgressReport(
            app_name=manifest.app_name,
            version=manifest.version,
            state=workflow.state.value,
            failure_reason=workflow.failure_reason.value if workflow.failure_reason else None,
            queries_issued=session.queries_issued if session else 0,
            rows_returned_total=session.rows_returned_total if session else 0,
        )
        checked = enforce_egress(report, graph, scan_disease_names=scan_disease_names)
        audit.record(sid, "egress", f"released failure report state={report.state}")
        return checked

    validation = validate_manifest(manifest, defaults)
    if not validation.ok:
        workflow.fail(FailureReason.REJECTED)
        return failure_report(None)
    workflow.to(WorkflowState.VALIDATED)

    if not graph.frozen:
        graph.freeze()
    effective = defaults.apply_override(manifest.limits_override)
    workflow.to(WorkflowState.PROVISIONED)
    workflow.to(WorkflowState.RUNNING)

    launcher = launcher if launcher is not None else SubprocessLauncher()
    session = GatewaySession(sid, graph, effective, tuple(manifest.tasks), audit)
    try:
        handle, channel = launcher.launch(manifest.entrypoint)
    except LaunchError:
        workflow.fail(FailureReason.APP_CRASH)
        return failure_report(session)

    deadline = time.monotonic() + effective.session_wall_clock_ms / 1000.0
    failure: Optional[FailureReason] = None
    timed_out = False
    try:
        failure = _serve_session(session, channel, deadline)
    except TimeoutError:
        timed_out = True
    finally:
        channel.close()

    if timed_out:
        handle.kill()
        workflow.fail(FailureReason.TIMEOUT)
        return failure_report(session)
    if failure is not None:
        handle.kill()
        workflow.fail(failure)
        return failure_report(session)

    exit_code = handle.wait(timeout=10)
    if exit_code is None:
        handle.kill()
        exit_code = handle.exit_code

    if not session.submissions:
        if exit_code != 0:
            workflow.fail(FailureReason.APP_CRASH)
        else:
            workflow.fail(FailureReason.NO_SUBMISSION)
        return failure_report(session)

    workflow.to(WorkflowState.AWAITING_EVALUATION)
    if hold_for_approval:
        return PendingEvaluation(
            session_id=sid,
            app_name=manifest.app_name,
            version=manifest.version,
            submissions=dict(session.submission_csvs),
            queries_issued=session.queries_issued,
            rows_returned_total=session.rows_returned_total,
        )
    return _evaluate_and_release(
        workflow,
        graph,
        session.submissions,
        manifest.app_name,
        manifest.version,
        session.queries_issued,
        session.rows_returned_total,
        scan_disease_names=scan_disease_names,
    )


def approve_pending(
    pending: PendingEvaluation,
    graph: PropertyGraph,
    *,
    audit: Optional[AuditLog] = None,
    scan_disease_names: bool = True,
) -> EgressReport:
    """Finish a held run: evaluate its submissions and release the report."""
    audit = audit if audit is not None else AuditLog()
    workflow = _Workflow(audit, pending.session_id)
    workflow.resume_at(WorkflowState.AWAITING_EVALUATION)
    submissions = {
        task: parse_predictions(csv_text, task)
        for task, csv_text in pending.submissions.items()
    }
    return _evaluate_and_release(
        workflow,
        graph,
        submissions,
        pending.app_name,
        pending.version,
        pending.queries_issued,
        pending.rows_returned_total,
        scan_disease_names=scan_disease_names,
    )


def _evaluate_and_release(
    workflow: _Workflow,
    graph: PropertyGraph,
    submissions: dict,
    app_name: str,
    version: str,
    queries_issued: int,
    rows_returned_total: int,
    *,
    scan_disease_names: bool,
) -> EgressReport:
    metrics: dict = {}
    for task in sorted(submissions):
        truth = ground_truth_task_a(graph) if task == "A" else ground_truth_task_b(graph)
        metrics[task] = compute_metrics(submissions[task], truth)
    workflow.to(WorkflowState.EVALUATED)
    report = EgressReport(
        app_name=app_name,
        version=version,
        state=WorkflowState.RELEASED.value,
        metrics=metrics,
        queries_issued=queries_issued,
        rows_returned_total=rows_returned_total,
    )
    try:
        checked = enforce_egress(report, graph, scan_disease_names=scan_disease_names)
    except EgressViolation:
        workflow.audit.record(workflow.session_id, "egress", "report withheld (violation)")
        raise
    workflow.to(WorkflowState.RELEASED)
    workflow.audit.record(
        workflow.session_id,
        "egress",
        f"released metrics for tasks {','.join(sorted(metrics))}",
    )
    return checked


# -- socket server -------------------------------------------------------------


class GatewayServer:
    """Serves protocol sessions over TCP for out-of-process clients.

    Each connection runs the same session logic as run_workflow's
    Running phase; on completion the report is written to report_dir (or
    a pending file under hold_for_approval). By default sessions are
    handled one at a time, mirroring the single-running-app setting.
    """

    def __init__(
        self,
        graph: PropertyGraph,
        *,
        host: str = "127.0.0.1",
        port: int = 0,
        limits: Optional[SessionLimits] = None,
        tasks: tuple = ("A", "B"),
        audit: Optional[AuditLog] = None,
        report_dir=None,
        hold_for_approval: bool = False,
        concurrent: bool = False,
        scan_disease_names: bool = True,
    ):
        self.graph = graph.freeze()
        self.limits = limits if limits is not None else SessionLimits()
        self.tasks = tuple(tasks)
        self.audit = audit if audit is not None else AuditLog()
        self.report_dir = Path(report_dir) if report_dir else None
        self.hold_for_approval = hold_for_approval
        self.concurrent = concurrent
        self.scan_disease_names = scan_disease_names
        self._sock = socket.create_server((host, port))
        self._sock.settimeout(0.2)
        self.host, self.port = self._sock.getsockname()[:2]
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None
        self._session_lock = threading.Lock()

    @property
    def endpoint(self) -> str:
        return f"{self.host}:{self.port}"

    def start(self) -> "GatewayServer":
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        while not self._stop.is_set():
            try:
                conn, _ = self._sock.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            if self.concurrent:
                threading.Thread(
                    target=self._handle_connection, args=(conn,), daemon=True
                ).start()
            else:
                self._handle_connection(conn)
        self._sock.close()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def _handle_connection(self, conn: socket.socket) -> None:
        # one Running session at a time unless concurrent reads are enabled
        guard = nullcontext() if self.concurrent else self._session_lock
        with guard:
            sid = next_session_id()
            workflow = _Workflow(self.audit, sid)
            workflow.to(WorkflowState.VALIDATED)
            workflow.to(WorkflowState.PROVISIONED)
            workflow.to(WorkflowState.RUNNING)
            session = GatewaySession(sid, self.graph, self.limits, self.tasks, self.audit)
            channel = proto.SocketChannel(conn)
            deadline = time.monotonic() + self.limits.session_wall_clock_ms / 1000.0
            failure: Optional[FailureReason] = None
            timed_out = False
            try:
                failure = _serve_session(session, channel, deadline)
            except TimeoutError:
                timed_out = True
            finally:
                channel.close()
            self._finish(workflow, session, failure, timed_out)

    def _finish(
        self,
        workflow: _Workflow,
        session: GatewaySession,
        failure: Optional[FailureReason],
        timed_out: bool,
    ) -> None:
        app_name = session.app_name or "unknown"
        version = "0"
        try:
            if timed_out:
                workflow.fail(FailureReason.TIMEOUT)
            elif failure is not None:
                workflow.fail(failure)
            elif not session.submissions:
                workflow.fail(FailureReason.NO_SUBMISSION)
            else:
                workflow.to(WorkflowState.AWAITING_EVALUATION)
                if self.hold_for_approval:
                    pending = PendingEvaluation(
                        session_id=session.session_id,
                        app_name=app_name,
                        version=version,
                        submissions=dict(session.submission_csvs),
                        queries_issued=session.queries_issued,
                        rows_returned_total=session.rows_returned_total,
                    )
                    self._write_output(f"pending_{session.session_id}.json", pending.to_dict())
                    return
                report = _evaluate_and_release(
                    workflow,
                    self.graph,
                    session.submissions,
                    app_name,
                    version,
                    session.queries_issued,
                    session.rows_returned_total,
                    scan_disease_names=self.scan_disease_names,
                )
                self._write_output(f"report_{session.session_id}.json", report.to_dict())
                return
            report = EgressReport(
                app_name=app_name,
                version=version,
                state=workflow.state.value,
                failure_reason=workflow.failure_reason.value if workflow.failure_reason else None,
                queries_issued=session.queries_issued,
                rows_returned_total=session.rows_returned_total,
            )
            enforce_egress(report, self.graph, scan_disease_names=self.scan_disease_names)
            self.audit.record(session.session_id, "egress", f"released failure report state={report.state}")
            self._write_output(f"report_{session.session_id}.json", report.to_dict())
        except EgressViolation:
            pass  # withheld; the audit trail records it

    def _write_output(self, name: str, payload: dict) -> None:
        if self.report_dir is None:
            return
        self.report_dir.mkdir(parents=True, exist_ok=True)
        (self.report_dir / name).write_text(
            json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
        )
