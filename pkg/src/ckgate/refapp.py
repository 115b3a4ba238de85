"""Reference model app: a deterministic constant-prediction baseline.

Speaks the protocol end to end, which makes it the fixture for
integration tests and the template external developers copy. It learns
nothing: task A predicts the majority health status of the connected
samples, task B the most frequent leading ICD-10 letter, and both
constants are applied to every subject in the graph.

The protocol runs on stdio by default (stdout is the wire: never print
here), or over TCP with --endpoint host:port.
"""

from __future__ import annotations

import argparse
import csv
import io
import socket
import sys
from collections import Counter
from typing import Optional

from . import proto

SUBJECTS_QUERY = "MATCH (s:Subject) RETURN s.subject_id"
LINKS_QUERY = (
    "MATCH (s:Subject)<-[:BELONGS_TO_SUBJECT]-(b:Biological_Sample)"
    "-[:HAS_DISEASE]->(d:Disease) RETURN s.subject_id, d.name, d.synonyms"
)
# A deliberately broad scan; with a small step budget it exhausts and the
# gateway answers TIMEOUT. Used to exercise error recovery.
HEAVY_QUERY = "MATCH (a)-[]->(b) RETURN a"

ICD10_PREFIX = "ICD10:"


def _query(channel: proto.Channel, query_id: int, text: str):
    channel.send(proto.Query(id=query_id, text=text))
    answer = channel.recv()
    if answer is None:
        raise proto.ChannelClosed("gateway hung up mid-query")
    if isinstance(answer, proto.Fatal):
        raise proto.ProtocolError(answer.code, answer.message)
    if not isinstance(answer, (proto.Rows, proto.QueryErrorMsg)):
        raise proto.ProtocolError("OUT_OF_ORDER", f"unexpected {type(answer).__name__}")
    return answer


def _prediction_csv(rows: list) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["subject_id", "prediction"])
    writer.writerows(rows)
    return out.getvalue()


def run_baseline(
    channel: proto.Channel,
    *,
    app_name: str = "refapp-baseline",
    bad_queries: int = 0,
    heavy_query: bool = False,
    flip_a: bool = False,
    skip_tasks: tuple = (),
    send_done: bool = True,
    final_exit_code: int = 0,
) -> int:
    """Run the baseline against a gateway on `channel`; returns exit code.

    The keyword knobs exist for harnesses: they inject recoverable query
    errors or vary the submission pattern without changing the model.
    """
    try:
        ack = proto.handshake_app(channel, app_name)
    except (proto.ProtocolError, proto.ChannelClosed):
        return 2
    tasks = [t for t in ack.tasks if t not in skip_tasks]
    query_id = 0

    try:
        for _ in range(bad_queries):
            query_id += 1
            answer = _query(channel, query_id, "MATCH (oops RETURN oops")
            if not isinstance(answer, proto.QueryErrorMsg):
                return 2

        query_id += 1
        subjects_answer = _query(channel, query_id, SUBJECTS_QUERY)
        query_id += 1
        links_answer = _query(channel, query_id, LINKS_QUERY)
        if not isinstance(subjects_answer, proto.Rows) or not isinstance(links_answer, proto.Rows):
            return 2

        if heavy_query:
            # after the data is in hand so an exhausted step pool cannot
            # block the submission that follows
            query_id += 1
            _query(channel, query_id, HEAVY_QUERY)

        subjects = sorted({row[0] for row in subjects_answer.rows})
        status_by_subject: dict = {}
        codes_by_subject: dict = {}
        for subject_id, disease_name, synonyms in links_answer.rows:
            if disease_name == "control":
                status_by_subject[subject_id] = "0"
                continue
            status_by_subject.setdefault(subject_id, "1")
            for synonym in synonyms or []:
                if synonym.startswith(ICD10_PREFIX):
                    code = synonym[len(ICD10_PREFIX) :]
                    if code and code[0].isalpha() and code[0].isascii():
                        codes_by_subject.setdefault(subject_id, []).append(code)

        status_counts = Counter(status_by_subject.values())
        majority = "1" if status_counts.get("1", 0) >= status_counts.get("0", 0) else "0"
        if flip_a:
            majority = "0" if majority == "1" else "1"

        letter_counts: Counter = Counter(
            min(codes)[0].upper() for codes in codes_by_subject.values() if codes
        )
        if letter_counts:
            top = max(letter_counts.values())
            letter = min(l for l, n in letter_counts.items() if n == top)
        else:
            letter = "A"

        for task in tasks:
            constant = majority if task == "A" else letter
            csv_text = _prediction_csv([(s, constant) for s in subjects])
            channel.send(proto.SubmitPredictions(task=task, csv=csv_text))
            answer = channel.recv()
            if isinstance(answer, proto.Fatal):
                return 2
            if not isinstance(answer, proto.SubmitAck):
                return 2

        if send_done:
            channel.send(proto.WorkflowDone())
    except (proto.ProtocolError, proto.ChannelClosed):
        return 2
    return final_exit_code


def main(argv: Optional[list] = None) -> int:
    parser = argparse.ArgumentParser(prog="ckgate-refapp", description=__doc__)
    parser.add_argument("--endpoint", help="host:port of a gateway server (default: stdio)")
    parser.add_argument("--app-name", default="refapp-baseline")
    parser.add_argument("--bad-queries", type=int, default=0)
    parser.add_argument("--heavy-query", action="store_true")
    parser.add_argument("--flip-a", action="store_true")
    parser.add_argument("--skip-task", action="append", default=[], choices=["A", "B"])
    parser.add_argument("--no-done", action="store_true")
    parser.add_argument("--exit-code", type=int, default=0)
    args = parser.parse_args(argv)

    if args.endpoint:
        host, _, port = args.endpoint.rpartition(":")
        sock = socket.create_connection((host, int(port)))
        channel: proto.Channel = proto.SocketChannel(sock)
    else:
        channel = proto.PipeChannel(sys.stdin.buffer, sys.stdout.buffer)
    try:
        return run_baseline(
            channel,
            app_name=args.app_name,
            bad_queries=args.bad_queries,
            heavy_query=args.heavy_query,
            flip_a=args.flip_a,
            skip_tasks=tuple(args.skip_task),
            send_done=not args.no_done,
            final_exit_code=args.exit_code,
        )
    finally:
        channel.close()


if __name__ == "__main__":
    sys.exit(main())
