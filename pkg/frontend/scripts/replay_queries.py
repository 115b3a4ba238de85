#!/usr/bin/env python3
"""Run the reference app's query transcript against a gateway endpoint
using the gateway's own client-side protocol code, and print the query
texts with their results as JSON. Used to check that the TypeScript SDK
sees byte-for-byte identical ROWS."""

import json
import socket
import sys

from ckgate import proto
from ckgate.refapp import LINKS_QUERY, SUBJECTS_QUERY


def main() -> int:
    host, _, port = sys.argv[1].rpartition(":")
    sock = socket.create_connection((host or "127.0.0.1", int(port)))
    channel = proto.SocketChannel(sock)
    proto.handshake_app(channel, "replay-harness")
    out = {"queries": [SUBJECTS_QUERY, LINKS_QUERY], "results": []}
    for query_id, text in enumerate(out["queries"], start=1):
        channel.send(proto.Query(id=query_id, text=text))
        answer = channel.recv()
        assert isinstance(answer, proto.Rows), answer
        out["results"].append(
            {
                "columns": list(answer.columns),
                "rows": [list(row) for row in answer.rows],
                "truncated": answer.truncated,
            }
        )
    channel.send(proto.WorkflowDone())
    channel.close()
    json.dump(out, sys.stdout, ensure_ascii=False)
    return 0


if __name__ == "__main__":
    sys.exit(main())
