#!/usr/bin/env python3
"""Decode a frame corpus with the gateway codec and re-encode it.

Reads the binary corpus, decodes frame by frame, asserts that
re-encoding every message reproduces the input bytes exactly, and
prints the decoded payloads as a JSON array for comparison.
"""

import json
import sys

from ckgate import proto


def main() -> int:
    data = open(sys.argv[1], "rb").read()
    messages = []
    rest = data
    while rest:
        message, rest = proto.decode(rest)
        messages.append(message)
    re_encoded = b"".join(proto.encode(m) for m in messages)
    if re_encoded != data:
        print("re-encoded bytes differ from corpus", file=sys.stderr)
        return 1
    payloads = [proto._payload(m) for m in messages]
    json.dump(payloads, sys.stdout, ensure_ascii=False)
    return 0


if __name__ == "__main__":
    sys.exit(main())
