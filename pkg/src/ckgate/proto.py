"""Framed wire protocol between the gateway and a sandboxed model app.

Frames are a 4-byte big-endian length followed by a UTF-8 JSON object of
exactly that many bytes, capped at 16 MiB. The body's "type" field names
one of the message variants below. Encoding is canonical (fixed field
order, compact separators, raw UTF-8) so independently written codecs
produce byte-identical frames.

Within a session the app drives: HELLO, then any number of QUERY frames
(ids strictly increasing, answered in order by ROWS or QUERY_ERROR),
SUBMIT_PREDICTIONS at most once per task, and WORKFLOW_DONE. The gateway
answers HELLO with HELLO_ACK or closes the session with FATAL.
"""

from __future__ import annotations

import json
import os
import selectors
import socket
import struct
import time
from dataclasses import dataclass
from typing import BinaryIO, Optional, Union

MAX_FRAME_BYTES = 16 * 1024 * 1024
PROTOCOL_VERSION = "1"

_HEADER = struct.Struct(">I")

# Error codes and whether they end the session or only the offending
# exchange. SESSION_LIMIT is the one survivable code: excess queries are
# answered with a QUERY_ERROR and the session continues.
ERROR_CLASSIFICATION = {
    "BAD_FRAME": "session-fatal",
    "BAD_VERSION": "session-fatal",
    "OUT_OF_ORDER": "session-fatal",
    "OVERSIZE": "session-fatal",
    "DUPLICATE_SUBMISSION": "session-fatal",
    "SESSION_LIMIT": "query-fatal",
}


class NeedMoreBytes(Exception):
    """The buffer does not yet hold a complete frame."""


class OversizeBody(Exception):
    def __init__(self, size: int):
        self.size = size
        super().__init__(f"encoded body is {size} bytes, limit is {MAX_FRAME_BYTES}")


class ProtocolError(Exception):
    def __init__(self, code: str, message: str):
        self.code = code
        self.message = message
        super().__init__(f"{code}: {message}")

    @property
    def session_fatal(self) -> bool:
        return ERROR_CLASSIFICATION.get(self.code, "session-fatal") == "session-fatal"


class ChannelClosed(Exception):
    pass


@dataclass(frozen=True)
class Hello:
    app_name: str
    protocol_version: str


@dataclass(frozen=True)
class HelloAck:
    session_id: str
    tasks: tuple
    limits: dict


@dataclass(frozen=True)
class Query:
    id: int
    text: str


@dataclass(frozen=True)
class Rows:
    id: int
    columns: tuple
    rows: tuple
    truncated: bool


@dataclass(frozen=True)
class QueryErrorMsg:
    id: int
    code: str
    message: str


@dataclass(frozen=True)
class SubmitPredictions:
    task: str
    csv: str


@dataclass(frozen=True)
class SubmitAck:
    task: str
    row_count: int


@dataclass(frozen=True)
class WorkflowDone:
    pass


@dataclass(frozen=True)
class Fatal:
    code: str
    message: str


Message = Union[
    Hello, HelloAck, Query, Rows, QueryErrorMsg, SubmitPredictions, SubmitAck, WorkflowDone, Fatal
]


def _bad(reason: str) -> ProtocolError:
    return ProtocolError("BAD_FRAME", reason)


def _need(payload: dict, key: str, types, what: str):
    value = payload.get(key)
    if isinstance(value, bool) or not isinstance(value, types):
        raise _bad(f"field {key!r} must be {what}")
    return value


def _payload(message: Message) -> dict:
    # Field order here is the canonical wire order.
    if isinstance(message, Hello):
        return {
            "type": "HELLO",
            "app_name": message.app_name,
            "protocol_version": message.protocol_version,
        }
    if isinstance(message, HelloAck):
        return {
            "type": "HELLO_ACK",
            "session_id": message.session_id,
            "tasks": list(message.tasks),
            "limits": message.limits,
        }
    if isinstance(message, Query):
        return {"type": "QUERY", "id": message.id, "text": message.text}
    if isinstance(message, Rows):
        return {
            "type": "ROWS",
            "id": message.id,
            "columns": list(message.columns),
            "rows": [list(row) for row in message.rows],
            "truncated": message.truncated,
        }
    if isinstance(message, QueryErrorMsg):
        return {
            "type": "QUERY_ERROR",
            "id": message.id,
            "code": message.code,
            "message": message.message,
        }
    if isinstance(message, SubmitPredictions):
        return {"type": "SUBMIT_PREDICTIONS", "task": message.task, "csv": message.csv}
    if isinstance(message, SubmitAck):
        return {"type": "SUBMIT_ACK", "task": message.task, "row_count": message.row_count}
    if isinstance(message, WorkflowDone):
        return {"type": "WORKFLOW_DONE"}
    if isinstance(message, Fatal):
        return {"type": "FATAL", "code": message.code, "message": message.message}
    raise TypeError(f"not a protocol message: {message!r}")


def _cell_ok(value) -> bool:
    if value is None or isinstance(value, (str, int, float)) and not isinstance(value, bool):
        return True
    if isinstance(value, list):
        return all(isinstance(entry, str) for entry in value)
    return False


def _from_payload(payload: dict) -> Message:
    kind = payload.get("type")
    if kind == "HELLO":
        return Hello(
            app_name=_need(payload, "app_name", str, "a string"),
            protocol_version=_need(payload, "protocol_version", str, "a string"),
        )
    if kind == "HELLO_ACK":
        tasks = _need(payload, "tasks", list, "a list")
        if not all(isinstance(t, str) for t in tasks):
            raise _bad("tasks must be strings")
        return HelloAck(
            session_id=_need(payload, "session_id", str, "a string"),
            tasks=tuple(tasks),
            limits=_need(payload, "limits", dict, "an object"),
        )
    if kind == "QUERY":
        return Query(
            id=_need(payload, "id", int, "an integer"),
            text=_need(payload, "text", str, "a string"),
        )
    if kind == "ROWS":
        columns = _need(payload, "columns", list, "a list")
        rows = _need(payload, "rows", list, "a list")
        if not all(isinstance(c, str) for c in columns):
            raise _bad("columns must be strings")
        clean = []
        for row in rows:
            if not isinstance(row, list) or len(row) != len(columns):
                raise _bad("each row must be a list matching columns")
            if not all(_cell_ok(cell) for cell in row):
                raise _bad("row values must be JSON scalars or string lists")
            clean.append(tuple(cell if not isinstance(cell, list) else list(cell) for cell in row))
        truncated = payload.get("truncated")
        if not isinstance(truncated, bool):
            raise _bad("field 'truncated' must be a boolean")
        return Rows(
            id=_need(payload, "id", int, "an integer"),
            columns=tuple(columns),
            rows=tuple(clean),
            truncated=truncated,
        )
    if kind == "QUERY_ERROR":
        return QueryErrorMsg(
            id=_need(payload, "id", int, "an integer"),
            code=_need(payload, "code", str, "a string"),
            message=_need(payload, "message", str, "a string"),
        )
    if kind == "SUBMIT_PREDICTIONS":
        task = _need(payload, "task", str, "a string")
        if task not in ("A", "B"):
            raise _bad(f"unknown task {task!r}")
        return SubmitPredictions(task=task, csv=_need(payload, "csv", str, "a string"))
    if kind == "SUBMIT_ACK":
        return SubmitAck(
            task=_need(payload, "task", str, "a string"),
            row_count=_need(payload, "row_count", int, "an integer"),
        )
    if kind == "WORKFLOW_DONE":
        return WorkflowDone()
    if kind == "FATAL":
        return Fatal(
            code=_need(payload, "code", str, "a string"),
            message=_need(payload, "message", str, "a string"),
        )
    raise _bad(f"unknown message type {kind!r}")


def encode(message: Message) -> bytes:
    """One canonical frame for a message; decode(encode(m)) == m."""
    body = json.dumps(_payload(message), ensure_ascii=False, separators=(",", ":")).encode("utf-8")
    if len(body) > MAX_FRAME_BYTES:
        raise OversizeBody(len(body))
    return _HEADER.pack(len(body)) + body


def decode(buffer: bytes) -> tuple[Message, bytes]:
    """Consume exactly one frame from the head of `buffer`.

    Raises NeedMoreBytes when the buffer holds only part of a frame;
    callers keep accumulating and retry.
    """
    if len(buffer) < _HEADER.size:
        raise NeedMoreBytes()
    (length,) = _HEADER.unpack_from(buffer)
    if length > MAX_FRAME_BYTES:
        raise _bad(f"declared frame length {length} exceeds the 16 MiB cap")
    end = _HEADER.size + length
    if len(buffer) < end:
        raise NeedMoreBytes()
    raw = bytes(buffer[_HEADER.size : end])
    try:
        payload = json.loads(raw.decode("utf-8"))
    except UnicodeDecodeError:
        raise _bad("frame body is not valid UTF-8") from None
    except json.JSONDecodeError as exc:
        raise _bad(f"frame body is not valid JSON ({exc.msg})") from None
    if not isinstance(payload, dict):
        raise _bad("frame body must be a JSON object")
    return _from_payload(payload), bytes(buffer[end:])


class Channel:
    """Buffered message channel over a byte stream.

    recv() returns None on a clean end-of-stream at a frame boundary and
    raises TimeoutError when a deadline passes first. Deadlines are
    absolute time.monotonic() values.
    """

    def __init__(self) -> None:
        self._buffer = bytearray()
        self._eof = False

    # transport hooks
    def _read(self, deadline: Optional[float]) -> bytes:
        raise NotImplementedError

    def _write(self, data: bytes) -> None:
        raise NotImplementedError

    def close(self) -> None:
        raise NotImplementedError

    def send(self, message: Message) -> None:
        self._write(encode(message))

    def recv(self, deadline: Optional[float] = None) -> Optional[Message]:
        while True:
            try:
                message, rest = decode(bytes(self._buffer))
            except NeedMoreBytes:
                pass
            else:
                self._buffer = bytearray(rest)
                return message
            if self._eof:
                if self._buffer:
                    raise _bad("stream ended inside a frame")
                return None
            chunk = self._read(deadline)
            if not chunk:
                self._eof = True
            else:
                self._buffer.extend(chunk)


class PipeChannel(Channel):
    """Channel over a read/write file pair (subprocess stdio)."""

    def __init__(self, reader: BinaryIO, writer: BinaryIO):
        super().__init__()
        self._reader = reader
        self._writer = writer

    def _read(self, deadline: Optional[float]) -> bytes:
        if deadline is not None:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise TimeoutError("channel read deadline passed")
            with selectors.DefaultSelector() as sel:
                sel.register(self._reader, selectors.EVENT_READ)
                if not sel.select(remaining):
                    raise TimeoutError("channel read deadline passed")
        return os.read(self._reader.fileno(), 65536)

    def _write(self, data: bytes) -> None:
        try:
            self._writer.write(data)
            self._writer.flush()
        except (BrokenPipeError, ValueError) as exc:
            raise ChannelClosed(str(exc)) from exc

    def close(self) -> None:
        for handle in (self._reader, self._writer):
            try:
                handle.close()
            except OSError:
                pass


class SocketChannel(Channel):
    """Channel over a connected stream socket."""

    def __init__(self, sock: socket.socket):
        super().__init__()
        self._sock = sock

    def _read(self, deadline: Optional[float]) -> bytes:
        if deadline is None:
            self._sock.settimeout(None)
        else:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise TimeoutError("channel read deadline passed")
            self._sock.settimeout(remaining)
        try:
            return self._sock.recv(65536)
        except socket.timeout:
            raise TimeoutError("channel read deadline passed") from None
        except OSError as exc:
            raise ChannelClosed(str(exc)) from exc

    def _write(self, data: bytes) -> None:
        try:
            self._sock.sendall(data)
        except OSError as exc:
            raise ChannelClosed(str(exc)) from exc

    def close(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


def handshake_app(channel: Channel, app_name: str, version: str = PROTOCOL_VERSION) -> HelloAck:
    """Client-side handshake; raises ProtocolError on FATAL or junk."""
    channel.send(Hello(app_name=app_name, protocol_version=version))
    answer = channel.recv()
    if answer is None:
        raise ChannelClosed("gateway closed the channel during handshake")
    if isinstance(answer, Fatal):
        raise ProtocolError(answer.code, answer.message)
    if not isinstance(answer, HelloAck):
        raise _bad(f"expected HELLO_ACK, got {type(answer).__name__}")
    return answer
