/**
 * Frame codec: 4-byte big-endian length prefix, then a UTF-8 JSON body
 * of exactly that many bytes, capped at 16 MiB. Encoding is canonical
 * (fixed field order, no whitespace, raw UTF-8) so frames produced here
 * are byte-identical to the gateway's own encoder.
 */

import { CellValue, Message, MESSAGE_TYPES, canonicalPayload } from "./messages.js";

export const MAX_FRAME_BYTES = 16 * 1024 * 1024;
export const PROTOCOL_VERSION = "1";

export class CodecError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "CodecError";
  }
}

export class OversizeBodyError extends CodecError {
  constructor(size: number) {
    super(`encoded body is ${size} bytes, limit is ${MAX_FRAME_BYTES}`);
    this.name = "OversizeBodyError";
  }
}

export function encode(message: Message): Buffer {
  const body = Buffer.from(JSON.stringify(canonicalPayload(message)), "utf-8");
  if (body.length > MAX_FRAME_BYTES) {
    throw new OversizeBodyError(body.length);
  }
  const frame = Buffer.allocUnsafe(4 + body.length);
  frame.writeUInt32BE(body.length, 0);
  body.copy(frame, 4);
  return frame;
}

export interface DecodeResult {
  message: Message;
  rest: Buffer;
}

/**
 * Consume one frame from the head of the buffer. Returns null when the
 * buffer holds only part of a frame (read more and retry).
 */
export function decode(buffer: Buffer): DecodeResult | null {
  if (buffer.length < 4) {
    return null;
  }
  const length = buffer.readUInt32BE(0);
  if (length > MAX_FRAME_BYTES) {
    throw new CodecError(`declared frame length ${length} exceeds the 16 MiB cap`);
  }
  if (buffer.length < 4 + length) {
    return null;
  }
  const raw = buffer.subarray(4, 4 + length).toString("utf-8");
  let payload: unknown;
  try {
    payload = JSON.parse(raw);
  } catch (err) {
    throw new CodecError(`frame body is not valid JSON: ${(err as Error).message}`);
  }
  return { message: validate(payload), rest: buffer.subarray(4 + length) };
}

function validate(payload: unknown): Message {
  if (typeof payload !== "object" || payload === null || Array.isArray(payload)) {
    throw new CodecError("frame body must be a JSON object");
  }
  const record = payload as Record<string, unknown>;
  const type = record.type;
  if (typeof type !== "string" || !(MESSAGE_TYPES as readonly string[]).includes(type)) {
    throw new CodecError(`unknown message type ${JSON.stringify(type)}`);
  }
  const str = (key: string): string => {
    const value = record[key];
    if (typeof value !== "string") throw new CodecError(`field '${key}' must be a string`);
    return value;
  };
  const int = (key: string): number => {
    const value = record[key];
    if (typeof value !== "number" || !Number.isInteger(value)) {
      throw new CodecError(`field '${key}' must be an integer`);
    }
    return value;
  };
  switch (type) {
    case "HELLO":
      return { type, app_name: str("app_name"), protocol_version: str("protocol_version") };
    case "HELLO_ACK": {
      const tasks = record.tasks;
      if (!Array.isArray(tasks) || !tasks.every((t) => typeof t === "string")) {
        throw new CodecError("field 'tasks' must be a string list");
      }
      const limits = record.limits;
      if (typeof limits !== "object" || limits === null || Array.isArray(limits)) {
        throw new CodecError("field 'limits' must be an object");
      }
      return {
        type,
        session_id: str("session_id"),
        tasks: tasks as string[],
        limits: limits as Record<string, unknown>,
      };
    }
    case "QUERY":
      return { type, id: int("id"), text: str("text") };
    case "ROWS": {
      const columns = record.columns;
      const rows = record.rows;
      if (!Array.isArray(columns) || !columns.every((c) => typeof c === "string")) {
        throw new CodecError("field 'columns' must be a string list");
      }
      const cellOk = (cell: unknown): boolean =>
        cell === null ||
        typeof cell === "number" ||
        typeof cell === "string" ||
        (Array.isArray(cell) && cell.every((entry) => typeof entry === "string"));
      if (
        !Array.isArray(rows) ||
        !rows.every(
          (row) => Array.isArray(row) && row.length === columns.length && row.every(cellOk)
        )
      ) {
        throw new CodecError("each row must be a list of scalars matching columns");
      }
      if (typeof record.truncated !== "boolean") {
        throw new CodecError("field 'truncated' must be a boolean");
      }
      return {
        type,
        id: int("id"),
        columns: columns as string[],
        rows: rows as CellValue[][],
        truncated: record.truncated,
      };
    }
    case "QUERY_ERROR":
      return { type, id: int("id"), code: str("code"), message: str("message") };
    case "SUBMIT_PREDICTIONS":
      return { type, task: str("task"), csv: str("csv") };
    case "SUBMIT_ACK":
      return { type, task: str("task"), row_count: int("row_count") };
    case "WORKFLOW_DONE":
      return { type };
    case "FATAL":
      return { type, code: str("code"), message: str("message") };
    default:
      throw new CodecError(`unknown message type ${type}`);
  }
}
