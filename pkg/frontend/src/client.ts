/**
 * Blocking request-response client for a gateway session over TCP.
 *
 * The session mirrors the protocol invariants: query ids strictly
 * increase, one submission per task, and query errors come back as
 * typed exceptions while the session stays usable. Labels are validated
 * client-side before anything is sent; the gateway re-validates.
 */

import net from "node:net";

import { decode, encode, PROTOCOL_VERSION } from "./codec.js";
import { CellValue, HelloAck, Message, Rows } from "./messages.js";

export class GatewayFatalError extends Error {
  constructor(public code: string, detail: string) {
    super(`${code}: ${detail}`);
    this.name = "GatewayFatalError";
  }
}

export class VersionMismatchError extends GatewayFatalError {
  constructor(detail: string) {
    super("BAD_VERSION", detail);
    this.name = "VersionMismatchError";
  }
}

export class QueryFailure extends Error {
  constructor(public code: string, detail: string) {
    super(`${code}: ${detail}`);
    this.name = "QueryFailure";
  }
}

export class QueryTimeoutError extends QueryFailure {
  constructor(detail: string) {
    super("TIMEOUT", detail);
    this.name = "QueryTimeoutError";
  }
}

export class QueryParseError extends QueryFailure {
  constructor(detail: string) {
    super("PARSE", detail);
    this.name = "QueryParseError";
  }
}

export class SessionLimitError extends QueryFailure {
  constructor(detail: string) {
    super("SESSION_LIMIT", detail);
    this.name = "SessionLimitError";
  }
}

export class QueryTypeError extends QueryFailure {
  constructor(detail: string) {
    super("TYPE", detail);
    this.name = "QueryTypeError";
  }
}

export class DuplicateSubmissionError extends Error {
  constructor(task: string) {
    super(`task ${task} already submitted in this session`);
    this.name = "DuplicateSubmissionError";
  }
}

export class ValidationError extends Error {
  constructor(detail: string) {
    super(detail);
    this.name = "ValidationError";
  }
}

export interface ResultTable {
  columns: string[];
  rows: CellValue[][];
  truncated: boolean;
}

function queryFailure(code: string, detail: string): QueryFailure {
  switch (code) {
    case "TIMEOUT":
      return new QueryTimeoutError(detail);
    case "PARSE":
      return new QueryParseError(detail);
    case "SESSION_LIMIT":
      return new SessionLimitError(detail);
    case "TYPE":
      return new QueryTypeError(detail);
    default:
      return new QueryFailure(code, detail);
  }
}

function csvField(value: string): string {
  if (/[",\n\r]/.test(value)) {
    return `"${value.replace(/"/g, '""')}"`;
  }
  return value;
}

/** Serialize prediction rows to the exact CSV contract the gateway scores. */
export function predictionsCsv(rows: Array<[string, string]>): string {
  const lines = ["subject_id,prediction"];
  for (const [subject, prediction] of rows) {
    lines.push(`${csvField(subject)},${csvField(prediction)}`);
  }
  return lines.join("\n") + "\n";
}

export function validatePredictionRows(task: string, rows: Array<[string, string]>): Array<[string, string]> {
  const seen = new Set<string>();
  const clean: Array<[string, string]> = [];
  for (const [subject, prediction] of rows) {
    if (!subject) {
      throw new ValidationError("empty subject_id");
    }
    if (seen.has(subject)) {
      throw new ValidationError(`duplicate subject ${subject}`);
    }
    seen.add(subject);
    if (task === "A") {
      if (prediction !== "0" && prediction !== "1") {
        throw new ValidationError(`task A prediction must be 0 or 1, found ${JSON.stringify(prediction)}`);
      }
      clean.push([subject, prediction]);
    } else if (task === "B") {
      const upper = prediction.toUpperCase();
      if (!/^[A-Z]$/.test(upper)) {
        throw new ValidationError(`task B prediction must be a single letter, found ${JSON.stringify(prediction)}`);
      }
      clean.push([subject, upper]);
    } else {
      throw new ValidationError(`unknown task ${JSON.stringify(task)}`);
    }
  }
  return clean;
}

/** Buffered frame reader over a socket with promise-based delivery. */
class MessageStream {
  private buffer: Buffer = Buffer.alloc(0);
  private queue: Message[] = [];
  private waiters: Array<{
    resolve: (message: Message | null) => void;
    reject: (error: Error) => void;
  }> = [];
  private ended = false;
  private failure: Error | null = null;

  constructor(private socket: net.Socket) {
    socket.on("data", (chunk) => this.onData(chunk));
    socket.on("end", () => this.finish(null));
    socket.on("close", () => this.finish(null));
    socket.on("error", (err) => this.finish(err));
  }

  private onData(chunk: Buffer): void {
    this.buffer = Buffer.concat([this.buffer, chunk]);
    try {
      for (;;) {
        const result = decode(this.buffer);
        if (result === null) break;
        this.buffer = Buffer.from(result.rest);
        this.deliver(result.message);
      }
    } catch (err) {
      this.finish(err as Error);
    }
  }

  private deliver(message: Message): void {
    const waiter = this.waiters.shift();
    if (waiter) {
      waiter.resolve(message);
    } else {
      this.queue.push(message);
    }
  }

  private finish(error: Error | null): void {
    if (this.ended) return;
    this.ended = true;
    this.failure = error;
    for (const waiter of this.waiters.splice(0)) {
      if (error) waiter.reject(error);
      else waiter.resolve(null);
    }
  }

  /** Next message, or null on a clean end of stream. */
  next(): Promise<Message | null> {
    const queued = this.queue.shift();
    if (queued !== undefined) {
      return Promise.resolve(queued);
    }
    if (this.ended) {
      return this.failure ? Promise.reject(this.failure) : Promise.resolve(null);
    }
    return new Promise((resolve, reject) => this.waiters.push({ resolve, reject }));
  }
}

export interface ConnectOptions {
  appName?: string;
  protocolVersion?: string;
  connectTimeoutMs?: number;
}

export class ClientSession {
  readonly sessionId: string;
  readonly tasks: string[];
  readonly limits: Record<string, unknown>;
  private nextQueryId = 1;
  private submitted = new Set<string>();

  private constructor(
    private socket: net.Socket,
    private stream: MessageStream,
    ack: HelloAck
  ) {
    this.sessionId = ack.session_id;
    this.tasks = ack.tasks;
    this.limits = ack.limits;
  }

  /** Connect to "host:port" and complete the handshake. */
  static async connect(endpoint: string, options: ConnectOptions = {}): Promise<ClientSession> {
    const split = endpoint.lastIndexOf(":");
    if (split < 0) {
      throw new ValidationError(`endpoint must be host:port, got ${JSON.stringify(endpoint)}`);
    }
    const host = endpoint.slice(0, split);
    const port = Number(endpoint.slice(split + 1));
    const socket = await new Promise<net.Socket>((resolve, reject) => {
      const sock = net.createConnection({ host, port });
      const timer = setTimeout(
        () => sock.destroy(new Error("connect timeout")),
        options.connectTimeoutMs ?? 10_000
      );
      sock.once("connect", () => {
        clearTimeout(timer);
        resolve(sock);
      });
      sock.once("error", (err) => {
        clearTimeout(timer);
        reject(err);
      });
    });
    const stream = new MessageStream(socket);
    socket.write(
      encode({
        type: "HELLO",
        app_name: options.appName ?? "ts-client",
        protocol_version: options.protocolVersion ?? PROTOCOL_VERSION,
      })
    );
    const answer = await stream.next();
    if (answer === null) {
      throw new GatewayFatalError("CLOSED", "gateway closed the channel during handshake");
    }
    if (answer.type === "FATAL") {
      socket.destroy();
      if (answer.code === "BAD_VERSION") {
        throw new VersionMismatchError(answer.message);
      }
      throw new GatewayFatalError(answer.code, answer.message);
    }
    if (answer.type !== "HELLO_ACK") {
      socket.destroy();
      throw new GatewayFatalError("BAD_FRAME", `expected HELLO_ACK, got ${answer.type}`);
    }
    return new ClientSession(socket, stream, answer);
  }

  private async exchange(message: Message): Promise<Message> {
    this.socket.write(encode(message));
    const answer = await this.stream.next();
    if (answer === null) {
      throw new GatewayFatalError("CLOSED", "gateway closed the channel");
    }
    if (answer.type === "FATAL") {
      throw new GatewayFatalError(answer.code, answer.message);
    }
    return answer;
  }

  /** Run one query; query errors raise but leave the session usable. */
  async query(text: string): Promise<ResultTable> {
    const id = this.nextQueryId++;
    const answer = await this.exchange({ type: "QUERY", id, text });
    if (answer.type === "QUERY_ERROR") {
      throw queryFailure(answer.code, answer.message);
    }
    if (answer.type !== "ROWS" || answer.id !== id) {
      throw new GatewayFatalError("BAD_FRAME", `unexpected ${answer.type} answer`);
    }
    const rows = answer as Rows;
    return { columns: rows.columns, rows: rows.rows, truncated: rows.truncated };
  }

  /** Submit prediction rows for a task; returns the acknowledged count. */
  async submit(task: string, rows: Array<[string, string]>): Promise<number> {
    if (this.submitted.has(task)) {
      throw new DuplicateSubmissionError(task);
    }
    const clean = validatePredictionRows(task, rows);
    const answer = await this.exchange({
      type: "SUBMIT_PREDICTIONS",
      task,
      csv: predictionsCsv(clean),
    });
    if (answer.type !== "SUBMIT_ACK" || answer.task !== task) {
      throw new GatewayFatalError("BAD_FRAME", `unexpected ${answer.type} answer`);
    }
    this.submitted.add(task);
    return answer.row_count;
  }

  /** Signal a clean finish; the gateway evaluates what was submitted. */
  done(): void {
    this.socket.write(encode({ type: "WORKFLOW_DONE" }));
  }

  close(): void {
    this.socket.end();
    this.socket.destroy();
  }
}
