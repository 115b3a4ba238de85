/**
 * Protocol message types and their canonical JSON payload shapes.
 *
 * Field order inside each payload is part of the wire contract: the
 * gateway and every SDK must serialize the same message to the same
 * bytes. Keep the literal orders below in sync with the gateway codec.
 */

export type CellValue = null | number | string | string[];

export interface Hello {
  type: "HELLO";
  app_name: string;
  protocol_version: string;
}

export interface QueryBudgetLimits {
  max_steps: number;
  max_rows: number;
  wall_clock_ms: number;
}

export interface SessionLimits {
  max_queries: number;
  session_wall_clock_ms: number;
  query_budget: QueryBudgetLimits;
}

export interface HelloAck {
  type: "HELLO_ACK";
  session_id: string;
  tasks: string[];
  limits: Record<string, unknown>;
}

export interface Query {
  type: "QUERY";
  id: number;
  text: string;
}

export interface Rows {
  type: "ROWS";
  id: number;
  columns: string[];
  rows: CellValue[][];
  truncated: boolean;
}

export interface QueryError {
  type: "QUERY_ERROR";
  id: number;
  code: string;
  message: string;
}

export interface SubmitPredictions {
  type: "SUBMIT_PREDICTIONS";
  task: string;
  csv: string;
}

export interface SubmitAck {
  type: "SUBMIT_ACK";
  task: string;
  row_count: number;
}

export interface WorkflowDone {
  type: "WORKFLOW_DONE";
}

export interface Fatal {
  type: "FATAL";
  code: string;
  message: string;
}

export type Message =
  | Hello
  | HelloAck
  | Query
  | Rows
  | QueryError
  | SubmitPredictions
  | SubmitAck
  | WorkflowDone
  | Fatal;

export const MESSAGE_TYPES = [
  "HELLO",
  "HELLO_ACK",
  "QUERY",
  "ROWS",
  "QUERY_ERROR",
  "SUBMIT_PREDICTIONS",
  "SUBMIT_ACK",
  "WORKFLOW_DONE",
  "FATAL",
] as const;

/** Rebuild a message in canonical field order for serialization. */
export function canonicalPayload(message: Message): Record<string, unknown> {
  switch (message.type) {
    case "HELLO":
      return {
        type: "HELLO",
        app_name: message.app_name,
        protocol_version: message.protocol_version,
      };
    case "HELLO_ACK":
      return {
        type: "HELLO_ACK",
        session_id: message.session_id,
        tasks: message.tasks,
        limits: message.limits,
      };
    case "QUERY":
      return { type: "QUERY", id: message.id, text: message.text };
    case "ROWS":
      return {
        type: "ROWS",
        id: message.id,
        columns: message.columns,
        rows: message.rows,
        truncated: message.truncated,
      };
    case "QUERY_ERROR":
      return {
        type: "QUERY_ERROR",
        id: message.id,
        code: message.code,
        message: message.message,
      };
    case "SUBMIT_PREDICTIONS":
      return { type: "SUBMIT_PREDICTIONS", task: message.task, csv: message.csv };
    case "SUBMIT_ACK":
      return { type: "SUBMIT_ACK", task: message.task, row_count: message.row_count };
    case "WORKFLOW_DONE":
      return { type: "WORKFLOW_DONE" };
    case "FATAL":
      return { type: "FATAL", code: message.code, message: message.message };
  }
}
