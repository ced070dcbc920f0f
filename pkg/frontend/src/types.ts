/** Wire types mirroring the service's JSON bodies. */

export type EventType =
  | "status"
  | "reasoning"
  | "tool_call"
  | "tool_result"
  | "plan_proposal"
  | "confirmation_request"
  | "answer"
  | "error";

export interface AgentEvent {
  session_id: string;
  seq: number;
  type: EventType;
  body: Record<string, unknown>;
}

export interface SessionDescriptor {
  session_id: string;
  db_ref: string;
  status: string;
  turn_count: number;
  tables: string[];
}

export interface DatabaseInfo {
  name: string;
  tables: string[];
}

export interface RowSetPayload {
  column_names: string[];
  rows: unknown[][];
  truncated: boolean;
}

export interface PlanStepPayload {
  description: string;
  statement: string | null;
}

export interface SchemaColumn {
  name: string;
  declared_type: string;
  nullable: boolean;
  is_primary_key: boolean;
}

export interface SchemaConstraint {
  kind: "primary_key" | "foreign_key" | "unique";
  columns: string[];
  referenced_table: string | null;
  referenced_columns: string[] | null;
}

export interface TableSchemaInfo {
  name: string;
  columns: SchemaColumn[];
  constraints: SchemaConstraint[];
}

export interface SessionSchema {
  session_id: string;
  db_ref: string;
  tables: TableSchemaInfo[];
}

export function isRowSet(value: unknown): value is RowSetPayload {
  return (
    typeof value === "object" &&
    value !== null &&
    Array.isArray((value as RowSetPayload).column_names) &&
    Array.isArray((value as RowSetPayload).rows)
  );
}
