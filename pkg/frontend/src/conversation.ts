/** Conversation view-model: folds the event stream into render items.
 *
 * Events are appended strictly in arrival order and deduplicated by seq;
 * rendering never reorders them, and every item carries its seq so the
 * trajectory stays auditable. Reasoning is hidden behind a global toggle
 * (collapsed by default when shown); large result tables paginate through a
 * cursor instead of rendering every row.
 */

import type { AgentEvent, PlanStepPayload, RowSetPayload } from "./types.js";
import { isRowSet } from "./types.js";

export const DEFAULT_PAGE_SIZE = 10;

export interface TableView {
  columns: string[];
  rows: unknown[][];
  truncated: boolean;
  cursor: number; // first row of the visible page
  pageSize: number;
}

export interface ConversationItem {
  seq: number;
  type: AgentEvent["type"];
  kind: string;
  actor: string;
  text: string;
  collapsed: boolean; // meaningful for reasoning items
  isError: boolean;
  table: TableView | null;
  plan: {
    planId: string;
    steps: PlanStepPayload[];
    warnings: string[];
    confirmationsRequired: number;
  } | null;
  raw: AgentEvent;
}

function tableFrom(payload: RowSetPayload, pageSize: number): TableView {
  return {
    columns: payload.column_names,
    rows: payload.rows,
    truncated: payload.truncated,
    cursor: 0,
    pageSize,
  };
}

export class ConversationModel {
  readonly items: ConversationItem[] = [];
  showReasoning = false;
  private readonly seen = new Set<number>();

  constructor(private readonly pageSize: number = DEFAULT_PAGE_SIZE) {}

  ingest(event: AgentEvent): ConversationItem | null {
    if (this.seen.has(event.seq)) return null;
    this.seen.add(event.seq);
    const item = this.toItem(event);
    this.items.push(item);
    return item;
  }

  ingestAll(events: Iterable<AgentEvent>): void {
    for (const event of events) this.ingest(event);
  }

  private toItem(event: AgentEvent): ConversationItem {
    const body = event.body;
    let text = typeof body.text === "string" ? body.text : "";
    let table: TableView | null = null;
    let isError = event.type === "error";
    let plan: ConversationItem["plan"] = null;

    if (event.type === "tool_call") {
      const args = (body.arguments ?? {}) as Record<string, unknown>;
      const detail = args.sql ?? args.query ?? JSON.stringify(args);
      text = `${String(body.tool)}: ${String(detail)}`;
    } else if (event.type === "tool_result") {
      const observation = (body.observation ?? {}) as Record<string, unknown>;
      const content = observation.content;
      if (observation.source === "db_error") {
        isError = true;
        text = String(content);
      } else if (isRowSet(content)) {
        table = tableFrom(content, this.pageSize);
        text = "";
      } else {
        text = JSON.stringify(content);
      }
    } else if (event.type === "answer") {
      if (isRowSet(body.result)) table = tableFrom(body.result, this.pageSize);
    } else if (event.type === "plan_proposal") {
      plan = {
        planId: String(body.plan_id ?? ""),
        steps: (body.steps ?? []) as PlanStepPayload[],
        warnings: (body.warnings ?? []) as string[],
        confirmationsRequired: Number(body.confirmations_required ?? 1),
      };
    }

    return {
      seq: event.seq,
      type: event.type,
      kind: String(body.kind ?? event.type),
      actor: String(body.actor ?? ""),
      text,
      collapsed: event.type === "reasoning",
      isError,
      table,
      plan,
      raw: event,
    };
  }

  toggleReasoning(seq: number): void {
    const item = this.items.find((i) => i.seq === seq);
    if (item && item.type === "reasoning") item.collapsed = !item.collapsed;
  }

  /** Items to render, respecting the global reasoning toggle. Order is
   * always ascending arrival order. */
  visibleItems(): ConversationItem[] {
    return this.items.filter(
      (item) => item.type !== "reasoning" || this.showReasoning,
    );
  }

  pageOf(item: ConversationItem): unknown[][] {
    if (!item.table) return [];
    const { rows, cursor, pageSize } = item.table;
    return rows.slice(cursor, cursor + pageSize);
  }

  pageForward(seq: number): void {
    const table = this.items.find((i) => i.seq === seq)?.table;
    if (table && table.cursor + table.pageSize < table.rows.length) {
      table.cursor += table.pageSize;
    }
  }

  pageBack(seq: number): void {
    const table = this.items.find((i) => i.seq === seq)?.table;
    if (table) table.cursor = Math.max(0, table.cursor - table.pageSize);
  }

  /** Stable serializable form of the rendered view; two models that saw the
   * same events produce identical snapshots. */
  snapshot(): Array<Record<string, unknown>> {
    return this.items.map((item) => ({
      seq: item.seq,
      type: item.type,
      kind: item.kind,
      text: item.text,
      isError: item.isError,
      tableRows: item.table ? item.table.rows : null,
      plan: item.plan,
    }));
  }
}
