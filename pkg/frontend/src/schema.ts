/** Schema browser view-model: expandable tables, constraint summaries, and
 * navigable foreign-key links. */

import type { SchemaConstraint, SessionSchema, TableSchemaInfo } from "./types.js";

export const EMPTY_SCHEMA_MESSAGE =
  "This database has no tables yet. Create one to get started.";

export interface FkLink {
  fromColumns: string[];
  toTable: string;
  toColumns: string[];
  navigable: boolean;
}

export class SchemaBrowserModel {
  private readonly expanded = new Set<string>();
  private focusedTable: string | null = null;

  constructor(readonly schema: SessionSchema) {}

  get isEmpty(): boolean {
    return this.schema.tables.length === 0;
  }

  emptyMessage(): string | null {
    return this.isEmpty ? EMPTY_SCHEMA_MESSAGE : null;
  }

  tableNames(): string[] {
    return this.schema.tables.map((t) => t.name);
  }

  table(name: string): TableSchemaInfo | null {
    return (
      this.schema.tables.find(
        (t) => t.name.toLowerCase() === name.toLowerCase(),
      ) ?? null
    );
  }

  isExpanded(name: string): boolean {
    return this.expanded.has(name);
  }

  toggle(name: string): void {
    if (this.expanded.has(name)) this.expanded.delete(name);
    else if (this.table(name)) this.expanded.add(name);
  }

  get focused(): string | null {
    return this.focusedTable;
  }

  /** Follow a foreign-key link: focuses and expands the target when it
   * exists. Returns whether navigation happened. */
  navigateTo(name: string): boolean {
    const target = this.table(name);
    if (!target) return false;
    this.focusedTable = target.name;
    this.expanded.add(target.name);
    return true;
  }

  fkLinks(name: string): FkLink[] {
    const table = this.table(name);
    if (!table) return [];
    return table.constraints
      .filter((c) => c.kind === "foreign_key" && c.referenced_table)
      .map((c) => ({
        fromColumns: c.columns,
        toTable: c.referenced_table as string,
        toColumns: c.referenced_columns ?? [],
        navigable: this.table(c.referenced_table as string) !== null,
      }));
  }

  /** One human-readable line per constraint, matching the prompt renderer's
   * vocabulary (e.g. "FOREIGN KEY (user_id) REFERENCES users(id)"). */
  constraintLines(name: string): string[] {
    const table = this.table(name);
    if (!table) return [];
    return table.constraints.map((c) => describeConstraint(c));
  }
}

export function describeConstraint(constraint: SchemaConstraint): string {
  const cols = constraint.columns.join(", ");
  if (constraint.kind === "primary_key") return `PRIMARY KEY (${cols})`;
  if (constraint.kind === "unique") return `UNIQUE (${cols})`;
  const refCols = (constraint.referenced_columns ?? []).join(", ");
  const target = refCols
    ? `${constraint.referenced_table}(${refCols})`
    : String(constraint.referenced_table);
  return `FOREIGN KEY (${cols}) REFERENCES ${target}`;
}
