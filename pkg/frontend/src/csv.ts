/**
 * Reader for the documented vortlab CSV kinds.
 *
 * Files start with an optional metadata comment
 *   # kind=<kind> seed=<n> config_hash=<hex>
 * followed by a header row and data rows. Inputs are never modified; any
 * missing column fails fast with the column name in the error.
 */

import { readFileSync } from "node:fs";

export class MissingColumnError extends Error {
  readonly column: string;
  constructor(column: string, available: string[]) {
    super(`missing column '${column}' (available: ${available.join(", ")})`);
    this.column = column;
  }
}

export interface Table {
  kind: string | null;
  meta: Record<string, string>;
  columns: string[];
  rows: string[][];
}

export function parseCsv(text: string): Table {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  const meta: Record<string, string> = {};
  let kind: string | null = null;
  let start = 0;
  while (start < lines.length && lines[start].startsWith("#")) {
    for (const tok of lines[start].slice(1).trim().split(/\s+/)) {
      const eq = tok.indexOf("=");
      if (eq > 0) meta[tok.slice(0, eq)] = tok.slice(eq + 1);
    }
    start += 1;
  }
  if (meta.kind) kind = meta.kind;
  if (start >= lines.length) {
    throw new Error("empty CSV: no header row");
  }
  const columns = lines[start].split(",").map((c) => c.trim());
  const rows = lines.slice(start + 1).map((l) => l.split(","));
  if (rows.length === 0) {
    throw new Error("empty CSV: header but no data rows");
  }
  return { kind, meta, columns, rows };
}

export function readTable(path: string): Table {
  return parseCsv(readFileSync(path, "utf-8"));
}

export function requireColumns(table: Table, needed: string[]): void {
  for (const col of needed) {
    if (!table.columns.includes(col)) {
      throw new MissingColumnError(col, table.columns);
    }
  }
}

export function column(table: Table, name: string): string[] {
  const idx = table.columns.indexOf(name);
  if (idx < 0) throw new MissingColumnError(name, table.columns);
  return table.rows.map((r) => (r[idx] ?? "").trim());
}

export function numbers(table: Table, name: string): number[] {
  return column(table, name).map((v) => (v === "" ? NaN : Number(v)));
}

/** Columns whose names match a prefix, e.g. the per-radius osc_<r> family. */
export function prefixedColumns(
  table: Table,
  prefix: string
): { name: string; value: number }[] {
  const out: { name: string; value: number }[] = [];
  for (const name of table.columns) {
    if (name.startsWith(prefix)) {
      out.push({ name, value: Number(name.slice(prefix.length)) });
    }
  }
  return out;
}
