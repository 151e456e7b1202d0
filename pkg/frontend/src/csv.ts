/** Minimal CSV reading for the numeric tables ckequant emits. */

import { readFileSync } from "fs";

export interface Table {
  header: string[];
  rows: number[][];
  path: string;
}

export class SchemaError extends Error {}

export function readTable(path: string): Table {
  const text = readFileSync(path, "utf8").trim();
  const lines = text.split(/\r?\n/);
  if (lines.length < 2) {
    throw new SchemaError(`${path}: no data rows`);
  }
  const header = lines[0].split(",").map((s) => s.trim());
  const rows: number[][] = [];
  for (const line of lines.slice(1)) {
    const cells = line.split(",").map(Number);
    if (cells.length !== header.length || cells.some((x) => Number.isNaN(x))) {
      throw new SchemaError(`${path}: malformed row '${line}'`);
    }
    rows.push(cells);
  }
  return { header, rows, path };
}

/** Assert the table carries the declared columns (prefix wildcards with *). */
export function checkSchema(table: Table, expected: string[]): void {
  for (const col of expected) {
    if (col.endsWith("*")) {
      const stem = col.slice(0, -1);
      if (!table.header.some((h) => h.startsWith(stem))) {
        throw new SchemaError(
          `${table.path}: missing columns '${stem}...' (have ${table.header})`,
        );
      }
    } else if (!table.header.includes(col)) {
      throw new SchemaError(
        `${table.path}: missing column '${col}' (have ${table.header})`,
      );
    }
  }
}

export function column(table: Table, name: string): number[] {
  const idx = table.header.indexOf(name);
  if (idx < 0) throw new SchemaError(`${table.path}: no column '${name}'`);
  return table.rows.map((r) => r[idx]);
}

export function columnsMatching(table: Table, stem: string): number[][] {
  const idxs = table.header
    .map((h, i) => [h, i] as const)
    .filter(([h]) => h.startsWith(stem))
    .map(([, i]) => i);
  return idxs.map((i) => table.rows.map((r) => r[i]));
}
