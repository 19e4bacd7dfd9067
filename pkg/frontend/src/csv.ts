import { readFileSync } from 'fs';
import { basename } from 'path';
import { parse } from 'papaparse';

export interface Diagnostics {
  path: string;
  /** File name without directory or extension; used as the trace label. */
  stem: string;
  columns: string[];
  rows: Record<string, number>[];
}

export function readDiagnostics(path: string): Diagnostics {
  const text = readFileSync(path, 'utf8');
  const parsed = parse<Record<string, number>>(text, {
    header: true,
    dynamicTyping: true,
    skipEmptyLines: true,
  });
  const columns = parsed.meta.fields ?? [];
  if (columns.length === 0) {
    throw new Error(`${path}: no header row`);
  }
  return { path, stem: basename(path).replace(/\.[^.]*$/, ''), columns, rows: parsed.data };
}

export function column(d: Diagnostics, name: string): number[] {
  if (!d.columns.includes(name)) {
    throw new Error(`${d.path}: missing column '${name}'`);
  }
  if (d.rows.length === 0) {
    throw new Error(`${d.path}: no data rows`);
  }
  return d.rows.map((r) => r[name]);
}
