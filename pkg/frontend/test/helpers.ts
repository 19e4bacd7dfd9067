import { mkdtempSync, writeFileSync } from 'fs';
import { tmpdir } from 'os';
import { join } from 'path';

export const COLUMNS = [
  'step',
  'time',
  'kinetic_energy',
  'e1_energy',
  'e2_energy',
  'b3_energy',
  'total_energy',
  'energy_error',
  'gauss_residual',
  'picard_iters',
  'sub_iters_mean',
];

export function tempDir(): string {
  return mkdtempSync(join(tmpdir(), 'plots-'));
}

/** Write a diagnostics CSV with n rows at the given dt; overrides patch columns per row. */
export function writeDiagnostics(
  dir: string,
  name: string,
  n: number,
  dt: number,
  overrides: Partial<Record<string, (i: number) => number>> = {},
): string {
  const lines = [COLUMNS.join(',')];
  for (let i = 1; i <= n; i++) {
    const base: Record<string, number> = {
      step: i,
      time: i * dt,
      kinetic_energy: 6.25,
      e1_energy: 1e-4,
      e2_energy: 1e-6,
      b3_energy: 1e-8 * Math.exp(0.05 * i),
      total_energy: 6.2501,
      energy_error: 1e-14 * Math.sin(i),
      gauss_residual: 2e-15,
      picard_iters: 5,
      sub_iters_mean: 0,
    };
    for (const [key, fn] of Object.entries(overrides)) {
      base[key] = fn!(i);
    }
    lines.push(COLUMNS.map((c) => String(base[c])).join(','));
  }
  const path = join(dir, name);
  writeFileSync(path, lines.join('\n') + '\n');
  return path;
}
