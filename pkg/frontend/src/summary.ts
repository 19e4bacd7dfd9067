import { column, readDiagnostics } from './csv';

const SCHEMES = /DisGradSub|DisGrad|AVF|HS/;

const HEADER = ['scheme', 'dt', 'max_gauss', 'max_energy_error'];
const WIDTHS = [14, 8, 12, 16];

function row(cells: string[]): string {
  return cells.map((c, i) => c.padEnd(WIDTHS[i])).join(' ').trimEnd();
}

function sci(v: number): string {
  const [mantissa, exponent] = v.toExponential(2).split('e');
  const sign = exponent[0] === '-' ? '-' : '+';
  return `${mantissa}E${sign}${exponent.replace(/^[+-]/, '').padStart(2, '0')}`;
}

/**
 * Conservation table over run CSVs: one row per file with the scheme (read
 * from the file name, falling back to the stem), the time step, and the
 * worst Gauss residual and energy error of the run.
 */
export function summarizeConservation(paths: string[]): string {
  const lines = [row(HEADER)];
  for (const path of paths) {
    const d = readDiagnostics(path);
    const step = column(d, 'step');
    const time = column(d, 'time');
    const gauss = column(d, 'gauss_residual');
    const energy = column(d, 'energy_error');
    const dt = time[0] / step[0];
    const maxGauss = gauss.reduce((a, b) => Math.max(a, b), -Infinity);
    const maxEnergy = energy.reduce((a, b) => Math.max(a, Math.abs(b)), -Infinity);
    const scheme = d.stem.match(SCHEMES)?.[0] ?? d.stem;
    lines.push(row([scheme, String(dt), sci(maxGauss), sci(maxEnergy)]));
  }
  return lines.join('\n') + '\n';
}
