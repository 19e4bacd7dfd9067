import { writeFileSync } from 'fs';
import { column, readDiagnostics } from './csv';
import { lineChart, Trace } from './svg';

/**
 * Render the named diagnostics columns of one or more run CSVs as an SVG
 * line chart.  Everything is validated before the image is written, so a
 * missing column or an empty CSV leaves no file behind.  On a log axis the
 * magnitude is drawn, since signed errors cross zero.
 */
export function renderEnergyTraces(
  paths: string[],
  columns: string[],
  logScale: boolean,
  outPath: string,
): void {
  if (paths.length === 0) {
    throw new Error('no input CSVs');
  }
  if (columns.length === 0) {
    throw new Error('no columns requested');
  }
  const traces: Trace[] = [];
  for (const path of paths) {
    const d = readDiagnostics(path);
    const time = column(d, 'time');
    for (const name of columns) {
      const values = column(d, name);
      traces.push({
        label: columns.length > 1 ? `${d.stem}:${name}` : d.stem,
        x: time,
        y: logScale ? values.map(Math.abs) : values,
      });
    }
  }
  const svg = lineChart(traces, {
    logScale,
    xLabel: 'time',
    yLabel: columns.length === 1 ? columns[0] : 'value',
  });
  writeFileSync(outPath, svg);
}
