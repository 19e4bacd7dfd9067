export interface Trace {
  label: string;
  x: number[];
  y: number[];
}

export interface ChartOptions {
  logScale: boolean;
  xLabel: string;
  yLabel: string;
  width?: number;
  height?: number;
}

const PALETTE = ['#1f77b4', '#d62728', '#2ca02c', '#9467bd', '#ff7f0e', '#8c564b', '#17becf'];

interface Clean {
  label: string;
  x: number[];
  y: number[];
}

/** Drop pairs a scale cannot place: non-finite always, y <= 0 on log axes. */
function cleanTrace(t: Trace, logScale: boolean): Clean {
  const x: number[] = [];
  const y: number[] = [];
  for (let i = 0; i < t.y.length; i++) {
    const xi = t.x[i];
    const yi = t.y[i];
    if (!Number.isFinite(xi) || !Number.isFinite(yi)) continue;
    if (logScale && yi <= 0) continue;
    x.push(xi);
    y.push(yi);
  }
  return { label: t.label, x, y };
}

function niceStep(span: number, target: number): number {
  const raw = span / target;
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  for (const m of [1, 2, 5, 10]) {
    if (mag * m >= raw) return mag * m;
  }
  return mag * 10;
}

function linearTicks(lo: number, hi: number): number[] {
  const step = niceStep(hi - lo, 5);
  const first = Math.ceil(lo / step) * step;
  const out: number[] = [];
  for (let v = first; v <= hi + step * 1e-9; v += step) out.push(v);
  return out;
}

function decadeTicks(lo: number, hi: number): number[] {
  const eLo = Math.ceil(lo);
  const eHi = Math.floor(hi);
  const stride = Math.max(1, Math.ceil((eHi - eLo) / 8));
  const out: number[] = [];
  for (let e = eLo; e <= eHi; e += stride) out.push(e);
  return out;
}

function fmt(v: number): string {
  if (v === 0) return '0';
  if (Math.abs(v) >= 1e4 || Math.abs(v) < 1e-3) return v.toExponential(1);
  return String(parseFloat(v.toPrecision(4)));
}

export function lineChart(traces: Trace[], opts: ChartOptions): string {
  const width = opts.width ?? 800;
  const height = opts.height ?? 500;
  const m = { left: 70, right: 20, top: 20, bottom: 50 };

  const clean = traces.map((t) => cleanTrace(t, opts.logScale));
  if (clean.every((t) => t.x.length === 0)) {
    throw new Error('nothing to draw: no finite' + (opts.logScale ? ' positive' : '') + ' values');
  }
  const ys = clean.flatMap((t) => (opts.logScale ? t.y.map(Math.log10) : t.y));
  const xs = clean.flatMap((t) => t.x);
  let x0 = Math.min(...xs);
  let x1 = Math.max(...xs);
  let y0 = Math.min(...ys);
  let y1 = Math.max(...ys);
  if (x0 === x1) {
    x0 -= 1;
    x1 += 1;
  }
  if (y0 === y1) {
    y0 -= 1;
    y1 += 1;
  }
  const pad = 0.04 * (y1 - y0);
  y0 -= pad;
  y1 += pad;

  const sx = (v: number) => m.left + ((v - x0) / (x1 - x0)) * (width - m.left - m.right);
  const sy = (v: number) => {
    const t = opts.logScale ? Math.log10(v) : v;
    return height - m.bottom - ((t - y0) / (y1 - y0)) * (height - m.top - m.bottom);
  };

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `viewBox="0 0 ${width} ${height}" font-family="sans-serif" font-size="12">`,
  );
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);

  // axes, grid, tick labels
  const xTicks = linearTicks(x0, x1);
  for (const v of xTicks) {
    const px = sx(v);
    parts.push(`<line x1="${px.toFixed(1)}" y1="${m.top}" x2="${px.toFixed(1)}" y2="${height - m.bottom}" stroke="#ddd"/>`);
    parts.push(`<text x="${px.toFixed(1)}" y="${height - m.bottom + 18}" text-anchor="middle">${fmt(v)}</text>`);
  }
  const yTickVals = opts.logScale ? decadeTicks(y0, y1) : linearTicks(y0, y1);
  for (const v of yTickVals) {
    const py = height - m.bottom - ((v - y0) / (y1 - y0)) * (height - m.top - m.bottom);
    const label = opts.logScale ? `1e${v}` : fmt(v);
    parts.push(`<line x1="${m.left}" y1="${py.toFixed(1)}" x2="${width - m.right}" y2="${py.toFixed(1)}" stroke="#ddd"/>`);
    parts.push(`<text x="${m.left - 8}" y="${(py + 4).toFixed(1)}" text-anchor="end">${label}</text>`);
  }
  parts.push(`<rect x="${m.left}" y="${m.top}" width="${width - m.left - m.right}" height="${height - m.top - m.bottom}" fill="none" stroke="#333"/>`);
  parts.push(`<text x="${(m.left + width - m.right) / 2}" y="${height - 12}" text-anchor="middle">${opts.xLabel}</text>`);
  parts.push(
    `<text x="16" y="${(m.top + height - m.bottom) / 2}" text-anchor="middle" ` +
      `transform="rotate(-90 16 ${(m.top + height - m.bottom) / 2})">${opts.yLabel}</text>`,
  );

  clean.forEach((t, i) => {
    if (t.x.length === 0) return;
    const color = PALETTE[i % PALETTE.length];
    const pts = t.x.map((xv, k) => `${sx(xv).toFixed(2)},${sy(t.y[k]).toFixed(2)}`).join(' ');
    parts.push(`<polyline points="${pts}" fill="none" stroke="${color}" stroke-width="1.5"/>`);
  });

  // legend, one entry per trace
  clean.forEach((t, i) => {
    const color = PALETTE[i % PALETTE.length];
    const ly = m.top + 16 + 18 * i;
    parts.push(`<line x1="${width - m.right - 150}" y1="${ly - 4}" x2="${width - m.right - 122}" y2="${ly - 4}" stroke="${color}" stroke-width="2"/>`);
    parts.push(`<text class="legend" x="${width - m.right - 116}" y="${ly}">${t.label}</text>`);
  });

  parts.push('</svg>');
  return parts.join('\n');
}
