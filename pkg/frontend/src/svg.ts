/**
 * Minimal deterministic SVG rendering: line charts and text tables.
 *
 * No timestamps, no randomness, fixed fonts and sizes, and all numbers
 * formatted through one helper, so identical inputs always produce
 * byte-identical output.
 */

export interface Series {
  label: string;
  points: [number, number][];
}

export interface ChartOptions {
  title: string;
  xLabel: string;
  yLabel: string;
  width?: number;
  height?: number;
  /** Shared y-range override (used for multi-panel layouts). */
  yRange?: [number, number];
}

const PALETTE = [
  "#1f77b4",
  "#d62728",
  "#2ca02c",
  "#9467bd",
  "#ff7f0e",
  "#8c564b",
  "#17becf",
  "#7f7f7f",
];

const FONT = 'font-family="monospace" font-size="12"';

/** Fixed-precision number formatting; strips the noise toFixed would keep. */
export function fmt(x: number): string {
  if (!Number.isFinite(x)) return "0";
  const s = x.toPrecision(6);
  return s.includes(".") ? s.replace(/\.?0+$/, "").replace(/\.?0+e/, "e") : s;
}

function px(x: number): string {
  return x.toFixed(2);
}

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (lo === Infinity) return [0, 1];
  if (lo === hi) return [lo - 0.5, hi + 0.5];
  return [lo, hi];
}

function ticks(lo: number, hi: number, n = 5): number[] {
  const out: number[] = [];
  for (let i = 0; i <= n; i++) out.push(lo + ((hi - lo) * i) / n);
  return out;
}

export function dataRange(seriesList: Series[]): [number, number] {
  return extent(seriesList.flatMap((s) => s.points.map((p) => p[1])));
}

/** Render one line chart; returns the inner SVG group plus its legend. */
function chartBody(
  seriesList: Series[],
  opts: Required<Pick<ChartOptions, "title" | "xLabel" | "yLabel">> & {
    width: number;
    height: number;
    yRange?: [number, number];
  },
  xOffset: number,
): string {
  const { width, height } = opts;
  const m = { left: 62, right: 14, top: 30, bottom: 42 };
  const innerW = width - m.left - m.right;
  const innerH = height - m.top - m.bottom;
  const [xLo, xHi] = extent(seriesList.flatMap((s) => s.points.map((p) => p[0])));
  const [yLo, yHi] = opts.yRange ?? dataRange(seriesList);
  const sx = (x: number) => m.left + ((x - xLo) / (xHi - xLo || 1)) * innerW;
  const sy = (y: number) => m.top + innerH - ((y - yLo) / (yHi - yLo || 1)) * innerH;

  const parts: string[] = [];
  parts.push(`<g transform="translate(${px(xOffset)},0)">`);
  parts.push(
    `<rect x="${px(m.left)}" y="${px(m.top)}" width="${px(innerW)}" ` +
      `height="${px(innerH)}" fill="none" stroke="#999"/>`,
  );
  for (const t of ticks(yLo, yHi)) {
    const y = sy(t);
    parts.push(
      `<line x1="${px(m.left - 4)}" y1="${px(y)}" x2="${px(m.left)}" ` +
        `y2="${px(y)}" stroke="#999"/>`,
      `<text x="${px(m.left - 8)}" y="${px(y + 4)}" text-anchor="end" ` +
        `${FONT}>${fmt(t)}</text>`,
    );
  }
  for (const t of ticks(xLo, xHi)) {
    const x = sx(t);
    parts.push(
      `<line x1="${px(x)}" y1="${px(m.top + innerH)}" x2="${px(x)}" ` +
        `y2="${px(m.top + innerH + 4)}" stroke="#999"/>`,
      `<text x="${px(x)}" y="${px(m.top + innerH + 18)}" ` +
        `text-anchor="middle" ${FONT}>${fmt(t)}</text>`,
    );
  }
  let hasData = false;
  seriesList.forEach((series, i) => {
    if (series.points.length === 0) return;
    hasData = true;
    const color = PALETTE[i % PALETTE.length];
    const pts = series.points
      .map(([x, y]) => `${px(sx(x))},${px(sy(y))}`)
      .join(" ");
    parts.push(
      `<polyline points="${pts}" fill="none" stroke="${color}" ` +
        `stroke-width="1.5"/>`,
    );
    const ly = m.top + 14 + i * 16;
    parts.push(
      `<line x1="${px(m.left + 8)}" y1="${px(ly - 4)}" ` +
        `x2="${px(m.left + 28)}" y2="${px(ly - 4)}" stroke="${color}" ` +
        `stroke-width="1.5"/>`,
      `<text x="${px(m.left + 34)}" y="${px(ly)}" ${FONT}>` +
        `${escapeXml(series.label)}</text>`,
    );
  });
  if (!hasData) {
    parts.push(
      `<text x="${px(m.left + innerW / 2)}" y="${px(m.top + innerH / 2)}" ` +
        `text-anchor="middle" ${FONT}>no data rows</text>`,
    );
  }
  parts.push(
    `<text x="${px(m.left + innerW / 2)}" y="18" text-anchor="middle" ` +
      `${FONT} font-weight="bold">${escapeXml(opts.title)}</text>`,
    `<text x="${px(m.left + innerW / 2)}" y="${px(height - 8)}" ` +
      `text-anchor="middle" ${FONT}>${escapeXml(opts.xLabel)}</text>`,
    `<text transform="translate(14,${px(m.top + innerH / 2)}) rotate(-90)" ` +
      `text-anchor="middle" ${FONT}>${escapeXml(opts.yLabel)}</text>`,
  );
  parts.push("</g>");
  return parts.join("\n");
}

export function lineChart(seriesList: Series[], opts: ChartOptions): string {
  const width = opts.width ?? 760;
  const height = opts.height ?? 420;
  const body = chartBody(
    seriesList,
    { ...opts, width, height },
    0,
  );
  return svgDocument(width, height, body);
}

/** Two charts side by side sharing one y-range. */
export function twoPanelChart(
  panels: { seriesList: Series[]; title: string }[],
  opts: Omit<ChartOptions, "title">,
): string {
  const width = opts.width ?? 520;
  const height = opts.height ?? 420;
  const all = panels.flatMap((p) => p.seriesList);
  const yRange = opts.yRange ?? dataRange(all);
  const bodies = panels.map((panel, i) =>
    chartBody(
      panel.seriesList,
      {
        title: panel.title,
        xLabel: opts.xLabel,
        yLabel: i === 0 ? opts.yLabel : "",
        width,
        height,
        yRange,
      },
      i * width,
    ),
  );
  return svgDocument(width * panels.length, height, bodies.join("\n"));
}

export interface TableCell {
  text: string;
  bold: boolean;
}

/** Fixed-layout text table (header row plus body rows). */
export function tableSvg(header: string[], rows: TableCell[][]): string {
  const colWidth = 120;
  const rowHeight = 24;
  const width = 20 + colWidth * header.length;
  const height = 20 + rowHeight * (rows.length + 1);
  const parts: string[] = [];
  header.forEach((name, c) => {
    parts.push(
      `<text x="${px(20 + c * colWidth)}" y="${px(28)}" ${FONT} ` +
        `font-weight="bold">${escapeXml(name)}</text>`,
    );
  });
  parts.push(
    `<line x1="10" y1="${px(34)}" x2="${px(width - 10)}" y2="${px(34)}" ` +
      `stroke="#333"/>`,
  );
  rows.forEach((row, r) => {
    row.forEach((cell, c) => {
      const weight = cell.bold ? ' font-weight="bold"' : "";
      parts.push(
        `<text x="${px(20 + c * colWidth)}" ` +
          `y="${px(28 + (r + 1) * rowHeight)}" ${FONT}${weight}>` +
          `${escapeXml(cell.text)}</text>`,
      );
    });
  });
  return svgDocument(width, height, parts.join("\n"));
}

function svgDocument(width: number, height: number, body: string): string {
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" ` +
    `height="${height}" viewBox="0 0 ${width} ${height}">\n` +
    `<rect width="${width}" height="${height}" fill="white"/>\n` +
    `${body}\n</svg>\n`
  );
}

function escapeXml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;");
}
