/**
 * Figure builders over the simulator's artifacts: running-cost curves,
 * accuracy curves (optionally two panels sharing a y-axis), virtual-queue
 * traces, and the comparison summary as an SVG table plus markdown.
 *
 * Read-only over inputs; output bytes depend only on input bytes.
 */

import { writeFileSync } from "fs";
import { basename } from "path";

import {
  ComparisonRow,
  MetricsFrame,
  readComparison,
  readMetrics,
} from "./metrics.js";
import {
  Series,
  TableCell,
  fmt,
  lineChart,
  tableSvg,
  twoPanelChart,
} from "./svg.js";

function label(file: string): string {
  return basename(file).replace(/\.csv$/, "");
}

function sortedFrames(files: string[]): MetricsFrame[] {
  return [...files].sort().map(readMetrics);
}

function costSeries(frame: MetricsFrame): Series {
  return {
    label: label(frame.source),
    points: frame.round.map((r, i) => [r, frame.timeAvgCost[i]]),
  };
}

function accuracySeries(frame: MetricsFrame): Series {
  const points: [number, number][] = [];
  frame.round.forEach((r, i) => {
    const acc = frame.testAccuracy[i];
    if (acc !== null) points.push([r, acc]);
  });
  return { label: label(frame.source), points };
}

function queueSeries(frame: MetricsFrame): Series {
  return {
    label: label(frame.source),
    points: frame.round.map((r, i) => [r, frame.queueL1[i]]),
  };
}

export function plotCosts(files: string[], out: string): void {
  const svg = lineChart(sortedFrames(files).map(costSeries), {
    title: "running time-average cost",
    xLabel: "round",
    yLabel: "time-average cost",
  });
  writeFileSync(out, svg);
}

function requireAccuracy(frames: MetricsFrame[]): void {
  for (const frame of frames) {
    if (
      frame.round.length > 0 &&
      frame.testAccuracy.every((a) => a === null)
    ) {
      throw new Error(`${frame.source}: no test_accuracy values recorded`);
    }
  }
}

export function plotAccuracy(
  files: string[],
  out: string,
  secondPanel?: string[],
): void {
  const first = sortedFrames(files);
  requireAccuracy(first);
  if (!secondPanel || secondPanel.length === 0) {
    const svg = lineChart(first.map(accuracySeries), {
      title: "test accuracy",
      xLabel: "round",
      yLabel: "test accuracy",
    });
    writeFileSync(out, svg);
    return;
  }
  const second = sortedFrames(secondPanel);
  requireAccuracy(second);
  const svg = twoPanelChart(
    [
      { seriesList: first.map(accuracySeries), title: "scenario 1" },
      { seriesList: second.map(accuracySeries), title: "scenario 2" },
    ],
    { xLabel: "round", yLabel: "test accuracy" },
  );
  writeFileSync(out, svg);
}

export function plotQueues(files: string[], out: string): void {
  const svg = lineChart(sortedFrames(files).map(queueSeries), {
    title: "virtual queue backlog",
    xLabel: "round",
    yLabel: "sum of queue backlogs",
  });
  writeFileSync(out, svg);
}

type Metric = {
  name: string;
  value: (row: ComparisonRow) => number | null;
  lowerIsBetter: boolean;
};

const METRICS: Metric[] = [
  { name: "cost", value: (r) => r.costMean, lowerIsBetter: true },
  { name: "acc (S1)", value: (r) => r.accS1Mean, lowerIsBetter: false },
  { name: "acc (S2)", value: (r) => r.accS2Mean, lowerIsBetter: false },
];

/** Best value per column; ties all count as best. */
function bestValues(rows: ComparisonRow[]): (number | null)[] {
  return METRICS.map((metric) => {
    const values = rows
      .map(metric.value)
      .filter((v): v is number => v !== null);
    if (values.length === 0) return null;
    return metric.lowerIsBetter
      ? Math.min(...values)
      : Math.max(...values);
  });
}

function summaryCells(rows: ComparisonRow[]): TableCell[][] {
  const best = bestValues(rows);
  return rows.map((row) => {
    const cells: TableCell[] = [{ text: row.selector, bold: false }];
    METRICS.forEach((metric, i) => {
      const v = metric.value(row);
      cells.push({
        text: v === null ? "-" : fmt(v),
        bold: v !== null && v === best[i],
      });
    });
    return cells;
  });
}

const SUMMARY_HEADER = ["selector", ...METRICS.map((m) => m.name)];

/**
 * Render comparison.csv as an SVG table and a markdown table, both with the
 * best value per metric column emphasized. `out` names the SVG; the
 * markdown lands next to it with a .md extension.
 */
export function renderSummary(comparisonCsv: string, out: string): void {
  const rows = readComparison(comparisonCsv);
  const cells = summaryCells(rows);
  writeFileSync(out, tableSvg(SUMMARY_HEADER, cells));
  writeFileSync(out.replace(/\.svg$/, "") + ".md", summaryMarkdown(cells));
}

export function summaryMarkdown(cells: TableCell[][]): string {
  const lines = [
    `| ${SUMMARY_HEADER.join(" | ")} |`,
    `| ${SUMMARY_HEADER.map(() => "---").join(" | ")} |`,
  ];
  for (const row of cells) {
    const rendered = row.map((c) => (c.bold ? `**${c.text}**` : c.text));
    lines.push(`| ${rendered.join(" | ")} |`);
  }
  return lines.join("\n") + "\n";
}

export { summaryCells };
