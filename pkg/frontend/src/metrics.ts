/**
 * Readers for the simulator's CSV artifacts.
 *
 * Both formats are strict machine output: comma-separated, never quoted,
 * one header line. Every metrics row starts with a schema-version tag so
 * format drift is detected without a sidecar file.
 */

import { readFileSync } from "fs";

export const METRICS_SCHEMA = "socfedcs-metrics-v1";

export interface MetricsFrame {
  /** Path the frame was read from (used in labels and error messages). */
  source: string;
  selector: string;
  round: number[];
  maxCost: number[];
  timeAvgCost: number[];
  theta: number[];
  objective: number[];
  queueL1: number[];
  nSelected: number[];
  /** Sparse: null where the round had no evaluation. */
  testAccuracy: (number | null)[];
}

function splitCsv(text: string): string[][] {
  return text
    .split("\n")
    .filter((line) => line.length > 0)
    .map((line) => line.split(","));
}

function columnIndex(header: string[], name: string, file: string): number {
  const idx = header.indexOf(name);
  if (idx < 0) {
    throw new Error(`${file}: missing column ${name}`);
  }
  return idx;
}

/** Parse one metrics CSV; rejects unknown schema versions. */
export function readMetrics(file: string): MetricsFrame {
  const rows = splitCsv(readFileSync(file, "utf8"));
  if (rows.length === 0) {
    throw new Error(`${file}: empty file`);
  }
  const header = rows[0];
  if (header[0] !== METRICS_SCHEMA) {
    throw new Error(
      `${file}: unknown schema version ${JSON.stringify(header[0])}, ` +
        `expected ${METRICS_SCHEMA}`,
    );
  }
  const col = (name: string) => columnIndex(header, name, file);
  const iRound = col("round");
  const iSelector = col("selector");
  const iMaxCost = col("max_cost");
  const iAvg = col("time_avg_cost");
  const iTheta = col("theta");
  const iObjective = col("objective");
  const iQueue = col("queue_l1");
  const iN = col("n_selected");
  const iAcc = col("test_accuracy");

  const frame: MetricsFrame = {
    source: file,
    selector: "",
    round: [],
    maxCost: [],
    timeAvgCost: [],
    theta: [],
    objective: [],
    queueL1: [],
    nSelected: [],
    testAccuracy: [],
  };
  for (const row of rows.slice(1)) {
    if (row[0] !== METRICS_SCHEMA) {
      throw new Error(`${file}: row without schema tag`);
    }
    frame.selector = row[iSelector];
    frame.round.push(Number(row[iRound]));
    frame.maxCost.push(Number(row[iMaxCost]));
    frame.timeAvgCost.push(Number(row[iAvg]));
    frame.theta.push(Number(row[iTheta]));
    frame.objective.push(Number(row[iObjective]));
    frame.queueL1.push(Number(row[iQueue]));
    frame.nSelected.push(Number(row[iN]));
    frame.testAccuracy.push(row[iAcc] === "" ? null : Number(row[iAcc]));
  }
  return frame;
}

export interface ComparisonRow {
  selector: string;
  costMean: number | null;
  accS1Mean: number | null;
  accS2Mean: number | null;
}

/** Parse comparison.csv (selector plus per-metric mean/stddev columns). */
export function readComparison(file: string): ComparisonRow[] {
  const rows = splitCsv(readFileSync(file, "utf8"));
  if (rows.length === 0) {
    throw new Error(`${file}: empty file`);
  }
  const header = rows[0];
  const iSel = columnIndex(header, "selector", file);
  const iCost = columnIndex(header, "cost_mean", file);
  const iS1 = columnIndex(header, "acc_s1_mean", file);
  const iS2 = columnIndex(header, "acc_s2_mean", file);
  const opt = (cell: string) => (cell === "" ? null : Number(cell));
  return rows.slice(1).map((row) => ({
    selector: row[iSel],
    costMean: opt(row[iCost]),
    accS1Mean: opt(row[iS1]),
    accS2Mean: opt(row[iS2]),
  }));
}
