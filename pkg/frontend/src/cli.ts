#!/usr/bin/env node
/**
 * socfedcs-plots — figure rendering over simulator artifacts.
 *
 *   socfedcs-plots costs    --in metrics_*.csv --out costs.svg
 *   socfedcs-plots accuracy --in s1/*.csv [--in2 s2/*.csv] --out acc.svg
 *   socfedcs-plots queues   --in metrics_*.csv --out queues.svg
 *   socfedcs-plots summary  --in comparison.csv --out table.svg
 *
 * Exit codes: 0 success, 1 bad input (missing file/column, unknown schema,
 * bad arguments).
 */

import { parseArgs } from "util";

import { plotAccuracy, plotCosts, plotQueues, renderSummary } from "./plots.js";

const USAGE =
  "usage: socfedcs-plots <costs|accuracy|queues|summary> " +
  "--in <file>... [--in2 <file>...] --out <path>";

export function main(argv: string[]): number {
  try {
    const [command, ...rest] = argv;
    const { values } = parseArgs({
      args: rest,
      options: {
        in: { type: "string", multiple: true },
        in2: { type: "string", multiple: true },
        out: { type: "string" },
      },
    });
    const inputs = values.in ?? [];
    const out = values.out;
    if (inputs.length === 0 || !out) {
      throw new Error(USAGE);
    }
    switch (command) {
      case "costs":
        plotCosts(inputs, out);
        break;
      case "accuracy":
        plotAccuracy(inputs, out, values.in2);
        break;
      case "queues":
        plotQueues(inputs, out);
        break;
      case "summary":
        renderSummary(inputs[0], out);
        break;
      default:
        throw new Error(USAGE);
    }
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  process.exitCode = main(process.argv.slice(2));
}
