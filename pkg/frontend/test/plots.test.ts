/**
 * Frame parsing, figure rendering, summary emphasis rules, determinism,
 * and the CLI exit codes, all against real simulator artifacts captured in
 * test/fixtures.
 */
import { mkdtempSync, readFileSync, writeFileSync } from "fs";
import { tmpdir } from "os";
import { join } from "path";
import { describe, expect, it } from "vitest";

import { readComparison, readMetrics } from "../src/metrics.js";
import {
  plotAccuracy,
  plotCosts,
  plotQueues,
  renderSummary,
  summaryCells,
  summaryMarkdown,
} from "../src/plots.js";
import { main } from "../src/cli.js";

const FIX = join(__dirname, "fixtures");
const METRIC_FILES = ["socfedcs", "greedy", "random", "fedcs"].map((s) =>
  join(FIX, `metrics_${s}_0.csv`),
);
const HEADER =
  "socfedcs-metrics-v1,round,selector,max_cost,time_avg_cost,theta," +
  "objective,queue_l1,n_selected,selected_pairs,test_accuracy";

function tmp(): string {
  return mkdtempSync(join(tmpdir(), "plots-"));
}

describe("readMetrics", () => {
  it("parses a real metrics file", () => {
    const frame = readMetrics(METRIC_FILES[0]);
    expect(frame.selector).toBe("socfedcs");
    expect(frame.round.length).toBe(40);
    expect(frame.round[0]).toBe(0);
    expect(frame.timeAvgCost.every((v) => Number.isFinite(v))).toBe(true);
  });

  it("keeps sparse accuracy as nulls", () => {
    const frame = readMetrics(join(FIX, "train", "metrics_socfedcs_1.csv"));
    expect(frame.testAccuracy.some((a) => a === null)).toBe(true);
    expect(frame.testAccuracy.some((a) => a !== null)).toBe(true);
  });

  it("rejects unknown schema versions", () => {
    const dir = tmp();
    const bad = join(dir, "bad.csv");
    writeFileSync(bad, HEADER.replace("v1", "v9") + "\n");
    expect(() => readMetrics(bad)).toThrow(/unknown schema version/);
  });

  it("names the missing column and file", () => {
    const dir = tmp();
    const bad = join(dir, "nocost.csv");
    writeFileSync(bad, HEADER.replace(",time_avg_cost", "") + "\n");
    expect(() => readMetrics(bad)).toThrow(/nocost\.csv: missing column time_avg_cost/);
  });
});

describe("plotCosts", () => {
  it("renders one polyline per input file", () => {
    const out = join(tmp(), "costs.svg");
    plotCosts(METRIC_FILES, out);
    const svg = readFileSync(out, "utf8");
    expect(svg.match(/<polyline/g)?.length).toBe(4);
    expect(svg).toContain("time-average cost");
    expect(svg).toContain("metrics_socfedcs_0");
  });

  it("annotates an empty body and still writes a figure", () => {
    const dir = tmp();
    const empty = join(dir, "empty.csv");
    writeFileSync(empty, HEADER + "\n");
    const out = join(dir, "empty.svg");
    plotCosts([empty], out);
    expect(readFileSync(out, "utf8")).toContain("no data rows");
  });

  it("is deterministic byte for byte", () => {
    const dir = tmp();
    plotCosts(METRIC_FILES, join(dir, "a.svg"));
    plotCosts(METRIC_FILES, join(dir, "b.svg"));
    expect(readFileSync(join(dir, "a.svg"))).toEqual(
      readFileSync(join(dir, "b.svg")),
    );
  });
});

describe("plotAccuracy", () => {
  const s1 = [join(FIX, "train", "metrics_socfedcs_1.csv")];
  const s2 = [join(FIX, "train2", "metrics_greedy_1.csv")];

  it("renders a single panel from sparse accuracy", () => {
    const out = join(tmp(), "acc.svg");
    plotAccuracy(s1, out);
    const svg = readFileSync(out, "utf8");
    expect(svg.match(/<polyline/g)?.length).toBe(1);
  });

  it("renders two panels sharing the y axis", () => {
    const out = join(tmp(), "acc2.svg");
    plotAccuracy(s1, out, s2);
    const svg = readFileSync(out, "utf8");
    expect(svg).toContain("scenario 1");
    expect(svg).toContain("scenario 2");
    expect(svg.match(/<polyline/g)?.length).toBe(2);
    // Shared y-range: identical tick label sets in both panels.
    const labels = [...svg.matchAll(/text-anchor="end" [^>]*>([^<]+)</g)].map(
      (m) => m[1],
    );
    const half = labels.length / 2;
    expect(labels.slice(0, half)).toEqual(labels.slice(half));
  });

  it("errors on files without accuracy values", () => {
    expect(() => plotAccuracy([METRIC_FILES[0]], join(tmp(), "x.svg"))).toThrow(
      /no test_accuracy values/,
    );
  });
});

describe("plotQueues", () => {
  it("renders backlog traces", () => {
    const out = join(tmp(), "queues.svg");
    plotQueues([METRIC_FILES[0]], out);
    expect(readFileSync(out, "utf8")).toContain("queue backlog");
  });
});

describe("summary", () => {
  it("reads the real comparison file", () => {
    const rows = readComparison(join(FIX, "comparison.csv"));
    expect(rows.map((r) => r.selector)).toEqual([
      "socfedcs",
      "greedy",
      "random",
      "fedcs",
    ]);
    expect(rows[0].accS1Mean).toBeNull();
  });

  it("bolds exactly one best cost cell", () => {
    const rows = readComparison(join(FIX, "comparison.csv"));
    const cells = summaryCells(rows);
    const costBold = cells.map((row) => row[1].bold);
    expect(costBold).toEqual([true, false, false, false]); // socfedcs lowest
  });

  it("bolds every tied accuracy cell", () => {
    const rows = readComparison(join(FIX, "traincmp", "comparison.csv"));
    const cells = summaryCells(rows);
    // Both selectors reached identical accuracy in the fixture.
    expect(cells.map((row) => row[2].bold)).toEqual([true, true]);
    expect(cells.map((row) => row[3].bold)).toEqual([true, true]);
  });

  it("writes svg and markdown", () => {
    const out = join(tmp(), "table.svg");
    renderSummary(join(FIX, "traincmp", "comparison.csv"), out);
    const md = readFileSync(out.replace(".svg", ".md"), "utf8");
    expect(md).toContain("| selector | cost | acc (S1) | acc (S2) |");
    expect(md).toContain("**0.225**");
    expect(readFileSync(out, "utf8")).toContain("font-weight=\"bold\"");
  });

  it("markdown emphasizes only best cells", () => {
    const cells = summaryCells(
      readComparison(join(FIX, "comparison.csv")),
    );
    const md = summaryMarkdown(cells);
    expect(md.match(/\*\*/g)?.length).toBe(2); // one bold cell, two markers
  });
});

describe("cli", () => {
  it("renders the three figure types with exit code 0", () => {
    const dir = tmp();
    const inFlags = METRIC_FILES.flatMap((f) => ["--in", f]);
    const codes = [
      main(["costs", ...inFlags, "--out", join(dir, "c.svg")]),
      main([
        "accuracy",
        "--in",
        join(FIX, "train", "metrics_socfedcs_1.csv"),
        "--out",
        join(dir, "a.svg"),
      ]),
      main([
        "summary",
        "--in",
        join(FIX, "comparison.csv"),
        "--out",
        join(dir, "t.svg"),
      ]),
    ];
    expect(codes).toEqual([0, 0, 0]);
  });

  it("exits 1 on a bad schema", () => {
    const dir = tmp();
    const bad = join(dir, "bad.csv");
    writeFileSync(bad, "nope,round\n");
    expect(main(["costs", "--in", bad, "--out", join(dir, "x.svg")])).toBe(1);
  });

  it("exits 1 on a missing file", () => {
    expect(
      main(["costs", "--in", "/nonexistent.csv", "--out", join(tmp(), "x.svg")]),
    ).toBe(1);
  });

  it("exits 1 on a missing command or flags", () => {
    expect(main([])).toBe(1);
    expect(main(["costs"])).toBe(1);
    expect(main(["unknown", "--in", "x", "--out", "y"])).toBe(1);
  });
});
