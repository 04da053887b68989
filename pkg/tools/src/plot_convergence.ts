/** Render metrics CSVs into a time-vs-P@1 convergence figure: x is cumulative
 * wall-clock seconds on a log scale, one curve per CSV, legend in input order.
 * Output is a standalone SVG.
 *
 * Usage:
 *   node dist/plot_convergence.js --out fig.svg run_a.csv run_b.csv \
 *     [--labels "sparse,dense"]
 */

import { readFileSync, writeFileSync } from "fs";
import { basename } from "path";

import { MetricsSeries, parseMetricsCsv } from "./metrics.js";

const COLORS = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"];

const W = 640;
const H = 420;
const MARGIN = { left: 64, right: 16, top: 16, bottom: 48 };

function logTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  for (let e = Math.floor(Math.log10(lo)); e <= Math.ceil(Math.log10(hi)); e++) {
    const t = 10 ** e;
    if (t >= lo / 1.0001 && t <= hi * 1.0001) ticks.push(t);
  }
  if (ticks.length >= 2) return ticks;
  // span under a decade: four evenly log-spaced ticks
  const la = Math.log10(lo);
  const lb = Math.log10(hi);
  return [0, 1, 2, 3].map((i) => 10 ** (la + ((lb - la) * i) / 3));
}

function tickLabel(t: number): string {
  return t >= 1 && Number.isInteger(t) ? String(t) : Number(t.toPrecision(2)).toString();
}

export function renderSvg(series: MetricsSeries[], labels: string[]): string {
  if (series.length === 0) {
    throw new Error("nothing to plot");
  }
  const allW = series.flatMap((s) => s.wallSeconds);
  const allP = series.flatMap((s) => s.pAt1);
  if (allW.some((w) => w <= 0)) {
    throw new Error("wall_seconds must be positive for the log scale");
  }
  const xLo = Math.min(...allW);
  const xHi = Math.max(...allW);
  const yLo = 0;
  const yHi = Math.max(0.05, Math.max(...allP)) * 1.05;
  const plotW = W - MARGIN.left - MARGIN.right;
  const plotH = H - MARGIN.top - MARGIN.bottom;
  const sx = (w: number): number => {
    if (xHi === xLo) return MARGIN.left + plotW / 2;
    return MARGIN.left + ((Math.log10(w) - Math.log10(xLo)) / (Math.log10(xHi) - Math.log10(xLo))) * plotW;
  };
  const sy = (p: number): number => MARGIN.top + plotH - ((p - yLo) / (yHi - yLo)) * plotH;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" viewBox="0 0 ${W} ${H}">`,
    `<rect width="${W}" height="${H}" fill="white"/>`,
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${plotW}" height="${plotH}" fill="none" stroke="#444"/>`,
  );
  for (const t of logTicks(xLo, xHi)) {
    const x = sx(t);
    parts.push(
      `<line x1="${x.toFixed(1)}" y1="${MARGIN.top}" x2="${x.toFixed(1)}" y2="${MARGIN.top + plotH}" stroke="#ddd"/>`,
      `<text x="${x.toFixed(1)}" y="${H - MARGIN.bottom + 18}" font-size="11" text-anchor="middle">${tickLabel(t)}</text>`,
    );
  }
  for (let f = 0; f <= 5; f++) {
    const p = yLo + ((yHi - yLo) * f) / 5;
    const y = sy(p);
    parts.push(
      `<line x1="${MARGIN.left}" y1="${y.toFixed(1)}" x2="${MARGIN.left + plotW}" y2="${y.toFixed(1)}" stroke="#eee"/>`,
      `<text x="${MARGIN.left - 6}" y="${(y + 4).toFixed(1)}" font-size="11" text-anchor="end">${p.toFixed(2)}</text>`,
    );
  }
  series.forEach((s, i) => {
    const pts = s.wallSeconds
      .map((w, k) => `${sx(w).toFixed(2)},${sy(s.pAt1[k]).toFixed(2)}`)
      .join(" ");
    parts.push(
      `<polyline points="${pts}" fill="none" stroke="${COLORS[i % COLORS.length]}" stroke-width="2"/>`,
    );
  });
  series.forEach((_, i) => {
    const y = MARGIN.top + 14 + i * 18;
    const x = MARGIN.left + 10;
    parts.push(
      `<line x1="${x}" y1="${y - 4}" x2="${x + 22}" y2="${y - 4}" stroke="${COLORS[i % COLORS.length]}" stroke-width="3"/>`,
      `<text x="${x + 28}" y="${y}" font-size="12">${labels[i]}</text>`,
    );
  });
  parts.push(
    `<text x="${MARGIN.left + plotW / 2}" y="${H - 10}" font-size="12" text-anchor="middle">training time (s, log scale)</text>`,
    `<text x="16" y="${MARGIN.top + plotH / 2}" font-size="12" text-anchor="middle" transform="rotate(-90 16 ${MARGIN.top + plotH / 2})">P@1</text>`,
    "</svg>",
  );
  return parts.join("\n");
}

export function plotFiles(csvPaths: string[], labels: string[] | null, outPath: string): void {
  if (csvPaths.length === 0) {
    throw new Error("give at least one metrics csv");
  }
  const names = labels ?? csvPaths.map((p) => basename(p).replace(/\.csv$/, ""));
  if (names.length !== csvPaths.length) {
    throw new Error("number of labels must match number of csv files");
  }
  const series = csvPaths.map((p) => parseMetricsCsv(readFileSync(p, "utf8"), p));
  writeFileSync(outPath, renderSvg(series, names), "utf8");
}

export function main(argv: string[]): number {
  const files: string[] = [];
  let out: string | null = null;
  let labels: string[] | null = null;
  for (let i = 0; i < argv.length; i++) {
    if (argv[i] === "--out") {
      out = argv[++i];
    } else if (argv[i] === "--labels") {
      labels = argv[++i].split(",");
    } else {
      files.push(argv[i]);
    }
  }
  if (!out) throw new Error("--out is required");
  plotFiles(files, labels, out);
  console.log(`wrote ${out} (${files.length} curve${files.length === 1 ? "" : "s"})`);
  return 0;
}

if (process.argv[1] && process.argv[1].endsWith("plot_convergence.js")) {
  try {
    process.exit(main(process.argv.slice(2)));
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    process.exit(2);
  }
}
