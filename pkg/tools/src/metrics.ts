/** Reader for the engine's per-epoch metrics CSV:
 * epoch,wall_seconds,loss,p_at_1,active_frac,touched_frac */

export interface MetricsSeries {
  wallSeconds: number[];
  pAt1: number[];
}

export const REQUIRED_COLUMNS = ["wall_seconds", "p_at_1"] as const;

export function parseMetricsCsv(text: string, name = "metrics csv"): MetricsSeries {
  const lines = text
    .split(/\r?\n/)
    .map((l) => l.trim())
    .filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new Error(`${name}: empty file`);
  }
  const header = lines[0].split(",").map((h) => h.trim());
  for (const col of REQUIRED_COLUMNS) {
    if (!header.includes(col)) {
      throw new Error(`${name}: missing column '${col}'`);
    }
  }
  if (lines.length === 1) {
    throw new Error(`${name}: no data rows`);
  }
  const wallIdx = header.indexOf("wall_seconds");
  const pIdx = header.indexOf("p_at_1");
  const out: MetricsSeries = { wallSeconds: [], pAt1: [] };
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i].split(",");
    const w = Number(cells[wallIdx]);
    const p = Number(cells[pIdx]);
    if (!Number.isFinite(w) || !Number.isFinite(p)) {
      throw new Error(`${name}: non-numeric row ${i + 1}`);
    }
    out.wallSeconds.push(w);
    out.pAt1.push(p);
  }
  return out;
}
