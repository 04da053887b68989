import { execFileSync } from "child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "fs";
import { tmpdir } from "os";
import { join } from "path";
import { describe, expect, it } from "vitest";

import { generate, SyntheticSpec } from "../src/gen_synthetic.js";

const spec = (over: Partial<SyntheticSpec> = {}): SyntheticSpec => ({
  numExamples: 40,
  inputDim: 60,
  labelDim: 8,
  nnz: 5,
  sigSize: 10,
  noise: 1,
  labelsPerExample: 1,
  seed: 3,
  ...over,
});

describe("generate", () => {
  it("is byte-identical for the same seed", () => {
    expect(generate(spec())).toEqual(generate(spec()));
    expect(generate(spec({ seed: 4 }))).not.toEqual(generate(spec()));
  });

  it("writes a header and one line per example", () => {
    const text = generate(spec({ numExamples: 7 }));
    const lines = text.trim().split("\n");
    expect(lines[0]).toBe("7 60 8");
    expect(lines).toHaveLength(8);
  });

  it("num_examples=0 gives a header-only file", () => {
    expect(generate(spec({ numExamples: 0 }))).toBe("0 60 8\n");
  });

  it("keeps ids in range and strictly increasing per line", () => {
    const text = generate(spec({ numExamples: 30 }));
    for (const line of text.trim().split("\n").slice(1)) {
      const [labelTok, ...feats] = line.split(" ");
      for (const l of labelTok.split(",").map(Number)) {
        expect(l).toBeGreaterThanOrEqual(0);
        expect(l).toBeLessThan(8);
      }
      let prev = -1;
      for (const f of feats) {
        const [i, v] = f.split(":");
        expect(Number(i)).toBeGreaterThan(prev);
        prev = Number(i);
        expect(Number(i)).toBeLessThan(60);
        expect(Number(v)).toBeGreaterThan(0);
      }
    }
  });

  it("rejects impossible specs", () => {
    expect(() => generate(spec({ nnz: 100 }))).toThrow(/nnz/);
    expect(() => generate(spec({ labelsPerExample: 9 }))).toThrow(/labelsPerExample/);
  });

  it("shares class clusters across splits via signatureSeed", () => {
    const featuresOf = (text: string, label: number): Set<number> => {
      const out = new Set<number>();
      for (const line of text.trim().split("\n").slice(1)) {
        const [labelTok, ...feats] = line.split(" ");
        if (labelTok.split(",").map(Number).includes(label)) {
          for (const f of feats) out.add(Number(f.split(":")[0]));
        }
      }
      return out;
    };
    const a = generate(spec({ numExamples: 200, seed: 1, signatureSeed: 9, noise: 0 }));
    const b = generate(spec({ numExamples: 200, seed: 2, signatureSeed: 9, noise: 0 }));
    for (let c = 0; c < 8; c++) {
      const fa = featuresOf(a, c);
      const fb = featuresOf(b, c);
      if (fa.size && fb.size) {
        const union = new Set([...fa, ...fb]);
        expect(union.size).toBeLessThanOrEqual(10); // both within the class signature
      }
    }
    // omitting signatureSeed defaults to seed
    expect(generate(spec({ seed: 5 }))).toEqual(generate(spec({ seed: 5, signatureSeed: 5 })));
  });
});

describe("cross-parse through the engine CLI", () => {
  it("a generated corpus trains cleanly", () => {
    const dir = mkdtempSync(join(tmpdir(), "lshtrain-tools-"));
    const trainPath = join(dir, "train.txt");
    const testPath = join(dir, "test.txt");
    writeFileSync(trainPath, generate(spec({ numExamples: 60, seed: 5 })));
    writeFileSync(testPath, generate(spec({ numExamples: 20, seed: 6 })));
    const config = {
      train_path: trainPath,
      test_path: testPath,
      hidden_sizes: [8],
      use_lsh: true,
      hash_family: "dwta",
      k: 2,
      l: 2,
      bin_size: 4,
      min_active: 4,
      batch_size: 20,
      epochs: 1,
      lr: 0.01,
      seed: 1,
      metrics_path: join(dir, "metrics.csv"),
      checkpoint_path: join(dir, "model.ckpt"),
    };
    const cfgPath = join(dir, "cfg.json");
    writeFileSync(cfgPath, JSON.stringify(config));
    execFileSync("python3", ["-m", "lshtrain.cli", "train", "--config", cfgPath], {
      stdio: "pipe",
    });
    const metrics = readFileSync(config.metrics_path, "utf8").trim().split("\n");
    expect(metrics[0]).toBe("epoch,wall_seconds,loss,p_at_1,active_frac,touched_frac");
    expect(metrics).toHaveLength(2);
  }, 120_000);
});
