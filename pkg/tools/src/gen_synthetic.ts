/** Synthetic dataset generator: each label owns a random feature signature;
 * an example samples a subset of its labels' signatures plus noise features,
 * so well-above-chance precision is reachable. Deterministic in the seed.
 *
 * Usage:
 *   node dist/gen_synthetic.js --out data/train.txt --examples 2000 \
 *     --input-dim 1000 --label-dim 500 [--nnz 16] [--sig-size 20] \
 *     [--noise 2] [--labels-per-example 1] [--seed 101] [--signature-seed N]
 *
 * Generate a train/test pair by varying --seed while keeping
 * --signature-seed fixed.
 */

import { mkdirSync, writeFileSync } from "fs";
import { dirname } from "path";

import { Example, formatDataset } from "./libsvm.js";
import { Rng } from "./rng.js";

export interface SyntheticSpec {
  numExamples: number;
  inputDim: number;
  labelDim: number;
  nnz: number; // signature features sampled per label
  sigSize: number; // features in each label's signature
  noise: number; // extra random features per example
  labelsPerExample: number;
  seed: number;
  /** Seeds the class->feature clusters; a train/test pair must share it or
   * the labels mean different things in each file. Defaults to `seed`. */
  signatureSeed?: number;
}

export function validateSpec(spec: SyntheticSpec): void {
  if (spec.numExamples < 0) throw new Error("numExamples must be >= 0");
  if (spec.inputDim < 1 || spec.labelDim < 1) {
    throw new Error("inputDim and labelDim must be positive");
  }
  if (spec.nnz > spec.inputDim) throw new Error("nnz must be <= inputDim");
  if (spec.labelsPerExample > spec.labelDim) {
    throw new Error("labelsPerExample must be <= labelDim");
  }
}

export function generate(spec: SyntheticSpec): string {
  validateSpec(spec);
  const sigRng = new Rng(spec.signatureSeed ?? spec.seed);
  const rng = new Rng(spec.seed);
  const signatures: number[][] = [];
  for (let c = 0; c < spec.labelDim; c++) {
    signatures.push(sigRng.sampleDistinct(spec.inputDim, spec.sigSize));
  }
  const examples: Example[] = [];
  for (let e = 0; e < spec.numExamples; e++) {
    const labels = rng.sampleDistinct(spec.labelDim, spec.labelsPerExample);
    const feats = new Set<number>();
    for (const c of labels) {
      const sig = signatures[c];
      for (const k of rng.sampleDistinct(sig.length, Math.min(spec.nnz, sig.length))) {
        feats.add(sig[k]);
      }
    }
    for (let j = 0; j < spec.noise; j++) {
      feats.add(rng.int(spec.inputDim));
    }
    const indices = [...feats].sort((a, b) => a - b);
    // values near 1 keep same-class examples close in feature space
    const values = indices.map(() => Math.round((0.9 + 0.2 * rng.next()) * 1e6) / 1e6);
    examples.push({ labels, indices, values });
  }
  return formatDataset(examples, spec.inputDim, spec.labelDim);
}

function parseArgs(argv: string[]): { out: string; spec: SyntheticSpec } {
  const opts = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    if (!key.startsWith("--") || argv[i + 1] === undefined) {
      throw new Error(`bad argument ${key}; expected --key value pairs`);
    }
    opts.set(key.slice(2), argv[i + 1]);
  }
  const num = (name: string, fallback: number): number => {
    const raw = opts.get(name);
    if (raw === undefined) return fallback;
    const v = Number(raw);
    if (!Number.isFinite(v)) throw new Error(`--${name} must be a number`);
    return v;
  };
  const out = opts.get("out");
  if (!out) throw new Error("--out is required");
  const seed = num("seed", 101);
  return {
    out,
    spec: {
      numExamples: num("examples", 2000),
      inputDim: num("input-dim", 1000),
      labelDim: num("label-dim", 500),
      nnz: num("nnz", 16),
      sigSize: num("sig-size", 20),
      noise: num("noise", 2),
      labelsPerExample: num("labels-per-example", 1),
      seed,
      signatureSeed: num("signature-seed", seed),
    },
  };
}

export function main(argv: string[]): number {
  const { out, spec } = parseArgs(argv);
  const text = generate(spec);
  mkdirSync(dirname(out), { recursive: true });
  writeFileSync(out, text, "utf8");
  console.log(
    `wrote ${out}: ${spec.numExamples} examples, input_dim=${spec.inputDim}, ` +
      `label_dim=${spec.labelDim}, seed=${spec.seed}`,
  );
  return 0;
}

if (process.argv[1] && process.argv[1].endsWith("gen_synthetic.js")) {
  try {
    process.exit(main(process.argv.slice(2)));
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    process.exit(2);
  }
}
