/** Multi-label libsvm text: `l1,l2,... i1:v1 i2:v2 ...`, one example per
 * line, preceded by a `num_examples input_dim label_dim` header line. This is
 * the engine's dataset interchange format. */

export interface Example {
  labels: number[]; // ascending, non-empty
  indices: number[]; // ascending, distinct
  values: number[]; // same length as indices
}

export function formatExample(ex: Example): string {
  if (ex.labels.length === 0) {
    throw new Error("an example needs at least one label");
  }
  if (ex.indices.length !== ex.values.length) {
    throw new Error("indices and values must have equal length");
  }
  const feats = ex.indices.map((i, k) => `${i}:${ex.values[k]}`);
  return [ex.labels.join(","), ...feats].join(" ");
}

export function formatDataset(
  examples: Example[],
  inputDim: number,
  labelDim: number,
): string {
  const lines = [`${examples.length} ${inputDim} ${labelDim}`];
  for (const ex of examples) {
    lines.push(formatExample(ex));
  }
  return lines.join("\n") + "\n";
}
