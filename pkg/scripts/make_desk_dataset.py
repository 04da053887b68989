#!/usr/bin/env python3
"""Write a desk-scale synthetic dataset pair (train/test) in the multi-label
libsvm format. Examples are drawn from label-conditioned sparse feature
clusters so the task is actually learnable. The fuller generator with more
knobs lives in tools/ (TypeScript); this one exists so the Python repo is
self-contained for quick experiments."""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from lshtrain.sparse_data import SparseBatch, write_libsvm_multilabel


def synthetic_batch(num_examples, input_dim, label_dim, seed, signature_seed,
                    nnz=16, sig_size=20, noise=2, value_jitter=0.1):
    # train/test pairs must share signature_seed so the class clusters match
    sig_rng = np.random.default_rng(signature_seed)
    rng = np.random.default_rng(seed)
    signatures = [sig_rng.choice(input_dim, size=sig_size, replace=False)
                  for _ in range(label_dim)]
    indices, values, labels = [], [], []
    offsets, label_offsets = [0], [0]
    for _ in range(num_examples):
        c = int(rng.integers(label_dim))
        feats = set(rng.choice(signatures[c], size=min(nnz, sig_size), replace=False))
        feats.update(rng.integers(0, input_dim, size=noise))
        idx = np.array(sorted(feats), dtype=np.int32)
        indices.append(idx)
        values.append(
            rng.uniform(1.0 - value_jitter, 1.0 + value_jitter, size=len(idx)).astype(np.float32)
        )
        labels.append(np.array([c], dtype=np.int32))
        offsets.append(offsets[-1] + len(idx))
        label_offsets.append(label_offsets[-1] + 1)
    return SparseBatch(
        indices=np.concatenate(indices) if indices else np.empty(0, np.int32),
        values=np.concatenate(values) if values else np.empty(0, np.float32),
        offsets=np.array(offsets, dtype=np.int64),
        label_indices=np.concatenate(labels) if labels else np.empty(0, np.int32),
        label_offsets=np.array(label_offsets, dtype=np.int64),
        input_dim=input_dim,
        label_dim=label_dim,
    )


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="data")
    ap.add_argument("--train-examples", type=int, default=2000)
    ap.add_argument("--test-examples", type=int, default=500)
    ap.add_argument("--input-dim", type=int, default=1000)
    ap.add_argument("--label-dim", type=int, default=500)
    ap.add_argument("--seed", type=int, default=101)
    args = ap.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, n, seed in (("desk_train.txt", args.train_examples, args.seed),
                          ("desk_test.txt", args.test_examples, args.seed + 1)):
        batch = synthetic_batch(n, args.input_dim, args.label_dim, seed,
                                signature_seed=args.seed + 1000)
        with open(out / name, "w", encoding="utf-8") as f:
            write_libsvm_multilabel(batch, f)
        print(f"wrote {out / name}: {n} examples, input_dim={args.input_dim}, "
              f"label_dim={args.label_dim}")


if __name__ == "__main__":
    main()
