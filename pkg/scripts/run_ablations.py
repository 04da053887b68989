#!/usr/bin/env python3
"""Run the three benchmark ablations (lane kernels, bf16 modes, batch layout)
on one config and print the CSV paths."""

from __future__ import annotations

import argparse
import json

from lshtrain.bench import ABLATIONS, run_ablation, write_bench_csv
from lshtrain.cli import RunConfig
from lshtrain.sparse_data import load_libsvm


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="configs/desk.json")
    ap.add_argument("--out-prefix", default="bench")
    args = ap.parse_args()

    rc = RunConfig.from_dict(json.load(open(args.config)))
    data = load_libsvm(rc.train_path, header=rc.header(), one_based=rc.one_based)
    eval_data = load_libsvm(rc.test_path) if rc.test_path else None

    for kind in ABLATIONS:
        rows = run_ablation(kind, rc.train, data, eval_data)
        path = f"{args.out_prefix}_{kind}.csv"
        write_bench_csv(path, rows)
        for r in rows:
            print(f"{kind}/{r.variant}: {r.mean_epoch_seconds:.3f}s/epoch (x{r.ratio:.3f}) "
                  f"final_loss={r.final_loss:.4f}")
        print(f"  -> {path}")


if __name__ == "__main__":
    main()
