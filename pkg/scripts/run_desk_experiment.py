#!/usr/bin/env python3
"""Train the desk config twice — hash-selected sparse vs dense softmax — and
write one metrics CSV per run. Feed both CSVs to tools/ to get the
time-vs-precision convergence figure."""

from __future__ import annotations

import argparse
import dataclasses
import json

from lshtrain.cli import RunConfig
from lshtrain.sparse_data import load_libsvm
from lshtrain.trainer import Trainer, build_network


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="configs/desk.json")
    ap.add_argument("--out-prefix", default="metrics")
    args = ap.parse_args()

    rc = RunConfig.from_dict(json.load(open(args.config)))
    data = load_libsvm(rc.train_path, header=rc.header(), one_based=rc.one_based)
    eval_data = load_libsvm(rc.test_path) if rc.test_path else None

    for tag, use_lsh in (("lsh", True), ("dense", False)):
        cfg = dataclasses.replace(
            rc.train, use_lsh=use_lsh,
            metrics_path=f"{args.out_prefix}_{tag}.csv", checkpoint_path=None,
        )
        net = build_network(data.input_dim, data.label_dim, cfg)
        trainer = Trainer(net, cfg)
        metrics = trainer.train(data, eval_data)
        last = metrics[-1]
        print(f"{tag}: p@1={last.p_at_1:.4f} loss={last.loss:.4f} "
              f"active={last.active_frac:.3f} wall={last.wall_seconds:.1f}s "
              f"-> {cfg.metrics_path}")


if __name__ == "__main__":
    main()
