"""Ablation benchmarks: lane kernels on/off, the three bf16 modes, and the
coalesced vs fragmented batch layout. Every variant trains from the same seed;
rows report mean wall-clock seconds per epoch and the ratio against the first
row. Timing directions are machine-dependent, so callers assert on the ratio
being computed, not on its sign — except where a criterion says otherwise.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

from . import sparse_data
from .trainer import TrainConfig, Trainer, build_network

ABLATIONS = ("avx", "bf16", "layout")

BENCH_COLUMNS = ("ablation", "variant", "mean_epoch_seconds", "ratio", "final_loss")


@dataclass
class BenchRow:
    ablation: str
    variant: str
    mean_epoch_seconds: float
    ratio: float  # mean_epoch_seconds / first row's mean_epoch_seconds
    final_loss: float


def _run_variant(cfg: TrainConfig, data, eval_data):
    net = build_network(data.input_dim, data.label_dim, cfg)
    trainer = Trainer(net, cfg)
    metrics = trainer.train(data, eval_data)
    prev = 0.0
    epoch_times = []
    for m in metrics:
        epoch_times.append(m.wall_seconds - prev)
        prev = m.wall_seconds
    mean_epoch = sum(epoch_times) / len(epoch_times) if epoch_times else 0.0
    return mean_epoch, (metrics[-1].loss if metrics else 0.0)


def run_ablation(kind: str, cfg: TrainConfig, data, eval_data=None) -> list[BenchRow]:
    if kind not in ABLATIONS:
        raise ValueError(f"unknown ablation {kind!r}; expected one of {ABLATIONS}")
    cfg = replace(cfg, metrics_path=None, checkpoint_path=None)
    if kind == "avx":
        variants = [
            ("lanes_on", replace(cfg, lane_enabled=True), data),
            ("lanes_off", replace(cfg, lane_enabled=False), data),
        ]
    elif kind == "bf16":
        variants = [
            ("both", replace(cfg, bf16_mode="both"), data),
            ("activations", replace(cfg, bf16_mode="activations"), data),
            ("none", replace(cfg, bf16_mode="none"), data),
        ]
    else:
        variants = [
            ("coalesced", cfg, data),
            ("fragmented", cfg, sparse_data.fragmented_copy(data)),
        ]
    rows: list[BenchRow] = []
    for name, vcfg, vdata in variants:
        mean_epoch, final_loss = _run_variant(vcfg, vdata, eval_data)
        rows.append(BenchRow(kind, name, mean_epoch, 0.0, final_loss))
    base = rows[0].mean_epoch_seconds
    for r in rows:
        r.ratio = r.mean_epoch_seconds / base if base > 0 else 0.0
    return rows


def write_bench_csv(path, rows: list[BenchRow]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(BENCH_COLUMNS)
        for r in rows:
            w.writerow([r.ablation, r.variant, repr(r.mean_epoch_seconds),
                        repr(r.ratio), repr(r.final_loss)])
