"""Training loop: batch parallelism over samples, hash-table maintenance,
epoch metrics.

Each batch runs in three phases: (a) parallel per-sample compute — select
active neurons, forward, backward — with gradient application either immediate
and racy (HOGWILD) or deferred; (b) a barrier; deferred blocks are then
applied sequentially in sample order at the batch's step counter; (c) an
exclusive maintenance phase on schedule, moving neurons whose codes changed
and fully rebuilding every ``rebuild_every`` rounds. Tables are never mutated
during phase (a).

Evaluation is always dense fp32 whatever the training mode, so the P@1 metric
is not contaminated by training-time approximations.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import lsh, nn, quant
from .kernels import AdamHyper, LaneConfig, StorageOrder
from .optimizer import Adam


@dataclass
class TrainConfig:
    hidden_sizes: tuple = (128,)
    use_lsh: bool = True
    hash_family: str = lsh.DWTA
    k: int = 6
    l: int = 400
    bin_size: int = 8
    densification_cap: int = 100
    min_active: int = 32
    batch_size: int = 256
    epochs: int = 5
    threads: int = 1
    hogwild: bool = False
    rehash_period: int = 50
    rebuild_every: int = 20
    seed: int = 42
    bf16_mode: str = "none"
    bf16_rounding: str = quant.TRUNC
    lane_enabled: bool = True
    lane_width: int = 16
    lr: float = 0.0001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    bias_correction: bool = True
    metrics_path: str | None = None
    checkpoint_path: str | None = None

    def __post_init__(self):
        self.hidden_sizes = tuple(int(h) for h in self.hidden_sizes)
        if self.threads < 1 or self.rehash_period < 1 or self.batch_size < 1:
            raise ValueError("threads, rehash_period and batch_size must be >= 1")
        if self.epochs < 0 or self.rebuild_every < 1:
            raise ValueError("epochs must be >= 0 and rebuild_every >= 1")
        quant.QuantMode(self.bf16_mode)


@dataclass
class EpochMetrics:
    epoch: int
    wall_seconds: float  # cumulative since training started
    loss: float
    p_at_1: float
    active_frac: float  # mean |active|/n over hash-selected layers
    touched_frac: float  # mean touched-weight fraction, network-wide


METRICS_COLUMNS = ("epoch", "wall_seconds", "loss", "p_at_1", "active_frac", "touched_frac")


def write_metrics_csv(path, metrics: list[EpochMetrics]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(METRICS_COLUMNS)
        for m in metrics:
            w.writerow([m.epoch, repr(m.wall_seconds), repr(m.loss), repr(m.p_at_1),
                        repr(m.active_frac), repr(m.touched_frac)])


def build_network(input_dim: int, label_dim: int, cfg: TrainConfig) -> nn.Network:
    """Input -> hidden stack (ReLU, dense) -> hash-selected softmax output.

    The first layer sees sparse data, so it stores column-major; every later
    layer is fed dense activations and stores row-major.
    """
    layer_cfgs = []
    fan_in = input_dim
    for i, h in enumerate(cfg.hidden_sizes):
        layer_cfgs.append(
            nn.LayerConfig(
                n=h, m=fan_in, activation=nn.RELU,
                order=StorageOrder.COL_MAJOR if i == 0 else StorageOrder.ROW_MAJOR,
            )
        )
        fan_in = h
    sparsity = nn.SparsityConfig()
    if cfg.use_lsh:
        sparsity = nn.SparsityConfig(
            use_lsh=True,
            hash=lsh.HashFamilyParams(
                family=cfg.hash_family, k=cfg.k, l=cfg.l, input_dim=fan_in,
                seed=cfg.seed, bin_size=cfg.bin_size,
                densification_cap=cfg.densification_cap,
            ),
            min_active=cfg.min_active,
        )
    layer_cfgs.append(
        nn.LayerConfig(
            n=label_dim, m=fan_in, activation=nn.SOFTMAX,
            order=StorageOrder.ROW_MAJOR, sparsity=sparsity,
        )
    )
    net = nn.Network.build(layer_cfgs, input_dim, cfg.seed)
    quant.apply_mode(cfg.bf16_mode, net, cfg.bf16_rounding)
    return net


@dataclass
class MaintenanceStats:
    rounds: int = 0
    changed_neurons: int = 0
    rebuilds: int = 0


class Trainer:
    def __init__(self, net: nn.Network, cfg: TrainConfig):
        self.net = net
        self.cfg = cfg
        self.lane = LaneConfig(lane_width=cfg.lane_width, enabled=cfg.lane_enabled)
        self.opt = Adam(
            net,
            AdamHyper(lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps,
                      bias_correction=cfg.bias_correction),
            lane=self.lane,
            bf16_weights=quant.QuantMode(cfg.bf16_mode) is quant.QuantMode.BOTH,
            rounding=cfg.bf16_rounding,
        )
        self.batches_done = 0
        self.maintenance_stats = MaintenanceStats()
        self.train_seconds = 0.0
        self.last_trace: list[tuple[float, float]] = []

    # -- per-sample pipeline --------------------------------------------

    def _sample_rng(self, epoch: int, idx: int) -> np.random.Generator:
        return np.random.default_rng([self.cfg.seed, epoch, idx])

    def _process_sample(self, data, idx: int, epoch: int, apply_now: bool):
        x_idx, x_val, labels = data.example(idx)
        x = (x_idx, x_val)
        quantize = quant.QuantMode(self.net.quant_mode) in (
            quant.QuantMode.BOTH, quant.QuantMode.ACTIVATIONS,
        )
        acts = self.net.forward_sample(
            x, labels=labels, rng=self._sample_rng(epoch, idx), lane=self.lane,
            quantize_acts=quantize, rounding=self.cfg.bf16_rounding,
        )
        loss, delta = self.net.loss_and_output_delta(acts[-1], labels)

        blocks = []
        touched = 0
        total = 0
        for li in range(len(self.net.layers) - 1, -1, -1):
            layer = self.net.layers[li]
            if li == 0:
                x_in = x
            else:
                prev = acts[li - 1]
                dense = np.zeros(self.net.layers[li - 1].cfg.n, dtype=np.float32)
                dense[prev.ids] = prev.activations
                x_in = dense
            block, input_grad = layer.backward(
                x_in, acts[li], delta, self.lane, need_input_grad=li > 0
            )
            acts[li].errors = delta
            if apply_now:
                self.opt.apply_sparse(li, block)
            else:
                blocks.append((li, block))
            touched += len(block.ids) * len(block.in_indices)
            total += layer.cfg.n * layer.cfg.m
            if li > 0:
                prev = acts[li - 1]
                upstream = input_grad[prev.ids]
                delta = upstream * (prev.activations > 0)

        lsh_fracs = [
            len(a.ids) / layer.cfg.n
            for a, layer in zip(acts, self.net.layers)
            if layer.cfg.sparsity.use_lsh
        ]
        active_frac = float(np.mean(lsh_fracs)) if lsh_fracs else 1.0
        return loss, active_frac, touched / total, blocks

    # -- batch / epoch orchestration -------------------------------------

    def train_epoch(self, data, epoch: int, eval_data=None) -> EpochMetrics:
        cfg = self.cfg
        n = data.num_examples
        t0 = time.perf_counter()
        losses: list[float] = []
        trace: list[tuple[float, float]] = []

        pool = ThreadPoolExecutor(max_workers=cfg.threads) if cfg.threads > 1 else None
        try:
            for start in range(0, n, cfg.batch_size):
                idxs = range(start, min(start + cfg.batch_size, n))
                self.opt.step()
                if pool is None:
                    results = [
                        (i, self._process_sample(data, i, epoch, cfg.hogwild))
                        for i in idxs
                    ]
                else:
                    chunks = np.array_split(np.asarray(idxs), cfg.threads)

                    def run_chunk(chunk):
                        return [
                            (int(i), self._process_sample(data, int(i), epoch, cfg.hogwild))
                            for i in chunk
                        ]

                    results = []
                    for part in pool.map(run_chunk, chunks):
                        results.extend(part)
                    results.sort(key=lambda r: r[0])
                if not cfg.hogwild:
                    for _, (_, _, _, blocks) in results:
                        for li, block in blocks:
                            self.opt.apply_sparse(li, block)
                for _, (loss, afrac, tfrac, _) in results:
                    losses.append(loss)
                    trace.append((afrac, tfrac))
                self.net.train_steps += 1
                self.batches_done += 1
                if self.batches_done % cfg.rehash_period == 0:
                    self.maintenance()
        finally:
            if pool is not None:
                pool.shutdown()
        self.maintenance()

        self.train_seconds += time.perf_counter() - t0
        self.last_trace = trace
        eval_set = eval_data if eval_data is not None else data
        p1 = evaluate_p_at_1(self.net, eval_set) if eval_set.num_examples else 0.0
        afr = np.array([a for a, _ in trace]) if trace else np.array([1.0])
        tfr = np.array([t for _, t in trace]) if trace else np.array([0.0])
        return EpochMetrics(
            epoch=epoch,
            wall_seconds=self.train_seconds,
            loss=float(np.mean(losses)) if losses else 0.0,
            p_at_1=p1,
            active_frac=float(np.mean(afr)),
            touched_frac=float(np.mean(tfr)),
        )

    def train(self, data, eval_data=None) -> list[EpochMetrics]:
        metrics = [self.train_epoch(data, e, eval_data) for e in range(self.cfg.epochs)]
        if self.cfg.metrics_path:
            write_metrics_csv(self.cfg.metrics_path, metrics)
        return metrics

    # -- hash-table maintenance -------------------------------------------

    def maintenance(self) -> MaintenanceStats:
        """Exclusive phase: re-place neurons whose codes changed; periodically
        rebuild from scratch. Requires no concurrent queries."""
        stats = self.maintenance_stats
        did_work = False
        for layer in self.net.layers:
            if layer.tables is None:
                continue
            did_work = True
            rows = np.ascontiguousarray(layer.weights.as_matrix())
            if (stats.rounds + 1) % self.cfg.rebuild_every == 0:
                layer.tables.rebuild(rows)
                stats.rebuilds += 1
            else:
                codes = lsh.compute_codes_batch(layer.tables.params, rows)
                for nid in range(layer.cfg.n):
                    if not np.array_equal(layer.tables.codes_of(nid), codes[nid]):
                        layer.tables.update_codes(nid, codes[nid])
                        stats.changed_neurons += 1
        if did_work:
            stats.rounds += 1
        return stats


def evaluate_p_at_1(net: nn.Network, data) -> float:
    """Fraction of examples whose top output neuron — over all output neurons,
    computed densely in fp32 — is among the true labels."""
    if data.num_examples == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    mats = [np.ascontiguousarray(l.weights.as_matrix()) for l in net.layers]
    biases = [l.weights.bias for l in net.layers]
    hits = 0
    chunk = 512
    for start in range(0, data.num_examples, chunk):
        stop = min(start + chunk, data.num_examples)
        hidden = np.empty((stop - start, net.layers[0].cfg.n), dtype=np.float32)
        labels = []
        for r, k in enumerate(range(start, stop)):
            idx, val, lab = data.example(k)
            hidden[r] = mats[0][:, idx] @ val
            labels.append(lab)
        hidden = np.maximum(hidden + biases[0], 0.0)
        for mat, bias in zip(mats[1:-1], biases[1:-1]):
            hidden = np.maximum(hidden @ mat.T + bias, 0.0)
        logits = hidden @ mats[-1].T + biases[-1]
        top = np.argmax(logits, axis=1)
        for r in range(stop - start):
            if top[r] in labels[r]:
                hits += 1
    return hits / data.num_examples


def fit(train_data, cfg: TrainConfig, eval_data=None):
    """Build a network for the dataset, train it, return (net, trainer, metrics)."""
    net = build_network(train_data.input_dim, train_data.label_dim, cfg)
    trainer = Trainer(net, cfg)
    metrics = trainer.train(train_data, eval_data)
    return net, trainer, metrics
