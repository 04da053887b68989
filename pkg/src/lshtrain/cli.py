"""Command-line entry points: ``lshtrain train|eval|bench --config cfg.json``.

Config files are flat JSON objects; every key maps to a TrainConfig field or
one of the dataset keys (train_path, test_path, one_based, num_examples,
input_dim, label_dim). Flag overrides beat file values. Exit codes: 0 success,
1 training failure, 2 unusable config or missing file.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from . import bench, sparse_data
from .trainer import TrainConfig, Trainer, build_network, evaluate_p_at_1
from .nn import Network


class ConfigError(ValueError):
    pass


_RUN_KEYS = ("train_path", "test_path", "one_based", "num_examples", "input_dim", "label_dim")
_TRAIN_FIELDS = {f.name: f for f in dataclasses.fields(TrainConfig)}


@dataclasses.dataclass
class RunConfig:
    train: TrainConfig
    train_path: str | None = None
    test_path: str | None = None
    one_based: bool = False
    num_examples: int | None = None
    input_dim: int | None = None
    label_dim: int | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        train_kwargs = {}
        run_kwargs = {}
        for key, value in d.items():
            if key in _TRAIN_FIELDS:
                train_kwargs[key] = value
            elif key in _RUN_KEYS:
                run_kwargs[key] = value
            else:
                raise ConfigError(f"unknown config key {key!r}")
        try:
            return cls(train=TrainConfig(**train_kwargs), **run_kwargs)
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e)) from None

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self.train)
        out["hidden_sizes"] = list(out["hidden_sizes"])
        for key in _RUN_KEYS:
            value = getattr(self, key)
            if key == "one_based" or value is not None:
                out[key] = value
        return out

    def header(self) -> sparse_data.DatasetHeader | None:
        dims = (self.num_examples, self.input_dim, self.label_dim)
        if all(v is None for v in dims):
            return None
        if any(v is None for v in dims):
            raise ConfigError(
                "give all of num_examples/input_dim/label_dim or none (header line in file)"
            )
        return sparse_data.DatasetHeader(*dims)


def load_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: not valid JSON: {e}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return RunConfig.from_dict(raw)


def apply_overrides(rc: RunConfig, args) -> RunConfig:
    over = {}
    if args.threads is not None:
        over["threads"] = args.threads
    if args.seed is not None:
        over["seed"] = args.seed
    if args.no_lanes:
        over["lane_enabled"] = False
    if args.bf16 is not None:
        over["bf16_mode"] = args.bf16
    if args.metrics is not None:
        over["metrics_path"] = args.metrics
    if over:
        try:
            rc = dataclasses.replace(rc, train=dataclasses.replace(rc.train, **over))
        except ValueError as e:
            raise ConfigError(str(e)) from None
    return rc


def _load_dataset(rc: RunConfig, path) -> sparse_data.SparseBatch:
    if path is None:
        raise ConfigError("config is missing train_path")
    return sparse_data.load_libsvm(path, header=rc.header(), one_based=rc.one_based)


def run_train(rc: RunConfig) -> int:
    cfg = rc.train
    if cfg.metrics_path is None:
        cfg = dataclasses.replace(cfg, metrics_path="metrics.csv")
    if cfg.checkpoint_path is None:
        cfg = dataclasses.replace(cfg, checkpoint_path="model.ckpt")
    data = _load_dataset(rc, rc.train_path)
    eval_data = None
    if rc.test_path is not None:
        eval_data = sparse_data.load_libsvm(rc.test_path, one_based=rc.one_based)
    net = build_network(data.input_dim, data.label_dim, cfg)
    trainer = Trainer(net, cfg)
    metrics = trainer.train(data, eval_data)
    net.save(cfg.checkpoint_path)
    last = metrics[-1] if metrics else None
    if last is not None:
        print(f"trained {cfg.epochs} epochs: loss={last.loss:.4f} p@1={last.p_at_1:.4f} "
              f"active={last.active_frac:.3f} wall={last.wall_seconds:.1f}s")
    print(f"metrics: {cfg.metrics_path}\ncheckpoint: {cfg.checkpoint_path}")
    return 0


def run_eval(rc: RunConfig) -> int:
    if rc.train.checkpoint_path is None:
        raise ConfigError("eval needs checkpoint_path in the config")
    path = rc.test_path if rc.test_path is not None else rc.train_path
    if path is None:
        raise ConfigError("eval needs test_path (or train_path) in the config")
    net = Network.load(rc.train.checkpoint_path)
    data = sparse_data.load_libsvm(path, one_based=rc.one_based)
    p1 = evaluate_p_at_1(net, data)
    print(f"p_at_1={p1:.6f}")
    return 0


def run_bench(rc: RunConfig, ablation: str) -> int:
    cfg = rc.train
    out_path = cfg.metrics_path or "bench.csv"
    data = _load_dataset(rc, rc.train_path)
    eval_data = None
    if rc.test_path is not None:
        eval_data = sparse_data.load_libsvm(rc.test_path, one_based=rc.one_based)
    rows = bench.run_ablation(ablation, cfg, data, eval_data)
    bench.write_bench_csv(out_path, rows)
    for r in rows:
        print(f"{r.ablation}/{r.variant}: {r.mean_epoch_seconds:.3f}s/epoch "
              f"(x{r.ratio:.3f}) final_loss={r.final_loss:.4f}")
    print(f"bench csv: {out_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lshtrain")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("train", "eval", "bench"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--no-lanes", action="store_true")
        p.add_argument("--bf16", choices=["both", "activations", "none"], default=None)
        p.add_argument("--metrics", default=None)
        if name == "bench":
            p.add_argument("--ablation", choices=list(bench.ABLATIONS), required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        rc = apply_overrides(load_config(args.config), args)
        if args.command == "train":
            return run_train(rc)
        if args.command == "eval":
            return run_eval(rc)
        return run_bench(rc, args.ablation)
    except (ConfigError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - the CLI boundary reports, not raises
        print(f"training error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
