"""Layers and networks: contiguous parameter buffers with explicit storage
order, hash-driven active-set selection, and backprop restricted to the
active x nonzero-input weight block.

The layout policy follows the kernel rules: a layer whose input is sparse
(the data layer) stores column-major; layers fed by dense activations store
row-major. Backprop reuses the same two kernels through transposed views —
a row-major buffer read as its transpose is column-major, so the gradient
products never need a physical transpose.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import kernels, lsh, quant
from .kernels import LaneConfig, StorageOrder

RELU = "relu"
SOFTMAX = "softmax"

_CKPT_MAGIC = b"LSHTRAIN-CKPT\n"


@dataclass(eq=False)
class LayerWeights:
    """One contiguous float32 buffer backing all n neurons of a layer.

    Addressing: row-major w[i,j] = buffer[i*m+j]; column-major
    w[i,j] = buffer[j*n+i]. ``transposed`` retags the same buffer as the
    transpose (dims and order swapped) without copying.
    """

    buffer: np.ndarray
    order: StorageOrder
    n: int
    m: int
    bias: np.ndarray | None = None

    def __post_init__(self):
        self.buffer = np.asarray(self.buffer, dtype=np.float32)
        if self.buffer.ndim != 1 or self.buffer.size != self.n * self.m:
            raise ValueError(f"buffer must be flat with n*m={self.n * self.m} entries")
        if self.bias is not None:
            self.bias = np.asarray(self.bias, dtype=np.float32)
            if self.bias.shape != (self.n,):
                raise ValueError(f"bias must have shape ({self.n},)")

    def get(self, i: int, j: int) -> float:
        if self.order is StorageOrder.ROW_MAJOR:
            return float(self.buffer[i * self.m + j])
        return float(self.buffer[j * self.n + i])

    def row(self, i: int) -> np.ndarray:
        if self.order is StorageOrder.ROW_MAJOR:
            return self.buffer[i * self.m : (i + 1) * self.m]
        return self.buffer[i :: self.n]

    def col(self, j: int) -> np.ndarray:
        if self.order is StorageOrder.COL_MAJOR:
            return self.buffer[j * self.n : (j + 1) * self.n]
        return self.buffer[j :: self.m]

    def transposed(self) -> "LayerWeights":
        flipped = (
            StorageOrder.COL_MAJOR
            if self.order is StorageOrder.ROW_MAJOR
            else StorageOrder.ROW_MAJOR
        )
        return LayerWeights(buffer=self.buffer, order=flipped, n=self.m, m=self.n)

    def as_matrix(self) -> np.ndarray:
        """(n, m) view of the buffer (no copy)."""
        if self.order is StorageOrder.ROW_MAJOR:
            return self.buffer.reshape(self.n, self.m)
        return self.buffer.reshape(self.m, self.n).T

    def flat_position(self, i, j):
        """Flat buffer position(s) of w[i, j] under this storage order."""
        if self.order is StorageOrder.ROW_MAJOR:
            return i * self.m + j
        return j * self.n + i


@dataclass
class SparsityConfig:
    use_lsh: bool = False
    hash: lsh.HashFamilyParams | None = None
    min_active: int = 1

    def __post_init__(self):
        if self.use_lsh:
            if self.hash is None:
                raise ValueError("use_lsh requires hash family params")
            if self.min_active < 1:
                raise ValueError("min_active must be >= 1 when use_lsh")


@dataclass
class LayerConfig:
    n: int
    m: int
    activation: str
    order: StorageOrder
    sparsity: SparsityConfig = field(default_factory=SparsityConfig)

    def __post_init__(self):
        if self.activation not in (RELU, SOFTMAX):
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass
class ActiveSet:
    """Per-sample sparse state of one layer: which neurons ran and their values."""

    ids: np.ndarray
    activations: np.ndarray
    errors: np.ndarray | None = None


@dataclass
class GradBlock:
    """Weight gradients for (active neuron, nonzero input coordinate) pairs.

    ``wgrad[a, b]`` is the gradient for weight (ids[a], in_indices[b]); bias
    gradients cover every active neuron.
    """

    ids: np.ndarray
    in_indices: np.ndarray
    wgrad: np.ndarray
    bgrad: np.ndarray


def touched_weight_fraction(block: GradBlock, n: int, m: int) -> float:
    """Fraction of the layer's n*m weights touched by this block."""
    return (len(block.ids) * len(block.in_indices)) / float(n * m)


def _split_input(x):
    """Normalize layer input to (indices, values, dense_or_none)."""
    if isinstance(x, np.ndarray):
        nz = np.flatnonzero(x)
        return nz.astype(np.int64), x[nz], x
    idx, val = x
    return np.asarray(idx, dtype=np.int64), np.asarray(val, dtype=np.float32), None


class Layer:
    def __init__(self, cfg: LayerConfig, weights: LayerWeights,
                 tables: lsh.LshTableSet | None = None):
        self.cfg = cfg
        self.weights = weights
        self.tables = tables

    @classmethod
    def create(cls, cfg: LayerConfig, rng: np.random.Generator) -> "Layer":
        scale = np.sqrt(2.0 / cfg.m) if cfg.activation == RELU else np.sqrt(1.0 / cfg.m)
        mat = rng.normal(0.0, scale, size=(cfg.n, cfg.m)).astype(np.float32)
        if cfg.order is StorageOrder.ROW_MAJOR:
            buffer = np.ascontiguousarray(mat).reshape(-1)
        else:
            buffer = np.ascontiguousarray(mat.T).reshape(-1)
        weights = LayerWeights(
            buffer=buffer, order=cfg.order, n=cfg.n, m=cfg.m,
            bias=np.zeros(cfg.n, dtype=np.float32),
        )
        layer = cls(cfg, weights)
        if cfg.sparsity.use_lsh:
            layer.tables = lsh.LshTableSet(cfg.sparsity.hash)
            layer.tables.rebuild(np.ascontiguousarray(weights.as_matrix()))
        return layer

    def select_active(self, x, labels=None, rng: np.random.Generator | None = None) -> np.ndarray:
        """Active neuron ids: hash-table hits, union true labels (training,
        output layer), padded with random distinct neurons up to min_active."""
        n = self.cfg.n
        if not self.cfg.sparsity.use_lsh:
            return np.arange(n, dtype=np.int64)
        hits = self.tables.query(x)
        if labels is not None:
            hits = hits | {int(l) for l in labels}
        want = min(self.cfg.sparsity.min_active, n)
        if len(hits) < want:
            if rng is None:
                raise ValueError("rng required to pad the active set to min_active")
            for c in rng.permutation(n):
                if int(c) not in hits:
                    hits.add(int(c))
                    if len(hits) >= want:
                        break
        return np.array(sorted(hits), dtype=np.int64)

    def forward(self, x, active: np.ndarray, lane: LaneConfig = LaneConfig()) -> ActiveSet:
        """Activations for the active ids only; softmax normalizes over them."""
        w = self.weights
        if isinstance(x, np.ndarray):
            ids, scores = kernels.matvec_dense_x(x, w, active, lane)
        else:
            idx, val = x
            if w.order is not StorageOrder.COL_MAJOR:
                raise kernels.LayoutError("sparse input requires column-major weight storage")
            full = kernels.matvec_sparse_x(idx, val, w, lane)
            ids = np.asarray(active, dtype=np.int64)
            scores = full[ids]
        z = scores + w.bias[ids]
        if self.cfg.activation == RELU:
            a = np.maximum(z, np.float32(0.0))
        else:
            e = np.exp((z - z.max()).astype(np.float64))
            a = (e / e.sum()).astype(np.float32)
        return ActiveSet(ids=ids, activations=a)

    def backward(self, x, act: ActiveSet, delta: np.ndarray,
                 lane: LaneConfig = LaneConfig(), need_input_grad: bool = True):
        """Gradients from pre-activation errors ``delta`` (aligned to act.ids).

        Returns (GradBlock, input_grad); the input gradient is the transpose
        product computed through the retagged buffer view.
        """
        if len(delta) != len(act.ids):
            raise ValueError("delta does not match the active set")
        in_idx, in_val, dense_x = _split_input(x)
        delta = np.asarray(delta, dtype=np.float32)
        block = GradBlock(
            ids=act.ids,
            in_indices=in_idx,
            wgrad=np.outer(delta, in_val),
            bgrad=delta.copy(),
        )
        input_grad = None
        if need_input_grad:
            wt = self.weights.transposed()
            if wt.order is StorageOrder.COL_MAJOR:
                input_grad = kernels.matvec_sparse_x(act.ids, delta, wt, lane)
            else:
                dense_delta = np.zeros(self.cfg.n, dtype=np.float32)
                dense_delta[act.ids] = delta
                _, input_grad = kernels.matvec_dense_x(
                    dense_delta, wt, np.arange(self.cfg.m, dtype=np.int64), lane
                )
        return block, input_grad


class Network:
    """Stack of layers; the last one is the softmax-over-active output layer."""

    def __init__(self, layers: list[Layer], input_dim: int):
        self.layers = layers
        self.input_dim = input_dim
        self.quant_mode = quant.QuantMode.NONE
        self.train_steps = 0

    @classmethod
    def build(cls, layer_cfgs: list[LayerConfig], input_dim: int, seed: int) -> "Network":
        rng = np.random.default_rng(seed)
        return cls([Layer.create(c, rng) for c in layer_cfgs], input_dim)

    @property
    def output_dim(self) -> int:
        return self.layers[-1].cfg.n

    def forward_sample(self, x, labels=None, rng=None,
                       lane: LaneConfig = LaneConfig(),
                       quantize_acts: bool = False,
                       rounding: str = quant.TRUNC) -> list[ActiveSet]:
        acts: list[ActiveSet] = []
        cur = x
        for li, layer in enumerate(self.layers):
            last = li == len(self.layers) - 1
            active = layer.select_active(cur, labels if last else None, rng)
            act = layer.forward(cur, active, lane)
            if quantize_acts:
                act.activations = quant.roundtrip(act.activations, rounding)
            acts.append(act)
            if not last:
                dense = np.zeros(layer.cfg.n, dtype=np.float32)
                dense[act.ids] = act.activations
                cur = dense
        return acts

    def loss_and_output_delta(self, out: ActiveSet, labels) -> tuple[float, np.ndarray]:
        """Cross-entropy against the 1/k multi-hot target over the active set."""
        labels = np.asarray(labels, dtype=np.int64)
        k = len(labels)
        if k == 0:
            raise ValueError("sample has no labels")
        pos = np.searchsorted(out.ids, labels)
        if np.any(pos >= len(out.ids)) or np.any(out.ids[np.minimum(pos, len(out.ids) - 1)] != labels):
            raise ValueError("a true label is missing from the output active set")
        target = np.zeros(len(out.ids), dtype=np.float32)
        target[pos] = np.float32(1.0 / k)
        p = out.activations.astype(np.float64)
        loss = float(-(np.log(np.maximum(p[pos], 1e-300)) / k).sum())
        delta = out.activations - target
        return loss, delta

    def save(self, path) -> None:
        meta = {
            "version": 1,
            "input_dim": self.input_dim,
            "layers": [
                {
                    "n": l.cfg.n,
                    "m": l.cfg.m,
                    "order": l.cfg.order.value,
                    "activation": l.cfg.activation,
                }
                for l in self.layers
            ],
        }
        blob = json.dumps(meta, sort_keys=True).encode("utf-8")
        with open(path, "wb") as f:
            f.write(_CKPT_MAGIC)
            f.write(struct.pack("<Q", len(blob)))
            f.write(blob)
            for l in self.layers:
                f.write(l.weights.buffer.tobytes())
                f.write(l.weights.bias.tobytes())

    @classmethod
    def load(cls, path) -> "Network":
        with open(path, "rb") as f:
            magic = f.read(len(_CKPT_MAGIC))
            if magic != _CKPT_MAGIC:
                raise ValueError(f"not a checkpoint file: {path}")
            (blen,) = struct.unpack("<Q", f.read(8))
            meta = json.loads(f.read(blen).decode("utf-8"))
            if meta.get("version") != 1:
                raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
            layers = []
            for lm in meta["layers"]:
                n, m = lm["n"], lm["m"]
                buf = np.frombuffer(f.read(4 * n * m), dtype=np.float32).copy()
                bias = np.frombuffer(f.read(4 * n), dtype=np.float32).copy()
                cfg = LayerConfig(
                    n=n, m=m, activation=lm["activation"], order=StorageOrder(lm["order"])
                )
                layers.append(
                    Layer(cfg, LayerWeights(buffer=buf, order=cfg.order, n=n, m=m, bias=bias))
                )
        return cls(layers, meta["input_dim"])
