"""Scalar reference and lane-parallel kernels for the training hot loops.

The lane variants step through buffers ``lane_width`` float32 elements at a
time, modeling one wide-register SIMD instruction per step (multiply the
lanes, reduce, accumulate). The scalar variants are plain loops; every lane
kernel is tested against its scalar twin.

Products are formed in float32 on both paths; dot-style reductions accumulate
in float64, so the two paths differ only by summation order (~1e-12), well
inside the 1e-6 contract. The trailing ``len % lane_width`` elements always go
through the scalar path.

Storage-order rules for the matrix-vector kernels:

* dense input  -> weights must be row-major (each neuron's weight vector
  contiguous); the product decomposes into dense inner products per active
  neuron.
* sparse input -> weights must be column-major (each fan-in coordinate
  contiguous); the product accumulates broadcast-scaled columns into a dense
  output.

A row-major buffer read as its transpose is column-major and vice versa,
which is how backprop reuses the same two kernels.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class StorageOrder(str, Enum):
    ROW_MAJOR = "row"  # w[i, j] = buffer[i * m + j]
    COL_MAJOR = "col"  # w[i, j] = buffer[j * n + i]


class LayoutError(ValueError):
    """Raised when an input's density and the weight storage order disagree."""


@dataclass(frozen=True)
class LaneConfig:
    """Lane width is elements per step: 16 or 32 for 32-bit values in a
    512-bit register. ``enabled=False`` selects the scalar reference path."""

    lane_width: int = 16
    enabled: bool = True

    def __post_init__(self):
        if self.lane_width < 1 or self.lane_width & (self.lane_width - 1):
            raise ValueError(f"lane_width must be a power of two, got {self.lane_width}")


@dataclass(frozen=True)
class AdamHyper:
    lr: float = 0.0001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    bias_correction: bool = True


def dot_dense(x: np.ndarray, w: np.ndarray, cfg: LaneConfig) -> float:
    """Inner product of two equal-length dense float32 vectors."""
    if len(x) != len(w):
        raise ValueError(f"length mismatch: {len(x)} vs {len(w)}")
    acc = 0.0
    if cfg.enabled:
        lw = cfg.lane_width
        head = len(x) - len(x) % lw
        for off in range(0, head, lw):
            prod = x[off : off + lw] * w[off : off + lw]
            acc += prod.sum(dtype=np.float64)
        for i in range(head, len(x)):
            acc += float(x[i] * w[i])
    else:
        for i in range(len(x)):
            acc += float(x[i] * w[i])
    return float(acc)


def matvec_dense_x(x: np.ndarray, weights, active, cfg: LaneConfig):
    """y_i = <w_i, x> for i in ``active``, dense x, row-major weights.

    Returns (ids, scores) arrays in the iteration order of ``active``.
    """
    if weights.order is not StorageOrder.ROW_MAJOR:
        raise LayoutError("dense input requires row-major weight storage")
    if len(x) != weights.m:
        raise ValueError(f"input length {len(x)} != fan-in {weights.m}")
    ids = np.asarray(active, dtype=np.int64)
    scores = np.empty(len(ids), dtype=np.float32)
    for pos, i in enumerate(ids):
        scores[pos] = dot_dense(x, weights.row(int(i)), cfg)
    return ids, scores


def matvec_sparse_x(x_indices, x_values, weights, cfg: LaneConfig) -> np.ndarray:
    """y = W x for sparse x, column-major weights; returns dense y (len n).

    Walks the non-zeros of x; each scales one contiguous column of W into the
    output (the broadcast-multiply-accumulate direction).
    """
    if weights.order is not StorageOrder.COL_MAJOR:
        raise LayoutError("sparse input requires column-major weight storage")
    x_indices = np.asarray(x_indices, dtype=np.int64)
    x_values = np.asarray(x_values, dtype=np.float32)
    if len(x_indices) and (x_indices.min() < 0 or x_indices.max() >= weights.m):
        raise IndexError(f"sparse index out of range for fan-in {weights.m}")
    n = weights.n
    acc = np.zeros(n, dtype=np.float64)
    if cfg.enabled:
        lw = cfg.lane_width
        head = n - n % lw
        for j, v in zip(x_indices, x_values):
            col = weights.col(int(j))
            for off in range(0, head, lw):
                acc[off : off + lw] += v * col[off : off + lw]
            for i in range(head, n):
                acc[i] += float(v * col[i])
    else:
        for j, v in zip(x_indices, x_values):
            col = weights.col(int(j))
            for i in range(n):
                acc[i] += float(v * col[i])
    return acc.astype(np.float32)


def adam_update(w, grad, m, v, hyper: AdamHyper, t: int, cfg: LaneConfig) -> None:
    """One ADAM step over flat float32 buffers, in place on w, m, v.

    m <- b1*m + (1-b1)*g ; v <- b2*v + (1-b2)*g^2 ; with bias correction
    m^ = m/(1-b1^t), v^ = v/(1-b2^t) ; w <- w - lr * m^ / (sqrt(v^) + eps).
    Elementwise over the 1-D view, so both paths are bit-identical per lane.
    """
    if not (len(w) == len(grad) == len(m) == len(v)):
        raise ValueError("w, grad, m, v must have equal lengths")
    if t < 1:
        raise ValueError(f"step counter must be >= 1, got {t}")
    b1 = np.float32(hyper.beta1)
    b2 = np.float32(hyper.beta2)
    c1 = np.float32(1.0 - hyper.beta1)
    c2 = np.float32(1.0 - hyper.beta2)
    lr = np.float32(hyper.lr)
    eps = np.float32(hyper.eps)
    if hyper.bias_correction:
        inv_bc1 = np.float32(1.0 / (1.0 - hyper.beta1**t))
        inv_bc2 = np.float32(1.0 / (1.0 - hyper.beta2**t))
    else:
        inv_bc1 = np.float32(1.0)
        inv_bc2 = np.float32(1.0)

    def _span(sl):
        g = grad[sl]
        m[sl] = b1 * m[sl] + c1 * g
        v[sl] = b2 * v[sl] + c2 * (g * g)
        w[sl] = w[sl] - lr * (m[sl] * inv_bc1) / (np.sqrt(v[sl] * inv_bc2) + eps)

    if cfg.enabled:
        lw = cfg.lane_width
        head = len(w) - len(w) % lw
        for off in range(0, head, lw):
            _span(slice(off, off + lw))
        for i in range(head, len(w)):
            _span(slice(i, i + 1))
    else:
        for i in range(len(w)):
            _span(slice(i, i + 1))


def bin_argmax(values: np.ndarray, cfg: LaneConfig) -> tuple[int, float]:
    """Index and value of the maximum; ties break to the lowest index."""
    if len(values) == 0:
        raise ValueError("bin_argmax on empty array")
    if cfg.enabled:
        best_i = 0
        best_v = -np.inf
        lw = cfg.lane_width
        for off in range(0, len(values), lw):
            chunk = values[off : off + lw]
            local = int(np.argmax(chunk))
            if float(chunk[local]) > best_v:
                best_v = float(chunk[local])
                best_i = off + local
        return best_i, best_v
    best_i = 0
    best_v = float(values[0])
    for i in range(1, len(values)):
        if float(values[i]) > best_v:
            best_v = float(values[i])
            best_i = i
    return best_i, best_v
