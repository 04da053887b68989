"""ADAM state over the layers' contiguous buffers, applied lazily: only the
flat positions named by a gradient block get a step; everything else —
including its momentum and velocity — is left untouched (textbook dense ADAM
would decay every entry every step, so dense equivalence holds exactly when
every entry is touched).

The step counter advances once per optimizer step (per batch), never per
sample. Under HOGWILD, apply_sparse may run concurrently over overlapping
supports with no locks; lost updates are accepted by contract. Because the
momentum and velocity buffers are scattered separately, a racing thread can
leave a mixed (m, v) pair whose ratio is unbounded — a consistent pair never
exceeds ~(1-b1)/sqrt(1-b2) ~ 3.2 — so each entry's step is capped at
8*lr. The cap is unreachable without a race and leaves serial runs
bit-identical.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from . import kernels, quant
from .kernels import AdamHyper, LaneConfig
from .nn import GradBlock, Layer


@dataclass
class AdamState:
    """m/v buffers congruent to one layer's weight buffer and bias."""

    m_w: np.ndarray
    v_w: np.ndarray
    m_b: np.ndarray
    v_b: np.ndarray

    @classmethod
    def for_layer(cls, layer: Layer) -> "AdamState":
        return cls(
            m_w=np.zeros_like(layer.weights.buffer),
            v_w=np.zeros_like(layer.weights.buffer),
            m_b=np.zeros_like(layer.weights.bias),
            v_b=np.zeros_like(layer.weights.bias),
        )


class Adam:
    def __init__(self, net, hyper: AdamHyper, lane: LaneConfig = LaneConfig(),
                 bf16_weights: bool = False, rounding: str = quant.TRUNC):
        self.net = net
        self.hyper = hyper
        self.lane = lane
        self.bf16_weights = bf16_weights
        self.rounding = rounding
        self.states = [AdamState.for_layer(l) for l in net.layers]
        self.t = 0
        self._lock = threading.Lock()

    def step(self) -> int:
        """Advance the batch-level step counter; returns the new t."""
        with self._lock:
            self.t += 1
            return self.t

    def apply_sparse(self, layer_index: int, block: GradBlock) -> None:
        """One ADAM step at counter t for every position in the block."""
        if self.t < 1:
            raise ValueError("step() must run before gradients are applied")
        layer = self.net.layers[layer_index]
        state = self.states[layer_index]
        w = layer.weights
        if len(block.ids):
            if block.ids.min() < 0 or block.ids.max() >= w.n:
                raise IndexError(f"neuron id out of range for layer of {w.n}")
            if len(block.in_indices):
                if block.in_indices.min() < 0 or block.in_indices.max() >= w.m:
                    raise IndexError(f"input index out of range for fan-in {w.m}")
                pos = w.flat_position(
                    block.ids[:, None], block.in_indices[None, :]
                ).ravel()
                self._apply_at(w.buffer, state.m_w, state.v_w, pos, block.wgrad.ravel())
            bpos = block.ids.astype(np.int64)
            self._apply_at(w.bias, state.m_b, state.v_b, bpos, block.bgrad)

    def _apply_at(self, buf, m, v, pos, grad) -> None:
        before = buf[pos]
        sub_w = before.copy()
        sub_m = m[pos]
        sub_v = v[pos]
        kernels.adam_update(sub_w, np.asarray(grad, dtype=np.float32), sub_m, sub_v,
                            self.hyper, self.t, self.lane)
        cap = np.float32(8.0 * self.hyper.lr)
        delta = sub_w - before
        hot = np.abs(delta) > cap
        if hot.any():  # only reachable through a racing mixed (m, v) pair
            sub_w = np.where(hot, before + np.sign(delta) * cap, sub_w)
        if self.bf16_weights:
            sub_w = quant.roundtrip(sub_w, self.rounding)
        buf[pos] = sub_w
        m[pos] = sub_m
        v[pos] = sub_v
