"""Coalesced sparse dataset storage and the multi-label libsvm text format.

A batch keeps every example's feature indices/values in one long contiguous
array pair plus an offsets array, and the labels in the same scheme, so
threads walking consecutive examples hit shared cache lines instead of one
heap allocation per example. ``fragmented_copy`` produces the deliberately
per-example-allocated layout for the memory benchmark.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np


class ParseError(ValueError):
    """Malformed token; message carries the 1-based line number."""


class RangeError(ValueError):
    """Feature or label id outside the declared dimensions."""


class FormatError(ValueError):
    """Structurally invalid content (duplicate ids, count mismatch)."""


@dataclass
class DatasetHeader:
    num_examples: int
    input_dim: int
    label_dim: int

    def __post_init__(self):
        if self.num_examples < 0:
            raise ValueError(f"num_examples must be >= 0, got {self.num_examples}")
        if self.input_dim <= 0 or self.label_dim <= 0:
            raise ValueError("input_dim and label_dim must be positive")


@dataclass(eq=False)
class SparseBatch:
    """Coalesced batch: flat index/value arrays indexed by an offsets array.

    Immutable after construction; example k owns ``indices[offsets[k]:
    offsets[k+1]]`` (strictly increasing within the example) and likewise for
    labels. Slicing produces views over the same payload arrays.
    """

    indices: np.ndarray
    values: np.ndarray
    offsets: np.ndarray
    label_indices: np.ndarray
    label_offsets: np.ndarray
    input_dim: int
    label_dim: int

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int32)
        self.values = np.asarray(self.values, dtype=np.float32)
        self.offsets = np.asarray(self.offsets, dtype=np.int64)
        self.label_indices = np.asarray(self.label_indices, dtype=np.int32)
        self.label_offsets = np.asarray(self.label_offsets, dtype=np.int64)
        if __debug__:
            self.validate()

    @property
    def num_examples(self) -> int:
        return len(self.offsets) - 1

    def example(self, k: int):
        """(feature_indices, feature_values, label_ids) views for example k."""
        a, b = self.offsets[k], self.offsets[k + 1]
        la, lb = self.label_offsets[k], self.label_offsets[k + 1]
        return (
            self.indices[a:b],
            self.values[a:b],
            self.label_indices[la:lb],
        )

    def validate(self) -> None:
        _check_csr(self.offsets, self.indices, self.input_dim, "feature")
        _check_csr(self.label_offsets, self.label_indices, self.label_dim, "label")
        if len(self.values) != len(self.indices):
            raise ValueError("values and indices length mismatch")
        if len(self.offsets) != len(self.label_offsets):
            raise ValueError("feature and label offsets disagree on num_examples")

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseBatch):
            return NotImplemented
        return (
            self.input_dim == other.input_dim
            and self.label_dim == other.label_dim
            and np.array_equal(self.offsets, other.offsets)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.label_offsets, other.label_offsets)
            and np.array_equal(self.label_indices, other.label_indices)
        )


def _check_csr(offsets, indices, dim, what):
    if len(offsets) < 1 or offsets[0] != 0:
        raise ValueError(f"{what} offsets must start at 0")
    if np.any(np.diff(offsets) < 0):
        raise ValueError(f"{what} offsets must be non-decreasing")
    if offsets[-1] != len(indices):
        raise ValueError(f"{what} offsets end {offsets[-1]} != array length {len(indices)}")
    if len(indices):
        if indices.min() < 0 or indices.max() >= dim:
            raise ValueError(f"{what} id out of range for dim {dim}")
        per = np.diff(indices)
        starts = offsets[1:-1]
        boundary = np.zeros(len(per), dtype=bool)
        boundary[starts[(starts > 0) & (starts < len(indices))] - 1] = True
        if np.any((per <= 0) & ~boundary):
            raise ValueError(f"{what} ids must be strictly increasing within an example")


@dataclass
class FragmentedExamples:
    """Per-example independently allocated arrays; same accessor protocol as
    SparseBatch so the trainer can consume either representation."""

    examples: list
    input_dim: int
    label_dim: int

    @property
    def num_examples(self) -> int:
        return len(self.examples)

    def example(self, k: int):
        return self.examples[k]


def parse_libsvm_multilabel(source, header: DatasetHeader | None = None,
                            one_based: bool = False) -> SparseBatch:
    """Parse multi-label libsvm text: ``l1,l2,... i1:v1 i2:v2 ...`` per line.

    When ``header`` is None the first nonempty line must be
    ``num_examples input_dim label_dim``. Feature indices may be unsorted in
    the file; the batch comes out canonical (sorted, duplicates rejected).
    ``one_based`` shifts file ids down by one (common in published dumps).
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    lines = ((ln, raw.strip()) for ln, raw in enumerate(source, start=1))
    lines = ((ln, s) for ln, s in lines if s)

    if header is None:
        try:
            ln, first = next(lines)
        except StopIteration:
            raise ParseError("line 1: missing header line 'num_examples input_dim label_dim'")
        parts = first.split()
        if len(parts) != 3:
            raise ParseError(f"line {ln}: header must be 'num_examples input_dim label_dim'")
        try:
            header = DatasetHeader(*(int(p) for p in parts))
        except ValueError as e:
            raise ParseError(f"line {ln}: bad header: {e}") from None

    shift = 1 if one_based else 0
    indices: list[np.ndarray] = []
    values: list[np.ndarray] = []
    labels: list[np.ndarray] = []
    offsets = [0]
    label_offsets = [0]

    for ln, line in lines:
        tokens = line.split()
        label_tok = tokens[0]
        if ":" in label_tok:
            raise ParseError(f"line {ln}: missing label field before features")
        try:
            lab = np.array([int(t) - shift for t in label_tok.split(",")], dtype=np.int32)
        except ValueError:
            raise ParseError(f"line {ln}: bad label token {label_tok!r}") from None
        lab.sort()
        if len(lab) > 1 and np.any(np.diff(lab) == 0):
            raise FormatError(f"line {ln}: duplicate label id")
        if len(lab) and (lab[0] < 0 or lab[-1] >= header.label_dim):
            raise RangeError(f"line {ln}: label id out of range [0, {header.label_dim})")

        idx = np.empty(len(tokens) - 1, dtype=np.int32)
        val = np.empty(len(tokens) - 1, dtype=np.float32)
        for k, tok in enumerate(tokens[1:]):
            i, sep, v = tok.partition(":")
            if not sep:
                raise ParseError(f"line {ln}: expected 'index:value', got {tok!r}")
            try:
                idx[k] = int(i) - shift
                val[k] = float(v)
            except ValueError:
                raise ParseError(f"line {ln}: bad feature token {tok!r}") from None
        order = np.argsort(idx, kind="stable")
        idx, val = idx[order], val[order]
        if len(idx) > 1 and np.any(np.diff(idx) == 0):
            raise FormatError(f"line {ln}: duplicate feature index")
        if len(idx) and (idx[0] < 0 or idx[-1] >= header.input_dim):
            raise RangeError(f"line {ln}: feature index out of range [0, {header.input_dim})")

        indices.append(idx)
        values.append(val)
        labels.append(lab)
        offsets.append(offsets[-1] + len(idx))
        label_offsets.append(label_offsets[-1] + len(lab))

    if len(offsets) - 1 != header.num_examples:
        raise FormatError(
            f"header declares {header.num_examples} examples, file has {len(offsets) - 1}"
        )
    return SparseBatch(
        indices=np.concatenate(indices) if indices else np.empty(0, dtype=np.int32),
        values=np.concatenate(values) if values else np.empty(0, dtype=np.float32),
        offsets=np.array(offsets, dtype=np.int64),
        label_indices=np.concatenate(labels) if labels else np.empty(0, dtype=np.int32),
        label_offsets=np.array(label_offsets, dtype=np.int64),
        input_dim=header.input_dim,
        label_dim=header.label_dim,
    )


def load_libsvm(path, header: DatasetHeader | None = None, one_based: bool = False) -> SparseBatch:
    with open(path, "r", encoding="utf-8") as f:
        return parse_libsvm_multilabel(f, header=header, one_based=one_based)


def write_libsvm_multilabel(batch: SparseBatch, stream, include_header: bool = True) -> None:
    """Inverse of the parser; floats are written so they re-parse exactly."""
    if include_header:
        stream.write(f"{batch.num_examples} {batch.input_dim} {batch.label_dim}\n")
    for k in range(batch.num_examples):
        idx, val, lab = batch.example(k)
        if len(lab) == 0:
            raise FormatError(f"example {k} has no labels; the text format cannot express it")
        parts = [",".join(str(int(l)) for l in lab)]
        parts.extend(f"{int(i)}:{float(v)!r}" for i, v in zip(idx, val))
        stream.write(" ".join(parts) + "\n")


def slice_batch(b: SparseBatch, start: int, count: int) -> SparseBatch:
    """View of examples [start, start+count); payload arrays are not copied."""
    if start < 0 or count < 0 or start + count > b.num_examples:
        raise IndexError(
            f"slice [{start}, {start + count}) out of range for {b.num_examples} examples"
        )
    o = b.offsets[start : start + count + 1]
    lo = b.label_offsets[start : start + count + 1]
    return SparseBatch(
        indices=b.indices[o[0] : o[-1]],
        values=b.values[o[0] : o[-1]],
        offsets=o - o[0],
        label_indices=b.label_indices[lo[0] : lo[-1]],
        label_offsets=lo - lo[0],
        input_dim=b.input_dim,
        label_dim=b.label_dim,
    )


def fragmented_copy(b: SparseBatch) -> FragmentedExamples:
    """One independently allocated (indices, values, labels) triple per example."""
    return FragmentedExamples(
        examples=[
            tuple(np.array(a) for a in b.example(k)) for k in range(b.num_examples)
        ],
        input_dim=b.input_dim,
        label_dim=b.label_dim,
    )


def coalesce(frag: FragmentedExamples) -> SparseBatch:
    """Rebuild a coalesced batch from per-example arrays."""
    idx = [e[0] for e in frag.examples]
    val = [e[1] for e in frag.examples]
    lab = [e[2] for e in frag.examples]
    return SparseBatch(
        indices=np.concatenate(idx) if idx else np.empty(0, dtype=np.int32),
        values=np.concatenate(val) if val else np.empty(0, dtype=np.float32),
        offsets=np.cumsum([0] + [len(a) for a in idx]),
        label_indices=np.concatenate(lab) if lab else np.empty(0, dtype=np.int32),
        label_offsets=np.cumsum([0] + [len(a) for a in lab]),
        input_dim=frag.input_dim,
        label_dim=frag.label_dim,
    )


def shares_payload(view: SparseBatch, owner: SparseBatch) -> bool:
    """Region-identity probe: do the view's payload arrays alias the owner's?"""
    probes = []
    if len(view.indices):
        probes.append(np.shares_memory(view.indices, owner.indices))
        probes.append(np.shares_memory(view.values, owner.values))
    if len(view.label_indices):
        probes.append(np.shares_memory(view.label_indices, owner.label_indices))
    return all(probes) if probes else True
