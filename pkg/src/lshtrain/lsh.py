"""Hash families (densified winner-takes-all, signed random projections) and
the bucketized tables used to pick active neurons.

Every code is a pure function of (seed, input): the per-table feature maps
and the projection signs come from a splitmix-style integer mixer, so two
table sets built with the same seed and inputs are identical.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

DWTA = "dwta"
SIMHASH = "simhash"

# Densification probe stride. Bins-per-table is capped at 30 by the code-width
# invariant, so any prime above that is coprime to every legal bin count.
_PROBE_STRIDE = 4099

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


class ConsistencyError(RuntimeError):
    """Table bookkeeping does not match the caller's claim (stale vector,
    double insert, delete of an absent neuron)."""


def _mix(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z + _GOLDEN) * np.uint64(0xBF58476D1CE4E5B9)
        z ^= z >> np.uint64(27)
        z *= np.uint64(0x94D049BB133111EB)
        z ^= z >> np.uint64(31)
        z = (z ^ (z >> np.uint64(33))) * np.uint64(0xFF51AFD7ED558CCD)
        z ^= z >> np.uint64(29)
    return z


@dataclass(frozen=True)
class HashFamilyParams:
    """K elementary hashes per table, L tables over 2^K buckets each.

    DWTA uses K bins per table with ``bin_size`` slots per bin (a power of
    two); each table code is K winners of log2(bin_size) bits, addressed
    modulo 2^K. SimHash uses K sign bits per table from sparse +-1
    projections (each bit samples roughly a third of the coordinates).
    """

    family: str
    k: int
    l: int
    input_dim: int
    seed: int
    bin_size: int = 8
    densification_cap: int = 100

    def __post_init__(self):
        if self.family not in (DWTA, SIMHASH):
            raise ValueError(f"unknown hash family {self.family!r}")
        if self.k < 1 or self.l < 1 or self.input_dim < 1:
            raise ValueError("k, l, input_dim must be positive")
        if self.family == DWTA:
            s = self.bin_size
            if s < 2 or s & (s - 1):
                raise ValueError(f"bin_size must be a power of two >= 2, got {s}")
            if self.k * int(np.log2(s)) > 30:
                raise ValueError("k * log2(bin_size) must be <= 30 bits per code")
        elif self.k > 30:
            raise ValueError("simhash needs k <= 30")

    @property
    def num_buckets(self) -> int:
        return 1 << self.k


# -- DWTA ------------------------------------------------------------------


@functools.lru_cache(maxsize=16)
def _dwta_plan(params: HashFamilyParams):
    """Per (table, bin): column ids mapped there and their slots, slot-ascending.

    The feature map is i -> (bin, slot) per table, derived from the mixer, so
    it never needs to be stored with the tables.
    """
    b = params.k
    s = params.bin_size
    cols = np.arange(params.input_dim, dtype=np.uint64)
    plan = []
    for t in range(params.l):
        with np.errstate(over="ignore"):
            salt = _mix(np.uint64(params.seed) ^ (np.uint64(t + 1) * _GOLDEN))
        h = _mix(cols ^ salt)
        bins = (h % np.uint64(b)).astype(np.int64)
        slots = ((h >> np.uint64(32)) % np.uint64(s)).astype(np.int64)
        per_bin = []
        for bb in range(b):
            members = np.flatnonzero(bins == bb)
            order = np.argsort(slots[members], kind="stable")
            members = members[order]
            per_bin.append((members, slots[members]))
        plan.append(per_bin)
    return plan


def _dwta_codes_batch(params: HashFamilyParams, rows: np.ndarray) -> np.ndarray:
    """(n, input_dim) float rows -> (n, L) codes in [0, 2^K)."""
    n = rows.shape[0]
    b = params.k
    plan = _dwta_plan(params)
    winners = np.zeros((n, params.l, b), dtype=np.int64)
    empty = np.ones((n, params.l, b), dtype=bool)
    for t in range(params.l):
        for bb in range(b):
            members, slots = plan[t][bb]
            if members.size == 0:
                continue
            sub = rows[:, members]
            masked = np.where(sub != 0, sub, -np.inf)
            am = np.argmax(masked, axis=1)  # first max = lowest slot (slot-sorted)
            winners[:, t, bb] = slots[am]
            empty[:, t, bb] = masked[np.arange(n), am] == -np.inf

    final = winners.copy()
    still = empty.copy()
    base = np.arange(b)
    for a in range(1, params.densification_cap + 1):
        if not still.any():
            break
        src = (base + a * _PROBE_STRIDE) % b
        take = still & ~empty[:, :, src]
        final = np.where(take, winners[:, :, src], final)
        still &= ~take
    final[still] = 0

    shifts = int(np.log2(params.bin_size)) * np.arange(b - 1, -1, -1, dtype=np.int64)
    codes = (final << shifts).sum(axis=2)
    return codes % params.num_buckets


# -- SimHash ----------------------------------------------------------------


@functools.lru_cache(maxsize=16)
def _simhash_matrix(params: HashFamilyParams) -> np.ndarray:
    """(input_dim, K*L) ternary sign matrix in {-1, 0, +1}, ~2/3 nonzero."""
    coords = np.arange(params.input_dim, dtype=np.uint64)
    bits = np.arange(params.k * params.l, dtype=np.uint64)
    salt = _mix(np.uint64(params.seed))
    with np.errstate(over="ignore"):
        bit_salts = _mix(bits + salt)
        h = _mix((coords[:, None] * _GOLDEN) ^ bit_salts[None, :])
    tri = (h % np.uint64(3)).astype(np.int8)
    return np.choose(tri, [1.0, -1.0, 0.0]).astype(np.float32)


def _simhash_codes_batch(params: HashFamilyParams, rows: np.ndarray) -> np.ndarray:
    proj = rows.astype(np.float64) @ _simhash_matrix(params).astype(np.float64)
    bits = (proj >= 0).astype(np.int64)
    bits = bits.reshape(rows.shape[0], params.l, params.k)
    weights = 1 << np.arange(params.k - 1, -1, -1, dtype=np.int64)
    return bits @ weights


# -- Shared entry points -----------------------------------------------------


def _densify(params: HashFamilyParams, x) -> np.ndarray:
    if isinstance(x, np.ndarray):
        if x.ndim != 1 or len(x) != params.input_dim:
            raise ValueError(f"vector length {getattr(x, 'shape', None)} != input_dim {params.input_dim}")
        return x.astype(np.float32, copy=False)
    idx, val = x
    idx = np.asarray(idx, dtype=np.int64)
    if len(idx) and (idx.min() < 0 or idx.max() >= params.input_dim):
        raise ValueError(f"sparse index out of range for input_dim {params.input_dim}")
    dense = np.zeros(params.input_dim, dtype=np.float32)
    dense[idx] = np.asarray(val, dtype=np.float32)
    return dense


def compute_codes_batch(params: HashFamilyParams, rows: np.ndarray) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.float32)
    if rows.ndim != 2 or rows.shape[1] != params.input_dim:
        raise ValueError(f"rows must be (n, {params.input_dim}), got {rows.shape}")
    if params.family == DWTA:
        return _dwta_codes_batch(params, rows)
    return _simhash_codes_batch(params, rows)


def compute_codes(params: HashFamilyParams, x) -> np.ndarray:
    """L bucket codes for one vector (dense array or (indices, values) pair)."""
    return compute_codes_batch(params, _densify(params, x)[None, :])[0]


class LshTableSet:
    """L tables of 2^K buckets mapping hash codes to neuron id lists.

    Each neuron remembers the codes it was inserted under, so routine deletes
    need no weight vector; passing one cross-checks the bookkeeping. Queries
    are safe to run concurrently; mutations need exclusive access.
    """

    def __init__(self, params: HashFamilyParams):
        self.params = params
        self.buckets: list[list[list[int]]] = [
            [[] for _ in range(params.num_buckets)] for _ in range(params.l)
        ]
        self._codes: dict[int, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self._codes)

    def __contains__(self, neuron_id: int) -> bool:
        return neuron_id in self._codes

    def codes_of(self, neuron_id: int) -> np.ndarray:
        return self._codes[neuron_id]

    def bucket_sizes(self) -> np.ndarray:
        return np.array(
            [[len(bk) for bk in table] for table in self.buckets], dtype=np.int64
        )

    def _place(self, neuron_id: int, codes: np.ndarray) -> None:
        for t, c in enumerate(codes):
            self.buckets[t][int(c)].append(neuron_id)
        self._codes[neuron_id] = codes

    def insert(self, neuron_id: int, weight_vector) -> None:
        if neuron_id in self._codes:
            raise ConsistencyError(f"neuron {neuron_id} already inserted")
        self._place(neuron_id, compute_codes(self.params, weight_vector))

    def insert_batch(self, ids, rows: np.ndarray) -> None:
        codes = compute_codes_batch(self.params, rows)
        for neuron_id, c in zip(ids, codes):
            if neuron_id in self._codes:
                raise ConsistencyError(f"neuron {neuron_id} already inserted")
            self._place(int(neuron_id), c)

    def delete(self, neuron_id: int, old_weight_vector=None) -> None:
        if old_weight_vector is not None:
            codes = compute_codes(self.params, old_weight_vector)
        else:
            codes = self._codes.get(neuron_id)
            if codes is None:
                raise ConsistencyError(f"neuron {neuron_id} was never inserted")
        for t, c in enumerate(codes):
            if neuron_id not in self.buckets[t][int(c)]:
                raise ConsistencyError(
                    f"neuron {neuron_id} not in its computed bucket; stale old-vector bookkeeping"
                )
        for t, c in enumerate(codes):
            self.buckets[t][int(c)].remove(neuron_id)
        self._codes.pop(neuron_id, None)

    def update_codes(self, neuron_id: int, new_codes: np.ndarray) -> None:
        """Move a neuron to new buckets (delete + insert with known codes)."""
        old = self._codes.get(neuron_id)
        if old is None:
            raise ConsistencyError(f"neuron {neuron_id} was never inserted")
        for t, (a, b) in enumerate(zip(old, new_codes)):
            if a != b:
                self.buckets[t][int(a)].remove(neuron_id)
                self.buckets[t][int(b)].append(neuron_id)
        self._codes[neuron_id] = new_codes

    def query(self, x) -> set[int]:
        codes = compute_codes(self.params, x)
        out: set[int] = set()
        for t, c in enumerate(codes):
            out.update(self.buckets[t][int(c)])
        return out

    def rebuild(self, rows: np.ndarray, ids=None) -> None:
        """As if freshly constructed and every neuron inserted with current weights."""
        if ids is None:
            ids = range(rows.shape[0])
        self.buckets = [
            [[] for _ in range(self.params.num_buckets)] for _ in range(self.params.l)
        ]
        self._codes = {}
        self.insert_batch(ids, rows)
