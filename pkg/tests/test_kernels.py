import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lshtrain import kernels
from lshtrain.kernels import AdamHyper, LaneConfig, LayoutError, StorageOrder
from lshtrain.nn import LayerWeights

LANE = LaneConfig(lane_width=16, enabled=True)
SCALAR = LaneConfig(lane_width=16, enabled=False)


def weights_from_matrix(mat, order):
    n, m = mat.shape
    flat = mat.reshape(-1) if order is StorageOrder.ROW_MAJOR else mat.T.reshape(-1)
    return LayerWeights(buffer=np.ascontiguousarray(flat, dtype=np.float32),
                        order=order, n=n, m=m)


# -- dot_dense ---------------------------------------------------------------


def test_dot_basis_vector():
    w = np.arange(20, dtype=np.float32)
    for i in (0, 7, 19):
        e = np.zeros(20, dtype=np.float32)
        e[i] = 1.0
        assert kernels.dot_dense(e, w, LANE) == pytest.approx(w[i])


def test_dot_zero_vector():
    x = np.random.default_rng(0).normal(size=33).astype(np.float32)
    assert kernels.dot_dense(x, np.zeros(33, dtype=np.float32), LANE) == 0.0


def test_dot_length_mismatch():
    with pytest.raises(ValueError):
        kernels.dot_dense(np.ones(3, np.float32), np.ones(4, np.float32), LANE)


def test_dot_lane_vs_scalar_length_1000():
    rng = np.random.default_rng(1)
    x = rng.normal(size=1000).astype(np.float32)
    w = rng.normal(size=1000).astype(np.float32)
    a = kernels.dot_dense(x, w, LANE)
    b = kernels.dot_dense(x, w, SCALAR)
    assert a == pytest.approx(b, rel=1e-6)


@given(st.integers(min_value=1, max_value=97), st.integers(min_value=0, max_value=2**31 - 1))
@settings(max_examples=60)
def test_dot_lane_scalar_equivalence_any_length(length, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=length).astype(np.float32)
    w = rng.normal(size=length).astype(np.float32)
    a = kernels.dot_dense(x, w, LANE)
    b = kernels.dot_dense(x, w, SCALAR)
    assert a == pytest.approx(b, rel=1e-6, abs=1e-6)


# -- matvec_dense_x ------------------------------------------------------------


def test_matvec_dense_empty_active():
    W = weights_from_matrix(np.eye(4, dtype=np.float32), StorageOrder.ROW_MAJOR)
    ids, scores = kernels.matvec_dense_x(np.ones(4, np.float32), W, np.array([], np.int64), LANE)
    assert len(ids) == 0 and len(scores) == 0


def test_matvec_dense_identity_all_active():
    x = np.arange(5, dtype=np.float32)
    W = weights_from_matrix(np.eye(5, dtype=np.float32), StorageOrder.ROW_MAJOR)
    ids, scores = kernels.matvec_dense_x(x, W, np.arange(5), LANE)
    assert np.array_equal(ids, np.arange(5))
    assert np.allclose(scores, x)


def test_matvec_dense_against_naive_oracle():
    rng = np.random.default_rng(7)
    mat = rng.normal(size=(4, 64)).astype(np.float32)
    W = weights_from_matrix(mat, StorageOrder.ROW_MAJOR)
    x = rng.normal(size=64).astype(np.float32)
    for _ in range(20):
        active = rng.choice(4, size=rng.integers(0, 5), replace=False)
        ids, scores = kernels.matvec_dense_x(x, W, active, LANE)
        expect = [sum(float(mat[i, j]) * float(x[j]) for j in range(64)) for i in active]
        assert np.allclose(scores, expect, rtol=1e-6, atol=1e-6)
        assert np.array_equal(ids, active)


def test_matvec_dense_rejects_col_major():
    W = weights_from_matrix(np.eye(3, dtype=np.float32), StorageOrder.COL_MAJOR)
    with pytest.raises(LayoutError):
        kernels.matvec_dense_x(np.ones(3, np.float32), W, np.arange(3), LANE)


# -- matvec_sparse_x -----------------------------------------------------------


def test_matvec_sparse_empty_x():
    W = weights_from_matrix(np.ones((6, 4), dtype=np.float32), StorageOrder.COL_MAJOR)
    y = kernels.matvec_sparse_x([], [], W, LANE)
    assert np.array_equal(y, np.zeros(6, np.float32))


def test_matvec_sparse_unit_picks_column():
    rng = np.random.default_rng(9)
    mat = rng.normal(size=(6, 4)).astype(np.float32)
    W = weights_from_matrix(mat, StorageOrder.COL_MAJOR)
    y = kernels.matvec_sparse_x([2], [1.0], W, LANE)
    assert np.allclose(y, mat[:, 2])


def test_matvec_sparse_against_densified_oracle():
    rng = np.random.default_rng(21)
    for trial in range(20):
        n, m = int(rng.integers(1, 40)), int(rng.integers(1, 40))
        mat = rng.normal(size=(n, m)).astype(np.float32)
        W = weights_from_matrix(mat, StorageOrder.COL_MAJOR)
        nnz = int(rng.integers(0, m + 1))
        idx = np.sort(rng.choice(m, size=nnz, replace=False))
        val = rng.normal(size=nnz).astype(np.float32)
        y = kernels.matvec_sparse_x(idx, val, W, LANE)
        dense = np.zeros(m, dtype=np.float64)
        dense[idx] = val.astype(np.float64)
        assert np.allclose(y, mat.astype(np.float64) @ dense, rtol=1e-6, atol=1e-6)


def test_matvec_sparse_rejects_row_major_and_bad_index():
    W = weights_from_matrix(np.ones((3, 3), dtype=np.float32), StorageOrder.ROW_MAJOR)
    with pytest.raises(LayoutError):
        kernels.matvec_sparse_x([0], [1.0], W, LANE)
    Wc = weights_from_matrix(np.ones((3, 3), dtype=np.float32), StorageOrder.COL_MAJOR)
    with pytest.raises(IndexError):
        kernels.matvec_sparse_x([3], [1.0], Wc, LANE)


# -- transpose duality ---------------------------------------------------------


def test_transpose_duality_exact_on_scalar_path():
    rng = np.random.default_rng(33)
    for _ in range(100):
        n, m = int(rng.integers(1, 65)), int(rng.integers(1, 65))
        mat = rng.normal(size=(n, m)).astype(np.float32)
        Wc = weights_from_matrix(mat, StorageOrder.COL_MAJOR)
        Wr = weights_from_matrix(mat, StorageOrder.ROW_MAJOR)
        # same bytes: column-major for W is row-major for W^T
        assert np.array_equal(Wc.buffer, weights_from_matrix(mat.T, StorageOrder.ROW_MAJOR).buffer)
        nnz = int(rng.integers(0, m + 1))
        idx = np.sort(rng.choice(m, size=nnz, replace=False))
        val = rng.normal(size=nnz).astype(np.float32)
        dense = np.zeros(m, dtype=np.float32)
        dense[idx] = val
        y_sparse = kernels.matvec_sparse_x(idx, val, Wc, SCALAR)
        _, y_dense = kernels.matvec_dense_x(dense, Wr, np.arange(n), SCALAR)
        assert np.array_equal(y_sparse, y_dense)


def test_transpose_duality_lane_within_tolerance():
    rng = np.random.default_rng(34)
    for _ in range(25):
        n, m = int(rng.integers(1, 65)), int(rng.integers(1, 65))
        mat = rng.normal(size=(n, m)).astype(np.float32)
        Wc = weights_from_matrix(mat, StorageOrder.COL_MAJOR)
        Wr = weights_from_matrix(mat, StorageOrder.ROW_MAJOR)
        idx = np.sort(rng.choice(m, size=int(rng.integers(0, m + 1)), replace=False))
        val = rng.normal(size=len(idx)).astype(np.float32)
        dense = np.zeros(m, dtype=np.float32)
        dense[idx] = val
        y_sparse = kernels.matvec_sparse_x(idx, val, Wc, LANE)
        _, y_dense = kernels.matvec_dense_x(dense, Wr, np.arange(n), LANE)
        assert np.allclose(y_sparse, y_dense, rtol=1e-6, atol=1e-6)


# -- adam_update ---------------------------------------------------------------


def _zeros(k):
    return (np.zeros(k, np.float32), np.zeros(k, np.float32), np.zeros(k, np.float32))


def test_adam_zero_grad_keeps_weights():
    w = np.ones(10, np.float32)
    g, m, v = _zeros(10)
    kernels.adam_update(w, g, m, v, AdamHyper(lr=0.1), t=1, cfg=LANE)
    assert np.array_equal(w, np.ones(10, np.float32))


def test_adam_closed_form_single_step():
    h = AdamHyper(lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8, bias_correction=True)
    w = np.zeros(1, np.float32)
    g = np.ones(1, np.float32)
    m = np.zeros(1, np.float32)
    v = np.zeros(1, np.float32)
    kernels.adam_update(w, g, m, v, h, t=1, cfg=LANE)
    # m^ = 1, v^ = 1 after bias correction, so dw = -lr / (1 + eps)
    assert float(w[0]) == pytest.approx(-h.lr / (1.0 + h.eps), rel=1e-6)


def test_adam_lane_vs_scalar_length_4096():
    rng = np.random.default_rng(5)
    w0 = rng.normal(size=4096).astype(np.float32)
    g = rng.normal(size=4096).astype(np.float32)
    m0 = rng.normal(size=4096).astype(np.float32) * 0.1
    v0 = np.abs(rng.normal(size=4096)).astype(np.float32) * 0.1
    out = []
    for cfg in (LANE, SCALAR):
        w, m, v = w0.copy(), m0.copy(), v0.copy()
        kernels.adam_update(w, g, m, v, AdamHyper(lr=0.01), t=3, cfg=cfg)
        out.append((w, m, v))
    for a, b in zip(*out):
        assert np.allclose(a, b, atol=1e-6)


def test_adam_lr_zero_freezes_w_but_moves_moments():
    rng = np.random.default_rng(6)
    w = rng.normal(size=33).astype(np.float32)
    w0 = w.copy()
    g = rng.normal(size=33).astype(np.float32)
    m = np.zeros(33, np.float32)
    v = np.zeros(33, np.float32)
    kernels.adam_update(w, g, m, v, AdamHyper(lr=0.0), t=1, cfg=LANE)
    assert np.array_equal(w, w0)
    assert np.any(m != 0) and np.any(v != 0)


def test_adam_errors():
    with pytest.raises(ValueError):
        kernels.adam_update(np.ones(3, np.float32), np.ones(4, np.float32),
                            np.ones(3, np.float32), np.ones(3, np.float32),
                            AdamHyper(), t=1, cfg=LANE)
    with pytest.raises(ValueError):
        kernels.adam_update(np.ones(3, np.float32), np.ones(3, np.float32),
                            np.ones(3, np.float32), np.ones(3, np.float32),
                            AdamHyper(), t=0, cfg=LANE)


# -- bin_argmax ------------------------------------------------------------------


def test_bin_argmax_singleton():
    assert kernels.bin_argmax(np.array([5.0], np.float32), LANE) == (0, 5.0)


def test_bin_argmax_tie_lowest_index():
    assert kernels.bin_argmax(np.array([1.0, 3.0, 3.0], np.float32), LANE)[0] == 1


def test_bin_argmax_random_vs_linear_scan():
    rng = np.random.default_rng(8)
    for _ in range(200):
        vals = rng.integers(-5, 5, size=rng.integers(1, 70)).astype(np.float32)
        got_i, got_v = kernels.bin_argmax(vals, LANE)
        best = 0
        for i in range(1, len(vals)):
            if vals[i] > vals[best]:
                best = i
        assert (got_i, got_v) == (best, float(vals[best]))
        assert kernels.bin_argmax(vals, SCALAR) == (best, float(vals[best]))


def test_bin_argmax_empty_errors():
    with pytest.raises(ValueError):
        kernels.bin_argmax(np.array([], np.float32), LANE)


def test_lane_config_validation():
    with pytest.raises(ValueError):
        LaneConfig(lane_width=12)


def test_kernels_do_not_mutate_read_only_inputs():
    rng = np.random.default_rng(77)
    x = rng.normal(size=50).astype(np.float32)
    w = rng.normal(size=50).astype(np.float32)
    x0, w0 = x.copy(), w.copy()
    kernels.dot_dense(x, w, LANE)
    assert np.array_equal(x, x0) and np.array_equal(w, w0)

    mat = rng.normal(size=(6, 50)).astype(np.float32)
    W = weights_from_matrix(mat, StorageOrder.ROW_MAJOR)
    buf0 = W.buffer.copy()
    kernels.matvec_dense_x(x, W, np.arange(6), LANE)
    assert np.array_equal(W.buffer, buf0)

    Wc = weights_from_matrix(mat, StorageOrder.COL_MAJOR)
    buf0 = Wc.buffer.copy()
    idx = np.array([3, 9])
    val = np.array([1.0, -2.0], np.float32)
    kernels.matvec_sparse_x(idx, val, Wc, LANE)
    assert np.array_equal(Wc.buffer, buf0)
    assert np.array_equal(idx, [3, 9]) and np.array_equal(val, [1.0, -2.0])

    g = rng.normal(size=20).astype(np.float32)
    g0 = g.copy()
    kernels.adam_update(np.zeros(20, np.float32), g, np.zeros(20, np.float32),
                        np.zeros(20, np.float32), AdamHyper(lr=0.1), t=1, cfg=LANE)
    assert np.array_equal(g, g0)
