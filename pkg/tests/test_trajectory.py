import numpy as np
import pytest

from traknn import trajectory as tr
from traknn.config import RunConfig
from traknn.field_store import FieldSequence
from traknn.oracle import naive_spatial_matrix, naive_trajectory_distance
from traknn.spatial import spatial_distance_matrix

from .conftest import random_seq


def _brute_rows(S, d):
    n = S.shape[0]
    m = n - d + 1
    return np.array([[sum(S[t + q, j + q] for q in range(d)) for j in range(m)] for t in range(m)])


def test_first_row_d1_is_first_S_row(scalar3_S):
    np.testing.assert_array_equal(tr.init_first_row(scalar3_S, 1), scalar3_S[0])


def test_first_row_d_equals_n(scalar3_S):
    assert tr.init_first_row(scalar3_S, 3).tolist() == [0.0]


def test_first_row_hand_example(scalar3_S):
    assert tr.init_first_row(scalar3_S, 2).tolist() == [0.0, 5.0]


def test_first_row_bad_d(scalar3_S):
    with pytest.raises(ValueError):
        tr.init_first_row(scalar3_S, 4)


def test_identical_fields_rows_zero():
    S = np.zeros((12, 12))
    rows = tr.collect_rows(S, RunConfig(d=3, k=1, e=0))
    assert rows.shape == (10, 10) and np.all(rows == 0)


def test_recurrence_matches_direct_summation():
    seq = random_seq(300, 4, 4, seed=1)
    S = spatial_distance_matrix(seq, RunConfig(d=1, k=1, storage="float64")).data
    d = 7
    ref = _brute_rows(naive_spatial_matrix(seq), d)
    got = tr.collect_rows(S, RunConfig(d=d, k=1))
    assert np.all(np.abs(got - ref) <= 1e-8 * np.maximum(1.0, ref))
    assert np.all(np.abs(np.diag(got)) <= 1e-8)


def test_recurrence_step_single():
    S = naive_spatial_matrix(random_seq(20, 2, 2, seed=4))
    d = 3
    first = tr.init_first_row(S, d)
    row1 = tr.recurrence_step(first, first, S, 1, d)
    np.testing.assert_allclose(row1, tr.direct_row(S, 1, d), rtol=1e-12, atol=1e-12)
    assert row1[0] == first[1]


def test_rows_equal_oracle_trajectory_distance():
    seq = random_seq(25, 2, 3, seed=12)
    d = 4
    S = spatial_distance_matrix(seq, RunConfig(d=1, k=1, storage="float64")).data
    got = tr.collect_rows(S, RunConfig(d=d, k=1))
    for t, j in [(0, 0), (3, 17), (21, 2), (10, 11)]:
        assert got[t, j] == pytest.approx(naive_trajectory_distance(seq, t, j, d), rel=1e-10, abs=1e-12)


def test_stream_rows_count_and_order():
    S = naive_spatial_matrix(random_seq(50, 2, 2))
    seen = []
    tr.stream_rows(S, RunConfig(d=5, k=1), lambda t, row: seen.append((t, row.shape[0])))
    assert [t for t, _ in seen] == list(range(46))
    assert {m for _, m in seen} == {46}


def test_d1_rows_equal_S_rows():
    S = naive_spatial_matrix(random_seq(30, 2, 2, seed=3))
    got = tr.collect_rows(S, RunConfig(d=1, k=1))
    np.testing.assert_array_equal(got[:, 1:], S[:, 1:])
    np.testing.assert_array_equal(got[:, 0], S[0])


@pytest.mark.parametrize("refresh", [1, 4, 17])
def test_refresh_matches_plain(refresh):
    S = naive_spatial_matrix(random_seq(120, 3, 3, seed=5))
    plain = tr.collect_rows(S, RunConfig(d=6, k=1))
    counter = tr.RowCounter()
    rows = []
    tr.stream_rows(S, RunConfig(d=6, k=1, refresh=refresh), lambda t, r: rows.append(r.copy()), counter)
    refreshed = np.array(rows)
    assert np.all(np.abs(refreshed - plain) <= 1e-8 * np.maximum(1.0, plain))
    assert counter.refreshed_rows == (115 - 1) // refresh


def test_boundary_column_is_copy_of_first_row():
    S = naive_spatial_matrix(random_seq(60, 3, 3, seed=7))
    got = tr.collect_rows(S, RunConfig(d=5, k=1))
    assert np.array_equal(got[:, 0], got[0, :])


def test_rows_bounded_by_d_times_max_S():
    S = naive_spatial_matrix(random_seq(80, 2, 2, seed=8))
    d = 6
    got = tr.collect_rows(S, RunConfig(d=d, k=1))
    assert got.max() <= d * S.max()
    assert got.min() >= 0


def test_block_size_does_not_change_rows():
    S = naive_spatial_matrix(random_seq(90, 2, 2, seed=9))
    cfg = RunConfig(d=4, k=1)
    one = tr.collect_rows(S, cfg)
    for block in (3, 64, 1000):
        rows = np.empty_like(one)

        def keep(t0, blk):
            rows[t0:t0 + blk.shape[0]] = blk

        tr.stream_blocks(S, cfg, keep, block_rows=block)
        assert np.array_equal(rows, one)


def test_per_row_work_independent_of_d():
    S = np.zeros((400, 400))
    counts = {}
    for d in (1, 100):
        c = tr.RowCounter()
        tr.stream_rows(S, RunConfig(d=d, k=1), lambda t, r: None, c)
        m = 400 - d + 1
        assert c.rows == m
        assert set(c.row_ops) == {tr.OPS_PER_ENTRY * (m - 1)}
        counts[d] = {ops // (m - 1) for ops in c.row_ops}
    assert counts[1] == counts[100]


def test_per_row_work_identical_at_equal_m():
    ops = []
    for n, d in ((300, 1), (399, 100)):
        c = tr.RowCounter()
        tr.stream_rows(np.zeros((n, n)), RunConfig(d=d, k=1), lambda t, r: None, c)
        ops.append(c.row_ops)
    assert ops[0] == ops[1]


def test_constant_sequence_rows_zero_through_pipeline():
    seq = FieldSequence(np.full((30, 2, 2), 3.5))
    S = spatial_distance_matrix(seq, RunConfig(d=1, k=1))
    assert np.all(tr.collect_rows(S, RunConfig(d=4, k=1)) == 0)
