import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from traknn import rarity
from traknn.config import RunConfig
from traknn.errors import ConfigError, InfeasibleConfigError
from traknn.field_store import FieldSequence, planted_bump, synth
from traknn.oracle import naive_rarity
from traknn.pipeline import score_sequence

from .conftest import random_seq


def _reference_select(row, t, k, e):
    cands = sorted((float(v), j) for j, v in enumerate(row) if abs(t - j) > e)
    return [j for _, j in cands[:k]], [v for v, _ in cands[:k]]


def test_select_ties_prefer_smaller_index():
    idx, dist = rarity.select_k(np.zeros(10), t=4, k_max=3, e=0)
    assert idx.tolist() == [0, 1, 2]
    assert dist.tolist() == [0.0, 0.0, 0.0]


def test_select_exclusion_and_tie():
    idx, dist = rarity.select_k(np.array([9.0, 4.0, 0.0, 4.0, 9.0]), t=2, k_max=1, e=1)
    assert (idx.tolist(), dist.tolist()) == ([0], [9.0])


def test_select_infeasible_reports_count():
    with pytest.raises(InfeasibleConfigError) as info:
        rarity.select_k(np.arange(5.0), t=2, k_max=3, e=1)
    assert info.value.available == 2


@settings(max_examples=60, deadline=None)
@given(
    m=st.integers(5, 60),
    e=st.integers(0, 4),
    seed=st.integers(0, 2**31),
    levels=st.integers(1, 6),
    data=st.data(),
)
def test_select_matches_full_sort(m, e, seed, levels, data):
    rng = np.random.default_rng(seed)
    # few distinct levels -> many ties
    row = rng.integers(0, levels, m).astype(float)
    t = data.draw(st.integers(0, m - 1))
    avail = rarity.admissible_count(m, t, e)
    if avail < 1:
        return
    k = data.draw(st.integers(1, avail))
    idx, dist = rarity.select_k(row, t, k, e)
    ref_idx, ref_dist = _reference_select(row, t, k, e)
    assert idx.tolist() == ref_idx and dist.tolist() == ref_dist
    bidx, bdist = rarity.select_block(row[None, :], t, k, e)
    assert bidx[0].tolist() == ref_idx and bdist[0].tolist() == ref_dist


def test_select_block_with_ties_matches_rowwise():
    rng = np.random.default_rng(0)
    block = rng.integers(0, 3, (20, 40)).astype(float)
    idx, dist = rarity.select_block(block, 5, 6, 2)
    for i in range(20):
        ri, rd = _reference_select(block[i], 5 + i, 6, 2)
        assert idx[i].tolist() == ri and dist[i].tolist() == rd


def test_constant_sequence_scores_zero():
    report = score_sequence(FieldSequence(np.full((40, 2, 2), 1.5)), RunConfig(d=3, k=5, k_values=(1, 2)))
    for k in report.k_values:
        assert np.all(report.scores_for(k) == 0)


@pytest.mark.parametrize("d,e,ks", [(1, 0, (1, 5, 10)), (3, 3, (1, 5)), (7, 0, (10,)), (5, 9, (2, 3))])
def test_matches_oracle(d, e, ks):
    seq = random_seq(120, 3, 3, seed=d + e)
    cfg = RunConfig(d=d, e=e, k=max(ks), k_values=ks, b=32, storage="float64")
    report = score_sequence(seq, cfg)
    scores, nbrs, dists = naive_rarity(seq, d, ks, e)
    for k in ks:
        assert np.array_equal(report.neighbors[:, :k], nbrs[k])
        np.testing.assert_allclose(report.distances[:, :k], dists[k], rtol=1e-8)
        np.testing.assert_allclose(report.scores_for(k), scores[k], rtol=1e-8)


def test_report_invariants():
    seq = random_seq(150, 2, 3, seed=3)
    cfg = RunConfig(d=4, k=8, k_values=(1, 3))
    report = score_sequence(seq, cfg)
    t = np.arange(report.m)[:, None]
    assert np.all(np.abs(report.neighbors - t) > cfg.e)
    assert np.all(np.diff(report.distances, axis=1) >= 0)
    for k in (1, 3, 8):
        np.testing.assert_allclose(report.scores_for(k), report.distances[:, :k].mean(axis=1), rtol=1e-12)
    assert np.all(report.scores_for(1) <= report.scores_for(3))
    assert np.all(report.scores_for(3) <= report.scores_for(8))


def test_prefix_consistency_across_runs():
    seq = random_seq(100, 2, 2, seed=4)
    small = score_sequence(seq, RunConfig(d=3, k=3, k_values=()))
    large = score_sequence(seq, RunConfig(d=3, k=12, k_values=()))
    assert np.array_equal(small.neighbors, large.neighbors[:, :3])
    np.testing.assert_allclose(small.scores_for(3), large.distances[:, :3].mean(axis=1), rtol=1e-12)


def test_scaling_preserves_rankings():
    seq = random_seq(120, 3, 3, seed=5)
    cfg = RunConfig(d=3, k=5)
    a = score_sequence(seq, cfg)
    b = score_sequence(FieldSequence(seq.values * 2.5), cfg)
    assert np.array_equal(a.neighbors, b.neighbors)
    assert np.array_equal(np.argsort(a.scores_for(5), kind="stable"), np.argsort(b.scores_for(5), kind="stable"))
    np.testing.assert_allclose(b.scores_for(5), 6.25 * a.scores_for(5), rtol=1e-9)


def test_k1_is_matrix_profile():
    seq = random_seq(80, 2, 2, seed=6)
    d, e = 4, 4
    report = score_sequence(seq, RunConfig(d=d, e=e, k=1, k_values=()))
    x = seq.values.reshape(80, -1)
    m = 77
    profile = np.empty(m)
    for t in range(m):
        best = np.inf
        for j in range(m):
            if abs(t - j) > e:
                best = min(best, float(((x[t:t + d] - x[j:j + d]) ** 2).sum()))
        profile[t] = best
    np.testing.assert_allclose(report.scores_for(1), profile, rtol=1e-9)


def test_planted_anomaly_is_top():
    d, t_star = 5, 500
    seq = synth(1000, 4, 4, "planted", seed=1, t_star=t_star, amplitude=50, duration=d)
    report = score_sequence(seq, RunConfig(d=d, k=10))
    top = rarity.top_rare(report, 10, 1)
    assert top[0][0] == t_star
    assert t_star - d + 1 <= int(np.argmax(report.scores_for(10))) <= t_star


def test_mutual_analogues_suppressed():
    d, n = 5, 600
    base = synth(n, 4, 4, "gaussian", seed=3).values.copy()
    base[100:100 + d] += planted_bump(4, 4, 30.0)
    base[450:450 + d] = base[100:100 + d]
    report = score_sequence(FieldSequence(base), RunConfig(d=d, k=1, k_values=()))
    assert report.neighbors[100, 0] == 450 and report.neighbors[450, 0] == 100
    s = report.scores_for(1)
    assert s[100] < np.median(s) and s[450] < np.median(s)
    top = [t for t, _ in rarity.top_rare(report, 1, 20)]
    assert 100 not in top and 450 not in top
    # a lone copy of the same window does dominate
    single = synth(n, 4, 4, "planted", seed=3, t_star=100, amplitude=30.0, duration=d)
    alone = score_sequence(single, RunConfig(d=d, k=1, k_values=()))
    assert rarity.top_rare(alone, 1, 1)[0][0] == 100


def test_top_rare_full_sort_and_ties():
    seq = random_seq(60, 2, 2, seed=8)
    report = score_sequence(seq, RunConfig(d=2, k=3, k_values=()))
    full = rarity.top_rare(report, 3, report.m)
    assert [s for _, s in full] == sorted(report.scores_for(3).tolist(), reverse=True)
    tied = rarity.RarityReport({}, np.zeros((4, 1), int), np.zeros((4, 1)), {1: np.array([1.0, 2.0, 2.0, 0.5])})
    assert rarity.top_rare(tied, 1, 3) == [(1, 2.0), (2, 2.0), (0, 1.0)]


def test_top_rare_unknown_k():
    report = score_sequence(random_seq(40, 1, 2), RunConfig(d=2, k=2, k_values=()))
    with pytest.raises(ConfigError):
        rarity.top_rare(report, 7, 3)


def test_infeasible_fails_before_work():
    seq = random_seq(20, 2, 2)
    with pytest.raises(InfeasibleConfigError):
        score_sequence(seq, RunConfig(d=5, k=10))


def test_report_roundtrip(tmp_path):
    seq = random_seq(50, 2, 2, seed=9)
    report = score_sequence(seq, RunConfig(d=3, k=4, k_values=(1, 2)), input_digest="sha256:x")
    rarity.write_report(report, tmp_path / "r.csv")
    back = rarity.read_report(tmp_path / "r.csv")
    assert back.k_values == [1, 2, 4]
    assert np.array_equal(back.neighbors, report.neighbors)
    assert np.array_equal(back.distances, report.distances)
    for k in back.k_values:
        assert np.array_equal(back.scores_for(k), report.scores_for(k))
    assert back.config["d"] == 3 and back.config["e"] == 3
    assert back.provenance["input_digest"] == "sha256:x"
    header = (tmp_path / "r.csv").read_text().splitlines()[0]
    assert header == "t,k,score," + ",".join(f"neighbor_{i},dist_{i}" for i in range(1, 5))


def test_results_cover_every_t_per_k():
    report = score_sequence(random_seq(40, 1, 2), RunConfig(d=2, k=3, k_values=(1,)))
    seen = [(r.t, r.k) for r in report.results()]
    assert sorted(seen) == sorted((t, k) for k in (1, 3) for t in range(39))
    r = report.result(5, 3)
    assert r.score == pytest.approx(sum(dv for _, dv in r.neighbors) / 3, rel=1e-12)
