"""Distance attacks: kernel exactness, thresholds, cut-off analyses."""

import numpy as np
import pytest

from synthaudit import attack, embedding, stats
from synthaudit.attack import Direction, Space
from synthaudit.errors import (
    CutoffTooLarge,
    EmptyReference,
    EmptySynthetic,
    MissingEmbeddingModel,
    MissingOrigin,
    ShapeMismatch,
)
from synthaudit.tensor_io import ImageSample, Label, LabeledDataset, Origin


def _brute_force(cand, synth):
    n, m = cand.shape[0], synth.shape[0]
    dist = np.empty(n)
    idx = np.empty(n, dtype=np.int64)
    for i in range(n):
        d = np.sqrt(np.array([np.sum((cand[i] - synth[j]) ** 2) for j in range(m)]))
        dist[i] = d.min()
        idx[i] = int(d.argmin())
    return dist, idx


def _dataset(matrix, shape, origin=Origin.TEST, prefix="c"):
    samples = [
        ImageSample(
            pixels=row.reshape(shape).astype(np.float32),
            label=Label.CERVICAL,
            origin=origin,
            id=f"{prefix}-{i:03d}",
        )
        for i, row in enumerate(matrix)
    ]
    return LabeledDataset(samples=samples)


# ---------------------------------------------------------------------------
# distance kernel


def test_min_distances_matches_brute_force():
    rng = np.random.default_rng(0)
    for trial in range(25):
        n = int(rng.integers(1, 13))
        m = int(rng.integers(1, 16))
        d = int(rng.integers(1, 7))
        cand = rng.uniform(-1, 1, (n, d))
        synth = rng.uniform(-1, 1, (m, d))
        report = attack.min_distances(cand, synth)
        ref_dist, ref_idx = _brute_force(cand, synth)
        assert np.array_equal(report.min_distance, ref_dist), trial
        assert np.array_equal(report.nearest_index, ref_idx), trial


def test_min_distances_chunk_size_invariant(monkeypatch):
    rng = np.random.default_rng(1)
    cand = rng.uniform(-1, 1, (17, 5))
    synth = rng.uniform(-1, 1, (23, 5))
    base = attack.min_distances(cand, synth)
    base_counts = attack.cluster_sizes(cand, synth, 1.0).neighbor_count
    base_thr = attack.neighbor_threshold(cand, synth, 7.5)
    monkeypatch.setattr(attack, "CANDIDATE_BLOCK", 3)
    monkeypatch.setattr(attack, "BLOCK_ELEMS", 64)
    small = attack.min_distances(cand, synth)
    assert np.array_equal(base.min_distance, small.min_distance)
    assert np.array_equal(base.nearest_index, small.nearest_index)
    assert np.array_equal(base_counts, attack.cluster_sizes(cand, synth, 1.0).neighbor_count)
    assert base_thr == attack.neighbor_threshold(cand, synth, 7.5)


def test_min_distances_synth_order_invariant():
    rng = np.random.default_rng(2)
    cand = rng.uniform(-1, 1, (8, 4))
    synth = rng.uniform(-1, 1, (11, 4))
    perm = rng.permutation(11)
    a = attack.min_distances(cand, synth)
    b = attack.min_distances(cand, synth[perm])
    # the set of distances is order-free; nearest_index is not, so skip it
    assert np.array_equal(a.min_distance, b.min_distance)
    counts_a = attack.cluster_sizes(cand, synth, 0.8).neighbor_count
    counts_b = attack.cluster_sizes(cand, synth[perm], 0.8).neighbor_count
    assert np.array_equal(counts_a, counts_b)


def test_min_distances_tie_takes_first_index():
    cand = np.array([[0.0, 0.0]])
    dup = np.array([[3.0, 4.0], [1.0, 0.0], [1.0, 0.0]])
    report = attack.min_distances(cand, dup)
    assert report.min_distance[0] == 1.0
    assert report.nearest_index[0] == 1


def test_min_distances_dataset_metadata():
    rng = np.random.default_rng(3)
    cand_ds = _dataset(rng.uniform(-1, 1, (3, 8)), (2, 2, 2), Origin.TRAIN, "tr")
    synth_ds = _dataset(rng.uniform(-1, 1, (5, 8)), (2, 2, 2), Origin.SYNTHETIC, "gen")
    report = attack.min_distances(cand_ds, synth_ds)
    assert report.ids == ["tr-000", "tr-001", "tr-002"]
    assert report.origins == [Origin.TRAIN] * 3
    ref, _ = _brute_force(
        cand_ds.pixel_matrix().astype(np.float64),
        synth_ds.pixel_matrix().astype(np.float64),
    )
    assert np.array_equal(report.min_distance, ref)


def test_min_distances_errors():
    cand = np.zeros((2, 4))
    with pytest.raises(EmptySynthetic):
        attack.min_distances(cand, np.zeros((0, 4)))
    with pytest.raises(ShapeMismatch):
        attack.min_distances(cand, np.zeros((3, 5)))
    with pytest.raises(MissingEmbeddingModel):
        attack.min_distances(cand, np.zeros((3, 4)), space=Space.EMBEDDING)


def test_pairwise_ranks():
    report = attack.PairwiseReport(
        ids=["a", "b", "c", "d"],
        origins=[Origin.TRAIN] * 4,
        min_distance=np.array([0.5, 0.1, 0.5, 0.9]),
        nearest_index=np.zeros(4, dtype=np.int64),
        space=Space.PIXEL,
    )
    # ascending, ties by position: b, a, c, d
    assert report.ranks().tolist() == [2, 1, 3, 4]
    rows = report.csv_rows()
    assert rows[1] == ("b", "train", 0.1, 1)


def test_distribution_ranks():
    report = attack.DistributionReport(
        ids=["a", "b", "c"],
        origins=[Origin.TRAIN] * 3,
        neighbor_count=np.array([2, 7, 2], dtype=np.int64),
        threshold=1.0,
        space=Space.PIXEL,
    )
    # descending, ties by position: b, a, c
    assert report.ranks().tolist() == [2, 1, 3]


# ---------------------------------------------------------------------------
# threshold and neighbor counts


def test_threshold_matches_naive_multiset():
    rng = np.random.default_rng(4)
    cand = rng.uniform(-1, 1, (6, 3))
    synth = rng.uniform(-1, 1, (9, 3))
    naive = np.array(
        [np.sqrt(np.sum((c - s) ** 2)) for c in cand for s in synth]
    )
    for p in (0.1, 1.0, 25.0, 99.0):
        assert attack.neighbor_threshold(cand, synth, p) == stats.empirical_quantile(
            naive, p
        )


def test_threshold_default_percentile_per_space():
    rng = np.random.default_rng(5)
    cand = rng.uniform(-1, 1, (4, 3))
    synth = rng.uniform(-1, 1, (7, 3))
    assert attack.neighbor_threshold(cand, synth) == attack.neighbor_threshold(
        cand, synth, attack.DISTRIBUTION_PERCENTILE[Space.PIXEL]
    )


def test_threshold_percentile_bounds():
    cand, synth = np.zeros((2, 2)), np.ones((2, 2))
    for p in (0.0, 100.0, -1.0):
        with pytest.raises(ValueError):
            attack.neighbor_threshold(cand, synth, p)


def test_cluster_sizes_strictly_below():
    cand = np.array([[0.0]])
    synth = np.array([[1.0], [2.0], [3.0]])
    # distance exactly 2.0 must not count
    assert attack.cluster_sizes(cand, synth, 2.0).neighbor_count.tolist() == [1]
    assert attack.cluster_sizes(cand, synth, 2.0 + 1e-9).neighbor_count.tolist() == [2]
    assert attack.cluster_sizes(cand, synth, 0.5).neighbor_count.tolist() == [0]


def test_cluster_sizes_validates_threshold():
    cand, synth = np.zeros((1, 2)), np.ones((1, 2))
    with pytest.raises(ValueError):
        attack.cluster_sizes(cand, synth, -1.0)
    with pytest.raises(ValueError):
        attack.cluster_sizes(cand, synth, np.inf)


# ---------------------------------------------------------------------------
# cut-off analyses


def test_cutoff_table_frozen_example():
    scores = [0.1, 0.5, 0.2, 0.9]
    origins = [Origin.TRAIN, Origin.VAL, Origin.TEST, Origin.TRAIN]
    table = attack.cutoff_table(scores, origins, [1, 2, 4], Direction.SMALLEST_FIRST)
    assert [(r.cutoff, r.p_train, r.p_val, r.p_test) for r in table.rows] == [
        (1, 1.0, 0.0, 0.0),
        (2, 0.5, 0.0, 0.5),
        (4, 0.5, 0.25, 0.25),
    ]
    for row in table.rows:
        assert row.p_train + row.p_val + row.p_test == pytest.approx(1.0, abs=1e-12)


def test_cutoff_direction():
    scores = [5.0, 0.0, 1.0]
    origins = [Origin.TRAIN, Origin.VAL, Origin.TEST]
    top = attack.cutoff_table(scores, origins, [1], Direction.LARGEST_FIRST).rows[0]
    assert top.p_train == 1.0
    bottom = attack.cutoff_table(scores, origins, [1], Direction.SMALLEST_FIRST).rows[0]
    assert bottom.p_val == 1.0


def test_cutoff_table_errors():
    origins = [Origin.TRAIN, Origin.VAL]
    with pytest.raises(CutoffTooLarge):
        attack.cutoff_table([1.0, 2.0], origins, [3], Direction.SMALLEST_FIRST)
    with pytest.raises(ValueError):
        attack.cutoff_table([1.0, 2.0], origins, [0], Direction.SMALLEST_FIRST)
    with pytest.raises(ValueError):
        attack.cutoff_table([1.0, np.nan], origins, [1], Direction.SMALLEST_FIRST)
    with pytest.raises(ValueError):
        attack.cutoff_table(
            [1.0, 2.0], [Origin.TRAIN, Origin.SYNTHETIC], [1], Direction.SMALLEST_FIRST
        )


def test_cutoff_curve_matches_table():
    rng = np.random.default_rng(6)
    scores = rng.uniform(0, 1, 12)
    pool = [Origin.TRAIN, Origin.VAL, Origin.TEST]
    origins = [pool[int(i)] for i in rng.integers(0, 3, 12)]
    curve = attack.cutoff_curve(scores, origins, Direction.SMALLEST_FIRST)
    table = attack.cutoff_table(scores, origins, range(1, 13), Direction.SMALLEST_FIRST)
    assert curve.csv_rows() == table.csv_rows()


# ---------------------------------------------------------------------------
# anomaly flags and attack AUC


def _pairwise(distances, origins):
    return attack.PairwiseReport(
        ids=[f"x-{i}" for i in range(len(distances))],
        origins=origins,
        min_distance=np.asarray(distances, dtype=np.float64),
        nearest_index=np.zeros(len(distances), dtype=np.int64),
        space=Space.PIXEL,
    )


def test_anomaly_flags():
    report = _pairwise(
        [0.1, 1.0, 2.0, 3.0, 4.0],
        [Origin.TRAIN, Origin.TEST, Origin.TEST, Origin.TEST, Origin.TEST],
    )
    flags = attack.anomaly_flags(report, Origin.TEST, percentile=5.0)
    # reference quantile is 1.15, so only the two smallest distances flag
    assert flags.tolist() == [True, True, False, False, False]
    with pytest.raises(EmptyReference):
        attack.anomaly_flags(report, Origin.VAL)


def test_attack_auc_perfect_and_chance():
    origins = [Origin.TRAIN, Origin.TRAIN, Origin.TEST, Origin.TEST, Origin.VAL]
    close = [0.1, 0.2, 5.0, 6.0, 0.0]
    assert attack.attack_auc(
        close, origins, Origin.TRAIN, Origin.TEST, Direction.SMALLEST_FIRST
    ) == 1.0
    assert attack.attack_auc(
        close, origins, Origin.TRAIN, Origin.TEST, Direction.LARGEST_FIRST
    ) == 0.0
    flat = [1.0, 1.0, 1.0, 1.0, 1.0]
    assert attack.attack_auc(
        flat, origins, Origin.TRAIN, Origin.TEST, Direction.SMALLEST_FIRST
    ) == 0.5


def test_attack_auc_missing_origin():
    with pytest.raises(MissingOrigin):
        attack.attack_auc(
            [1.0], [Origin.TRAIN], Origin.TRAIN, Origin.TEST, Direction.SMALLEST_FIRST
        )


# ---------------------------------------------------------------------------
# embedding space


def test_embedding_space_equals_precomputed_features():
    rng = np.random.default_rng(7)
    shape = (1, 3, 3)
    real = _dataset(rng.uniform(-1, 1, (20, 9)), shape, Origin.TRAIN, "tr")
    model = embedding.fit(real.samples, dim=4)
    cand = _dataset(rng.uniform(-1, 1, (6, 9)), shape, Origin.TEST, "te")
    synth = _dataset(rng.uniform(-1, 1, (10, 9)), shape, Origin.SYNTHETIC, "gen")
    via_space = attack.min_distances(cand, synth, space=Space.EMBEDDING, model=model)
    direct = attack.min_distances(
        embedding.transform(model, cand), embedding.transform(model, synth)
    )
    assert np.array_equal(via_space.min_distance, direct.min_distance)
    assert np.array_equal(via_space.nearest_index, direct.nearest_index)
    assert via_space.space is Space.EMBEDDING
