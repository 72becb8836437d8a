"""Threshold calibration against an exhaustive grid-search oracle."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from cascadekit import (
    ThresholdPair,
    ValidationError,
    calibrate_all,
    calibrate_thresholds,
    labels_for_matrix,
    read_calibrated,
    threshold_grid,
    threshold_stats,
    write_calibrated,
)
from cascadekit.models import ScoreMatrix


def test_threshold_grid_shapes():
    g = threshold_grid(0.01)
    assert len(g) == 101
    assert g[0] == 0.0 and g[-1] == 1.0
    assert len(threshold_grid(0.02)) == 51
    assert threshold_grid(0.3).tolist() == [0.0, 0.3, 0.6, 0.9, 1.0]
    with pytest.raises(ValidationError):
        threshold_grid(0.0)
    with pytest.raises(ValidationError):
        threshold_grid(1.5)


def test_perfectly_separable_pair():
    scores = [0.1, 0.1, 0.9, 0.9]
    labels = [0, 0, 1, 1]
    pair = calibrate_thresholds(scores, labels, 0.95, 0.01)
    assert (pair.p_low, pair.p_high) == (0.10, 0.90)
    stats = threshold_stats(scores, labels, pair)
    assert stats.coverage == 1.0
    assert stats.pos_precision == 1.0 and stats.neg_precision == 1.0


def test_one_sided_degenerate():
    scores = [0.99, 0.99, 0.99, 0.99]
    labels = [1, 1, 1, 1]
    pair = calibrate_thresholds(scores, labels, 0.95, 0.01)
    assert (pair.p_low, pair.p_high) == (0.0, 0.99)
    stats = threshold_stats(scores, labels, pair)
    assert stats.coverage == 1.0


def test_forty_mixed_scores_match_exhaustive_search():
    # three crossovers: negatives mostly low with strays at 0.62 and 0.71,
    # positives mostly high with a stray at 0.33
    neg = [0.05, 0.08, 0.11, 0.14, 0.17, 0.20, 0.23, 0.26, 0.29, 0.32,
           0.35, 0.38, 0.41, 0.44, 0.47, 0.50, 0.53, 0.56, 0.62, 0.71]
    pos = [0.33, 0.58, 0.61, 0.64, 0.67, 0.70, 0.73, 0.76, 0.79, 0.82,
           0.85, 0.88, 0.91, 0.93, 0.94, 0.95, 0.96, 0.97, 0.98, 0.99]
    scores = neg + pos
    labels = [0] * 20 + [1] * 20
    pair = calibrate_thresholds(scores, labels, 0.9, 0.05)
    want = oracles.calibrate_ref(scores, labels, 0.9, 0.05)
    assert (pair.p_low, pair.p_high) == want


def test_sentinel_when_nothing_is_decidable():
    scores = [0.5] * 10
    labels = [0, 1] * 5
    pair = calibrate_thresholds(scores, labels, 0.99, 0.01)
    assert (pair.p_low, pair.p_high) == (0.0, 1.0)
    stats = threshold_stats(scores, labels, pair)
    assert stats.coverage == 0.0
    assert stats.pos_precision == 1.0 and stats.neg_precision == 1.0


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(4, 60),
    seed=st.integers(0, 2**32),
    target=st.sampled_from((0.8, 0.9, 0.95)),
    step=st.sampled_from((0.1, 0.05)),
    discrete=st.booleans(),
    pooled=st.booleans(),
)
def test_matches_exhaustive_oracle(n, seed, target, step, discrete, pooled):
    rng = np.random.default_rng(seed)
    if discrete:
        # coarse score values force coverage ties so tie-breaks are exercised
        scores = rng.integers(0, 11, size=n) / 10.0
    else:
        scores = rng.random(n)
    labels = (rng.random(n) < np.clip(scores, 0.05, 0.95)).astype(int)
    pair = calibrate_thresholds(scores, labels, target, step, pooled=pooled)
    want = oracles.calibrate_ref(scores, labels, target, step, pooled=pooled)
    assert (pair.p_low, pair.p_high) == want


@settings(max_examples=30, deadline=None)
@given(n=st.integers(4, 50), seed=st.integers(0, 2**32))
def test_positive_recall_objective_matches_oracle(n, seed):
    rng = np.random.default_rng(seed)
    scores = rng.integers(0, 21, size=n) / 20.0
    labels = (rng.random(n) < np.clip(scores, 0.1, 0.9)).astype(int)
    pair = calibrate_thresholds(scores, labels, 0.85, 0.1,
                                objective="positive_recall")
    want = oracles.calibrate_ref(scores, labels, 0.85, 0.1,
                                 objective="positive_recall")
    assert (pair.p_low, pair.p_high) == want


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 40), seed=st.integers(0, 2**32))
def test_returned_pair_is_valid_and_feasible(n, seed):
    rng = np.random.default_rng(seed)
    scores = rng.random(n)
    labels = rng.integers(0, 2, size=n)
    pair = calibrate_thresholds(scores, labels, 0.9, 0.05)
    assert pair.p_low <= pair.p_high
    stats = threshold_stats(scores, labels, pair)
    if (pair.p_low, pair.p_high) != (0.0, 1.0):
        assert stats.pos_precision >= 0.9
        assert stats.neg_precision >= 0.9
        assert stats.coverage > 0.0


def test_determinism():
    rng = np.random.default_rng(77)
    scores = rng.random(30)
    labels = rng.integers(0, 2, size=30)
    a = calibrate_thresholds(scores, labels, 0.9, 0.05)
    b = calibrate_thresholds(scores, labels, 0.9, 0.05)
    assert a == b


def test_pooled_can_accept_where_per_side_rejects():
    # pos side alone: 3/4 = 0.75 < 0.9; folding the high scores into the
    # negative side: 21/24 = 0.875 < 0.9; pooled over both: 23/24 >= 0.9
    scores = [0.05] * 20 + [0.95] * 4
    labels = [0] * 20 + [1, 1, 1, 0]
    per_side = calibrate_thresholds(scores, labels, 0.9, 0.05)
    pooled = calibrate_thresholds(scores, labels, 0.9, 0.05, pooled=True)
    per_stats = threshold_stats(scores, labels, per_side)
    pooled_stats = threshold_stats(scores, labels, pooled)
    assert per_stats.coverage == pytest.approx(20 / 24)
    assert pooled_stats.coverage == 1.0
    assert pooled_stats.pos_precision < 0.9


def test_rejects_bad_inputs():
    with pytest.raises(ValidationError):
        calibrate_thresholds([], [], 0.9, 0.05)
    with pytest.raises(ValidationError):
        calibrate_thresholds([0.5], [1], 0.9, 0.0)
    with pytest.raises(ValidationError):
        calibrate_thresholds([1.5], [1], 0.9, 0.05)
    with pytest.raises(ValidationError):
        calibrate_thresholds([0.5, 0.4], [1], 0.9, 0.05)
    with pytest.raises(ValidationError):
        calibrate_thresholds([0.5], [2], 0.9, 0.05)
    with pytest.raises(ValidationError):
        calibrate_thresholds([0.5], [1], 0.9, 0.05, objective="other")


def _random_matrix(n_models: int, n_images: int, seed: int) -> ScoreMatrix:
    rng = np.random.default_rng(seed)
    return ScoreMatrix(
        split_name="config",
        model_ids=[f"m{i:03d}" for i in range(n_models)],
        image_ids=list(range(n_images)),
        scores=rng.random((n_models, n_images)),
    )


def test_calibrate_all_entry_count_and_order():
    matrix = _random_matrix(360, 40, 1)
    labels = np.random.default_rng(2).integers(0, 2, size=40)
    targets = (0.91, 0.93, 0.95, 0.97, 0.99)
    entries = calibrate_all(matrix, labels, targets, 0.05)
    assert len(entries) == 1800
    assert [e.model_id for e in entries[:5]] == ["m000"] * 5
    assert [e.threshold.target_precision for e in entries[:5]] == list(targets)


def test_calibrate_all_single_matches_direct_call():
    matrix = _random_matrix(1, 30, 5)
    labels = np.random.default_rng(6).integers(0, 2, size=30)
    entries = calibrate_all(matrix, labels, (0.9,), 0.05)
    direct = calibrate_thresholds(matrix.scores[0], labels, 0.9, 0.05)
    assert len(entries) == 1
    assert entries[0].threshold == direct


def test_calibrate_all_stats_recompute(small_data, small_calibrated, small_config):
    y = labels_for_matrix(small_data.config_matrix, small_data.config_labels)
    for entry in small_calibrated[::7]:
        row = small_data.config_matrix.row(entry.model_id)
        again = threshold_stats(row, y, entry.threshold)
        assert again == entry.config_stats


def test_labels_for_matrix_variants():
    matrix = _random_matrix(2, 4, 9)
    assert labels_for_matrix(matrix, [0, 1, 1, 0]).tolist() == [0, 1, 1, 0]
    assert labels_for_matrix(matrix, {0: 1, 1: 0, 2: 1, 3: 0}).tolist() == [1, 0, 1, 0]
    with pytest.raises(ValidationError):
        labels_for_matrix(matrix, [0, 1])
    with pytest.raises(ValidationError):
        labels_for_matrix(matrix, {0: 1})
    with pytest.raises(ValidationError):
        labels_for_matrix(matrix, [0, 1, 2, 0])


def test_calibrated_round_trip(tmp_path, small_calibrated):
    path = str(tmp_path / "calibrated.json")
    write_calibrated(small_calibrated, path)
    back = read_calibrated(path)
    assert back == small_calibrated


def test_threshold_pair_validation():
    with pytest.raises(ValidationError):
        ThresholdPair(0.9, 0.1, 0.95)
