"""Batch catalog evaluation against the single-cascade reference path."""

import numpy as np
import pytest

from cascadekit import (
    CostProfile,
    DeploymentScenario,
    ModelSpec,
    THREADS_ENV_VAR,
    ValidationError,
    cascade_accuracy,
    cascade_id,
    count_cascades,
    enumerate_cascades,
    evaluate_catalog,
    expected_classify_time,
    frontier_from_arrays,
    pareto_frontier,
    precompute_outcomes,
    profile_costs_synthetic,
    simulate_cascade,
    thread_count,
)
from cascadekit.models import ScoreMatrix
from cascadekit.pareto import EvalPoint
from conftest import ALL_SCENARIOS

S = DeploymentScenario


def test_catalog_matches_reference_pipeline(small_catalog, small_table, small_data,
                                            small_models, small_profile,
                                            small_repr_of):
    specs = list(enumerate_cascades(small_table.entries, small_models, max_depth=3))
    assert small_catalog.count == len(specs) == 1521
    assert small_catalog.ids.shape == (1521,)
    y = small_data.eval_labels
    for i, spec in enumerate(specs):
        assert "%016x" % int(small_catalog.ids[i]) == cascade_id(spec)
        assert int(small_catalog.depth[i]) == spec.depth
        pred, _ = simulate_cascade(spec, small_table)
        assert float(small_catalog.accuracy[i]) == cascade_accuracy(pred, y)
        for scenario in ALL_SCENARIOS:
            total, _ = expected_classify_time(spec, small_table, small_profile,
                                              scenario, small_repr_of)
            np.testing.assert_allclose(small_catalog.times[scenario][i], total,
                                       rtol=1e-9, atol=1e-15)


def test_catalog_count_and_depth_histogram(small_catalog, small_table, small_models):
    assert small_catalog.count == count_cascades(small_table.entries, small_models, 3)
    depths, counts = np.unique(small_catalog.depth, return_counts=True)
    assert depths.tolist() == [1, 2, 3]
    assert counts.tolist() == [17, 544, 960]


def test_thread_count_resolution(monkeypatch):
    monkeypatch.delenv(THREADS_ENV_VAR, raising=False)
    assert thread_count(None) == 1
    assert thread_count(4) == 4
    assert thread_count(0) == 1
    assert thread_count(-3) == 1
    monkeypatch.setenv(THREADS_ENV_VAR, "3")
    assert thread_count(None) == 3
    assert thread_count(2) == 2
    monkeypatch.setenv(THREADS_ENV_VAR, "zebra")
    with pytest.raises(ValidationError):
        thread_count(None)


def test_threaded_run_is_identical(small_table, small_data, small_models,
                                   small_profile):
    kwargs = dict(table=small_table, labels=small_data.eval_labels,
                  models=small_models, profile=small_profile,
                  scenarios=(S.INFER_ONLY, S.CAMERA), max_depth=3)
    one = evaluate_catalog(threads=1, **kwargs)
    two = evaluate_catalog(threads=2, **kwargs)
    assert np.array_equal(one.ids, two.ids)
    assert np.array_equal(one.depth, two.depth)
    assert np.array_equal(one.accuracy, two.accuracy)
    for s in (S.INFER_ONLY, S.CAMERA):
        assert np.array_equal(one.times[s], two.times[s])


def test_chunk_streaming(small_table, small_data, small_models, small_profile):
    chunks = []
    result = evaluate_catalog(small_table, small_data.eval_labels, small_models,
                              small_profile, (S.INFER_ONLY,), max_depth=2,
                              on_chunk=chunks.append)
    assert sum(len(c) for c in chunks) == result.count
    assert chunks[0].depth == 1 and len(chunks[0]) == len(small_models)
    assert [c.depth for c in chunks] == sorted(c.depth for c in chunks)
    streamed_ids = np.concatenate([c.ids for c in chunks])
    assert np.array_equal(streamed_ids, result.ids)

    dropped = evaluate_catalog(small_table, small_data.eval_labels, small_models,
                               small_profile, (S.INFER_ONLY,), max_depth=2,
                               on_chunk=chunks.append, keep_arrays=False)
    assert dropped.count == result.count
    assert dropped.ids.size == 0 and dropped.accuracy.size == 0


def test_frontier_matches_point_level(small_catalog):
    for scenario in ALL_SCENARIOS:
        from_arrays = small_catalog.frontier(scenario)
        from_points = pareto_frontier(small_catalog.points(scenario))
        assert from_arrays == from_points
        from_arrays.validate()
    thr = small_catalog.throughput(S.INFER_ONLY)
    np.testing.assert_allclose(thr * small_catalog.times[S.INFER_ONLY], 1.0,
                               rtol=1e-12)


def test_frontier_from_arrays_tie_break_and_validation():
    ids = np.array([7, 5], dtype=np.uint64)
    acc = np.array([0.9, 0.9])
    thr = np.array([100.0, 100.0])
    frontier = frontier_from_arrays(ids, acc, thr)
    assert [p.cascade_id for p in frontier.points] == ["%016x" % 5]
    with pytest.raises(ValidationError):
        frontier_from_arrays(np.empty(0, dtype=np.uint64), np.empty(0), np.empty(0))
    with pytest.raises(ValidationError):
        frontier_from_arrays(ids, acc, np.array([100.0, 0.0]))
    with pytest.raises(ValidationError):
        frontier_from_arrays(ids, acc, np.array([100.0, np.inf]))


def test_large_random_frontier_certificate(rng):
    ids = rng.permutation(30_000).astype(np.uint64)
    accuracy = rng.integers(0, 500, size=30_000) / 500.0
    throughput = rng.integers(1, 2000, size=30_000).astype(np.float64)
    frontier = frontier_from_arrays(ids, accuracy, throughput)
    frontier.validate()
    import oracles

    oracles.certify_frontier(
        list(zip(["%016x" % i for i in ids], accuracy, throughput)),
        [(p.cascade_id, p.accuracy, p.throughput_fps) for p in frontier.points])


def test_catalog_validation_errors(small_table, small_data, small_models,
                                   small_profile):
    y = small_data.eval_labels
    run = lambda **kw: evaluate_catalog(
        **{**dict(table=small_table, labels=y, models=small_models,
                  profile=small_profile, scenarios=(S.INFER_ONLY,), max_depth=1),
           **kw})
    with pytest.raises(ValidationError):
        run(max_depth=4)
    with pytest.raises(ValidationError):
        run(scenarios=())
    with pytest.raises(ValidationError):
        run(labels=y[:-1])
    with pytest.raises(ValidationError):
        run(labels=np.where(np.asarray(y) == 1, 2, 0))
    with pytest.raises(ValidationError):
        run(models=list(small_models) + [small_models[0]])
    unknown = ModelSpec("ghost", small_models[0].arch, small_models[0].transform)
    with pytest.raises(ValidationError):
        run(models=list(small_models) + [unknown])
    # dropping a model orphans its calibrated entries
    with pytest.raises(ValidationError):
        run(models=small_models[1:])
    no_anchor = [m for m in small_models if not m.is_anchor]
    with pytest.raises(ValidationError):
        run(models=no_anchor, max_depth=3)
    bad_profile = CostProfile(small_profile.load_full_s, small_profile.load_repr_s,
                              small_profile.transform_s,
                              {k: v for k, v in small_profile.infer_s.items()
                               if k != "anchor"})
    with pytest.raises(ValidationError):
        run(profile=bad_profile)
    no_transform = CostProfile(small_profile.load_full_s, small_profile.load_repr_s,
                               {}, small_profile.infer_s)
    with pytest.raises(ValidationError):
        run(profile=no_transform, scenarios=(S.CAMERA,))
    no_load = CostProfile(small_profile.load_full_s, {},
                          small_profile.transform_s, small_profile.infer_s)
    with pytest.raises(ValidationError):
        run(profile=no_load, scenarios=(S.ONGOING,))
    zero_profile = profile_costs_synthetic(small_models, constants=(0, 0, 0, 0))
    with pytest.raises(ValidationError):
        run(profile=zero_profile)


def test_empty_eval_set_rejected(small_models, small_profile):
    matrix = ScoreMatrix("eval", [m.model_id for m in small_models], [],
                         np.empty((len(small_models), 0)))
    table = precompute_outcomes(matrix, [])
    with pytest.raises(ValidationError):
        evaluate_catalog(table, np.empty(0, dtype=np.int8), small_models,
                         small_profile, (S.INFER_ONLY,), max_depth=1)


def test_points_are_hex_ids(small_catalog):
    pts = small_catalog.points(S.INFER_ONLY)
    assert len(pts) == small_catalog.count
    assert all(isinstance(p, EvalPoint) and len(p.cascade_id) == 16 for p in pts[:50])
    assert pts[0].cascade_id == "%016x" % int(small_catalog.ids[0])
