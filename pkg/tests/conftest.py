"""Shared fixtures: one small end-to-end pipeline reused across modules."""

from __future__ import annotations

import numpy as np
import pytest

from cascadekit import (
    ColorMode,
    DeploymentScenario,
    GridConfig,
    build_models,
    calibrate_all,
    default_corpus,
    evaluate_catalog,
    precompute_outcomes,
    profile_costs_synthetic,
    representation_map,
    score_pipeline,
)

ALL_SCENARIOS = (
    DeploymentScenario.INFER_ONLY,
    DeploymentScenario.ARCHIVE,
    DeploymentScenario.ONGOING,
    DeploymentScenario.CAMERA,
)


@pytest.fixture(scope="session")
def small_config():
    # 16 grid models + anchor, 2 precision settings: large enough to
    # exercise every depth case, small enough to keep the suite quick
    return GridConfig(
        conv_layers=(1, 2),
        conv_nodes=(16,),
        dense_nodes=(16, 32),
        sizes=((8, 8), (16, 16)),
        modes=(ColorMode.FULL_RGB, ColorMode.GRAY),
        anchor=True,
        anchor_size=(32, 32),
        anchor_mode=ColorMode.FULL_RGB,
        precisions=(0.91, 0.97),
        grid_step=0.02,
        seed=13,
        corpus_count=160,
        corpus_width=32,
        corpus_height=32,
    )


@pytest.fixture(scope="session")
def small_models(small_config):
    return build_models(small_config)


@pytest.fixture(scope="session")
def small_records(small_config):
    return default_corpus(small_config)


@pytest.fixture(scope="session")
def small_data(small_records, small_config, small_models):
    return score_pipeline(small_records, small_config, small_models)


@pytest.fixture(scope="session")
def small_calibrated(small_data, small_config):
    return calibrate_all(small_data.config_matrix, small_data.config_labels,
                         small_config.precisions, small_config.grid_step)


@pytest.fixture(scope="session")
def small_table(small_data, small_calibrated):
    return precompute_outcomes(small_data.eval_matrix, small_calibrated)


@pytest.fixture(scope="session")
def small_profile(small_models, small_config):
    return profile_costs_synthetic(small_models, small_config.cost_constants)


@pytest.fixture(scope="session")
def small_repr_of(small_models):
    return representation_map(small_models)


@pytest.fixture(scope="session")
def small_catalog(small_table, small_data, small_models, small_profile):
    return evaluate_catalog(small_table, small_data.eval_labels, small_models,
                            small_profile, ALL_SCENARIOS, max_depth=3)


@pytest.fixture()
def rng():
    return np.random.default_rng(20260823)
