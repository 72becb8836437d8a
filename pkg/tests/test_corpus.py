"""Synthetic corpus generation, splitting, and file round-trips."""

import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from cascadekit import (
    ArtifactIOError,
    ValidationError,
    attach_difficulties,
    generate_corpus,
    latent_difficulty_for,
    load_corpus,
    read_label_file,
    round_half_up,
    split_dataset,
    write_corpus,
    write_label_file,
)


def test_round_half_up():
    assert round_half_up(0.5) == 1
    assert round_half_up(1.5) == 2
    assert round_half_up(2.4999) == 2
    assert round_half_up(-0.5) == 0
    assert round_half_up(750.25) == 750


def test_exact_positive_count():
    records = generate_corpus(1, 10, 32, 32, 0.5)
    assert len(records) == 10
    assert sum(r.label for r in records) == 5


def test_generation_is_deterministic():
    a = generate_corpus(1, 10, 32, 32, 0.5)
    b = generate_corpus(1, 10, 32, 32, 0.5)
    for ra, rb in zip(a, b):
        assert ra.id == rb.id
        assert ra.label == rb.label
        assert ra.latent_difficulty == rb.latent_difficulty
        assert ra.pixels == rb.pixels


def test_record_shape_invariants():
    records = generate_corpus(3, 12, 7, 5, 0.25)
    ids = set()
    for r in records:
        assert r.width == 7 and r.height == 5 and r.channels == 3
        assert len(r.pixels) == 7 * 5 * 3
        ids.add(r.id)
    assert len(ids) == 12
    assert sum(r.label for r in records) == 3


def test_default_corpus_label_and_difficulty_distribution():
    records = generate_corpus(7, 4000, 64, 64, 0.5)
    assert sum(r.label for r in records) == 2000
    diffs = np.array([r.latent_difficulty for r in records])
    hist, _ = np.histogram(diffs, bins=10, range=(0.0, 1.0))
    assert hist.tolist() == [399, 375, 430, 387, 427, 402, 387, 428, 404, 361]
    assert hist.min() >= 350 and hist.max() <= 450


def test_difficulty_matches_hash_chain():
    for image_id in (0, 1, 17, 4096):
        expected = oracles.unit_ref(
            oracles.mix64_ref(99, oracles.TAG_DIFFICULTY, image_id))
        assert latent_difficulty_for(99, image_id) == expected


def test_mean_intensity_correlates_with_label():
    records = generate_corpus(5, 200, 16, 16, 0.5)
    means = {0: [], 1: []}
    for r in records:
        arr = np.frombuffer(r.pixels, dtype=np.uint8)
        means[r.label].append(arr.mean())
    assert np.mean(means[1]) > np.mean(means[0]) + 5.0


def test_generation_rejects_bad_arguments():
    with pytest.raises(ValidationError):
        generate_corpus(1, 1, 8, 8, 0.5)
    with pytest.raises(ValidationError):
        generate_corpus(1, 10, 0, 8, 0.5)
    with pytest.raises(ValidationError):
        generate_corpus(1, 10, 8, 8, 0.0)
    with pytest.raises(ValidationError):
        generate_corpus(1, 10, 8, 8, 1.0)


def test_split_sizes_and_partition():
    records = generate_corpus(1, 10, 8, 8, 0.5)
    sp = split_dataset(records, (0.6, 0.2, 0.2), 1)
    assert (len(sp.train), len(sp.config), len(sp.eval)) == (6, 2, 2)
    all_ids = [r.id for r in sp.train] + [r.id for r in sp.config] + [r.id for r in sp.eval]
    assert sorted(all_ids) == sorted(r.id for r in records)


def test_split_is_deterministic():
    records = generate_corpus(2, 40, 4, 4, 0.5)
    a = split_dataset(records, (0.5, 0.25, 0.25), 9)
    b = split_dataset(records, (0.5, 0.25, 0.25), 9)
    assert [r.id for r in a.train] == [r.id for r in b.train]
    assert [r.id for r in a.config] == [r.id for r in b.config]
    assert [r.id for r in a.eval] == [r.id for r in b.eval]


def test_split_3001_eval_absorbs_remainder():
    records = generate_corpus(7, 3001, 2, 2, 0.5)
    sp = split_dataset(records, (0.5, 0.25, 0.25), 7)
    assert (len(sp.train), len(sp.config), len(sp.eval)) == (1501, 750, 750)


@settings(max_examples=40, deadline=None)
@given(
    count=st.integers(min_value=12, max_value=200),
    seed=st.integers(min_value=0, max_value=2**32),
    frac=st.sampled_from([(0.5, 0.25, 0.25), (0.6, 0.2, 0.2), (0.7, 0.15, 0.15)]),
)
def test_split_stratification_property(count, seed, frac):
    records = generate_corpus(seed, count, 2, 2, 0.5)
    sp = split_dataset(records, frac, seed + 1)
    global_frac = sum(r.label for r in records) / count
    for part in (sp.train, sp.config, sp.eval):
        pos = sum(r.label for r in part)
        # stratification keeps per-split positives within one image of exact
        assert abs(pos - global_frac * len(part)) <= 1.0 + 1e-9


def test_split_preserves_input_order_within_splits():
    records = generate_corpus(4, 30, 2, 2, 0.5)
    sp = split_dataset(records, (0.5, 0.25, 0.25), 11)
    order = {r.id: i for i, r in enumerate(records)}
    for part in (sp.train, sp.config, sp.eval):
        idx = [order[r.id] for r in part]
        assert idx == sorted(idx)


def test_split_rejects_degenerate_inputs():
    records = generate_corpus(1, 10, 2, 2, 0.5)
    with pytest.raises(ValidationError):
        split_dataset(records[:2], (0.5, 0.25, 0.25), 1)
    with pytest.raises(ValidationError):
        split_dataset(records, (0.98, 0.01, 0.01), 1)
    with pytest.raises(ValidationError):
        split_dataset(records, (0.5, 0.3, 0.3), 1)


def test_corpus_round_trip(tmp_path):
    records = generate_corpus(6, 8, 9, 4, 0.5)
    write_corpus(records, str(tmp_path))
    loaded = load_corpus(str(tmp_path))
    assert len(loaded) == len(records)
    for orig, back in zip(records, loaded):
        assert back.id == orig.id
        assert back.label == orig.label
        assert (back.width, back.height, back.channels) == (9, 4, 3)
        assert back.pixels == orig.pixels


def test_single_channel_round_trip(tmp_path):
    records = generate_corpus(6, 4, 6, 6, 0.5)
    gray = []
    for r in records:
        plane = r.plane_array()[0]
        gray.append(type(r)(id=r.id, width=6, height=6, channels=1,
                            pixels=plane.tobytes(), label=r.label))
    write_corpus(gray, str(tmp_path))
    loaded = load_corpus(str(tmp_path))
    for orig, back in zip(gray, loaded):
        assert back.channels == 1
        assert back.pixels == orig.pixels


def test_load_missing_image_cites_path(tmp_path):
    records = generate_corpus(1, 3, 4, 4, 0.5)
    write_corpus(records, str(tmp_path))
    victim = os.path.join(str(tmp_path), "images", "img_000001.ppm")
    os.remove(victim)
    with pytest.raises(ArtifactIOError, match="img_000001"):
        load_corpus(str(tmp_path))


def test_load_rejects_malformed_header(tmp_path):
    records = generate_corpus(1, 2, 4, 4, 0.5)
    write_corpus(records, str(tmp_path))
    victim = os.path.join(str(tmp_path), "images", "img_000000.ppm")
    with open(victim, "wb") as fh:
        fh.write(b"P9\n4 4\n255\n" + bytes(48))
    with pytest.raises(ValidationError, match="img_000000"):
        load_corpus(str(tmp_path))


def test_attach_difficulties_restores_generated_values(tmp_path):
    records = generate_corpus(21, 6, 4, 4, 0.5)
    write_corpus(records, str(tmp_path))
    loaded = load_corpus(str(tmp_path))
    assert all(r.latent_difficulty is None for r in loaded)
    attach_difficulties(loaded, 21)
    for orig, back in zip(records, loaded):
        assert back.latent_difficulty == orig.latent_difficulty


def test_label_file_round_trip(tmp_path):
    records = generate_corpus(2, 12, 2, 2, 0.5)
    path = str(tmp_path / "labels.csv")
    write_label_file(records, path)
    table = read_label_file(path)
    assert table == {r.id: r.label for r in records}


def test_label_file_rejects_bad_rows(tmp_path):
    path = str(tmp_path / "labels.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("image_id,label\n3,2\n")
    with pytest.raises(ValidationError, match="line 2"):
        read_label_file(path)
