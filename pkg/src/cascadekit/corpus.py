"""Synthetic labeled image corpus: generation, PNM round-trip, splits.

Images are 8-bit, stored planar (channel-major) in memory and written to
disk as binary PPM (color) or PGM (grayscale) files next to a JSON
manifest of ``{"id", "path", "label"}`` entries.  Generation is fully
deterministic in the seed: labels, per-image difficulty, and every pixel
come from counter-based hashes, never from a stateful RNG.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._hashing import (
    TAG_DIFFICULTY,
    TAG_IMAGE,
    TAG_LABEL,
    TAG_PIXEL,
    TAG_SPLIT,
    mix64,
    splitmix64_array,
    unit_float,
    unit_floats,
)
from .errors import ArtifactIOError, ValidationError


@dataclass
class ImageRecord:
    """One labeled image.

    pixels holds channel-major planes (all of channel 0, then 1, then 2).
    latent_difficulty is only present for synthetically generated images;
    it is not persisted and reloads as None.
    """

    id: int
    width: int
    height: int
    channels: int
    pixels: bytes
    label: int
    latent_difficulty: Optional[float] = None

    def plane_array(self) -> np.ndarray:
        """Pixels as a (channels, height, width) uint8 array."""
        arr = np.frombuffer(self.pixels, dtype=np.uint8)
        return arr.reshape(self.channels, self.height, self.width)


@dataclass
class DatasetSplits:
    train: list[ImageRecord]
    config: list[ImageRecord]
    eval: list[ImageRecord]


def round_half_up(x: float) -> int:
    """Round to nearest integer with .5 going up."""
    return int(np.floor(x + 0.5))


def latent_difficulty_for(seed: int, image_id: int) -> float:
    """Deterministic difficulty in [0, 1) for an image id under a seed."""
    return unit_float(mix64(seed, TAG_DIFFICULTY, image_id))


def _label_assignment(seed: int, count: int, pos_fraction: float) -> np.ndarray:
    # exact positive count, assigned by hash order so membership is seed-stable
    n_pos = round_half_up(count * pos_fraction)
    keys = [mix64(seed, TAG_LABEL, i) for i in range(count)]
    order = sorted(range(count), key=lambda i: (keys[i], i))
    labels = np.zeros(count, dtype=np.int64)
    labels[order[:n_pos]] = 1
    return labels


def _render_pixels(seed: int, image_id: int, width: int, height: int,
                   label: int, difficulty: float) -> bytes:
    """Render one RGB image whose intensity statistics track the label.

    Mean intensity sits above 128 for positives and below for negatives;
    the offset shrinks as difficulty approaches 1.  A per-image sinusoid
    plus hashed per-pixel noise keeps images from being constant.
    """
    sign = 1.0 if label == 1 else -1.0
    base = 128.0 + sign * (10.0 + 45.0 * (1.0 - difficulty))

    fx = 1 + mix64(seed, TAG_IMAGE, image_id, 1) % 4
    fy = 1 + mix64(seed, TAG_IMAGE, image_id, 2) % 4
    phase = unit_float(mix64(seed, TAG_IMAGE, image_id, 3)) * 2.0 * np.pi
    ys = np.arange(height, dtype=np.float64)[:, None] / height
    xs = np.arange(width, dtype=np.float64)[None, :] / width
    texture = 20.0 * np.sin(2.0 * np.pi * (fx * xs + fy * ys) + phase)

    key = np.uint64(mix64(seed, TAG_PIXEL, image_id))
    idx = np.arange(3 * height * width, dtype=np.uint64)
    noise = unit_floats(splitmix64_array(key ^ idx)) * 32.0 - 16.0
    noise = noise.reshape(3, height, width)

    chan = np.array(
        [unit_float(mix64(seed, TAG_IMAGE, image_id, 10 + c)) * 20.0 - 10.0 for c in range(3)]
    )

    vals = base + texture[None, :, :] + noise + chan[:, None, None]
    return np.clip(np.floor(vals + 0.5), 0.0, 255.0).astype(np.uint8).tobytes()


def generate_corpus(seed: int, count: int, width: int, height: int,
                    pos_fraction: float) -> list[ImageRecord]:
    """Generate a deterministic synthetic corpus of RGB images."""
    if count < 2:
        raise ValidationError("count must be at least 2")
    if width <= 0 or height <= 0:
        raise ValidationError("width and height must be positive")
    if not 0.0 < pos_fraction < 1.0:
        raise ValidationError("pos_fraction must lie strictly inside (0, 1)")

    labels = _label_assignment(seed, count, pos_fraction)
    records = []
    for i in range(count):
        d = latent_difficulty_for(seed, i)
        records.append(
            ImageRecord(
                id=i,
                width=width,
                height=height,
                channels=3,
                pixels=_render_pixels(seed, i, width, height, int(labels[i]), d),
                label=int(labels[i]),
                latent_difficulty=d,
            )
        )
    return records


def attach_difficulties(records: Sequence[ImageRecord], seed: int) -> None:
    """Re-derive latent difficulties for records loaded from disk."""
    for r in records:
        r.latent_difficulty = latent_difficulty_for(seed, r.id)


def split_dataset(records: Sequence[ImageRecord], fractions: tuple[float, float, float],
                  seed: int) -> DatasetSplits:
    """Partition records into train/config/eval splits.

    Split sizes are round-half-up of fraction * count with the eval split
    absorbing the remainder, and positives are allocated across splits by
    the same rule so class balance is preserved.  Membership comes from a
    deterministic hash shuffle; each split keeps the input order.
    """
    f_train, f_config, f_eval = fractions
    if min(fractions) <= 0 or abs(f_train + f_config + f_eval - 1.0) > 1e-9:
        raise ValidationError("fractions must be positive and sum to 1")
    n = len(records)
    if n < 3:
        raise ValidationError("need at least 3 records to form three splits")
    n_train = round_half_up(f_train * n)
    n_config = round_half_up(f_config * n)
    n_eval = n - n_train - n_config
    if n_train == 0 or n_config == 0 or n_eval <= 0:
        raise ValidationError(
            f"every split must be non-empty, got {n_train}/{n_config}/{n_eval}"
        )

    pos_idx = [i for i, r in enumerate(records) if r.label == 1]
    neg_idx = [i for i, r in enumerate(records) if r.label != 1]
    p = len(pos_idx)
    p_train = min(round_half_up(f_train * p), n_train, p)
    p_config = min(round_half_up(f_config * p), n_config, p - p_train)
    p_eval = p - p_train - p_config
    if p_eval > n_eval or (n_train - p_train) > len(neg_idx):
        raise ValidationError("cannot honor class balance with these fractions")

    def shuffled(idx: list[int]) -> list[int]:
        return sorted(idx, key=lambda i: (mix64(seed, TAG_SPLIT, records[i].id), i))

    pos_sh = shuffled(pos_idx)
    neg_sh = shuffled(neg_idx)
    member = np.empty(n, dtype=np.int64)
    for bucket, lo, hi in (
        (0, 0, p_train),
        (1, p_train, p_train + p_config),
        (2, p_train + p_config, p),
    ):
        for i in pos_sh[lo:hi]:
            member[i] = bucket
    q_train = n_train - p_train
    q_config = n_config - p_config
    for bucket, lo, hi in (
        (0, 0, q_train),
        (1, q_train, q_train + q_config),
        (2, q_train + q_config, len(neg_sh)),
    ):
        for i in neg_sh[lo:hi]:
            member[i] = bucket

    out: tuple[list[ImageRecord], ...] = ([], [], [])
    for i, r in enumerate(records):
        out[member[i]].append(r)
    return DatasetSplits(train=out[0], config=out[1], eval=out[2])


def _write_pnm(path: str, record: ImageRecord) -> None:
    planes = record.plane_array()
    if record.channels == 3:
        header = b"P6\n%d %d\n255\n" % (record.width, record.height)
        raster = planes.transpose(1, 2, 0).tobytes()
    elif record.channels == 1:
        header = b"P5\n%d %d\n255\n" % (record.width, record.height)
        raster = planes.tobytes()
    else:
        raise ValidationError(f"image {record.id}: unsupported channel count {record.channels}")
    with open(path, "wb") as fh:
        fh.write(header + raster)


def _read_pnm_header(data: bytes, path: str):
    # magic, then width/height/maxval tokens; '#' comments run to end of line
    if data[:2] not in (b"P5", b"P6"):
        raise ValidationError(f"{path}: not a binary PGM/PPM file")
    pos = 2
    fields = []
    while len(fields) < 3:
        if pos >= len(data):
            raise ValidationError(f"{path}: truncated header")
        c = data[pos:pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            nl = data.find(b"\n", pos)
            pos = len(data) if nl < 0 else nl + 1
        elif c.isdigit():
            start = pos
            while pos < len(data) and data[pos:pos + 1].isdigit():
                pos += 1
            fields.append(int(data[start:pos]))
        else:
            raise ValidationError(f"{path}: bad header byte {c!r}")
    return data[:2], fields[0], fields[1], fields[2], pos + 1


def read_image_file(path: str, image_id: int, label: int) -> ImageRecord:
    """Read one PPM/PGM file into an ImageRecord."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise ArtifactIOError(f"cannot read image {path}: {exc}") from exc
    magic, width, height, maxval, offset = _read_pnm_header(data, path)
    if maxval != 255:
        raise ValidationError(f"{path}: maxval must be 255, got {maxval}")
    if width <= 0 or height <= 0:
        raise ValidationError(f"{path}: non-positive dimensions")
    channels = 3 if magic == b"P6" else 1
    expected = width * height * channels
    raster = data[offset:offset + expected]
    if len(raster) != expected:
        raise ValidationError(f"{path}: raster has {len(raster)} bytes, expected {expected}")
    arr = np.frombuffer(raster, dtype=np.uint8)
    if channels == 3:
        planes = arr.reshape(height, width, 3).transpose(2, 0, 1)
    else:
        planes = arr.reshape(1, height, width)
    return ImageRecord(
        id=image_id,
        width=width,
        height=height,
        channels=channels,
        pixels=planes.tobytes(),
        label=label,
    )


def write_corpus(records: Sequence[ImageRecord], out_dir: str) -> str:
    """Write images plus manifest.json under out_dir; returns manifest path."""
    img_dir = os.path.join(out_dir, "images")
    try:
        os.makedirs(img_dir, exist_ok=True)
    except OSError as exc:
        raise ArtifactIOError(f"cannot create {img_dir}: {exc}") from exc
    entries = []
    for r in records:
        ext = "ppm" if r.channels == 3 else "pgm"
        rel = f"images/img_{r.id:06d}.{ext}"
        try:
            _write_pnm(os.path.join(out_dir, rel), r)
        except OSError as exc:
            raise ArtifactIOError(f"cannot write image {rel}: {exc}") from exc
        entries.append({"id": r.id, "path": rel, "label": r.label})
    manifest_path = os.path.join(out_dir, "manifest.json")
    try:
        with open(manifest_path, "w", encoding="utf-8") as fh:
            json.dump(entries, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise ArtifactIOError(f"cannot write manifest: {exc}") from exc
    return manifest_path


def load_corpus(corpus_dir: str) -> list[ImageRecord]:
    """Load a corpus from its manifest.json.  Difficulties are not restored."""
    manifest_path = os.path.join(corpus_dir, "manifest.json")
    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            entries = json.load(fh)
    except OSError as exc:
        raise ArtifactIOError(f"cannot read manifest {manifest_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"manifest {manifest_path} is not valid JSON: {exc}") from exc
    if not isinstance(entries, list):
        raise ValidationError("manifest must be a JSON array")
    records = []
    seen = set()
    for k, entry in enumerate(entries):
        if not isinstance(entry, dict) or not {"id", "path", "label"} <= set(entry):
            raise ValidationError(f"manifest entry {k} must have id, path, label")
        image_id, label = entry["id"], entry["label"]
        if not isinstance(image_id, int) or isinstance(image_id, bool):
            raise ValidationError(f"manifest entry {k}: id must be an integer")
        if label not in (0, 1) or isinstance(label, bool):
            raise ValidationError(f"manifest entry {k}: label must be 0 or 1")
        if image_id in seen:
            raise ValidationError(f"manifest entry {k}: duplicate image id {image_id}")
        seen.add(image_id)
        records.append(read_image_file(os.path.join(corpus_dir, entry["path"]), image_id, label))
    return records


def write_label_file(records: Sequence[ImageRecord], path: str) -> None:
    """Write an image_id,label CSV sidecar for one split."""
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("image_id,label\n")
            for r in records:
                fh.write(f"{r.id},{r.label}\n")
    except OSError as exc:
        raise ArtifactIOError(f"cannot write labels {path}: {exc}") from exc


def read_label_file(path: str) -> dict[int, int]:
    """Read an image_id,label CSV sidecar into an id-keyed mapping."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ArtifactIOError(f"cannot read labels {path}: {exc}") from exc
    if not lines or lines[0] != "image_id,label":
        raise ValidationError(f"{path}: first line must be 'image_id,label'")
    labels: dict[int, int] = {}
    for k, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 2:
            raise ValidationError(f"{path} line {k}: expected two fields")
        try:
            image_id, label = int(parts[0]), int(parts[1])
        except ValueError:
            raise ValidationError(f"{path} line {k}: fields must be integers") from None
        if label not in (0, 1):
            raise ValidationError(f"{path} line {k}: label must be 0 or 1")
        if image_id in labels:
            raise ValidationError(f"{path} line {k}: duplicate image id {image_id}")
        labels[image_id] = label
    return labels
