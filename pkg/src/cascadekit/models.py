"""Model grid, synthetic scoring backend, and score-matrix artifacts.

A model couples a small conv-net architecture with an input transform;
one distinguished anchor model (no grid architecture) plays the role of
the large reference network.  Scoring produces a model x image matrix of
probabilities in [0, 1] that serializes to a plain-text artifact other
tools (and the trainer adapter) can produce and consume.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Protocol, Sequence

import numpy as np

from ._hashing import TAG_SCORE, fnv1a64, mix64, unit_float
from .corpus import ImageRecord
from .errors import ArtifactIOError, ValidationError
from .transforms import ColorMode, TransformSpec, input_value_count

# quality-model normalizers: largest grid input (224x224 RGB) and the
# largest architecture product (4 * 32 * 64)
_LOG2_MAX_VALUES = math.log2(150528)
_LOG2_MAX_ARCH = math.log2(8192)

ANCHOR_MODEL_ID = "anchor"


@dataclass(frozen=True)
class ArchSpec:
    conv_layers: int
    conv_nodes: int
    dense_nodes: int


@dataclass(frozen=True)
class ModelSpec:
    model_id: str
    arch: Optional[ArchSpec]
    transform: TransformSpec
    is_anchor: bool = False


class ScorerBackend(Protocol):
    def score(self, model: ModelSpec, image: ImageRecord) -> float: ...


def grid_model_id(arch: ArchSpec, transform: TransformSpec) -> str:
    return (
        f"c{arch.conv_layers}n{arch.conv_nodes}d{arch.dense_nodes}"
        f"-{transform.width}x{transform.height}-{transform.color_mode.value}"
    )


def arch_grid(conv_layers: Iterable[int], conv_nodes: Iterable[int],
              dense_nodes: Iterable[int]) -> list[ArchSpec]:
    """Cross the three architecture option lists, conv_layers outermost."""
    return [
        ArchSpec(layers, nodes, dense)
        for layers in conv_layers
        for nodes in conv_nodes
        for dense in dense_nodes
    ]


def enumerate_model_grid(archs: Sequence[ArchSpec], transforms: Sequence[TransformSpec],
                         include_anchor: bool = True,
                         anchor_transform: Optional[TransformSpec] = None) -> list[ModelSpec]:
    """All arch x transform pairings, architecture-major, plus the anchor."""
    models = [
        ModelSpec(grid_model_id(a, t), a, t)
        for a in archs
        for t in transforms
    ]
    if include_anchor:
        if anchor_transform is None:
            anchor_transform = TransformSpec(224, 224, ColorMode.FULL_RGB)
        models.append(ModelSpec(ANCHOR_MODEL_ID, None, anchor_transform, is_anchor=True))
    ids = [m.model_id for m in models]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate model ids in grid")
    return models


def model_quality(model: ModelSpec) -> float:
    """Latent quality in (0, 1]: grows with input size and arch capacity.

    The anchor is pinned to 1.0.  Grid models blend a 0.35 floor with
    log-scaled input-value and architecture-size terms so the largest
    grid model also reaches 1.0.
    """
    if model.is_anchor:
        return 1.0
    if model.arch is None:
        raise ValidationError(f"model {model.model_id} has no architecture and is not the anchor")
    a = model.arch
    arch_product = a.conv_layers * a.conv_nodes * a.dense_nodes
    return (
        0.35
        + 0.4 * (math.log2(input_value_count(model.transform)) / _LOG2_MAX_VALUES)
        + 0.25 * (math.log2(arch_product) / _LOG2_MAX_ARCH)
    )


def synthetic_score(model: ModelSpec, image: ImageRecord, noise_seed: int) -> float:
    """Deterministic stand-in for a trained classifier's probability.

    sigmoid(4 * quality * sign * (1 - difficulty) + eps) with sign +1 for
    positives, -1 for negatives, and eps hash-uniform in [-0.75, 0.75].
    """
    if image.latent_difficulty is None:
        raise ValidationError(
            f"image {image.id} has no latent difficulty; synthetic scoring "
            "requires a generated corpus (or attach_difficulties)"
        )
    q = model_quality(model)
    sign = 1.0 if image.label == 1 else -1.0
    eps = unit_float(mix64(noise_seed, TAG_SCORE, fnv1a64(model.model_id), image.id)) * 1.5 - 0.75
    x = 4.0 * q * sign * (1.0 - image.latent_difficulty) + eps
    return 1.0 / (1.0 + math.exp(-x))


class SyntheticScorer:
    """ScorerBackend over the synthetic score model; counts score() calls."""

    def __init__(self, noise_seed: int):
        self.noise_seed = noise_seed
        self.calls = 0
        self._quality: dict[str, float] = {}
        self._name_hash: dict[str, int] = {}

    def score(self, model: ModelSpec, image: ImageRecord) -> float:
        self.calls += 1
        if image.latent_difficulty is None:
            raise ValidationError(
                f"image {image.id} has no latent difficulty; synthetic scoring "
                "requires a generated corpus (or attach_difficulties)"
            )
        q = self._quality.get(model.model_id)
        if q is None:
            q = model_quality(model)
            self._quality[model.model_id] = q
            self._name_hash[model.model_id] = fnv1a64(model.model_id)
        eps = unit_float(
            mix64(self.noise_seed, TAG_SCORE, self._name_hash[model.model_id], image.id)
        ) * 1.5 - 0.75
        sign = 1.0 if image.label == 1 else -1.0
        x = 4.0 * q * sign * (1.0 - image.latent_difficulty) + eps
        return 1.0 / (1.0 + math.exp(-x))


@dataclass
class ScoreMatrix:
    """Scores for one split: rows are models, columns are images."""

    split_name: str
    model_ids: list[str]
    image_ids: list[int]
    scores: np.ndarray

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.scores.shape != (len(self.model_ids), len(self.image_ids)):
            raise ValidationError(
                f"score matrix shape {self.scores.shape} does not match "
                f"{len(self.model_ids)} models x {len(self.image_ids)} images"
            )
        if len(set(self.model_ids)) != len(self.model_ids):
            raise ValidationError("duplicate model ids in score matrix")
        if len(set(self.image_ids)) != len(self.image_ids):
            raise ValidationError("duplicate image ids in score matrix")
        if self.scores.size and (self.scores.min() < 0.0 or self.scores.max() > 1.0):
            raise ValidationError("scores must lie in [0, 1]")
        self._row_index = {m: i for i, m in enumerate(self.model_ids)}

    def row(self, model_id: str) -> np.ndarray:
        idx = self._row_index.get(model_id)
        if idx is None:
            raise ValidationError(f"model {model_id} not present in score matrix")
        return self.scores[idx]


def score_dataset(models: Sequence[ModelSpec], records: Sequence[ImageRecord],
                  backend: ScorerBackend, split_name: str) -> ScoreMatrix:
    """Score every model on every image exactly once."""
    scores = np.empty((len(models), len(records)), dtype=np.float64)
    for i, model in enumerate(models):
        for j, record in enumerate(records):
            try:
                value = backend.score(model, record)
            except ValidationError:
                raise
            except Exception as exc:
                raise ValidationError(
                    f"scoring backend failed for model {model.model_id}, "
                    f"image {record.id}: {exc}"
                ) from exc
            if not 0.0 <= value <= 1.0 or not math.isfinite(value):
                raise ValidationError(
                    f"backend returned score {value!r} outside [0, 1] for "
                    f"model {model.model_id}, image {record.id}"
                )
            scores[i, j] = value
    return ScoreMatrix(
        split_name=split_name,
        model_ids=[m.model_id for m in models],
        image_ids=[r.id for r in records],
        scores=scores,
    )


def write_model_registry(models: Sequence[ModelSpec], path: str) -> None:
    """Write a JSON array describing the model pool."""
    entries = []
    for m in models:
        entries.append(
            {
                "model_id": m.model_id,
                "conv_layers": m.arch.conv_layers if m.arch else None,
                "conv_nodes": m.arch.conv_nodes if m.arch else None,
                "dense_nodes": m.arch.dense_nodes if m.arch else None,
                "width": m.transform.width,
                "height": m.transform.height,
                "color_mode": m.transform.color_mode.value,
                "is_anchor": m.is_anchor,
            }
        )
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(entries, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise ArtifactIOError(f"cannot write model registry {path}: {exc}") from exc


def read_model_registry(path: str) -> list[ModelSpec]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            entries = json.load(fh)
    except OSError as exc:
        raise ArtifactIOError(f"cannot read model registry {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"model registry {path} is not valid JSON: {exc}") from exc
    if not isinstance(entries, list):
        raise ValidationError(f"model registry {path} must be a JSON array")
    models = []
    for k, e in enumerate(entries):
        try:
            transform = TransformSpec(int(e["width"]), int(e["height"]),
                                      ColorMode(e["color_mode"]))
            if e.get("is_anchor"):
                arch = None
            else:
                arch = ArchSpec(int(e["conv_layers"]), int(e["conv_nodes"]),
                                int(e["dense_nodes"]))
            models.append(ModelSpec(str(e["model_id"]), arch, transform,
                                    is_anchor=bool(e.get("is_anchor", False))))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"model registry {path}, entry {k}: {exc}") from exc
    ids = [m.model_id for m in models]
    if len(set(ids)) != len(ids):
        raise ValidationError(f"model registry {path} has duplicate model ids")
    return models


def write_score_matrix(matrix: ScoreMatrix, path: str) -> None:
    """Write the plain-text score artifact (UTF-8, LF line endings)."""
    lines = [f"split,{matrix.split_name}"]
    lines.append(",".join(str(i) for i in matrix.image_ids))
    for i, model_id in enumerate(matrix.model_ids):
        row = ",".join("%.17g" % v for v in matrix.scores[i])
        lines.append(f"{model_id},{row}" if row else model_id)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise ArtifactIOError(f"cannot write score matrix {path}: {exc}") from exc


def read_score_matrix(path: str) -> ScoreMatrix:
    """Parse a score artifact, citing line/column on any malformed value."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ArtifactIOError(f"cannot read score matrix {path}: {exc}") from exc
    if len(lines) < 2:
        raise ValidationError(f"{path}: expected a split line and an image-id line")
    if not lines[0].startswith("split,"):
        raise ValidationError(f"{path}, line 1: must start with 'split,'")
    split_name = lines[0][len("split,"):]
    try:
        image_ids = [int(tok) for tok in lines[1].split(",")] if lines[1] else []
    except ValueError:
        raise ValidationError(f"{path}, line 2: image ids must be integers") from None
    n = len(image_ids)
    model_ids: list[str] = []
    rows = []
    for lineno, line in enumerate(lines[2:], start=3):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != n + 1:
            raise ValidationError(
                f"{path}, line {lineno}: expected {n} scores, found {len(parts) - 1}"
            )
        model_ids.append(parts[0])
        try:
            row = np.array(parts[1:], dtype=np.float64)
        except ValueError:
            for col, tok in enumerate(parts[1:], start=1):
                try:
                    float(tok)
                except ValueError:
                    raise ValidationError(
                        f"{path}, line {lineno}, score column {col}: "
                        f"not a number: {tok!r}"
                    ) from None
            raise
        bad = np.nonzero(~((row >= 0.0) & (row <= 1.0)))[0]
        if bad.size:
            raise ValidationError(
                f"{path}, line {lineno}, score column {bad[0] + 1}: "
                f"value {row[bad[0]]!r} outside [0, 1]"
            )
        rows.append(row)
    scores = np.vstack(rows) if rows else np.empty((0, n))
    return ScoreMatrix(split_name, model_ids, image_ids, scores)
