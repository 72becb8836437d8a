"""Cost profiles, deployment scenarios, and expected per-image time.

A cascade's per-image cost decomposes into load + transform + infer.
Which terms apply depends on the deployment scenario, and representation
costs are charged lazily: only for images that actually reach the first
level needing that representation, and only once per image even when
several levels share it.
"""

from __future__ import annotations

import json
import os
import statistics
import tempfile
import time
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence, Union

import numpy as np

from .cascade import CascadeSpec, OutcomeTable
from .corpus import ImageRecord, write_corpus
from .errors import ArtifactIOError, ValidationError
from .models import ModelSpec, ScorerBackend
from .transforms import apply_transform, input_value_count, representation_key

_ARCH_MULT_DENOM = 4 * 32 * 64
_ANCHOR_INFER_FACTOR = 50.0
DEFAULT_COST_CONSTANTS = (5e-5, 2e-9, 5e-10, 1e-9)


class DeploymentScenario(Enum):
    INFER_ONLY = "INFER_ONLY"
    ARCHIVE = "ARCHIVE"
    ONGOING = "ONGOING"
    CAMERA = "CAMERA"


@dataclass(frozen=True)
class CostProfile:
    load_full_s: float
    load_repr_s: dict[str, float]
    transform_s: dict[str, float]
    infer_s: dict[str, float]

    def __post_init__(self):
        values = [self.load_full_s]
        values += list(self.load_repr_s.values())
        values += list(self.transform_s.values())
        values += list(self.infer_s.values())
        if any(v < 0 for v in values):
            raise ValidationError("cost profile times must be non-negative")


@dataclass(frozen=True)
class TimeBreakdown:
    load_s: float
    transform_s: float
    infer_s: float
    total_s: float


ReprSource = Union[Sequence[ModelSpec], Mapping[str, str]]


def representation_map(models: ReprSource) -> Mapping[str, str]:
    """model_id -> representation key, from specs or an existing mapping."""
    if isinstance(models, Mapping):
        return models
    return {m.model_id: representation_key(m.transform) for m in models}


def profile_costs_synthetic(models: Sequence[ModelSpec],
                            constants: tuple[float, float, float, float] = DEFAULT_COST_CONSTANTS,
                            source_value_count: int | None = None) -> CostProfile:
    """Deterministic stand-in for wall-clock profiling.

    infer = c0 + c1 * input_values * arch_mult with arch_mult the
    architecture product normalized by the largest grid architecture;
    the anchor costs 50x the most expensive grid model.  Transform and
    load scale linearly in the produced value count (c2, c3), and the
    full-size load uses the source value count (defaults to the largest
    transform in the pool).
    """
    c0, c1, c2, c3 = constants
    if min(constants) < 0:
        raise ValidationError("cost constants must be non-negative")
    infer_s: dict[str, float] = {}
    repr_values: dict[str, int] = {}
    anchor_ids = []
    grid_max = None
    for m in models:
        key = representation_key(m.transform)
        repr_values[key] = input_value_count(m.transform)
        if m.is_anchor:
            anchor_ids.append(m.model_id)
            continue
        if m.arch is None:
            raise ValidationError(f"model {m.model_id} has no architecture and is not the anchor")
        mult = (m.arch.conv_layers * m.arch.conv_nodes * m.arch.dense_nodes) / _ARCH_MULT_DENOM
        t = c0 + c1 * input_value_count(m.transform) * mult
        infer_s[m.model_id] = t
        grid_max = t if grid_max is None else max(grid_max, t)
    if anchor_ids:
        if grid_max is None:
            raise ValidationError("anchor cost is relative to grid models; none supplied")
        for a in anchor_ids:
            infer_s[a] = _ANCHOR_INFER_FACTOR * grid_max
    if source_value_count is None:
        if not repr_values:
            raise ValidationError("cannot infer source size from an empty model list")
        source_value_count = max(repr_values.values())
    return CostProfile(
        load_full_s=c3 * source_value_count,
        load_repr_s={k: c3 * v for k, v in repr_values.items()},
        transform_s={k: c2 * v for k, v in repr_values.items()},
        infer_s=infer_s,
    )


def profile_costs_measured(backend: ScorerBackend, models: Sequence[ModelSpec],
                           sample: Sequence[ImageRecord],
                           repetitions: int = 3) -> CostProfile:
    """Wall-clock profile: median over repetitions of per-image times.

    Transforms are timed through apply_transform, loads through reads of
    representations written to a scratch directory, and inference through
    backend.score calls.  Single-threaded by design so timings are not
    distorted by contention.
    """
    if repetitions < 3:
        raise ValidationError("repetitions must be >= 3")
    if not sample:
        raise ValidationError("measured profiling needs a non-empty sample")
    by_repr: dict[str, ModelSpec] = {}
    for m in models:
        by_repr.setdefault(representation_key(m.transform), m)

    def median_of(fn) -> float:
        times = []
        for _ in range(repetitions):
            start = time.perf_counter()
            fn()
            times.append((time.perf_counter() - start) / len(sample))
        return statistics.median(times)

    transform_s = {}
    for key, m in by_repr.items():
        spec = m.transform
        transform_s[key] = median_of(lambda: [apply_transform(r, spec) for r in sample])

    with tempfile.TemporaryDirectory(prefix="cascadekit-profile-") as scratch:
        try:
            load_repr_s = {}
            for key, m in by_repr.items():
                spec = m.transform
                paths = []
                for i, r in enumerate(sample):
                    path = os.path.join(scratch, f"{key.replace(':', '_')}_{i}.bin")
                    with open(path, "wb") as fh:
                        fh.write(apply_transform(r, spec).tobytes())
                    paths.append(path)

                def read_all(paths=paths):
                    for p in paths:
                        with open(p, "rb") as fh:
                            fh.read()

                load_repr_s[key] = median_of(read_all)

            full_dir = os.path.join(scratch, "full")
            write_corpus(sample, full_dir)
            from .corpus import load_corpus

            load_full_s = median_of(lambda: load_corpus(full_dir))
        except OSError as exc:
            raise ArtifactIOError(f"profiling scratch I/O failed: {exc}") from exc

    infer_s = {}
    for m in models:
        infer_s[m.model_id] = median_of(lambda: [backend.score(m, r) for r in sample])
    return CostProfile(load_full_s, load_repr_s, transform_s, infer_s)


def _repr_cost(profile: CostProfile, scenario: DeploymentScenario, key: str):
    """(seconds, breakdown slot) charged the first time a repr is needed."""
    if scenario is DeploymentScenario.INFER_ONLY:
        return 0.0, None
    if scenario is DeploymentScenario.ONGOING:
        if key not in profile.load_repr_s:
            raise ValidationError(f"profile has no load_repr_s entry for {key}")
        return profile.load_repr_s[key], "load"
    if key not in profile.transform_s:
        raise ValidationError(f"profile has no transform_s entry for {key}")
    return profile.transform_s[key], "transform"


def expected_classify_time(cascade: CascadeSpec, table: OutcomeTable,
                           profile: CostProfile, scenario: DeploymentScenario,
                           models: ReprSource) -> tuple[float, TimeBreakdown]:
    """Expected per-image seconds for a cascade, with its breakdown.

    models supplies the model_id -> representation binding (a ModelSpec
    sequence or a prebuilt mapping).
    """
    repr_of = representation_map(models)
    n = table.image_count
    if n == 0:
        raise ValidationError("cannot compute expected time over an empty eval set")

    load = transform = infer = 0.0
    if scenario is DeploymentScenario.ARCHIVE:
        load += profile.load_full_s * n

    seen_reprs: set[str] = set()
    undecided = np.ones(n, dtype=bool)
    walk = [(lv.model_id, lv) for lv in cascade.levels]
    walk.append((cascade.terminal_model_id, None))
    for model_id, level in walk:
        reach = int(undecided.sum())
        key = repr_of.get(model_id)
        if key is None:
            raise ValidationError(f"no representation known for model {model_id}")
        if key not in seen_reprs:
            seen_reprs.add(key)
            cost, slot = _repr_cost(profile, scenario, key)
            if slot == "load":
                load += cost * reach
            elif slot == "transform":
                transform += cost * reach
        if model_id not in profile.infer_s:
            raise ValidationError(f"profile has no infer_s entry for {model_id}")
        infer += profile.infer_s[model_id] * reach
        if level is not None:
            undecided &= table.outcome_row(level) == 0

    load /= n
    transform /= n
    infer /= n
    total = load + transform + infer
    return total, TimeBreakdown(load, transform, infer, total)


def write_cost_profile(profile: CostProfile, path: str) -> None:
    payload = {
        "load_full_s": profile.load_full_s,
        "load_repr_s": profile.load_repr_s,
        "transform_s": profile.transform_s,
        "infer_s": profile.infer_s,
    }
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise ArtifactIOError(f"cannot write cost profile {path}: {exc}") from exc


def read_cost_profile(path: str) -> CostProfile:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise ArtifactIOError(f"cannot read cost profile {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"cost profile {path} is not valid JSON: {exc}") from exc
    try:
        profile = CostProfile(
            load_full_s=float(payload["load_full_s"]),
            load_repr_s={str(k): float(v) for k, v in payload["load_repr_s"].items()},
            transform_s={str(k): float(v) for k, v in payload["transform_s"].items()},
            infer_s={str(k): float(v) for k, v in payload["infer_s"].items()},
        )
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ValidationError(f"cost profile {path} is malformed: {exc}") from exc
    return profile
