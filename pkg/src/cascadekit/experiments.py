"""Desk-scale experiment orchestration.

Three studies mirror the headline analyses: a transform ablation
(how much do resizing / color-mode transforms buy), a scenario-awareness
comparison (selecting with vs without deployment costs in view), and a
cascade-depth study (diminishing returns of deeper cascades).  All run
on the synthetic corpus/backend by default so results are deterministic
and machine-independent.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from .calibration import CalibratedModel, calibrate_all
from .cascade import precompute_outcomes
from .corpus import DatasetSplits, ImageRecord, generate_corpus, split_dataset
from .costs import CostProfile, DeploymentScenario, profile_costs_synthetic
from .engine import CatalogResult, evaluate_catalog
from .errors import ArtifactIOError, ValidationError
from .models import (
    ModelSpec,
    ScoreMatrix,
    SyntheticScorer,
    arch_grid,
    enumerate_model_grid,
    score_dataset,
)
from .pareto import (
    ParetoFrontier,
    SelectionConstraint,
    alc,
    average_throughput,
    select,
)
from .transforms import ColorMode, TransformSpec, transform_grid

DEFAULT_PRECISIONS = (0.91, 0.93, 0.95, 0.97, 0.99)
DEFAULT_SIZES = ((30, 30), (60, 60), (120, 120), (224, 224))
DEFAULT_MODES = (ColorMode.FULL_RGB, ColorMode.RED, ColorMode.GREEN,
                 ColorMode.BLUE, ColorMode.GRAY)
DEFAULT_LOSS_LEVELS = (0.0, 0.02, 0.05, 0.10)


@dataclass(frozen=True)
class GridConfig:
    """Everything a pipeline run needs, loadable from one JSON file."""

    conv_layers: tuple[int, ...] = (1, 2, 4)
    conv_nodes: tuple[int, ...] = (16, 32)
    dense_nodes: tuple[int, ...] = (16, 32, 64)
    sizes: tuple[tuple[int, int], ...] = DEFAULT_SIZES
    modes: tuple[ColorMode, ...] = DEFAULT_MODES
    anchor: bool = True
    anchor_size: tuple[int, int] = (224, 224)
    anchor_mode: ColorMode = ColorMode.FULL_RGB
    precisions: tuple[float, ...] = DEFAULT_PRECISIONS
    grid_step: float = 0.01
    cost_constants: tuple[float, float, float, float] = (5e-5, 2e-9, 5e-10, 1e-9)
    source_value_count: Optional[int] = None
    seed: int = 7
    splits: tuple[float, float, float] = (0.5, 0.25, 0.25)
    corpus_count: int = 4000
    corpus_width: int = 64
    corpus_height: int = 64
    pos_fraction: float = 0.5

    def anchor_transform(self) -> TransformSpec:
        return TransformSpec(self.anchor_size[0], self.anchor_size[1], self.anchor_mode)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "splits": list(self.splits),
            "corpus": {
                "count": self.corpus_count,
                "width": self.corpus_width,
                "height": self.corpus_height,
                "pos_fraction": self.pos_fraction,
            },
            "arch": {
                "conv_layers": list(self.conv_layers),
                "conv_nodes": list(self.conv_nodes),
                "dense_nodes": list(self.dense_nodes),
            },
            "transforms": {
                "sizes": [list(s) for s in self.sizes],
                "modes": [m.value for m in self.modes],
            },
            "anchor": {
                "enabled": self.anchor,
                "width": self.anchor_size[0],
                "height": self.anchor_size[1],
                "mode": self.anchor_mode.value,
            },
            "precisions": list(self.precisions),
            "grid_step": self.grid_step,
            "profile": {
                "constants": list(self.cost_constants),
                "source_value_count": self.source_value_count,
            },
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "GridConfig":
        base = cls()
        try:
            kwargs = {}
            if "seed" in raw:
                kwargs["seed"] = int(raw["seed"])
            if "splits" in raw:
                kwargs["splits"] = tuple(float(f) for f in raw["splits"])
            corpus = raw.get("corpus", {})
            if "count" in corpus:
                kwargs["corpus_count"] = int(corpus["count"])
            if "width" in corpus:
                kwargs["corpus_width"] = int(corpus["width"])
            if "height" in corpus:
                kwargs["corpus_height"] = int(corpus["height"])
            if "pos_fraction" in corpus:
                kwargs["pos_fraction"] = float(corpus["pos_fraction"])
            arch = raw.get("arch", {})
            if "conv_layers" in arch:
                kwargs["conv_layers"] = tuple(int(v) for v in arch["conv_layers"])
            if "conv_nodes" in arch:
                kwargs["conv_nodes"] = tuple(int(v) for v in arch["conv_nodes"])
            if "dense_nodes" in arch:
                kwargs["dense_nodes"] = tuple(int(v) for v in arch["dense_nodes"])
            transforms = raw.get("transforms", {})
            if "sizes" in transforms:
                kwargs["sizes"] = tuple(
                    (int(w), int(h)) for w, h in transforms["sizes"]
                )
            if "modes" in transforms:
                kwargs["modes"] = tuple(ColorMode(m) for m in transforms["modes"])
            anchor = raw.get("anchor", {})
            if "enabled" in anchor:
                kwargs["anchor"] = bool(anchor["enabled"])
            if "width" in anchor and "height" in anchor:
                kwargs["anchor_size"] = (int(anchor["width"]), int(anchor["height"]))
            if "mode" in anchor:
                kwargs["anchor_mode"] = ColorMode(anchor["mode"])
            if "precisions" in raw:
                kwargs["precisions"] = tuple(float(p) for p in raw["precisions"])
            if "grid_step" in raw:
                kwargs["grid_step"] = float(raw["grid_step"])
            profile = raw.get("profile", {})
            if "constants" in profile:
                consts = profile["constants"]
                if len(consts) != 4:
                    raise ValidationError("profile constants must be [c0, c1, c2, c3]")
                kwargs["cost_constants"] = tuple(float(c) for c in consts)
            if profile.get("source_value_count") is not None:
                kwargs["source_value_count"] = int(profile["source_value_count"])
            return replace(base, **kwargs)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"bad grid config: {exc}") from exc

    @classmethod
    def from_json_file(cls, path: str) -> "GridConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ArtifactIOError(f"cannot read grid config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ValidationError(f"grid config {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ValidationError(f"grid config {path} must be a JSON object")
        return cls.from_dict(raw)


def build_models(config: GridConfig,
                 sizes: Optional[Sequence[tuple[int, int]]] = None,
                 modes: Optional[Sequence[ColorMode]] = None) -> list[ModelSpec]:
    """Model pool for a config, optionally restricted to a transform subset."""
    archs = arch_grid(config.conv_layers, config.conv_nodes, config.dense_nodes)
    transforms = transform_grid(sizes or config.sizes, modes or config.modes)
    return enumerate_model_grid(
        archs, transforms,
        include_anchor=config.anchor,
        anchor_transform=config.anchor_transform(),
    )


def default_corpus(config: GridConfig) -> list[ImageRecord]:
    return generate_corpus(config.seed, config.corpus_count, config.corpus_width,
                           config.corpus_height, config.pos_fraction)


@dataclass
class PipelineData:
    """Scored and labeled splits for one model pool."""

    splits: DatasetSplits
    config_matrix: ScoreMatrix
    eval_matrix: ScoreMatrix
    config_labels: np.ndarray
    eval_labels: np.ndarray
    scorer: SyntheticScorer


def score_pipeline(records: Sequence[ImageRecord], config: GridConfig,
                   models: Sequence[ModelSpec]) -> PipelineData:
    """Split the corpus and score config/eval with the synthetic backend."""
    splits = split_dataset(records, config.splits, config.seed)
    scorer = SyntheticScorer(config.seed)
    config_matrix = score_dataset(models, splits.config, scorer, "config")
    eval_matrix = score_dataset(models, splits.eval, scorer, "eval")
    return PipelineData(
        splits=splits,
        config_matrix=config_matrix,
        eval_matrix=eval_matrix,
        config_labels=np.array([r.label for r in splits.config], dtype=np.int64),
        eval_labels=np.array([r.label for r in splits.eval], dtype=np.int64),
        scorer=scorer,
    )


ABLATION_SUBSETS = ("None", "Color Variations", "Resizing", "Full")


@dataclass
class AblationRow:
    subset: str
    grid_model_count: int
    model_count: int
    catalog_size: int
    frontier_size: int
    alc: float
    avg_throughput_fps: float


@dataclass
class AblationReport:
    scenario: DeploymentScenario
    a_lo: float
    a_hi: float
    rows: list[AblationRow]

    def row(self, subset: str) -> AblationRow:
        for r in self.rows:
            if r.subset == subset:
                return r
        raise ValidationError(f"no ablation row named {subset!r}")

    @property
    def full_vs_none_ratio(self) -> float:
        return self.row("Full").avg_throughput_fps / self.row("None").avg_throughput_fps

    @property
    def resizing_vs_color_ratio(self) -> float:
        return (
            self.row("Resizing").avg_throughput_fps
            / self.row("Color Variations").avg_throughput_fps
        )


def _ablation_transform_subsets(config: GridConfig) -> dict[str, tuple]:
    full_size = max(config.sizes, key=lambda s: s[0] * s[1])
    rgb = (ColorMode.FULL_RGB,)
    return {
        "None": ((full_size,), rgb),
        "Color Variations": ((full_size,), config.modes),
        "Resizing": (config.sizes, rgb),
        "Full": (config.sizes, config.modes),
    }


def run_transform_ablation(records: Sequence[ImageRecord], config: GridConfig,
                           scenario: DeploymentScenario = DeploymentScenario.CAMERA,
                           profile: Optional[CostProfile] = None,
                           max_depth: int = 3,
                           threads: Optional[int] = None) -> AblationReport:
    """Catalog each transform-subset pool and compare average throughput.

    All pools share one scoring pass over the Full pool (subsets are
    model subsets).  Average throughput is taken from the bottom of the
    Full frontier up to the smallest per-pool maximum accuracy, so the
    metric is defined for every pool.
    """
    full_models = build_models(config)
    data = score_pipeline(records, config, full_models)
    calibrated = calibrate_all(data.config_matrix, data.config_labels,
                               config.precisions, config.grid_step)
    if profile is None:
        profile = profile_costs_synthetic(full_models, config.cost_constants,
                                          config.source_value_count)

    entries_by_model: dict[str, list[CalibratedModel]] = {}
    for e in calibrated:
        entries_by_model.setdefault(e.model_id, []).append(e)

    frontiers: dict[str, ParetoFrontier] = {}
    rows: list[AblationRow] = []
    for subset in ABLATION_SUBSETS:
        sizes, modes = _ablation_transform_subsets(config)[subset]
        pool = build_models(config, sizes=sizes, modes=modes)
        pool_entries = [e for m in pool for e in entries_by_model.get(m.model_id, [])]
        table = precompute_outcomes(data.eval_matrix, pool_entries)
        result = evaluate_catalog(table, data.eval_labels, pool, profile,
                                  [scenario], max_depth, threads=threads)
        frontier = result.frontier(scenario)
        frontiers[subset] = frontier
        rows.append(
            AblationRow(
                subset=subset,
                grid_model_count=sum(1 for m in pool if not m.is_anchor),
                model_count=len(pool),
                catalog_size=result.count,
                frontier_size=len(frontier.points),
                alc=0.0,
                avg_throughput_fps=0.0,
            )
        )

    a_lo = min(p.accuracy for p in frontiers["Full"].points)
    a_hi = min(f.max_accuracy for f in frontiers.values())
    if a_lo >= a_hi:
        raise ValidationError(
            f"ablation accuracy range is empty: [{a_lo}, {a_hi}]; "
            "pools disagree too strongly to compare"
        )
    for row in rows:
        row.alc = alc(frontiers[row.subset], a_lo, a_hi)
        row.avg_throughput_fps = average_throughput(frontiers[row.subset], a_lo, a_hi)
    return AblationReport(scenario=scenario, a_lo=a_lo, a_hi=a_hi, rows=rows)


@dataclass
class ScenarioRow:
    scenario: DeploymentScenario
    loss_level: float
    oblivious_cascade_id: str
    aware_cascade_id: str
    oblivious_fps: float
    aware_fps: float

    @property
    def improvement_pct(self) -> float:
        return (self.aware_fps / self.oblivious_fps - 1.0) * 100.0


def run_scenario_comparison(result: CatalogResult,
                            loss_levels: Sequence[float] = DEFAULT_LOSS_LEVELS,
                            ) -> list[ScenarioRow]:
    """Oblivious vs aware selection on a catalog holding all 4 scenarios.

    Oblivious picks on the INFER_ONLY frontier and pays the chosen
    cascade's true cost in the target scenario; aware picks on the
    target frontier directly.
    """
    if DeploymentScenario.INFER_ONLY not in result.scenarios:
        raise ValidationError("scenario comparison needs an INFER_ONLY catalog")
    frontiers = {s: result.frontier(s) for s in result.scenarios}
    infer_frontier = frontiers[DeploymentScenario.INFER_ONLY]

    def fps_in(scenario: DeploymentScenario, cascade_id: str) -> float:
        matches = np.flatnonzero(result.ids == np.uint64(int(cascade_id, 16)))
        if not len(matches):
            raise ValidationError(f"cascade {cascade_id} missing from catalog")
        return float(1.0 / result.times[scenario][matches[0]])

    rows = []
    for scenario in result.scenarios:
        for loss in loss_levels:
            constraint = SelectionConstraint(max_accuracy_loss=loss)
            oblivious_pt = select(infer_frontier, constraint)
            aware_pt = select(frontiers[scenario], constraint)
            rows.append(
                ScenarioRow(
                    scenario=scenario,
                    loss_level=loss,
                    oblivious_cascade_id=oblivious_pt.cascade_id,
                    aware_cascade_id=aware_pt.cascade_id,
                    oblivious_fps=fps_in(scenario, oblivious_pt.cascade_id),
                    aware_fps=aware_pt.throughput_fps,
                )
            )
    return rows


@dataclass(frozen=True)
class DepthConfig:
    name: str
    max_depth: int
    anchor_terminal_only_at_depth: int


DEFAULT_DEPTH_CONFIGS = (
    DepthConfig("depth-1", 1, 4),
    DepthConfig("depth-1+anchor", 2, 2),
    DepthConfig("depth-2", 2, 4),
    DepthConfig("depth-2+anchor", 3, 3),
    DepthConfig("depth-3", 3, 4),
)


def default_depth_pool(config: GridConfig) -> list[ModelSpec]:
    """Reduced pool for the depth study; unrestricted depth-3 on the full
    grid is out of budget by construction."""
    small = replace(
        config,
        conv_layers=config.conv_layers[:2],
        conv_nodes=config.conv_nodes[:1],
        dense_nodes=config.dense_nodes[:2],
    )
    sizes = (min(config.sizes, key=lambda s: s[0] * s[1]),
             max(config.sizes, key=lambda s: s[0] * s[1]))
    modes = tuple(
        m for m in config.modes if m in (ColorMode.FULL_RGB, ColorMode.GRAY)
    ) or config.modes[:1]
    return build_models(small, sizes=sizes, modes=modes)


@dataclass
class DepthRow:
    name: str
    catalog_size: int
    frontier_size: int
    alc: float
    avg_throughput_fps: float
    delta_pct: Optional[float]


@dataclass
class DepthReport:
    scenario: DeploymentScenario
    a_lo: float
    a_hi: float
    rows: list[DepthRow]

    def row(self, name: str) -> DepthRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise ValidationError(f"no depth row named {name!r}")


def run_depth_study(records: Sequence[ImageRecord], config: GridConfig,
                    scenario: DeploymentScenario = DeploymentScenario.CAMERA,
                    depth_configs: Sequence[DepthConfig] = DEFAULT_DEPTH_CONFIGS,
                    pool: Optional[Sequence[ModelSpec]] = None,
                    profile: Optional[CostProfile] = None,
                    threads: Optional[int] = None) -> DepthReport:
    """ALC progression across nested depth configurations.

    The configurations form a chain of catalog supersets, so ALC over
    the depth-1 frontier's accuracy span is monotone; deltas quantify
    what each extra depth buys.
    """
    pool = list(pool) if pool is not None else default_depth_pool(config)
    data = score_pipeline(records, config, pool)
    calibrated = calibrate_all(data.config_matrix, data.config_labels,
                               config.precisions, config.grid_step)
    table = precompute_outcomes(data.eval_matrix, calibrated)
    if profile is None:
        profile = profile_costs_synthetic(pool, config.cost_constants,
                                          config.source_value_count)

    frontiers = []
    counts = []
    for dc in depth_configs:
        result = evaluate_catalog(table, data.eval_labels, pool, profile,
                                  [scenario], dc.max_depth,
                                  anchor_terminal_only_at_depth=dc.anchor_terminal_only_at_depth,
                                  threads=threads)
        frontiers.append(result.frontier(scenario))
        counts.append(result.count)

    base = frontiers[0]
    a_lo = min(p.accuracy for p in base.points)
    a_hi = base.max_accuracy
    if a_lo >= a_hi:
        # degenerate single-point base frontier: widen to a tiny band below
        a_lo = a_hi - 1e-6
    rows = []
    prev = None
    for dc, frontier, count in zip(depth_configs, frontiers, counts):
        value = alc(frontier, a_lo, a_hi)
        delta = None if prev is None else (value / prev - 1.0) * 100.0
        rows.append(
            DepthRow(
                name=dc.name,
                catalog_size=count,
                frontier_size=len(frontier.points),
                alc=value,
                avg_throughput_fps=value / (a_hi - a_lo),
                delta_pct=delta,
            )
        )
        prev = value
    return DepthReport(scenario=scenario, a_lo=a_lo, a_hi=a_hi, rows=rows)


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise ArtifactIOError(f"cannot write report {path}: {exc}") from exc


def _write_json(path: str, payload: dict) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise ArtifactIOError(f"cannot write report {path}: {exc}") from exc


def _fmt(x: float) -> str:
    return "%.17g" % x


def write_ablation_report(report: AblationReport, out_dir: str) -> None:
    rows = [
        [r.subset, r.grid_model_count, r.model_count, r.catalog_size,
         r.frontier_size, _fmt(r.alc), _fmt(r.avg_throughput_fps)]
        for r in report.rows
    ]
    _write_csv(
        os.path.join(out_dir, "ablation.csv"),
        ["subset", "grid_models", "models", "catalog_size", "frontier_size",
         "alc", "avg_throughput_fps"],
        rows,
    )
    _write_json(
        os.path.join(out_dir, "ablation_summary.json"),
        {
            "scenario": report.scenario.value,
            "accuracy_range": [report.a_lo, report.a_hi],
            "full_vs_none_ratio": report.full_vs_none_ratio,
            "resizing_vs_color_ratio": report.resizing_vs_color_ratio,
        },
    )


def write_scenario_report(rows: Sequence[ScenarioRow], out_dir: str) -> None:
    csv_rows = [
        [r.scenario.value, _fmt(r.loss_level), r.oblivious_cascade_id,
         r.aware_cascade_id, _fmt(r.oblivious_fps), _fmt(r.aware_fps),
         _fmt(r.improvement_pct)]
        for r in rows
    ]
    _write_csv(
        os.path.join(out_dir, "scenario.csv"),
        ["scenario", "loss_level", "oblivious_cascade_id", "aware_cascade_id",
         "oblivious_fps", "aware_fps", "improvement_pct"],
        csv_rows,
    )
    worst = min(rows, key=lambda r: r.improvement_pct)
    best = max(rows, key=lambda r: r.improvement_pct)
    _write_json(
        os.path.join(out_dir, "scenario_summary.json"),
        {
            "rows": len(rows),
            "min_improvement_pct": worst.improvement_pct,
            "max_improvement_pct": best.improvement_pct,
            "strict_improvements": sum(1 for r in rows if r.aware_fps > r.oblivious_fps),
        },
    )


def write_depth_report(report: DepthReport, out_dir: str) -> None:
    rows = [
        [r.name, r.catalog_size, r.frontier_size, _fmt(r.alc),
         _fmt(r.avg_throughput_fps),
         "" if r.delta_pct is None else _fmt(r.delta_pct)]
        for r in report.rows
    ]
    _write_csv(
        os.path.join(out_dir, "depth.csv"),
        ["configuration", "catalog_size", "frontier_size", "alc",
         "avg_throughput_fps", "delta_pct"],
        rows,
    )
    _write_json(
        os.path.join(out_dir, "depth_summary.json"),
        {
            "scenario": report.scenario.value,
            "accuracy_range": [report.a_lo, report.a_hi],
            "alc": {r.name: r.alc for r in report.rows},
        },
    )
