"""Command-line pipeline: corpus to catalog to frontier to selection.

Every subcommand reads and writes plain artifacts (PNM images, CSV
matrices and catalogs, JSON registries) so stages can be rerun or
swapped independently.  Exit codes: 0 success, 2 validation failure,
3 selection infeasible, 4 artifact write/read failure.  Diagnostics go
to stderr; machine-readable results go to stdout or files.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from typing import Optional, Sequence

import numpy as np

from .calibration import calibrate_all, read_calibrated, write_calibrated
from .cascade import OutcomeTable, level_key, precompute_outcomes
from .corpus import (
    attach_difficulties,
    generate_corpus,
    load_corpus,
    read_label_file,
    write_corpus,
    write_label_file,
)
from .costs import (
    DeploymentScenario,
    profile_costs_synthetic,
    read_cost_profile,
    write_cost_profile,
)
from .engine import CatalogChunk, evaluate_catalog
from .errors import (
    ArtifactIOError,
    CascadeKitError,
    SelectionInfeasible,
    ValidationError,
)
from .experiments import (
    GridConfig,
    build_models,
    run_depth_study,
    run_scenario_comparison,
    run_transform_ablation,
    score_pipeline,
    write_ablation_report,
    write_depth_report,
    write_scenario_report,
)
from .models import (
    read_model_registry,
    read_score_matrix,
    write_model_registry,
    write_score_matrix,
)
from .pareto import (
    EvalPoint,
    SelectionConstraint,
    pareto_frontier,
    select,
    select_vs_reference,
)

CATALOG_HEADER = [
    "cascade_id", "depth", "levels", "terminal", "accuracy",
    "expected_time_s", "throughput_fps",
]
FRONTIER_HEADER = ["accuracy", "throughput_fps", "cascade_id", "depth", "scenario"]


def _fmt(x: float) -> str:
    return "%.17g" % x


def _require_file(path: str) -> str:
    if not os.path.isfile(path):
        raise ValidationError(f"input file not found: {path}")
    return path


def _require_dir(path: str) -> str:
    if not os.path.isdir(path):
        raise ValidationError(f"input directory not found: {path}")
    return path


def _parse_scenario(name: str) -> DeploymentScenario:
    normalized = name.strip().upper().replace("-", "_")
    try:
        return DeploymentScenario(normalized)
    except ValueError:
        options = ", ".join(s.value for s in DeploymentScenario)
        raise ValidationError(f"unknown scenario {name!r}; expected one of {options}") from None


def _load_config(path: Optional[str], seed: Optional[int]) -> GridConfig:
    if path is not None:
        config = GridConfig.from_json_file(_require_file(path))
    else:
        config = GridConfig()
    if seed is not None:
        from dataclasses import replace

        config = replace(config, seed=seed)
    return config


def _meta_path(catalog_path: str) -> str:
    stem, _ = os.path.splitext(catalog_path)
    return stem + ".meta.json"


def _parse_size(raw: str) -> tuple[int, int]:
    parts = raw.lower().split("x")
    if len(parts) != 2:
        raise ValidationError(f"bad size {raw!r}; expected WxH, e.g. 64x48")
    try:
        width, height = int(parts[0]), int(parts[1])
    except ValueError:
        raise ValidationError(f"bad size {raw!r}; expected WxH, e.g. 64x48") from None
    if width <= 0 or height <= 0:
        raise ValidationError(f"bad size {raw!r}; dimensions must be positive")
    return width, height


def _parse_splits(raw: str) -> tuple[float, float, float]:
    try:
        parts = tuple(float(f) for f in raw.split(","))
    except ValueError:
        raise ValidationError(f"bad splits {raw!r}; expected three fractions") from None
    if len(parts) != 3:
        raise ValidationError(f"bad splits {raw!r}; expected three fractions")
    return parts


def cmd_gen_corpus(args) -> int:
    width, height = _parse_size(args.size)
    records = generate_corpus(args.seed, args.count, width, height,
                              args.pos_frac)
    try:
        os.makedirs(args.out, exist_ok=True)
    except OSError as exc:
        raise ArtifactIOError(f"cannot create {args.out}: {exc}") from exc
    manifest = write_corpus(records, args.out)
    print(f"wrote {len(records)} images; manifest at {manifest}", file=sys.stderr)
    return 0


def _slice_matrix(full, models, records, split_name: str):
    """Cut a full-corpus score matrix down to one split, in grid order."""
    from .models import ScoreMatrix

    col = {image_id: k for k, image_id in enumerate(full.image_ids)}
    missing = [r.id for r in records if r.id not in col]
    if missing:
        raise ValidationError(
            f"score file has no column for image id {missing[0]} ({split_name} split)"
        )
    row = {model_id: k for k, model_id in enumerate(full.model_ids)}
    absent = [m.model_id for m in models if m.model_id not in row]
    if absent:
        raise ValidationError(f"score file has no row for model {absent[0]}")
    rows = np.array([row[m.model_id] for m in models], dtype=np.intp)
    cols = np.array([col[r.id] for r in records], dtype=np.intp)
    return ScoreMatrix(
        split_name=split_name,
        model_ids=[m.model_id for m in models],
        image_ids=[r.id for r in records],
        scores=full.scores[np.ix_(rows, cols)].copy(),
    )


def cmd_score(args) -> int:
    config = _load_config(args.grid, args.seed)
    if args.splits is not None:
        from dataclasses import replace

        config = replace(config, splits=_parse_splits(args.splits))
    records = load_corpus(_require_dir(args.corpus))
    models = build_models(config)

    if args.backend == "file":
        if args.scores is None:
            raise ValidationError("--backend file requires --scores")
        from .corpus import split_dataset

        full = read_score_matrix(_require_file(args.scores))
        splits = split_dataset(records, config.splits, config.seed)
        config_matrix = _slice_matrix(full, models, splits.config, "config")
        eval_matrix = _slice_matrix(full, models, splits.eval, "eval")
        scored_note = f"sliced from {args.scores}"
    else:
        attach_difficulties(records, config.seed)
        data = score_pipeline(records, config, models)
        splits = data.splits
        config_matrix, eval_matrix = data.config_matrix, data.eval_matrix
        scored_note = f"{data.scorer.calls} synthetic scorer calls"

    profile = profile_costs_synthetic(models, config.cost_constants,
                                      config.source_value_count)
    try:
        os.makedirs(args.out, exist_ok=True)
    except OSError as exc:
        raise ArtifactIOError(f"cannot create {args.out}: {exc}") from exc

    def out(name: str) -> str:
        return os.path.join(args.out, name)

    write_model_registry(models, out("models.json"))
    write_score_matrix(config_matrix, out("config_scores.csv"))
    write_score_matrix(eval_matrix, out("eval_scores.csv"))
    write_label_file(splits.config, out("config_labels.csv"))
    write_label_file(splits.eval, out("eval_labels.csv"))
    write_cost_profile(profile, out("profile.json"))
    try:
        with open(out("grid_config.json"), "w", encoding="utf-8") as fh:
            json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise ArtifactIOError(f"cannot write grid_config.json: {exc}") from exc
    print(
        f"scored {len(models)} models on {len(splits.config)} config "
        f"and {len(splits.eval)} eval images ({scored_note})",
        file=sys.stderr,
    )
    return 0


def _parse_precisions(raw: str) -> tuple[float, ...]:
    try:
        values = tuple(float(p) for p in raw.split(","))
    except ValueError:
        raise ValidationError(f"bad precision list {raw!r}") from None
    if not values:
        raise ValidationError("precision list is empty")
    return values


def cmd_calibrate(args) -> int:
    matrix = read_score_matrix(_require_file(args.scores))
    labels = read_label_file(_require_file(args.labels))
    precisions = _parse_precisions(args.precisions)
    entries = calibrate_all(matrix, labels, precisions, args.step,
                            pooled=args.pooled)
    write_calibrated(entries, args.out)
    print(f"calibrated {len(entries)} (model, precision) pairs", file=sys.stderr)
    return 0


class _CatalogWriter:
    """Streams catalog chunks to CSV without materializing row objects."""

    def __init__(self, fh, table: OutcomeTable, model_ids: Sequence[str],
                 scenario: DeploymentScenario):
        self._writer = csv.writer(fh, lineterminator="\n")
        self._writer.writerow(CATALOG_HEADER)
        self._entry_keys = [
            level_key(e.model_id, e.threshold.target_precision) for e in table.entries
        ]
        self._model_ids = list(model_ids)
        self._scenario = scenario

    def on_chunk(self, chunk: CatalogChunk) -> None:
        times = chunk.times[self._scenario]
        if times.min() <= 0.0:
            raise ValidationError("non-positive expected time; check the cost profile")
        keys, ids_list = self._entry_keys, self._model_ids
        rows = []
        for i in range(len(chunk)):
            if chunk.depth == 1:
                levels = ""
                terminal = ids_list[chunk.terminal_models[i]]
            elif chunk.depth == 2:
                levels = keys[chunk.level1_entry]
                terminal = ids_list[chunk.terminal_models[i]]
            elif chunk.level2_entries is not None:
                levels = keys[chunk.level1_entry] + ";" + keys[chunk.level2_entries[i]]
                terminal = ids_list[chunk.terminal_model]
            else:
                levels = keys[chunk.level1_entry] + ";" + keys[chunk.level2_entry]
                terminal = ids_list[chunk.terminal_models[i]]
            rows.append([
                "%016x" % chunk.ids[i],
                chunk.depth,
                levels,
                terminal,
                _fmt(chunk.accuracy[i]),
                _fmt(times[i]),
                _fmt(1.0 / times[i]),
            ])
        self._writer.writerows(rows)


def cmd_evaluate(args) -> int:
    matrix = read_score_matrix(_require_file(args.scores))
    labels_map = read_label_file(_require_file(args.labels))
    calibrated = read_calibrated(_require_file(args.calibrated))
    models = read_model_registry(_require_file(args.models))
    profile = read_cost_profile(_require_file(args.profile))
    scenario = _parse_scenario(args.scenario)

    table = precompute_outcomes(matrix, calibrated)
    missing = [i for i in table.image_ids if i not in labels_map]
    if missing:
        raise ValidationError(f"labels missing for image id {missing[0]}")
    labels = np.array([labels_map[i] for i in table.image_ids], dtype=np.int64)

    try:
        fh = open(args.out, "w", encoding="utf-8", newline="")
    except OSError as exc:
        raise ArtifactIOError(f"cannot write catalog {args.out}: {exc}") from exc
    with fh:
        writer = _CatalogWriter(fh, table, [m.model_id for m in models], scenario)
        result = evaluate_catalog(
            table, labels, models, profile, [scenario], args.max_depth,
            anchor_terminal_only_at_depth=args.anchor_depth,
            threads=args.threads,
            on_chunk=writer.on_chunk,
            keep_arrays=False,
        )
    meta = {
        "scenario": scenario.value,
        "cascade_count": result.count,
        "elapsed_s": result.elapsed_s,
        "max_depth": args.max_depth,
        "anchor_terminal_only_at_depth": args.anchor_depth,
        "image_count": table.image_count,
        "model_count": len(models),
        "entry_count": len(table.entries),
    }
    meta_path = _meta_path(args.out)
    try:
        with open(meta_path, "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise ArtifactIOError(f"cannot write {meta_path}: {exc}") from exc
    print(
        f"evaluated {result.count} cascades under {scenario.value} "
        f"in {result.elapsed_s:.2f}s",
        file=sys.stderr,
    )
    return 0


def _read_catalog_points(path: str) -> tuple[list[EvalPoint], dict[str, int]]:
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise ArtifactIOError(f"cannot read catalog {path}: {exc}") from exc
    points: list[EvalPoint] = []
    depths: dict[str, int] = {}
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CATALOG_HEADER:
            raise ValidationError(f"{path}: unexpected catalog header {header}")
        for k, row in enumerate(reader, start=2):
            if len(row) != len(CATALOG_HEADER):
                raise ValidationError(f"{path} line {k}: expected {len(CATALOG_HEADER)} fields")
            try:
                cascade_id = row[0]
                int(cascade_id, 16)
                depth = int(row[1])
                accuracy = float(row[4])
                throughput = float(row[6])
            except ValueError:
                raise ValidationError(f"{path} line {k}: malformed numeric field") from None
            points.append(EvalPoint(cascade_id, accuracy, throughput))
            depths[cascade_id] = depth
    if not points:
        raise ValidationError(f"{path}: catalog has no rows")
    return points, depths


def cmd_frontier(args) -> int:
    points, depths = _read_catalog_points(_require_file(args.catalog))
    if args.scenario is not None:
        scenario = _parse_scenario(args.scenario)
    else:
        meta_path = _meta_path(args.catalog)
        try:
            with open(meta_path, "r", encoding="utf-8") as fh:
                meta = json.load(fh)
            scenario = _parse_scenario(meta["scenario"])
        except (OSError, json.JSONDecodeError, KeyError, TypeError):
            raise ValidationError(
                f"cannot determine the scenario from {meta_path}; pass --scenario"
            ) from None
    frontier = pareto_frontier(points)
    try:
        fh = open(args.out, "w", encoding="utf-8", newline="")
    except OSError as exc:
        raise ArtifactIOError(f"cannot write frontier {args.out}: {exc}") from exc
    with fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(FRONTIER_HEADER)
        for p in frontier.points:
            writer.writerow([
                _fmt(p.accuracy), _fmt(p.throughput_fps), p.cascade_id,
                depths[p.cascade_id], scenario.value,
            ])
    print(
        f"frontier has {len(frontier.points)} of {len(points)} cascades",
        file=sys.stderr,
    )
    return 0


def _read_frontier_points(path: str) -> list[EvalPoint]:
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise ArtifactIOError(f"cannot read frontier {path}: {exc}") from exc
    points = []
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != FRONTIER_HEADER:
            raise ValidationError(f"{path}: unexpected frontier header {header}")
        for k, row in enumerate(reader, start=2):
            if len(row) != len(FRONTIER_HEADER):
                raise ValidationError(f"{path} line {k}: expected {len(FRONTIER_HEADER)} fields")
            try:
                points.append(EvalPoint(row[2], float(row[0]), float(row[1])))
            except ValueError:
                raise ValidationError(f"{path} line {k}: malformed numeric field") from None
    if not points:
        raise ValidationError(f"{path}: frontier has no rows")
    return points


def cmd_select(args) -> int:
    points = _read_frontier_points(_require_file(args.frontier))
    frontier = pareto_frontier(points)
    if args.ref_accuracy is not None:
        if args.u_acc is not None or args.u_thru is not None:
            raise ValidationError("--ref-accuracy excludes --u-acc/--u-thru")
        point = select_vs_reference(frontier, args.ref_accuracy)
    else:
        constraint = SelectionConstraint(
            max_accuracy_loss=args.u_acc,
            max_throughput_loss=args.u_thru,
        )
        point = select(frontier, constraint)
    print(json.dumps({
        "cascade_id": point.cascade_id,
        "accuracy": point.accuracy,
        "throughput_fps": point.throughput_fps,
    }, sort_keys=True))
    return 0


def _catalog_result_from_files(paths: Sequence[str]):
    """Join single-scenario catalog CSVs into one all-scenario result."""
    from .engine import CatalogResult

    per_scenario = {}
    for path in paths:
        meta_path = _meta_path(path)
        try:
            with open(_require_file(meta_path), "r", encoding="utf-8") as fh:
                meta = json.load(fh)
            scenario = _parse_scenario(meta["scenario"])
        except (OSError, json.JSONDecodeError, KeyError, TypeError):
            raise ValidationError(f"cannot read the scenario from {meta_path}") from None
        points, depths = _read_catalog_points(_require_file(path))
        if scenario in per_scenario:
            raise ValidationError(f"two catalogs declare scenario {scenario.value}")
        per_scenario[scenario] = (points, depths)
    missing = [s for s in DeploymentScenario if s not in per_scenario]
    if missing:
        raise ValidationError(
            f"scenario report needs all four catalogs; missing {missing[0].value}"
        )

    first_scenario = next(iter(per_scenario))
    first_points, first_depths = per_scenario[first_scenario]
    order = [p.cascade_id for p in first_points]
    ids = np.array([int(c, 16) for c in order], dtype=np.uint64)
    accuracy = np.array([p.accuracy for p in first_points], dtype=np.float64)
    depth = np.array([first_depths[c] for c in order], dtype=np.int8)
    times = {}
    for scenario, (points, _) in per_scenario.items():
        by_id = {p.cascade_id: p for p in points}
        missing_ids = [c for c in order if c not in by_id]
        if missing_ids:
            raise ValidationError(
                f"catalog for {scenario.value} lacks cascade {missing_ids[0]}"
            )
        if len(points) != len(order):
            raise ValidationError(
                f"catalog for {scenario.value} has a different cascade count"
            )
        acc_here = np.array([by_id[c].accuracy for c in order], dtype=np.float64)
        if np.abs(acc_here - accuracy).max() > 1e-12:
            raise ValidationError(
                f"catalog for {scenario.value} disagrees on cascade accuracies"
            )
        times[scenario] = np.array(
            [1.0 / by_id[c].throughput_fps for c in order], dtype=np.float64
        )
    scenarios = tuple(DeploymentScenario)
    return CatalogResult(scenarios, ids, depth, accuracy,
                         {s: times[s] for s in scenarios}, len(order), 0.0)


def cmd_report(args) -> int:
    config = _load_config(args.grid, args.seed)
    scenario = _parse_scenario(args.scenario)
    try:
        os.makedirs(args.out, exist_ok=True)
    except OSError as exc:
        raise ArtifactIOError(f"cannot create {args.out}: {exc}") from exc

    def corpus_records():
        if args.corpus is None:
            raise ValidationError(f"--experiment {args.experiment} requires --corpus")
        records = load_corpus(_require_dir(args.corpus))
        attach_difficulties(records, config.seed)
        return records

    if args.experiment == "ablation":
        report = run_transform_ablation(corpus_records(), config, scenario,
                                        max_depth=args.max_depth,
                                        threads=args.threads)
        write_ablation_report(report, args.out)
    elif args.experiment == "depth":
        report = run_depth_study(corpus_records(), config, scenario,
                                 threads=args.threads)
        write_depth_report(report, args.out)
    else:
        if args.catalogs:
            result = _catalog_result_from_files(args.catalogs)
        else:
            records = corpus_records()
            models = build_models(config)
            data = score_pipeline(records, config, models)
            calibrated = calibrate_all(data.config_matrix, data.config_labels,
                                       config.precisions, config.grid_step)
            table = precompute_outcomes(data.eval_matrix, calibrated)
            profile = profile_costs_synthetic(models, config.cost_constants,
                                              config.source_value_count)
            result = evaluate_catalog(
                table, data.eval_labels, models, profile,
                list(DeploymentScenario), args.max_depth, threads=args.threads,
            )
        rows = run_scenario_comparison(result)
        write_scenario_report(rows, args.out)
    print(f"wrote {args.experiment} report to {args.out}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cascadekit",
        description="Assemble, evaluate, and select classifier cascades.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-corpus", help="generate a synthetic labeled corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--size", default="32x32", help="image size as WxH")
    p.add_argument("--pos-frac", type=float, default=0.5)
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("score", help="split a corpus and score the model grid")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--grid", help="grid config JSON; defaults to the full grid")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--splits", help="override split fractions, e.g. 0.5,0.25,0.25")
    p.add_argument("--backend", choices=("synthetic", "file"), default="synthetic")
    p.add_argument("--scores", help="full-corpus score matrix for --backend file")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("calibrate", help="fit threshold pairs per model and precision")
    p.add_argument("--scores", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--precisions", default="0.91,0.93,0.95,0.97,0.99")
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--pooled", action="store_true",
                   help="require the precision jointly over both decided sides")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("evaluate", help="evaluate the cascade catalog to CSV")
    p.add_argument("--scores", required=True, help="eval-split score matrix")
    p.add_argument("--labels", required=True, help="eval-split labels")
    p.add_argument("--calibrated", required=True)
    p.add_argument("--models", required=True)
    p.add_argument("--profile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scenario", default="INFER_ONLY")
    p.add_argument("--max-depth", type=int, default=2, choices=(1, 2, 3))
    p.add_argument("--anchor-depth", type=int, default=3,
                   help="depth at or above which only the anchor may terminate")
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("frontier", help="reduce a catalog to its Pareto frontier")
    p.add_argument("--catalog", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scenario", help="override the catalog's recorded scenario")
    p.set_defaults(func=cmd_frontier)

    p = sub.add_parser("select", help="pick a frontier point under loss budgets")
    p.add_argument("--frontier", required=True)
    p.add_argument("--u-acc", type=float, help="max relative accuracy loss")
    p.add_argument("--u-thru", type=float, help="max relative throughput loss")
    p.add_argument("--ref-accuracy", type=float,
                   help="pick the fastest point at or above this accuracy")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("report", help="run a desk-scale study end to end")
    p.add_argument("--experiment", required=True,
                   choices=("ablation", "scenario", "depth"))
    p.add_argument("--corpus", help="corpus directory (ablation/depth, or "
                                    "scenario without --catalogs)")
    p.add_argument("--catalogs", nargs="+",
                   help="four single-scenario catalog CSVs (scenario report)")
    p.add_argument("--out", required=True)
    p.add_argument("--grid")
    p.add_argument("--seed", type=int)
    p.add_argument("--scenario", default="CAMERA")
    p.add_argument("--max-depth", type=int, default=3, choices=(1, 2, 3))
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SelectionInfeasible as exc:
        print(f"selection infeasible: {exc}", file=sys.stderr)
        return 3
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except ArtifactIOError as exc:
        print(f"artifact error: {exc}", file=sys.stderr)
        return 4
    except CascadeKitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
