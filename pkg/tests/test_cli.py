"""End-to-end command-line pipeline: artifacts, exit codes, determinism."""

import csv
import json
import subprocess
import sys

import pytest

from cascadekit import (
    EvalPoint,
    SyntheticScorer,
    attach_difficulties,
    build_models,
    load_corpus,
    pareto_frontier,
    score_dataset,
    write_score_matrix,
)
from cascadekit.cli import CATALOG_HEADER, FRONTIER_HEADER, main

PRECISIONS = "0.91,0.97"


@pytest.fixture(scope="module")
def grid_file(tmp_path_factory, small_config):
    path = tmp_path_factory.mktemp("grid") / "grid.json"
    path.write_text(json.dumps(small_config.to_dict()))
    return str(path)


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "corpus"
    rc = main(["gen-corpus", "--out", str(out), "--seed", "13",
               "--count", "160", "--size", "32x32"])
    assert rc == 0
    return str(out)


def _run_pipeline(out_dir, corpus_dir, grid_file, scenario="CAMERA", threads=None):
    out_dir.mkdir(parents=True, exist_ok=True)
    d = str(out_dir)
    assert main(["score", "--corpus", corpus_dir, "--grid", grid_file,
                 "--out", d]) == 0
    assert main(["calibrate", "--scores", f"{d}/config_scores.csv",
                 "--labels", f"{d}/config_labels.csv", "--out", f"{d}/calibrated.json",
                 "--precisions", PRECISIONS, "--step", "0.02"]) == 0
    evaluate = ["evaluate", "--scores", f"{d}/eval_scores.csv",
                "--labels", f"{d}/eval_labels.csv",
                "--calibrated", f"{d}/calibrated.json",
                "--models", f"{d}/models.json", "--profile", f"{d}/profile.json",
                "--out", f"{d}/catalog.csv", "--scenario", scenario,
                "--max-depth", "3"]
    if threads is not None:
        evaluate += ["--threads", str(threads)]
    assert main(evaluate) == 0
    assert main(["frontier", "--catalog", f"{d}/catalog.csv",
                 "--out", f"{d}/frontier.csv"]) == 0
    return d


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory, corpus_dir, grid_file):
    return _run_pipeline(tmp_path_factory.mktemp("cli") / "run", corpus_dir,
                         grid_file)


def test_corpus_artifacts(corpus_dir):
    records = load_corpus(corpus_dir)
    assert len(records) == 160
    assert {r.label for r in records} == {0, 1}


def test_score_artifacts(pipeline_dir):
    for name in ("models.json", "config_scores.csv", "eval_scores.csv",
                 "config_labels.csv", "eval_labels.csv", "profile.json",
                 "grid_config.json"):
        assert (len(open(f"{pipeline_dir}/{name}", "rb").read()) > 0), name
    with open(f"{pipeline_dir}/eval_scores.csv") as fh:
        first = fh.readline().strip()
    assert first == "split,eval"


def test_catalog_shape_and_meta(pipeline_dir):
    with open(f"{pipeline_dir}/catalog.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == CATALOG_HEADER
    assert len(rows) == 1 + 1521
    depth1 = [r for r in rows[1:] if r[1] == "1"]
    assert len(depth1) == 17
    assert all(r[2] == "" for r in depth1)
    meta = json.loads(open(f"{pipeline_dir}/catalog.meta.json").read())
    assert meta["cascade_count"] == 1521
    assert meta["scenario"] == "CAMERA"
    assert meta["image_count"] == 40
    assert meta["entry_count"] == 34


def test_frontier_matches_library(pipeline_dir):
    with open(f"{pipeline_dir}/catalog.csv", newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    points = [EvalPoint(r[0], float(r[4]), float(r[6])) for r in rows]
    expect = pareto_frontier(points)
    with open(f"{pipeline_dir}/frontier.csv", newline="") as fh:
        got = list(csv.reader(fh))
    assert got[0] == FRONTIER_HEADER
    assert len(got) == 1 + len(expect.points)
    for line, p in zip(got[1:], expect.points):
        assert line[2] == p.cascade_id
        assert float(line[0]) == p.accuracy
        assert float(line[1]) == p.throughput_fps
        assert line[4] == "CAMERA"
    accs = [float(r[0]) for r in got[1:]]
    thrs = [float(r[1]) for r in got[1:]]
    assert accs == sorted(accs, reverse=True)
    assert thrs == sorted(thrs)


def test_select_outputs_json(pipeline_dir, capsys):
    assert main(["select", "--frontier", f"{pipeline_dir}/frontier.csv",
                 "--u-acc", "0.05"]) == 0
    picked = json.loads(capsys.readouterr().out)
    assert set(picked) == {"cascade_id", "accuracy", "throughput_fps"}
    assert main(["select", "--frontier", f"{pipeline_dir}/frontier.csv",
                 "--u-thru", "0.5"]) == 0
    json.loads(capsys.readouterr().out)
    assert main(["select", "--frontier", f"{pipeline_dir}/frontier.csv",
                 "--ref-accuracy", "0.5"]) == 0
    json.loads(capsys.readouterr().out)


def test_select_exit_codes(tmp_path, pipeline_dir, capsys):
    # reference accuracy nothing can reach
    tiny = tmp_path / "frontier.csv"
    tiny.write_text(",".join(FRONTIER_HEADER)
                    + "\n0.8,100,00000000000000c1,1,CAMERA\n")
    assert main(["select", "--frontier", str(tiny),
                 "--ref-accuracy", "0.9"]) == 3
    assert "selection infeasible" in capsys.readouterr().err
    # mixing the reference mode with loss budgets
    assert main(["select", "--frontier", f"{pipeline_dir}/frontier.csv",
                 "--ref-accuracy", "0.5", "--u-acc", "0.1"]) == 2
    # invalid budget
    assert main(["select", "--frontier", f"{pipeline_dir}/frontier.csv",
                 "--u-acc", "1.5"]) == 2
    capsys.readouterr()


def test_validation_exit_codes(tmp_path, grid_file, corpus_dir, capsys):
    assert main(["gen-corpus", "--out", str(tmp_path / "c"), "--size", "64"]) == 2
    assert main(["gen-corpus", "--out", str(tmp_path / "c"), "--count", "1"]) == 2
    assert main(["score", "--corpus", str(tmp_path / "absent"),
                 "--out", str(tmp_path / "s")]) == 2
    assert main(["score", "--corpus", corpus_dir, "--grid", grid_file,
                 "--out", str(tmp_path / "s"), "--backend", "file"]) == 2
    assert main(["calibrate", "--scores", str(tmp_path / "no.csv"),
                 "--labels", str(tmp_path / "no.csv"),
                 "--out", str(tmp_path / "cal.json")]) == 2
    assert main(["frontier", "--catalog", str(tmp_path / "no.csv"),
                 "--out", str(tmp_path / "f.csv")]) == 2
    err = capsys.readouterr().err
    assert "validation error" in err


def test_artifact_error_exit_code(tmp_path, capsys):
    blocker = tmp_path / "file.txt"
    blocker.write_text("x")
    assert main(["gen-corpus", "--out", str(blocker / "sub")]) == 4
    assert "artifact error" in capsys.readouterr().err


def test_frontier_needs_scenario_without_meta(tmp_path, pipeline_dir, capsys):
    orphan = tmp_path / "catalog.csv"
    orphan.write_bytes(open(f"{pipeline_dir}/catalog.csv", "rb").read())
    assert main(["frontier", "--catalog", str(orphan),
                 "--out", str(tmp_path / "f.csv")]) == 2
    assert "pass --scenario" in capsys.readouterr().err
    assert main(["frontier", "--catalog", str(orphan), "--scenario", "camera",
                 "--out", str(tmp_path / "f.csv")]) == 0
    with open(tmp_path / "f.csv", newline="") as fh:
        assert next(csv.reader(fh)) == FRONTIER_HEADER


def test_rerun_is_byte_identical(tmp_path, corpus_dir, grid_file, pipeline_dir):
    again = _run_pipeline(tmp_path / "again", corpus_dir, grid_file)
    for name in ("config_scores.csv", "eval_scores.csv", "calibrated.json",
                 "catalog.csv", "frontier.csv"):
        a = open(f"{pipeline_dir}/{name}", "rb").read()
        b = open(f"{again}/{name}", "rb").read()
        assert a == b, f"{name} differs between reruns"


def test_threaded_evaluate_is_byte_identical(tmp_path, corpus_dir, grid_file,
                                             pipeline_dir):
    threaded = _run_pipeline(tmp_path / "threaded", corpus_dir, grid_file,
                             threads=2)
    a = open(f"{pipeline_dir}/catalog.csv", "rb").read()
    b = open(f"{threaded}/catalog.csv", "rb").read()
    assert a == b


def test_file_backend_reproduces_synthetic_run(tmp_path, corpus_dir, grid_file,
                                               small_config, pipeline_dir):
    records = load_corpus(corpus_dir)
    attach_difficulties(records, small_config.seed)
    models = build_models(small_config)
    full = score_dataset(models, records, SyntheticScorer(small_config.seed), "full")
    scores_path = tmp_path / "full_scores.csv"
    write_score_matrix(full, str(scores_path))

    out = tmp_path / "fromfile"
    assert main(["score", "--corpus", corpus_dir, "--grid", grid_file,
                 "--out", str(out), "--backend", "file",
                 "--scores", str(scores_path)]) == 0
    for name in ("config_scores.csv", "eval_scores.csv", "config_labels.csv",
                 "eval_labels.csv"):
        a = open(f"{pipeline_dir}/{name}", "rb").read()
        b = open(out / name, "rb").read()
        assert a == b, f"{name} differs between backends"


def test_scenario_report_from_catalogs(tmp_path, pipeline_dir, grid_file, capsys):
    d = pipeline_dir
    catalogs = []
    for scenario in ("INFER_ONLY", "ARCHIVE", "ONGOING", "CAMERA"):
        path = tmp_path / f"catalog_{scenario}.csv"
        assert main(["evaluate", "--scores", f"{d}/eval_scores.csv",
                     "--labels", f"{d}/eval_labels.csv",
                     "--calibrated", f"{d}/calibrated.json",
                     "--models", f"{d}/models.json",
                     "--profile", f"{d}/profile.json",
                     "--out", str(path), "--scenario", scenario,
                     "--max-depth", "2"]) == 0
        catalogs.append(str(path))
    out = tmp_path / "report"
    assert main(["report", "--experiment", "scenario", "--grid", grid_file,
                 "--catalogs", *catalogs, "--out", str(out)]) == 0
    capsys.readouterr()
    with open(out / "scenario.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][0] == "scenario"
    assert len(rows) == 1 + 4 * 4
    summary = json.loads((out / "scenario_summary.json").read_text())
    assert summary["min_improvement_pct"] >= -1e-12

    # incomplete catalog sets are rejected
    assert main(["report", "--experiment", "scenario", "--grid", grid_file,
                 "--catalogs", *catalogs[:3], "--out", str(out)]) == 2
    capsys.readouterr()


def test_ablation_and_depth_reports(tmp_path, corpus_dir, grid_file, capsys):
    out = tmp_path / "ablation"
    assert main(["report", "--experiment", "ablation", "--corpus", corpus_dir,
                 "--grid", grid_file, "--out", str(out),
                 "--max-depth", "2"]) == 0
    assert (out / "ablation.csv").is_file()
    assert (out / "ablation_summary.json").is_file()

    out = tmp_path / "depth"
    assert main(["report", "--experiment", "depth", "--corpus", corpus_dir,
                 "--grid", grid_file, "--out", str(out)]) == 0
    assert (out / "depth.csv").is_file()

    assert main(["report", "--experiment", "ablation", "--grid", grid_file,
                 "--out", str(tmp_path / "x")]) == 2
    capsys.readouterr()


def test_module_entry_point(tmp_path):
    out = tmp_path / "corpus"
    proc = subprocess.run(
        [sys.executable, "-m", "cascadekit.cli", "gen-corpus", "--out", str(out),
         "--count", "4", "--size", "8x8"],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (out / "manifest.json").is_file() or len(list(out.iterdir())) > 0
    proc = subprocess.run([sys.executable, "-m", "cascadekit", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "cascadekit" in proc.stdout


def test_bad_subcommand_arguments():
    with pytest.raises(SystemExit):
        main(["evaluate", "--max-depth", "9"])
    with pytest.raises(SystemExit):
        main(["nonsense"])
