import json
import shutil

import numpy as np
import pytest

from infodist.cli import main as cli_main
from infodist.community import OptimizerConfig
from infodist.embedding_io import FixtureSpec, generate_fixture, read_embeddings
from infodist.graph_builder import GraphConfig
from infodist.map_equation import FlowConfig
from infodist.pipeline import (PipelineConfig, holdout_split,
                               holdout_split_indices, run_paired, run_pipeline,
                               run_random_baseline, summary_json)
from infodist.selection import SelectionMetric
from infodist.trainer import LossConfig


def fixture_spec(seed=0, classes=3, count=80):
    return FixtureSpec(seed=seed, num_classes=classes, clusters_per_class=2,
                       dim=8, count_per_class=count, separation=5.0, noise_sigma=1.0)


def quick_config(out_dir, runs=2, seed=0):
    return PipelineConfig(
        fixture=fixture_spec(),
        graph=GraphConfig(mode="knn", k=8),
        flow=FlowConfig(teleport=0.15),
        optimizer=OptimizerConfig(seed=seed),
        metric=SelectionMetric(),
        loss=LossConfig(rho=0.75, tau=0.1, learning_rate=0.3, epochs=15,
                        batch_size=16, seed=seed),
        per_class=12, runs=runs, test_fraction=0.25, seed=seed,
        out_dir=str(out_dir))


# -------------------------------------------------------------------- holdout

def test_holdout_even_split():
    pool = generate_fixture(fixture_spec(count=100))
    train_set, test_set = holdout_split(pool, 0.5, seed=0)
    assert train_set.class_counts().tolist() == [50, 50, 50]
    assert test_set.class_counts().tolist() == [50, 50, 50]


def test_holdout_deterministic():
    pool = generate_fixture(fixture_spec(seed=1))
    a = holdout_split_indices(pool, 0.2, seed=5)
    b = holdout_split_indices(pool, 0.2, seed=5)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])
    c = holdout_split_indices(pool, 0.2, seed=6)
    assert not np.array_equal(a[1], c[1])


def test_holdout_union_and_disjointness_over_fixtures():
    for seed in range(20):
        pool = generate_fixture(fixture_spec(seed=seed, count=20 + seed))
        train_ids, test_ids = holdout_split_indices(pool, 0.3, seed=seed)
        assert np.intersect1d(train_ids, test_ids).size == 0
        union = np.union1d(train_ids, test_ids)
        np.testing.assert_array_equal(union, np.arange(len(pool)))


def test_holdout_rejects_tiny_classes():
    pool = generate_fixture(fixture_spec(count=1))
    with pytest.raises(ValueError, match="fewer than 2"):
        holdout_split(pool, 0.5, seed=0)


# ------------------------------------------------------------------- pipeline

def test_pipeline_summary_shape(tmp_path):
    cfg = quick_config(tmp_path / "out", runs=2)
    summary = run_pipeline(cfg)
    assert summary["mode"] == "infodist"
    assert len(summary["runs"]) == 2
    for key in ("accuracy", "macro_f1", "macro_auc"):
        values = [row[key] for row in summary["runs"]]
        assert summary["mean"][key] == pytest.approx(np.mean(values))
        expected_std = np.std(values, ddof=1)
        assert summary["std"][key] == pytest.approx(expected_std)
    # artifacts exist
    out = tmp_path / "out"
    assert list(out.glob("selection_infodist_*_run0.tsv"))
    assert list(out.glob("model_infodist_*_run0.bin"))
    assert list(out.glob("summary_infodist_*.json"))


def test_single_run_std_is_zero(tmp_path):
    summary = run_pipeline(quick_config(tmp_path / "o1", runs=1))
    assert summary["std"]["accuracy"] == 0.0


def test_baseline_differs_only_in_selection(tmp_path):
    cfg = quick_config(tmp_path / "ob", runs=2)
    paired = run_paired(cfg)
    sel = paired["infodist"]
    rnd = paired["random"]
    assert [r["seed"] for r in sel["runs"]] == [r["seed"] for r in rnd["runs"]]
    sel_file = next((tmp_path / "ob").glob("selection_infodist_*_run0.tsv")).read_text()
    rnd_file = next((tmp_path / "ob").glob("selection_random_*_run0.tsv")).read_text()
    assert sel_file != rnd_file
    deltas = paired["delta"]["accuracy"]["per_run"]
    assert len(deltas) == 2
    assert paired["delta"]["accuracy"]["mean"] == pytest.approx(np.mean(deltas))


def test_random_selection_changes_with_seed(tmp_path):
    cfg_a = quick_config(tmp_path / "ra", runs=1, seed=1)
    cfg_b = quick_config(tmp_path / "rb", runs=1, seed=2)
    run_random_baseline(cfg_a)
    run_random_baseline(cfg_b)
    a = next((tmp_path / "ra").glob("selection_random_*.tsv")).read_text()
    b = next((tmp_path / "rb").glob("selection_random_*.tsv")).read_text()
    assert a != b


def test_random_selection_with_full_budget_selects_everything(tmp_path):
    # budget equal to the train-pool class size selects every item in both arms
    cfg = quick_config(tmp_path / "rf", runs=1)
    pool = generate_fixture(cfg.fixture)
    train_ids, _ = holdout_split_indices(pool, cfg.test_fraction, cfg.seed)
    per_class_train = np.bincount(pool.labels[train_ids])
    full = int(per_class_train.min())
    assert (per_class_train == full).all()
    cfg2 = quick_config(tmp_path / "rf2", runs=1)
    cfg2.per_class = full
    paired = run_paired(cfg2)
    a = next((tmp_path / "rf2").glob("selection_infodist_*_run0.tsv")).read_text()
    b = next((tmp_path / "rf2").glob("selection_random_*_run0.tsv")).read_text()
    assert a == b


def test_pipeline_determinism_bytes(tmp_path):
    out = tmp_path / "det"
    cfg = quick_config(out, runs=2)
    first = summary_json(run_pipeline(cfg))
    shutil.rmtree(out)
    second = summary_json(run_pipeline(cfg))
    assert first == second
    # a third run reuses the cached artifacts and must not change the summary
    third = summary_json(run_pipeline(cfg))
    assert first == third


def test_parallel_runs_match_sequential(tmp_path):
    sequential = quick_config(tmp_path / "seq", runs=3)
    parallel = quick_config(tmp_path / "par", runs=3)
    parallel.parallel_runs = 2
    a = run_pipeline(sequential)
    b = run_pipeline(parallel)
    a["config"]["out_dir"] = b["config"]["out_dir"] = ""
    assert summary_json(a) == summary_json(b)


def test_stage_errors_carry_stage_and_run(tmp_path):
    from infodist.pipeline import StageError

    cfg = quick_config(tmp_path / "err", runs=1)
    cfg.per_class = 10_000  # impossible selection budget
    with pytest.raises(StageError, match=r"stage 'select' failed in run 0"):
        run_pipeline(cfg)


def test_single_run_equals_manually_composed_stages(tmp_path):
    import dataclasses

    from infodist.embedding_io import generate_fixture
    from infodist.metrics import evaluate_probabilities
    from infodist.selection import distill
    from infodist.trainer import train

    cfg = quick_config(tmp_path / "comp", runs=1)
    summary = run_pipeline(cfg)

    # compose the stages by hand with the same seeds
    pool = generate_fixture(cfg.fixture)
    train_ids, test_ids = holdout_split_indices(pool, cfg.test_fraction, cfg.seed)
    train_pool = pool.subset(train_ids)
    test_set = pool.subset(test_ids)
    seed0 = cfg.seed ^ 0
    selection = distill(train_pool, cfg.graph, cfg.flow,
                        dataclasses.replace(cfg.optimizer, seed=seed0),
                        cfg.metric, cfg.per_class)
    model = train(train_pool, selection, dataclasses.replace(cfg.loss, seed=seed0))
    report = evaluate_probabilities(model.predict_proba(test_set.vectors),
                                    test_set.labels, test_set.num_classes)
    row = summary["runs"][0]
    assert row["accuracy"] == report.accuracy
    assert row["macro_f1"] == report.macro_f1
    assert row["macro_auc"] == report.macro_auc


def test_config_validation(tmp_path):
    with pytest.raises(ValueError, match="exactly one"):
        PipelineConfig(embeddings_path="x", fixture=fixture_spec(), out_dir=str(tmp_path))
    with pytest.raises(ValueError, match="exactly one"):
        PipelineConfig(out_dir=str(tmp_path))


# ------------------------------------------------------------------------ CLI

def test_cli_gen_fixture_and_pipeline(tmp_path, capsys):
    pool_path = tmp_path / "pool.idst"
    rc = cli_main(["gen-fixture", "--out", str(pool_path), "--seed", "3",
                   "--classes", "3", "--clusters", "2", "--dim", "8",
                   "--count", "60", "--separation", "5.0", "--noise", "1.0"])
    assert rc == 0
    pool = read_embeddings(pool_path)
    assert len(pool) == 180

    rc = cli_main(["pipeline", "--embeddings", str(pool_path), "--knn", "8",
                   "--per-class", "10", "--runs", "1", "--epochs", "10",
                   "--lr", "0.3", "--batch-size", "16",
                   "--out-dir", str(tmp_path / "cliout")])
    assert rc == 0
    captured = capsys.readouterr().out
    assert "accuracy" in captured
    assert list((tmp_path / "cliout").glob("summary_infodist_*.json"))


def test_cli_stage_commands(tmp_path, capsys):
    pool_path = tmp_path / "pool.idst"
    cli_main(["gen-fixture", "--out", str(pool_path), "--seed", "1",
              "--classes", "2", "--clusters", "2", "--dim", "6",
              "--count", "40", "--separation", "6.0", "--noise", "1.0"])

    graph_path = tmp_path / "g.txt"
    assert cli_main(["graph", "--embeddings", str(pool_path), "--class-label", "0",
                     "--knn", "6", "--out", str(graph_path)]) == 0
    header = graph_path.read_text().splitlines()[0].split()
    assert header[1] == "40"

    assert cli_main(["detect", "--embeddings", str(pool_path), "--class-label", "0",
                     "--knn", "6"]) == 0
    assert "communities" in capsys.readouterr().out

    sel_path = tmp_path / "sel.tsv"
    assert cli_main(["select", "--embeddings", str(pool_path), "--knn", "6",
                     "--per-class", "8", "--out", str(sel_path),
                     "--summary-out", str(tmp_path / "sel.sum")]) == 0
    assert len(sel_path.read_text().splitlines()) == 16

    model_path = tmp_path / "model.bin"
    assert cli_main(["train", "--embeddings", str(pool_path),
                     "--selection", str(sel_path), "--out", str(model_path),
                     "--epochs", "20", "--lr", "0.3"]) == 0

    assert cli_main(["eval", "--embeddings", str(pool_path),
                     "--model", str(model_path),
                     "--json-out", str(tmp_path / "eval.json")]) == 0
    text = capsys.readouterr().out
    assert "accuracy = " in text
    report = json.loads((tmp_path / "eval.json").read_text())
    assert set(report) >= {"accuracy", "macro_f1", "macro_auc"}


def test_cli_ingest(tmp_path):
    csv = tmp_path / "v.csv"
    csv.write_text("label,f0,f1\n0,0.5,1.5\n1,2.0,-1.0\n")
    out = tmp_path / "v.idst"
    assert cli_main(["ingest", "--csv", str(csv), "--out", str(out)]) == 0
    ds = read_embeddings(out)
    assert len(ds) == 2 and ds.dim == 2


def test_cli_config_file_and_override(tmp_path, capsys):
    pool_path = tmp_path / "pool.idst"
    cli_main(["gen-fixture", "--out", str(pool_path), "--seed", "2",
              "--classes", "2", "--clusters", "1", "--dim", "6",
              "--count", "30", "--separation", "6.0", "--noise", "1.0"])
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text(
        "knn = 5\n"
        "per_class = 6\n"
        "runs = 1\n"
        "epochs = 5\n"
        "lr = 0.2\n"
        f"out_dir = {tmp_path / 'cfgout'}\n"
    )
    rc = cli_main(["pipeline", "--config", str(cfg_file),
                   "--embeddings", str(pool_path), "--per-class", "7"])
    assert rc == 0
    sel = next((tmp_path / "cfgout").glob("selection_infodist_*_run0.tsv"))
    # CLI flag overrides the config file's per_class = 6
    assert len(sel.read_text().splitlines()) == 14


def test_cli_rejects_two_graph_modes(tmp_path):
    with pytest.raises(SystemExit):
        cli_main(["pipeline", "--eta", "0.004", "--knn", "5",
                  "--out-dir", str(tmp_path)])
