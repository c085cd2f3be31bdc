"""End-to-end orchestration: pool -> split -> distill -> train -> evaluate,
repeated over seeded runs with mean and sample standard deviation reporting,
plus the seeded random-selection baseline for paired comparison.

Per-run seeds derive from the base seed XOR the run index, so each run
reselects (and retrains) reproducibly. Stage artifacts are written under
content-hashed names derived from the configuration; an existing artifact
with a matching name is reused, which is safe because every stage is a pure
function of the configuration.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .community import OptimizerConfig
from .embedding_io import EmbeddingSet, FixtureSpec, generate_fixture, read_embeddings
from .graph_builder import GraphConfig
from .map_equation import FlowConfig
from .metrics import EvalReport, evaluate_probabilities
from .selection import (DistilledSelection, SelectionMetric, distill,
                        read_selection, write_selection, write_selection_summary)
from .trainer import Classifier, LossConfig, load_classifier, save_classifier, train

logger = logging.getLogger("infodist.pipeline")


@dataclass
class PipelineConfig:
    embeddings_path: str | None = None
    fixture: FixtureSpec | None = None
    graph: GraphConfig = field(default_factory=GraphConfig)
    flow: FlowConfig = field(default_factory=FlowConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    metric: SelectionMetric = field(default_factory=SelectionMetric)
    loss: LossConfig = field(default_factory=LossConfig)
    per_class: int = 100
    runs: int = 5
    test_fraction: float = 0.2
    seed: int = 0
    out_dir: str = "out"
    parallel_runs: int = 1

    def __post_init__(self):
        if (self.embeddings_path is None) == (self.fixture is None):
            raise ValueError("exactly one of embeddings_path or fixture is required")
        if self.runs < 1 or self.parallel_runs < 1:
            raise ValueError("runs and parallel_runs must be positive")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must be in (0, 1)")

    def as_dict(self) -> dict:
        # parallel_runs is an execution knob: it must not change artifact
        # names or summary contents, which stay identical either way
        out = dataclasses.asdict(self)
        out.pop("parallel_runs")
        return out


def config_hash(config: PipelineConfig) -> str:
    blob = json.dumps(config.as_dict(), sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:12]


def holdout_split_indices(dataset: EmbeddingSet, test_fraction: float, seed: int):
    """Stratified (train_ids, test_ids), both sorted ascending and disjoint."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    train_ids = []
    test_ids = []
    for c in range(dataset.num_classes):
        members = dataset.class_members(c)
        if members.size < 2:
            raise ValueError(f"class {c} has fewer than 2 items, cannot split")
        n_test = int(round(test_fraction * members.size))
        n_test = min(max(n_test, 1), members.size - 1)
        perm = rng.permutation(members.size)
        test_ids.append(members[perm[:n_test]])
        train_ids.append(members[perm[n_test:]])
    return np.sort(np.concatenate(train_ids)), np.sort(np.concatenate(test_ids))


def holdout_split(dataset: EmbeddingSet, test_fraction: float, seed: int):
    """Stratified deterministic split into (train set, test set)."""
    train_ids, test_ids = holdout_split_indices(dataset, test_fraction, seed)
    return dataset.subset(train_ids), dataset.subset(test_ids)


def load_pool(config: PipelineConfig) -> EmbeddingSet:
    if config.embeddings_path is not None:
        dataset = read_embeddings(config.embeddings_path)
    else:
        dataset = generate_fixture(config.fixture)
    dataset.validate(require_all_classes=True)
    return dataset


def _random_selection(dataset: EmbeddingSet, per_class: int, seed: int) -> DistilledSelection:
    """Uniform per-class sampling without replacement; the baseline arm."""
    rng = np.random.default_rng(seed)
    selection = DistilledSelection(total_per_class=per_class)
    for c in range(dataset.num_classes):
        members = dataset.class_members(c)
        if members.size < per_class:
            raise ValueError(f"class {c} has {members.size} items, fewer than {per_class}")
        chosen = rng.choice(members, size=per_class, replace=False)
        selection.per_class[c] = np.sort(chosen.astype(np.int64))
        selection.quotas[c] = np.asarray([per_class], dtype=np.int64)
    selection.validate()
    return selection


class StageError(RuntimeError):
    """A pipeline stage failed; carries the stage name and run index."""

    def __init__(self, stage: str, run: int, cause: Exception):
        super().__init__(f"stage {stage!r} failed in run {run}: {cause}")
        self.stage = stage
        self.run = run


def _run_one(pool: EmbeddingSet, train_ids: np.ndarray, test_set: EmbeddingSet,
             test_ids: np.ndarray, config: PipelineConfig, mode: str, run: int,
             out_dir: Path, tag: str):
    seed_r = config.seed ^ run
    train_pool = pool.subset(train_ids)

    sel_path = out_dir / f"selection_{mode}_{tag}_run{run}.tsv"
    try:
        if sel_path.exists():
            selection = read_selection(sel_path)
        elif mode == "random":
            selection = _random_selection(train_pool, config.per_class, seed_r)
            write_selection(selection, sel_path)
        else:
            opt = dataclasses.replace(config.optimizer, seed=seed_r)
            selection = distill(train_pool, config.graph, config.flow, opt,
                                config.metric, config.per_class)
            write_selection(selection, sel_path)
            write_selection_summary(selection, out_dir / f"selection_{mode}_{tag}_run{run}.summary.txt")
    except Exception as exc:
        raise StageError("select", run, exc) from exc

    # selection ids live in the train pool's index space; map back to pool ids
    # and assert the distilled items never touch the held-out split
    original_ids = train_ids[selection.all_ids()]
    if np.intersect1d(original_ids, test_ids).size:
        raise StageError("select", run, AssertionError(
            "distilled selection overlaps the held-out split"))

    model_path = out_dir / f"model_{mode}_{tag}_run{run}.bin"
    try:
        if model_path.exists():
            model = load_classifier(model_path)
        else:
            loss = dataclasses.replace(config.loss, seed=seed_r)
            model = train(train_pool, selection, loss)
            save_classifier(model, model_path)
    except Exception as exc:
        raise StageError("train", run, exc) from exc

    try:
        report = evaluate_probabilities(model.predict_proba(test_set.vectors),
                                        test_set.labels, test_set.num_classes)
    except Exception as exc:
        raise StageError("eval", run, exc) from exc
    (out_dir / f"eval_{mode}_{tag}_run{run}.json").write_text(report.to_json(), encoding="utf-8")
    return seed_r, report


def _summarize(rows: list[dict]) -> dict:
    keys = ("accuracy", "macro_f1", "macro_auc")
    mean = {}
    std = {}
    for key in keys:
        values = np.asarray([row[key] for row in rows], dtype=np.float64)
        mean[key] = float(values.mean())
        std[key] = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return {"mean": mean, "std": std}


def _execute_run(config: PipelineConfig, mode: str, run: int) -> dict:
    """One run as a pure function of (config, mode, run); safe for workers."""
    pool = load_pool(config)
    train_ids, test_ids = holdout_split_indices(pool, config.test_fraction, config.seed)
    test_set = pool.subset(test_ids)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seed_r, report = _run_one(pool, train_ids, test_set, test_ids,
                              config, mode, run, out_dir, config_hash(config))
    return {
        "run": run,
        "seed": seed_r,
        "accuracy": report.accuracy,
        "macro_f1": report.macro_f1,
        "macro_auc": report.macro_auc,
    }


def _run_mode(config: PipelineConfig, mode: str) -> dict:
    rows = []
    if config.parallel_runs > 1 and config.runs > 1:
        # runs are pure functions of (config, mode, run index) with disjoint
        # artifact names, so process workers keep results and files identical
        with ProcessPoolExecutor(max_workers=min(config.parallel_runs, config.runs)) as pool:
            rows = list(pool.map(_execute_run, [config] * config.runs,
                                 [mode] * config.runs, range(config.runs)))
    else:
        for run in range(config.runs):
            rows.append(_execute_run(config, mode, run))
    for row in rows:
        logger.info("%s run=%d accuracy=%.6f macro_f1=%.6f macro_auc=%.6f",
                    mode, row["run"], row["accuracy"], row["macro_f1"], row["macro_auc"])

    summary = {"mode": mode, "config": config.as_dict(), "runs": rows}
    summary.update(_summarize(rows))
    return summary


def summary_json(summary: dict) -> str:
    return json.dumps(summary, sort_keys=True, indent=2)


def run_pipeline(config: PipelineConfig) -> dict:
    """Community-aware selection pipeline over all runs; writes artifacts and
    the summary JSON under the output directory."""
    summary = _run_mode(config, "infodist")
    path = Path(config.out_dir) / f"summary_infodist_{config_hash(config)}.json"
    path.write_text(summary_json(summary), encoding="utf-8")
    return summary


def run_random_baseline(config: PipelineConfig) -> dict:
    """Same pipeline with selection replaced by seeded uniform sampling."""
    summary = _run_mode(config, "random")
    path = Path(config.out_dir) / f"summary_random_{config_hash(config)}.json"
    path.write_text(summary_json(summary), encoding="utf-8")
    return summary


def run_paired(config: PipelineConfig) -> dict:
    """Both arms under identical seeds plus per-run metric deltas."""
    selected = run_pipeline(config)
    baseline = run_random_baseline(config)
    deltas = {}
    for key in ("accuracy", "macro_f1", "macro_auc"):
        per_run = [s[key] - r[key] for s, r in zip(selected["runs"], baseline["runs"])]
        deltas[key] = {
            "per_run": per_run,
            "mean": float(np.mean(per_run)),
        }
    paired = {"infodist": selected, "random": baseline, "delta": deltas}
    path = Path(config.out_dir) / f"summary_paired_{config_hash(config)}.json"
    path.write_text(summary_json(paired), encoding="utf-8")
    return paired
