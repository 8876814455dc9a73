"""Group-based unseen-attack evaluation.

Four experiment groups with growing training prefixes (5, 6, 7, 8 of the
eleven datasets); every dataset after the prefix is evaluated as an
unseen case, 18 train/test runs in total.  Each run merges its training
datasets, carves out a calibration split, trains a fresh Siamese model,
calibrates the pair threshold, and scores the held-out pairs.
"""

from dataclasses import dataclass, replace

import numpy as np

from ..detect import calibrate_threshold
from ..errors import DataError
from ..pairs import merge_datasets, split
from ..seeding import derive_seed
from ..siamese import TrainConfig, pair_distance, train
from .metrics import ConfusionCounts, Metrics, compute_metrics


@dataclass(frozen=True)
class GroupRun:
    group: str
    train_count: int
    test_index: int


def default_groups(n_datasets: int, train_counts=(5, 6, 7, 8)):
    """The standard protocol: G1..G4 train prefixes, all later sets tested."""
    runs = []
    for gi, count in enumerate(train_counts, 1):
        if count >= n_datasets:
            raise DataError("train prefix %d leaves nothing to test" % count)
        for test_index in range(count, n_datasets):
            runs.append(GroupRun("G%d" % gi, count, test_index))
    return runs


@dataclass
class RunResult:
    group: str
    train_tags: tuple
    test_tag: str
    counts: ConfusionCounts
    metrics: Metrics
    threshold: float
    model: object = None


@dataclass
class ExperimentReport:
    rows: list
    mean_accuracy: float

    _COLUMNS = (
        "group",
        "train",
        "test",
        "accuracy",
        "precision",
        "recall",
        "f1",
        "tp",
        "fp",
        "fn",
        "tn",
        "threshold",
    )

    def to_tsv(self) -> str:
        lines = ["\t".join(self._COLUMNS)]
        for row in self.rows:
            lines.append(
                "\t".join(
                    (
                        row.group,
                        "%s..%s" % (row.train_tags[0], row.train_tags[-1]),
                        row.test_tag,
                        "%.4f" % row.metrics.accuracy,
                        "%.4f" % row.metrics.precision,
                        "%.4f" % row.metrics.recall,
                        "%.4f" % row.metrics.f1,
                        str(row.counts.tp),
                        str(row.counts.fp),
                        str(row.counts.fn),
                        str(row.counts.tn),
                        "%.6f" % row.threshold,
                    )
                )
            )
        lines.append("# mean_accuracy\t%.4f" % self.mean_accuracy)
        return "\n".join(lines) + "\n"

    def to_summary(self) -> dict:
        return {
            "mean_accuracy": round(self.mean_accuracy, 6),
            "runs": [
                {
                    "group": row.group,
                    "train": list(row.train_tags),
                    "test": row.test_tag,
                    "accuracy": round(row.metrics.accuracy, 6),
                    "precision": round(row.metrics.precision, 6),
                    "recall": round(row.metrics.recall, 6),
                    "f1": round(row.metrics.f1, 6),
                    "pairs": row.counts.total,
                }
                for row in self.rows
            ],
        }


def run_group_experiment(
    datasets,
    train_cfg: TrainConfig = TrainConfig(),
    seed: int = 0,
    train_fraction: float = 0.8,
    groups=None,
    keep_models: bool = False,
) -> ExperimentReport:
    """Execute every group run and collect per-run metrics.

    Held-out pairs never reach training or calibration: each run merges
    only the group's training prefix, and the calibration split is carved
    from that merge.  Deterministic for a given (datasets, config, seed).
    """
    datasets = list(datasets)
    if not datasets:
        raise DataError("no datasets supplied")
    runs = default_groups(len(datasets)) if groups is None else list(groups)
    if not runs:
        raise DataError("empty group specification")

    rows = []
    for run in runs:
        train_sets = datasets[: run.train_count]
        test_set = datasets[run.test_index]
        merged = merge_datasets(train_sets, source_tag="%s-train" % run.group)
        split_seed = derive_seed(seed, run.group, test_set.source_tag, "split")
        train_half, val_half = split(merged, train_fraction, split_seed)
        cfg = replace(
            train_cfg, seed=derive_seed(seed, run.group, test_set.source_tag, "train")
        )
        model, _ = train(train_half, cfg)
        model.threshold = calibrate_threshold(model, val_half)

        distances = pair_distance(
            model.params, test_set.a, test_set.b, model.final_activation
        )
        predicted = distances > model.threshold
        counts = ConfusionCounts.from_predictions(test_set.y, predicted)
        rows.append(
            RunResult(
                group=run.group,
                train_tags=tuple(d.source_tag for d in train_sets),
                test_tag=test_set.source_tag,
                counts=counts,
                metrics=compute_metrics(counts),
                threshold=model.threshold,
                model=model if keep_models else None,
            )
        )
    mean_accuracy = float(np.mean([row.metrics.accuracy for row in rows]))
    return ExperimentReport(rows=rows, mean_accuracy=mean_accuracy)
