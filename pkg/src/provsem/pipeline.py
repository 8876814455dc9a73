"""End-to-end orchestration: traces -> sentences -> vectors -> verdicts.

One entry point drives the whole chain deterministically from a single
root seed: build sentences per scenario, train the embedder on the full
mixed corpus, refine each scenario's adversarial patterns, sample
balanced pair datasets, run the group protocol, and optionally train one
final calibrated model over everything.  All written artifacts are
byte-stable for a given (input, seed).
"""

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import normalize as norm
from .detect import ReferenceSet, calibrate_threshold, classify_event
from .embedding import (
    EmbedConfig,
    embed_lines,
    save_embedder,
    train_embedder,
    write_vectors,
)
from .errors import DataError
from .evalgen.protocol import ExperimentReport, default_groups, run_group_experiment
from .ingest import IngestStats, load_trace
from .pairs import build_pairs, merge_datasets, split
from .seeding import derive_seed
from .semiotics import SemioticsConfig, build_sentence, render_sentence
from .siamese import SiameseModel, TrainConfig, save_siamese, train

logger = logging.getLogger(__name__)


@dataclass
class ScenarioPools:
    """One scenario's normalized sentences, refined and embedded.

    *_lines hold distinct patterns; *_events keep per-event multiplicity,
    which is what pair sampling and reference sets draw from so frequent
    patterns carry their natural weight.
    """

    scenario_id: str
    benign_lines: list
    adv_lines: list
    refined_lines: list
    benign_events: list
    refined_events: list
    benign_vectors: np.ndarray = None
    refined_vectors: np.ndarray = None


@dataclass
class PipelineResult:
    corpus: list  # (label, scenario_id, sentence) rows in scenario order
    embedder: object
    pools: dict
    datasets: list
    report: ExperimentReport
    event_rows: list
    final_model: SiameseModel
    stats: IngestStats


def _distinct(lines):
    return list(dict.fromkeys(lines))


def _make_pool(scenario_id, benign_events, adv_events):
    benign = _distinct(benign_events)
    adv = _distinct(adv_events)
    if not adv:
        raise DataError("scenario %s has no adversarial events" % scenario_id)
    benign_set = set(benign)
    refined = [line for line in adv if line not in benign_set]
    if not refined:
        raise DataError(
            "scenario %s has no adversarial patterns left after refinement"
            % scenario_id
        )
    refined_set = set(refined)
    return ScenarioPools(
        scenario_id=scenario_id,
        benign_lines=benign,
        adv_lines=adv,
        refined_lines=refined,
        benign_events=benign_events,
        refined_events=[line for line in adv_events if line in refined_set],
    )


def refine_pools(records_by_scenario, base_block=()):
    """Build per-scenario pools, plus one pooled block when requested.

    `base_block` ids are additionally refined together as a single
    aggregated category (overlap computed over the pooled sentences),
    mirroring how the first few attack cases are treated as one dataset.
    """
    pools = {}
    for scenario_id, rows in records_by_scenario.items():
        pools[scenario_id] = _make_pool(
            scenario_id,
            [line for label, line in rows if label == "benign"],
            [line for label, line in rows if label == "adversarial"],
        )
    if base_block:
        block_tag = block_name(base_block)
        benign_events = []
        adv_events = []
        for scenario_id in base_block:
            rows = records_by_scenario[scenario_id]
            benign_events.extend(line for label, line in rows if label == "benign")
            adv_events.extend(line for label, line in rows if label == "adversarial")
        pools[block_tag] = _make_pool(block_tag, benign_events, adv_events)
    return pools


def block_name(scenario_ids) -> str:
    return "%s..%s" % (scenario_ids[0], scenario_ids[-1])


def _auto_pair_count(n_refined: int) -> int:
    # Twice the refined pool size, like the reference datasets, but padded
    # so the calibration split always has every stratum populated.
    n = max(2 * n_refined, 16)
    return n + (-n) % 4


def run_pipeline(
    traces,
    seed: int = 0,
    outdir=None,
    sem_cfg: SemioticsConfig = SemioticsConfig(),
    norm_cfg: norm.NormalizerConfig = norm.DEFAULT_NORMALIZER,
    embed_cfg: EmbedConfig = EmbedConfig(),
    train_cfg: TrainConfig = TrainConfig(),
    pairs_per_scenario: int = 0,
    train_fraction: float = 0.9,
    on_error: str = "skip",
    event_level: bool = True,
    base_block_size: int = 5,
) -> PipelineResult:
    """Run the full chain over {scenario_id: trace path} inputs.

    The first `base_block_size` scenarios are pooled into one aggregated
    dataset (the evaluation protocol's starting training corpus); each
    remaining scenario becomes its own dataset.  `pairs_per_scenario` of
    0 sizes each pair dataset as twice its refined event count.  When
    `outdir` is given, every artifact is written beneath it.
    """
    scenario_ids = sorted(traces)
    if not scenario_ids:
        raise DataError("no traces supplied")
    if base_block_size < 0 or base_block_size == 1:
        raise DataError("base_block_size must be 0 (disabled) or >= 2")
    base_block = (
        tuple(scenario_ids[:base_block_size])
        if 2 <= base_block_size < len(scenario_ids)
        else ()
    )

    total_stats = IngestStats()
    records_by_scenario = {}
    corpus_rows = []
    for scenario_id in scenario_ids:
        events, stats = load_trace(traces[scenario_id], on_error=on_error)
        total_stats.total += stats.total
        total_stats.kept += stats.kept
        total_stats.dropped += stats.dropped
        total_stats.errors += stats.errors
        rows = []
        for event in events:
            record = build_sentence(event, sem_cfg, norm_cfg)
            line = render_sentence(record)
            rows.append((record.label, line))
            corpus_rows.append((record.label, scenario_id, line))
        records_by_scenario[scenario_id] = rows
    logger.info(
        "ingested %d scenarios: %d events kept, %d dropped, %d errors",
        len(scenario_ids),
        total_stats.kept,
        total_stats.dropped,
        total_stats.errors,
    )

    embedder = train_embedder(
        [line for _, _, line in corpus_rows],
        replace(embed_cfg, seed=derive_seed(seed, "embed")),
    )

    pools = refine_pools(records_by_scenario, base_block)
    for pool in pools.values():
        pool.benign_vectors, _ = embed_lines(embedder, pool.benign_events)
        pool.refined_vectors, _ = embed_lines(embedder, pool.refined_events)

    dataset_tags = ([block_name(base_block)] if base_block else []) + [
        sid for sid in scenario_ids if sid not in base_block
    ]
    datasets = []
    for tag in dataset_tags:
        pool = pools[tag]
        if pairs_per_scenario:
            n_pairs = pairs_per_scenario * (len(base_block) if tag == dataset_tags[0] and base_block else 1)
        else:
            n_pairs = _auto_pair_count(len(pool.refined_events))
        datasets.append(
            build_pairs(
                pool.benign_vectors,
                pool.refined_vectors,
                n_pairs,
                seed=derive_seed(seed, "pairs", tag),
                source_tag=tag,
            )
        )

    train_counts = tuple(c for c in (1, 2, 3, 4) if c < len(datasets))
    report = run_group_experiment(
        datasets,
        train_cfg=train_cfg,
        seed=seed,
        train_fraction=train_fraction,
        groups=default_groups(len(datasets), train_counts),
        keep_models=event_level,
    )

    event_rows = event_level_evaluation(report, pools, scenario_ids) if event_level else []

    # One model over every dataset, calibrated and ready for `detect`.
    merged = merge_datasets(datasets, source_tag="all")
    final_train, final_val = split(merged, train_fraction, derive_seed(seed, "final", "split"))
    final_model, _ = train(
        final_train, replace(train_cfg, seed=derive_seed(seed, "final", "train"))
    )
    final_model.threshold = calibrate_threshold(final_model, final_val)

    result = PipelineResult(
        corpus=corpus_rows,
        embedder=embedder,
        pools=pools,
        datasets=datasets,
        report=report,
        event_rows=event_rows,
        final_model=final_model,
        stats=total_stats,
    )
    if outdir is not None:
        _write_outputs(Path(outdir), result)
    return result


def event_level_evaluation(report, pools, scenario_ids, k: int = 5):
    """Score each run's held-out events against its training references.

    For every group run: references are the training scenarios' pools,
    queries are the held-out scenario's benign and refined event vectors.
    Returns one row per run with event-level accuracy.
    """
    rows = []
    for run in report.rows:
        if run.model is None:
            raise DataError("event-level evaluation needs keep_models=True")
        benign_refs = np.concatenate([pools[s].benign_vectors for s in run.train_tags])
        adv_refs = np.concatenate([pools[s].refined_vectors for s in run.train_tags])
        refs = ReferenceSet(benign=benign_refs, adversarial=adv_refs, k=k)

        held = pools[run.test_tag]
        correct = 0
        total = 0
        adv_correct = 0
        for vec in held.benign_vectors:
            verdict = classify_event(run.model, refs, vec)
            correct += verdict.decision == "benign"
            total += 1
        for vec in held.refined_vectors:
            verdict = classify_event(run.model, refs, vec)
            adv_correct += verdict.decision == "adversarial"
            correct += verdict.decision == "adversarial"
            total += 1
        rows.append(
            {
                "group": run.group,
                "test": run.test_tag,
                "events": total,
                "accuracy": correct / total,
                "attack_recall": adv_correct / len(held.refined_vectors),
            }
        )
    return rows


def _write_outputs(outdir: Path, result: PipelineResult) -> None:
    outdir.mkdir(parents=True, exist_ok=True)

    with open(outdir / "corpus.tsv", "w", encoding="utf-8") as handle:
        for label, scenario_id, line in result.corpus:
            handle.write("%s\t%s\t%s\n" % (label, scenario_id, line))

    save_embedder(result.embedder, outdir / "embedder.model")

    labels = [label for label, _, _ in result.corpus]
    scenarios = [scenario_id for _, scenario_id, _ in result.corpus]
    matrix, _ = embed_lines(result.embedder, [line for _, _, line in result.corpus])
    write_vectors(outdir / "vectors.tsv", labels, scenarios, matrix)

    with open(outdir / "report.tsv", "w", encoding="utf-8") as handle:
        handle.write(result.report.to_tsv())

    summary = result.report.to_summary()
    summary["ingest"] = result.stats.to_dict()
    if result.event_rows:
        summary["event_level"] = [
            {
                "group": row["group"],
                "test": row["test"],
                "events": row["events"],
                "accuracy": round(row["accuracy"], 6),
                "attack_recall": round(row["attack_recall"], 6),
            }
            for row in result.event_rows
        ]
    with open(outdir / "summary.json", "w", encoding="utf-8") as handle:
        json.dump(summary, handle, sort_keys=True, indent=2)
        handle.write("\n")

    save_siamese(result.final_model, outdir / "siamese.model")
