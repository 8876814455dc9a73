"""Acceptance gate: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
report.  The end-to-end criteria share one pipeline run through the
module-scoped fixture; the rerun criterion executes the pipeline a second
time and compares bytes.
"""

import filecmp
import re
import time

import numpy as np
import pytest

from provsem import normalize as norm
from provsem.embedding import EmbedConfig, embed_sentence
from provsem.evalgen.metrics import ConfusionCounts, compute_metrics
from provsem.evalgen.synth import SCENARIO_SUITE, generate_scenario
from provsem.pairs import refine_adversarial
from provsem.pipeline import run_pipeline
from provsem.seeding import substream
from provsem.semiotics import SentenceRecord, parse_sentence, render_sentence
from provsem.siamese import (
    SubnetParams,
    TrainConfig,
    contrastive_loss,
    gradient_check,
    pair_distance,
)

ACCEPT_SEED = 7
N_BENIGN = 600
N_ATTACK = 300
EMBED_CFG = EmbedConfig(epochs=40)
TRAIN_CFG = TrainConfig(epochs=100, batch_size=64, margin=2.0)
PAIRS_PER_SCENARIO = 256


def test_protocol_config_matches_gate():
    """configs/protocol.toml must agree with the constants used here."""
    from pathlib import Path

    from provsem.config import AppConfig

    path = Path(__file__).resolve().parent.parent / "configs" / "protocol.toml"
    cfg = AppConfig.load(path)
    assert cfg.embed.epochs == EMBED_CFG.epochs
    assert cfg.train.margin == TRAIN_CFG.margin
    assert cfg.train.epochs == TRAIN_CFG.epochs
    assert cfg.train.batch_size == TRAIN_CFG.batch_size


def _status(criterion, text):
    print("\n[criterion %d] PASS - %s" % (criterion, text))


@pytest.fixture(scope="module")
def pipeline_run(tmp_path_factory):
    """One full synthetic end-to-end run shared by criteria 6, 7 and 8."""
    tmp = tmp_path_factory.mktemp("acceptance")
    traces = {}
    started = time.perf_counter()
    for scenario_id, template in SCENARIO_SUITE:
        path = tmp / ("%s.jsonl" % scenario_id)
        generate_scenario(template, scenario_id, ACCEPT_SEED, N_BENIGN, N_ATTACK, path)
        traces[scenario_id] = path
    outdir = tmp / "run-a"
    result = run_pipeline(
        traces,
        seed=ACCEPT_SEED,
        outdir=outdir,
        embed_cfg=EMBED_CFG,
        train_cfg=TRAIN_CFG,
        pairs_per_scenario=PAIRS_PER_SCENARIO,
    )
    elapsed = time.perf_counter() - started
    return {
        "traces": traces,
        "result": result,
        "outdir": outdir,
        "elapsed": elapsed,
        "tmp": tmp,
    }


def test_criterion_1_refinement_arithmetic():
    """Reference refined counts reproduced exactly from set cardinalities."""
    rows = {
        "C01-05": (4516, 2629, 1887),
        "C06": (438, 178, 260),
        "C07": (237, 190, 47),
        "C08": (2527, 1202, 1325),
        "C09": (477, 309, 168),
        "C10": (399, 324, 75),
        "C11": (5041, 2958, 2083),
    }
    started = time.perf_counter()
    for tag, (n_adv, n_overlap, expected) in rows.items():
        shared = ["%s shared pattern %d" % (tag, i) for i in range(n_overlap)]
        adv_only = ["%s attack pattern %d" % (tag, i) for i in range(n_adv - n_overlap)]
        benign = shared + ["%s benign pattern %d" % (tag, i) for i in range(50)]
        refined = refine_adversarial(benign, shared + adv_only)
        assert len(refined) == expected, tag
    elapsed = time.perf_counter() - started
    assert elapsed < 1.0, "refinement arithmetic took %.3fs" % elapsed
    _status(1, "all 7 refined counts exact in %.3fs" % elapsed)


# --- criterion 2: independent straight-line normalization reference ---------

_REF_STABLE = {
    ".conf", ".jar", ".so", ".log", ".txt", ".json", ".xml", ".yaml", ".yml",
    ".py", ".sh", ".js", ".html", ".css", ".service",
}
_REF_UUID = re.compile(
    r"^[0-9a-fA-F]{8}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{12}$"
)


def reference_normalize(token):
    """Straight-line restatement of the normalization rules.

    Written independently of provsem.normalize: plain ifs, its own
    regexes and class counting, no shared helpers.
    """
    if token in ("<TMP>", "<PIPE>", "<HASH>", "<NA>"):
        return token
    path = token.replace("\\", "/")
    probe = path if path.endswith("/") else path + "/"
    for prefix in ("/tmp/", "/var/tmp/", "/run/", "/dev/", "/proc/", "/sys/"):
        if probe.startswith(prefix):
            return "<TMP>"
    for prefix in ("c:/windows/temp/", "c:/users/default/appdata/local/temp/"):
        if probe.lower().startswith(prefix):
            return "<TMP>"
    trimmed = path.rstrip("/")
    base = trimmed.split("/")[-1] if "/" in trimmed else trimmed
    if not base and "/" in path:
        base = ""
    if base.startswith(".tmp") or base.endswith(".tmp"):
        return "<TMP>"
    if token.startswith("pipe:"):
        return "<PIPE>"
    pieces = base.split(".")
    for piece in pieces[1:]:
        if "." + piece in _REF_STABLE:
            return token
    if base and _REF_UUID.match(base):
        return "<HASH>"
    if len(base) >= 16:
        kinds = []
        for ch in base:
            if ch.isalpha():
                kinds.append("a")
            elif ch.isdigit():
                kinds.append("d")
            else:
                kinds.append("o")
        if len(set(kinds)) >= 2:
            flips = 0
            for i in range(1, len(kinds)):
                if kinds[i] != kinds[i - 1]:
                    flips += 1
            if flips / (len(base) - 1) >= 0.25:
                return "<HASH>"
    return token


def _token_corpus(n=1000):
    rng = substream(ACCEPT_SEED, "acceptance", "tokens")
    hexdigits = "0123456789abcdef"
    letters = "abcdefghijklmnopqrstuvwxyz"
    words = ["report", "cache", "index", "server", "engine", "audit", "httpd",
             "session", "config", "status"]
    exts = [".conf", ".jar", ".so", ".log", ".json", ".csv", ".tmp", ".dat", ""]

    def word():
        return words[int(rng.integers(len(words)))]

    def hexstr(k):
        return "".join(hexdigits[i] for i in rng.integers(0, 16, size=k))

    def uuid():
        raw = hexstr(32)
        return "-".join((raw[:8], raw[8:12], raw[12:16], raw[16:20], raw[20:]))

    makers = [
        lambda: "/tmp/%s-%s" % (word(), hexstr(8)),
        lambda: "/var/tmp/%s" % word(),
        lambda: "/proc/%d/stat" % rng.integers(1, 99999),
        lambda: "/dev/pts/%d" % rng.integers(0, 64),
        lambda: "/run/user/%d/bus" % rng.integers(0, 9999),
        lambda: "/sys/fs/cgroup/%s" % word(),
        lambda: ".tmp-%s.%s%08d" % (word(), word(), rng.integers(0, 10**8)),
        lambda: "%s.tmp" % word(),
        lambda: "pipe:[%d]" % rng.integers(1, 10**6),
        uuid,
        lambda: hexstr(32),
        lambda: hexstr(40),
        lambda: "/var/lib/%s/%s" % (word(), uuid()),
        lambda: "/etc/%s%s" % (word(), exts[int(rng.integers(len(exts)))]),
        lambda: "lib%s.so.%d.%d" % (word(), rng.integers(0, 9), rng.integers(0, 9)),
        lambda: "%s-%d.%d.%d.jar" % (word(), rng.integers(0, 9), rng.integers(0, 9), rng.integers(0, 9)),
        lambda: "/usr/bin/%s" % word(),
        lambda: word(),
        lambda: "".join(letters[i] for i in rng.integers(0, 26, size=20)),
        lambda: "C:\\Windows\\Temp\\%s%d.dat" % (word(), rng.integers(0, 999)),
        lambda: "%s_%s-%s.%s" % (word(), hexstr(4), hexstr(6), word()),
        lambda: "<TMP>",
        lambda: "10.%d.%d.%d:%d" % (rng.integers(0, 255), rng.integers(0, 255),
                                    rng.integers(0, 255), rng.integers(1, 65535)),
    ]
    return [makers[int(rng.integers(len(makers)))]() for _ in range(n)]


def test_criterion_2_normalization_oracle():
    tokens = _token_corpus(1000)
    disagreements = [
        (t, norm.normalize_token(t), reference_normalize(t))
        for t in tokens
        if norm.normalize_token(t) != reference_normalize(t)
    ]
    assert disagreements == [], disagreements[:10]

    assert norm.normalize_token("/var/lib/docker/.tmp-config.v2.json07205514") == "<TMP>"
    assert norm.normalize_token("pipe:[184520]") == "<PIPE>"
    assert norm.normalize_token("75619cbc-879c-4076-8539-181392588ced") == "<HASH>"
    _status(2, "reference implementation agrees on 1,000 generated tokens")


def test_criterion_3_gradient_check():
    started = time.perf_counter()
    worst = gradient_check(n_trials=20, seed=ACCEPT_SEED, h=1e-5)
    elapsed = time.perf_counter() - started
    assert worst < 1e-4, "max relative error %.3e" % worst
    assert elapsed < 30.0, "gradient check took %.1fs" % elapsed
    _status(3, "max relative error %.2e over 20 configurations in %.1fs" % (worst, elapsed))


def test_criterion_4_loss_and_identity_suite():
    for margin in (0.5, 1.0, 2.0):
        assert contrastive_loss(0.0, 0, margin) == 0.0
        assert contrastive_loss(margin, 1, margin) == 0.0
        assert contrastive_loss(margin + 1.3, 1, margin) == 0.0
    assert contrastive_loss(0.5, 1, 1.0) == pytest.approx(0.125)

    rng = substream(ACCEPT_SEED, "acceptance", "symmetry")
    params = SubnetParams.initialize(50, 32, rng)
    a = rng.normal(size=(1000, 50))
    b = rng.normal(size=(1000, 50))
    assert np.array_equal(pair_distance(params, a, b), pair_distance(params, b, a))

    records = [
        SentenceRecord("ps", "open", (), "<TMP>", (), "benign", "S01"),
        SentenceRecord("java", "clone", ("/jetty/start.jar",), "<NA>", (), "benign", "S02"),
        SentenceRecord("sh", "execve", ("/opt/run.sh", "<HASH>"), "/usr/bin/id", (), "adversarial", "S03"),
        SentenceRecord("httpd", "execve", (), "/bin/sh", (), "adversarial", "S01"),
    ]
    for record in records:
        line = render_sentence(record)
        assert parse_sentence(line, record.label, record.scenario_id) == record
    _status(4, "loss identities, exact symmetry on 1,000 pairs, rendering round-trips")


def test_criterion_5_reported_metrics_consistency():
    """The 516-pair reference row must admit integral confusion counts."""
    reported = {"accuracy": 0.882, "precision": 0.930, "recall": 0.826, "f1": 0.875}
    positives = negatives = 516 // 2
    best_gap, best_counts = None, None
    for tp in range(positives + 1):
        fn = positives - tp
        for fp in range(negatives + 1):
            tn = negatives - fp
            m = compute_metrics(ConfusionCounts(tp, fp, fn, tn))
            gap = max(
                abs(m.accuracy - reported["accuracy"]),
                abs(m.precision - reported["precision"]),
                abs(m.recall - reported["recall"]),
                abs(m.f1 - reported["f1"]),
            )
            if best_gap is None or gap < best_gap:
                best_gap, best_counts = gap, (tp, fp, fn, tn)
    assert best_gap <= 0.0015, "closest counts %s miss by %.4f" % (best_counts, best_gap)
    _status(
        5,
        "counts tp=%d fp=%d fn=%d tn=%d reproduce the row within %.3f points"
        % (*best_counts, best_gap * 100),
    )


def test_criterion_6_end_to_end_generalization(pipeline_run):
    report = pipeline_run["result"].report
    assert len(report.rows) == 18
    accuracies = {(r.group, r.test_tag): r.metrics.accuracy for r in report.rows}
    worst = min(accuracies.values())
    assert report.mean_accuracy >= 0.85, "mean accuracy %.3f" % report.mean_accuracy
    assert worst >= 0.75, "weakest run %.3f (%s)" % (
        worst,
        min(accuracies, key=accuracies.get),
    )
    assert pipeline_run["elapsed"] < 600.0, "pipeline took %.0fs" % pipeline_run["elapsed"]
    _status(
        6,
        "18 runs: mean %.1f%%, min %.1f%% (%s/%s), %.0fs"
        % (
            100 * report.mean_accuracy,
            100 * worst,
            *min(accuracies, key=accuracies.get),
            pipeline_run["elapsed"],
        ),
    )


def test_criterion_7_embedding_semantics(pipeline_run):
    result = pipeline_run["result"]
    model = result.embedder
    probe_a = embed_sentence(model, "httpd execve sh")
    probe_b = embed_sentence(model, "java execve sh")
    assert probe_a.any() and probe_b.any()

    def cosine(x, y):
        return float(x @ y / (np.linalg.norm(x) * np.linalg.norm(y)))

    related = cosine(probe_a, probe_b)
    probe_tokens = {"httpd", "java", "execve", "sh"}
    unrelated_pool = [
        line
        for _, _, line in result.corpus
        if not probe_tokens & set(line.split())
    ]
    rng = substream(ACCEPT_SEED, "acceptance", "triples")
    wins = 0
    for _ in range(100):
        line = unrelated_pool[int(rng.integers(len(unrelated_pool)))]
        other = embed_sentence(model, line)
        if related > cosine(probe_a, other):
            wins += 1
    assert wins >= 90, "proximity held in only %d/100 trials" % wins
    _status(7, "probe-pair cosine beat unrelated sentences in %d/100 trials" % wins)


def test_event_level_detection(pipeline_run):
    """Held-out attack events are flagged against training references.

    Companion check to the pair-level gate: across all 18 runs, at least
    85% of held-out refined attack events classify as adversarial via
    the k-nearest reference comparison.
    """
    result = pipeline_run["result"]
    flagged = 0
    total = 0
    for row in result.event_rows:
        n_adv = len(result.pools[row["test"]].refined_vectors)
        flagged += row["attack_recall"] * n_adv
        total += n_adv
    rate = flagged / total
    assert rate >= 0.85, "only %.1f%% of held-out attack events flagged" % (100 * rate)


def test_criterion_8_deterministic_reruns(pipeline_run):
    outdir_b = pipeline_run["tmp"] / "run-b"
    run_pipeline(
        pipeline_run["traces"],
        seed=ACCEPT_SEED,
        outdir=outdir_b,
        embed_cfg=EMBED_CFG,
        train_cfg=TRAIN_CFG,
        pairs_per_scenario=PAIRS_PER_SCENARIO,
    )
    outdir_a = pipeline_run["outdir"]
    names = sorted(p.name for p in outdir_a.iterdir())
    assert names == sorted(p.name for p in outdir_b.iterdir())
    match, mismatch, errors = filecmp.cmpfiles(outdir_a, outdir_b, names, shallow=False)
    assert mismatch == [] and errors == [], (mismatch, errors)
    _status(8, "two runs produced byte-identical reports (%d files)" % len(names))
