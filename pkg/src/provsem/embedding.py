"""Sentence embedding: n-gram vectors trained with negative sampling.

Each rendered sentence is represented by the average of its unigram and
adjacent-bigram vectors.  Training predicts every token of a sentence
from the remaining n-grams' average, against negatives drawn from the
smoothed unigram distribution.  The vocabulary here is tiny and sentences
are short, so a 50-dimensional space is plenty.

The per-step update loop is the hot path: a compiled kernel
(provsem._speedups) is used when available, with a NumPy fallback
selected at import time.  Set PROVSEM_PURE=1 to force the fallback.
"""

import json
import logging
import os
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import _embed_pure
from .errors import ConfigError, DataError, ModelFormatError
from .seeding import substream

try:
    from . import _speedups
except ImportError:  # extension not built; NumPy kernels take over
    _speedups = None

logger = logging.getLogger(__name__)

#: True when the compiled kernels were importable.
FAST_KERNELS = _speedups is not None

_MAGIC = "provsem-embedder"
_FORMAT_VERSION = 1


def kernel_for(backend: str = "auto"):
    """Resolve a backend name to (train_epoch kernel, resolved name)."""
    if backend == "auto":
        if FAST_KERNELS and not os.environ.get("PROVSEM_PURE"):
            backend = "c"
        else:
            backend = "python"
    if backend == "c":
        if _speedups is None:
            raise ConfigError("compiled kernels requested but not built")
        return _speedups.train_epoch, "c"
    if backend == "python":
        return _embed_pure.train_epoch, "python"
    raise ConfigError("backend must be 'auto', 'c' or 'python'")


@dataclass(frozen=True)
class EmbedConfig:
    dim: int = 50
    epochs: int = 20
    lr: float = 0.05
    min_lr: float = 1e-4
    negatives: int = 5
    min_count: int = 1
    use_bigrams: bool = True
    smoothing: float = 0.75
    seed: int = 0
    backend: str = "auto"

    def __post_init__(self):
        if self.dim <= 0:
            raise ConfigError("dim must be positive")
        if self.epochs < 0 or self.negatives < 0 or self.min_count < 1:
            raise ConfigError("invalid embedder hyperparameters")
        if self.lr <= 0 or self.min_lr < 0:
            raise ConfigError("learning rates must be positive")

    @classmethod
    def from_dict(cls, raw: dict) -> "EmbedConfig":
        return cls(**raw)


@dataclass
class EmbedderModel:
    """Trained n-gram embedder: vocabulary plus one vector per entry.

    Unigrams occupy indices [0, n_unigrams); bigram entries (stored as the
    two tokens joined by one space) follow.
    """

    dim: int
    vocab: dict
    n_unigrams: int
    vectors: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.vectors.shape != (len(self.vocab), self.dim):
            raise ModelFormatError("vector matrix does not match vocabulary")
        if not np.isfinite(self.vectors).all():
            raise ModelFormatError("model contains non-finite vectors")


@dataclass(frozen=True)
class EventVector:
    """A fixed-length embedding of one event sentence."""

    values: np.ndarray
    label: str = "unknown"
    scenario_id: str = ""


def _ngram_ids(model_vocab, n_unigrams, tokens, use_bigrams):
    ids = [model_vocab[t] for t in tokens if t in model_vocab]
    if use_bigrams:
        for a, b in zip(tokens, tokens[1:]):
            idx = model_vocab.get(a + " " + b)
            if idx is not None:
                ids.append(idx)
    return ids


def _build_vocab(sentences, cfg):
    uni = Counter()
    bi = Counter()
    for tokens in sentences:
        uni.update(tokens)
        if cfg.use_bigrams:
            bi.update(a + " " + b for a, b in zip(tokens, tokens[1:]))
    uni_kept = sorted(
        (t for t, c in uni.items() if c >= cfg.min_count),
        key=lambda t: (-uni[t], t),
    )
    bi_kept = sorted(
        (t for t, c in bi.items() if c >= cfg.min_count),
        key=lambda t: (-bi[t], t),
    )
    if not uni_kept:
        raise DataError("vocabulary is empty after min-count filtering")
    vocab = {t: i for i, t in enumerate(uni_kept)}
    for t in bi_kept:
        vocab[t] = len(vocab)
    counts = np.array([uni[t] for t in uni_kept], dtype=np.float64)
    return vocab, len(uni_kept), counts


def _encode_steps(sentences, vocab, n_unigrams, use_bigrams):
    """Flatten per-(sentence, target) prediction steps into index arrays."""
    step_targets = []
    ctx_indices = []
    ctx_offsets = [0]
    sent_ranges = [0]
    for tokens in sentences:
        uni_ids = [vocab.get(t) for t in tokens]
        bi_ids = []
        if use_bigrams:
            bi_ids = [
                vocab.get(a + " " + b) for a, b in zip(tokens, tokens[1:])
            ]
        for i, target in enumerate(uni_ids):
            if target is None or target >= n_unigrams:
                continue
            ctx = [u for j, u in enumerate(uni_ids) if j != i and u is not None]
            ctx += [
                b
                for j, b in enumerate(bi_ids)
                if b is not None and j != i and j + 1 != i
            ]
            if not ctx:
                continue
            step_targets.append(target)
            ctx_indices.extend(ctx)
            ctx_offsets.append(len(ctx_indices))
        sent_ranges.append(len(step_targets))
    return (
        np.array(step_targets, dtype=np.int32),
        np.array(ctx_indices, dtype=np.int32),
        np.array(ctx_offsets, dtype=np.int64),
        np.array(sent_ranges, dtype=np.int64),
    )


def train_embedder(corpus_lines, cfg: EmbedConfig = EmbedConfig()) -> EmbedderModel:
    """Train an embedder on rendered sentence lines.

    Deterministic for a given (corpus, config): vocabulary order, vector
    initialization and the whole update sequence derive from cfg.seed.
    """
    sentences = [line.split() for line in corpus_lines if line.strip()]
    if not sentences:
        raise DataError("cannot train an embedder on an empty corpus")
    vocab, n_uni, uni_counts = _build_vocab(sentences, cfg)

    kernel, backend = kernel_for(cfg.backend)

    init_rng = substream(cfg.seed, "embed", "init")
    vin = (init_rng.random((len(vocab), cfg.dim)) - 0.5) / cfg.dim
    vout = np.zeros((n_uni, cfg.dim))

    targets, ctx_idx, ctx_off, sent_ranges = _encode_steps(
        sentences, vocab, n_uni, cfg.use_bigrams
    )
    n_steps = len(targets)
    n_sent = len(sentences)

    noise = uni_counts ** cfg.smoothing
    noise /= noise.sum()

    train_rng = substream(cfg.seed, "embed", "train")
    history = []
    total_steps = max(1, cfg.epochs * n_steps)
    for epoch in range(cfg.epochs):
        order = train_rng.permutation(n_sent).astype(np.int64)
        negatives = train_rng.choice(
            n_uni, size=(n_steps, cfg.negatives), p=noise
        ).astype(np.int32)
        if n_steps:
            loss = kernel(
                vin,
                vout,
                targets,
                ctx_idx,
                ctx_off,
                sent_ranges,
                order,
                negatives,
                cfg.lr,
                cfg.min_lr,
                epoch * n_steps,
                total_steps,
            )
            history.append(loss / n_steps)
        else:
            history.append(0.0)
    logger.info(
        "trained embedder: %d sentences, %d vocab entries, backend=%s",
        n_sent,
        len(vocab),
        backend,
    )

    meta = {
        "seed": cfg.seed,
        "epochs": cfg.epochs,
        "lr": cfg.lr,
        "min_lr": cfg.min_lr,
        "negatives": cfg.negatives,
        "min_count": cfg.min_count,
        "use_bigrams": cfg.use_bigrams,
        "smoothing": cfg.smoothing,
        "backend": backend,
        "loss_history": history,
    }
    return EmbedderModel(
        dim=cfg.dim, vocab=vocab, n_unigrams=n_uni, vectors=vin, meta=meta
    )


def embed_sentence(model: EmbedderModel, line: str) -> np.ndarray:
    """Average of the in-vocabulary n-gram vectors; zeros when none match.

    Ids are summed in sorted order so the result depends only on the
    n-gram multiset, not on token positions (bigrams aside).
    """
    tokens = line.split()
    if not tokens:
        raise DataError("cannot embed an empty line")
    use_bigrams = bool(model.meta.get("use_bigrams", True))
    ids = _ngram_ids(model.vocab, model.n_unigrams, tokens, use_bigrams)
    if not ids:
        return np.zeros(model.dim)
    return model.vectors[sorted(ids)].mean(axis=0)


def embed_lines(model: EmbedderModel, lines):
    """Embed many lines; returns (matrix, out-of-vocabulary line count)."""
    out = np.zeros((len(lines), model.dim))
    oov = 0
    for i, line in enumerate(lines):
        vec = embed_sentence(model, line)
        if not vec.any():
            oov += 1
        out[i] = vec
    return out, oov


def _fmt_floats(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def write_vectors(path, labels, scenario_ids, matrix) -> None:
    """Vector dump TSV: label, scenario id, then the vector values.

    This flat dump is the hand-off point for external plotting and for
    the detect CLI's reference/input files.
    """
    matrix = np.asarray(matrix)
    if not (len(labels) == len(scenario_ids) == len(matrix)):
        raise DataError("vector dump columns disagree in length")
    with open(path, "w", encoding="utf-8") as handle:
        for label, scenario_id, row in zip(labels, scenario_ids, matrix):
            handle.write("%s\t%s\t%s\n" % (label, scenario_id, _fmt_floats(row)))


def read_vectors(path):
    """Read a vector dump; returns (labels, scenario_ids, matrix)."""
    labels, scenario_ids, rows = [], [], []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError("vector file line %d is not a 3-column row" % lineno)
            labels.append(parts[0])
            scenario_ids.append(parts[1])
            try:
                rows.append([float(v) for v in parts[2].split(" ")])
            except ValueError as exc:
                raise DataError("vector file line %d: %s" % (lineno, exc)) from exc
    if not rows:
        raise DataError("vector file is empty")
    if len({len(r) for r in rows}) != 1:
        raise DataError("vector rows disagree in dimension")
    return labels, scenario_ids, np.array(rows)


def save_embedder(model: EmbedderModel, path) -> None:
    """Text serialization with exact (round-trippable) float values."""
    tokens = sorted(model.vocab, key=model.vocab.get)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("%s %d\n" % (_MAGIC, _FORMAT_VERSION))
        handle.write("dim\t%d\n" % model.dim)
        handle.write("unigrams\t%d\n" % model.n_unigrams)
        handle.write("vocab\t%d\n" % len(model.vocab))
        handle.write("meta\t%s\n" % json.dumps(model.meta, sort_keys=True))
        for idx, token in enumerate(tokens):
            handle.write("%s\t%s\n" % (token, _fmt_floats(model.vectors[idx])))


def load_embedder(path) -> EmbedderModel:
    with open(path, "r", encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    if not lines or not lines[0].startswith(_MAGIC):
        raise ModelFormatError("not an embedder model file: %s" % path)
    try:
        version = int(lines[0].split()[1])
    except (IndexError, ValueError) as exc:
        raise ModelFormatError("unreadable model version") from exc
    if version != _FORMAT_VERSION:
        raise ModelFormatError("unsupported embedder format version %d" % version)

    def header(idx, key):
        try:
            name, value = lines[idx].split("\t", 1)
        except (IndexError, ValueError) as exc:
            raise ModelFormatError("truncated embedder header") from exc
        if name != key:
            raise ModelFormatError("expected header %r, found %r" % (key, name))
        return value

    dim = int(header(1, "dim"))
    n_uni = int(header(2, "unigrams"))
    n_vocab = int(header(3, "vocab"))
    meta = json.loads(header(4, "meta"))

    rows = lines[5:]
    if len(rows) != n_vocab:
        raise ModelFormatError(
            "corrupt embedder file: expected %d vocab rows, found %d"
            % (n_vocab, len(rows))
        )
    vocab = {}
    vectors = np.zeros((n_vocab, dim))
    for idx, row in enumerate(rows):
        try:
            token, values = row.split("\t")
            parsed = [float(v) for v in values.split(" ")]
        except ValueError as exc:
            raise ModelFormatError("corrupt vocab row %d" % idx) from exc
        if len(parsed) != dim:
            raise ModelFormatError("vocab row %d has wrong dimension" % idx)
        vocab[token] = idx
        vectors[idx] = parsed
    return EmbedderModel(
        dim=dim, vocab=vocab, n_unigrams=n_uni, vectors=vectors, meta=meta
    )
