"""Adversarial-set refinement and similar/dissimilar pair construction.

Events recorded during an attack window are only preliminarily
adversarial: patterns that also occur in benign recordings carry no
attack signal and are removed first.  Balanced pair datasets are then
sampled for Siamese training: half dissimilar (benign x adversarial),
half similar, the similar half split evenly between benign-benign and
adversarial-adversarial.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

#: Pair kind codes stored per pair; y=1 (dissimilar) iff kind is BENIGN_ADV.
KIND_BENIGN_BENIGN = 0
KIND_ADV_ADV = 1
KIND_BENIGN_ADV = 2

KIND_NAMES = {
    KIND_BENIGN_BENIGN: "benign-benign",
    KIND_ADV_ADV: "adv-adv",
    KIND_BENIGN_ADV: "benign-adv",
}
KIND_CODES = {name: code for code, name in KIND_NAMES.items()}


@dataclass(frozen=True)
class EventPair:
    a: np.ndarray
    b: np.ndarray
    y: int
    pair_kind: str


@dataclass
class PairDataset:
    """Columnar pair storage: a[i], b[i] with label y[i] and kind[i]."""

    a: np.ndarray
    b: np.ndarray
    y: np.ndarray
    kind: np.ndarray
    source_tag: str = ""
    seed: int = 0
    # Index of the originating dataset per pair; lets experiment code prove
    # that held-out pairs never reach training or calibration.
    origin: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.origin is None:
            self.origin = np.zeros(len(self.y), dtype=np.int32)
        self.validate()

    def __len__(self):
        return len(self.y)

    def validate(self):
        n = len(self.y)
        if not (len(self.a) == len(self.b) == len(self.kind) == len(self.origin) == n):
            raise DataError("pair dataset columns disagree in length")
        dissimilar = self.kind == KIND_BENIGN_ADV
        if not np.array_equal(self.y == 1, dissimilar):
            raise DataError("y=1 must hold exactly for benign-adv pairs")
        n_sim = int((self.y == 0).sum())
        n_dis = int((self.y == 1).sum())
        if n_sim != n_dis:
            raise DataError(
                "dataset must be balanced (%d similar vs %d dissimilar)" % (n_sim, n_dis)
            )
        n_bb = int((self.kind == KIND_BENIGN_BENIGN).sum())
        n_aa = int((self.kind == KIND_ADV_ADV).sum())
        if abs(n_bb - n_aa) > 1:
            raise DataError(
                "similar pairs must split evenly (%d benign-benign vs %d adv-adv)"
                % (n_bb, n_aa)
            )

    def pairs(self):
        for i in range(len(self)):
            yield EventPair(
                a=self.a[i],
                b=self.b[i],
                y=int(self.y[i]),
                pair_kind=KIND_NAMES[int(self.kind[i])],
            )

    def subset(self, idx, source_tag=None):
        return PairDataset(
            a=self.a[idx],
            b=self.b[idx],
            y=self.y[idx],
            kind=self.kind[idx],
            source_tag=self.source_tag if source_tag is None else source_tag,
            seed=self.seed,
            origin=self.origin[idx],
        )


def refine_adversarial(benign_sentences, adv_sentences):
    """Distinct adversarial sentences minus those also seen benign.

    Order of first appearance is preserved so downstream sampling is
    deterministic.
    """
    benign_set = set(benign_sentences)
    refined = list(dict.fromkeys(adv_sentences))
    if not refined:
        raise DataError("no adversarial events to refine")
    return [s for s in refined if s not in benign_set]


def _distinct_pairs(n: int, count: int, rng, allow_replacement: bool):
    """`count` index pairs (i, j) with i != j when the pool allows it."""
    if n == 1 and not allow_replacement:
        raise DataError(
            "a pool of size 1 cannot form member-distinct pairs; "
            "enable replacement to permit (v, v) pairs"
        )
    left = rng.integers(0, n, size=count)
    if n == 1:
        return left, left.copy()
    offset = rng.integers(1, n, size=count)
    return left, (left + offset) % n


def build_pairs(
    benign_vectors,
    adv_vectors,
    n_pairs: int,
    seed: int,
    source_tag: str = "",
    allow_replacement: bool = False,
) -> PairDataset:
    """Sample a balanced pair dataset from two embedded-event pools.

    Dissimilar pairs are drawn uniformly from the benign x adversarial
    product without replacement until it is exhausted, then with
    replacement.  Deterministic for a given seed.
    """
    benign = np.asarray(benign_vectors, dtype=np.float64)
    adv = np.asarray(adv_vectors, dtype=np.float64)
    if benign.ndim != 2 or adv.ndim != 2:
        raise DataError("vector pools must be 2-d arrays")
    if len(benign) == 0 or len(adv) == 0:
        raise DataError("both vector pools must be non-empty")
    if n_pairs < 2 or n_pairs % 2:
        raise DataError("n_pairs must be a positive even number")

    rng = np.random.Generator(np.random.PCG64(seed))
    n_dis = n_pairs // 2
    n_sim = n_pairs - n_dis
    n_bb = n_sim - n_sim // 2
    n_aa = n_sim // 2

    bb_i, bb_j = _distinct_pairs(len(benign), n_bb, rng, allow_replacement)
    aa_i, aa_j = _distinct_pairs(len(adv), n_aa, rng, allow_replacement)

    product = len(benign) * len(adv)
    unique = min(n_dis, product)
    flat = rng.choice(product, size=unique, replace=False)
    if n_dis > unique:
        flat = np.concatenate([flat, rng.integers(0, product, size=n_dis - unique)])
    ba_i = flat // len(adv)
    ba_j = flat % len(adv)

    a = np.concatenate([benign[bb_i], adv[aa_i], benign[ba_i]])
    b = np.concatenate([benign[bb_j], adv[aa_j], adv[ba_j]])
    y = np.concatenate(
        [np.zeros(n_bb, dtype=np.uint8), np.zeros(n_aa, dtype=np.uint8), np.ones(n_dis, dtype=np.uint8)]
    )
    kind = np.concatenate(
        [
            np.full(n_bb, KIND_BENIGN_BENIGN, dtype=np.uint8),
            np.full(n_aa, KIND_ADV_ADV, dtype=np.uint8),
            np.full(n_dis, KIND_BENIGN_ADV, dtype=np.uint8),
        ]
    )
    return PairDataset(a=a, b=b, y=y, kind=kind, source_tag=source_tag, seed=seed)


def merge_datasets(datasets, source_tag="merged") -> PairDataset:
    """Concatenate datasets, recording each pair's originating index."""
    if not datasets:
        raise DataError("nothing to merge")
    origin = np.concatenate(
        [np.full(len(d), i, dtype=np.int32) for i, d in enumerate(datasets)]
    )
    return PairDataset(
        a=np.concatenate([d.a for d in datasets]),
        b=np.concatenate([d.b for d in datasets]),
        y=np.concatenate([d.y for d in datasets]),
        kind=np.concatenate([d.kind for d in datasets]),
        source_tag=source_tag,
        seed=datasets[0].seed,
        origin=origin,
    )


def split(dataset: PairDataset, train_fraction: float, seed: int):
    """Stratified train/validation split preserving the balance invariants."""
    if not 0.0 < train_fraction < 1.0:
        raise DataError("train_fraction must be in (0, 1)")
    rng = np.random.Generator(np.random.PCG64(seed))

    idx_bb = np.flatnonzero(dataset.kind == KIND_BENIGN_BENIGN)
    idx_aa = np.flatnonzero(dataset.kind == KIND_ADV_ADV)
    idx_ba = np.flatnonzero(dataset.kind == KIND_BENIGN_ADV)
    n_bb_train = int(round(train_fraction * len(idx_bb)))
    n_aa_train = int(round(train_fraction * len(idx_aa)))
    # Forcing the dissimilar count keeps both halves exactly balanced.
    n_ba_train = n_bb_train + n_aa_train

    takes = (
        (idx_bb, n_bb_train),
        (idx_aa, n_aa_train),
        (idx_ba, n_ba_train),
    )
    train_parts, val_parts = [], []
    for idx, n_train in takes:
        if n_train < 1 or n_train >= len(idx):
            raise DataError("dataset too small to stratify at this fraction")
        perm = rng.permutation(idx)
        train_parts.append(perm[:n_train])
        val_parts.append(perm[n_train:])
    train_idx = np.sort(np.concatenate(train_parts))
    val_idx = np.sort(np.concatenate(val_parts))
    return (
        dataset.subset(train_idx, dataset.source_tag + "/train"),
        dataset.subset(val_idx, dataset.source_tag + "/val"),
    )


def save_pairs(dataset: PairDataset, path) -> None:
    """TSV rows (y, kind, vector_a, vector_b) plus a JSON sidecar."""
    with open(path, "w", encoding="utf-8") as handle:
        for i in range(len(dataset)):
            handle.write(
                "%d\t%s\t%s\t%s\n"
                % (
                    dataset.y[i],
                    KIND_NAMES[int(dataset.kind[i])],
                    ",".join(repr(float(v)) for v in dataset.a[i]),
                    ",".join(repr(float(v)) for v in dataset.b[i]),
                )
            )
    sidecar = {"seed": dataset.seed, "source_tag": dataset.source_tag, "n_pairs": len(dataset)}
    with open(str(path) + ".json", "w", encoding="utf-8") as handle:
        json.dump(sidecar, handle, sort_keys=True)
        handle.write("\n")


def load_pairs(path) -> PairDataset:
    rows = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise DataError("pair file line %d is not a 4-column row" % lineno)
            rows.append(parts)
    if not rows:
        raise DataError("pair file is empty")
    try:
        y = np.array([int(r[0]) for r in rows], dtype=np.uint8)
        kind = np.array([KIND_CODES[r[1]] for r in rows], dtype=np.uint8)
        a = np.array([[float(v) for v in r[2].split(",")] for r in rows])
        b = np.array([[float(v) for v in r[3].split(",")] for r in rows])
    except (KeyError, ValueError) as exc:
        raise DataError("unreadable pair file: %s" % exc) from exc

    seed, source_tag = 0, ""
    try:
        with open(str(path) + ".json", "r", encoding="utf-8") as handle:
            sidecar = json.load(handle)
        seed = int(sidecar.get("seed", 0))
        source_tag = sidecar.get("source_tag", "")
    except FileNotFoundError:
        pass
    return PairDataset(a=a, b=b, y=y, kind=kind, source_tag=source_tag, seed=seed)
