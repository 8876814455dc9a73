import logging

import numpy as np
import pytest

from provsem.detect import (
    ReferenceSet,
    calibrate_threshold,
    classify_event,
    classify_pair,
)
from provsem.errors import DataError, UncalibratedModelError
from provsem.pairs import (
    KIND_ADV_ADV,
    KIND_BENIGN_ADV,
    KIND_BENIGN_BENIGN,
    PairDataset,
    build_pairs,
)
from provsem.seeding import substream
from provsem.siamese import (
    SiameseModel,
    SubnetParams,
    TrainConfig,
    pair_distance,
    train,
)


def passthrough_model(threshold=None):
    """1-d model computing |a - b| for non-negative scalar inputs."""
    one = np.ones((1, 1))
    zero = np.zeros(1)
    params = SubnetParams(w1=one.copy(), b1=zero.copy(), w2=one.copy(), b2=zero.copy(),
                          w3=one.copy(), b3=zero.copy())
    return SiameseModel(params=params, margin=1.0, threshold=threshold)


def scalar_pairs(values, y, kinds):
    a = np.zeros((len(values), 1))
    b = np.array(values, dtype=np.float64).reshape(-1, 1)
    return PairDataset(
        a=a, b=b, y=np.array(y, dtype=np.uint8), kind=np.array(kinds, dtype=np.uint8)
    )


class TestCalibrateThreshold:
    def test_perfectly_separated(self):
        # distances {0.1, 0.2 | 1.8, 1.9}: the separating midpoint is 1.0
        val = scalar_pairs(
            [0.1, 0.2, 1.8, 1.9],
            [0, 0, 1, 1],
            [KIND_BENIGN_BENIGN, KIND_ADV_ADV, KIND_BENIGN_ADV, KIND_BENIGN_ADV],
        )
        model = passthrough_model()
        assert calibrate_threshold(model, val) == pytest.approx(1.0)

    def test_all_equal_distances_rejected(self):
        val = scalar_pairs(
            [0.5, 0.5, 0.5, 0.5],
            [0, 0, 1, 1],
            [KIND_BENIGN_BENIGN, KIND_ADV_ADV, KIND_BENIGN_ADV, KIND_BENIGN_ADV],
        )
        with pytest.raises(DataError, match="equidistant"):
            calibrate_threshold(passthrough_model(), val)

    def test_single_class_rejected(self):
        val = scalar_pairs(
            [0.1, 0.2, 1.8, 1.9],
            [0, 0, 1, 1],
            [KIND_BENIGN_BENIGN, KIND_ADV_ADV, KIND_BENIGN_ADV, KIND_BENIGN_ADV],
        )
        # degrade to a single class after construction-time validation
        val.y = np.zeros(4, dtype=np.uint8)
        with pytest.raises(DataError, match="both pair classes"):
            calibrate_threshold(passthrough_model(), val)

    def test_ties_take_smaller_threshold(self):
        # both midpoints of the gap region achieve F1=1; the smaller wins
        val = scalar_pairs(
            [0.1, 0.2, 0.4, 1.6, 1.8, 2.0],
            [0, 0, 0, 1, 1, 1],
            [KIND_BENIGN_BENIGN, KIND_BENIGN_BENIGN, KIND_ADV_ADV,
             KIND_BENIGN_ADV, KIND_BENIGN_ADV, KIND_BENIGN_ADV],
        )
        tau = calibrate_threshold(passthrough_model(), val)
        assert tau == pytest.approx(1.0)  # (0.4 + 1.6) / 2, the first optimum

    def test_matches_exhaustive_sweep_oracle(self):
        rng = substream(11, "sweep")
        benign = rng.normal(size=(60, 10)) * 0.5
        adv = rng.normal(size=(60, 10)) * 0.5 + 1.5
        dataset = build_pairs(benign, adv, 120, seed=4)
        model, _ = train(dataset, TrainConfig(epochs=8, batch_size=32, seed=6, hidden_dim=16))
        tau = calibrate_threshold(model, dataset)

        distances = pair_distance(model.params, dataset.a, dataset.b, model.final_activation)
        y = dataset.y.astype(bool)

        def confusion(threshold):
            pred = distances > threshold
            return (
                int((pred & y).sum()),
                int((pred & ~y).sum()),
                int((~pred & y).sum()),
                int((~pred & ~y).sum()),
            )

        def f1_of(c):
            tp, fp, fn, _ = c
            return 2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0

        sorted_d = np.sort(distances)
        candidates = np.unique((sorted_d[:-1] + sorted_d[1:]) / 2)
        best = max(candidates, key=lambda t: (f1_of(confusion(t)), -t))
        got = confusion(tau)
        want = confusion(best)
        assert f1_of(got) == pytest.approx(f1_of(want))
        assert all(abs(g - w) <= 1 for g, w in zip(got, want))


class TestClassifyPair:
    def test_equal_inputs_similar(self):
        model = passthrough_model(threshold=0.0)
        assert classify_pair(model, np.array([1.0]), np.array([1.0])) == "similar"

    def test_boundary_counts_as_similar(self):
        model = passthrough_model(threshold=0.5)
        assert classify_pair(model, np.array([1.0]), np.array([0.5])) == "similar"
        assert classify_pair(model, np.array([1.0]), np.array([0.49])) == "dissimilar"

    def test_uncalibrated_rejected(self):
        model = passthrough_model(threshold=None)
        with pytest.raises(UncalibratedModelError):
            classify_pair(model, np.array([1.0]), np.array([0.0]))

    def test_monotone_in_threshold(self):
        rng = substream(12, "mono")
        a = rng.uniform(0, 3, size=(50, 1))
        b = rng.uniform(0, 3, size=(50, 1))
        low = passthrough_model(threshold=0.3)
        high = passthrough_model(threshold=1.5)
        for x, z in zip(a, b):
            if classify_pair(high, x, z) == "dissimilar":
                assert classify_pair(low, x, z) == "dissimilar"


class TestClassifyEvent:
    def refs(self, k=1):
        return ReferenceSet(
            benign=np.array([[0.0], [0.2]]),
            adversarial=np.array([[5.0], [5.2]]),
            k=k,
        )

    def test_exact_adversarial_match(self):
        verdict = classify_event(passthrough_model(0.5), self.refs(k=1), np.array([5.0]))
        assert verdict.decision == "adversarial"
        assert verdict.score < 0
        assert verdict.adversarial_refs == ("a0",)

    def test_equidistant_tie_goes_benign(self):
        refs = ReferenceSet(benign=np.array([[1.0]]), adversarial=np.array([[3.0]]), k=1)
        verdict = classify_event(passthrough_model(0.5), refs, np.array([2.0]))
        assert verdict.decision == "benign"
        assert verdict.score == 0.0

    def test_duplicates_beyond_rank_k_ignored(self):
        model = passthrough_model(0.5)
        base = self.refs(k=2)
        padded = ReferenceSet(
            benign=np.concatenate([base.benign, np.array([[9.0]] * 5)]),
            adversarial=np.concatenate([base.adversarial, np.array([[9.5]] * 5)]),
            k=2,
        )
        x = np.array([0.3])
        v1 = classify_event(model, base, x)
        v2 = classify_event(model, padded, x)
        assert v1.decision == v2.decision
        assert v1.score == pytest.approx(v2.score)

    def test_fewer_refs_than_k_warns(self, caplog):
        refs = ReferenceSet(benign=np.array([[0.0]]), adversarial=np.array([[4.0]]), k=5)
        with caplog.at_level(logging.WARNING):
            verdict = classify_event(passthrough_model(0.5), refs, np.array([0.1]))
        assert verdict.decision == "benign"
        assert any("smaller than k" in r.message for r in caplog.records)

    def test_deterministic(self):
        model = passthrough_model(0.5)
        refs = self.refs(k=2)
        x = np.array([1.0])
        first = classify_event(model, refs, x)
        second = classify_event(model, refs, x)
        assert first == second

    def test_reference_validation(self):
        with pytest.raises(DataError):
            ReferenceSet(benign=np.zeros((0, 1)), adversarial=np.ones((1, 1)))
        with pytest.raises(DataError):
            ReferenceSet(benign=np.zeros((1, 1)), adversarial=np.ones((1, 1)), k=0)
