import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from framedup.errors import LengthMismatch, SchemaError, SingleClass
from framedup.evaluation import (
    ConfusionCounts,
    classify_localization,
    confusion_bar,
    load_manifest,
    mcc,
    roc_auc,
)
from framedup.fine import Interval
from framedup.forgery import ManipulationSpec, TruthMask, apply_duplication

from conftest import noise_clip
from oracles import mcc_direct, pair_count_auc

counts = st.integers(0, 10_000)


def _truth(n=60, start=10, length=12, insert=40):
    return apply_duplication(noise_clip(n, height=2, width=2), ManipulationSpec(start, length, insert))[1]


class TestMCC:
    def test_perfect(self):
        assert mcc(ConfusionCounts(tp=10, tn=10)) == 1.0

    def test_chance(self):
        assert mcc(ConfusionCounts(5, 5, 5, 5)) == 0.0

    def test_hand_case(self):
        value = mcc(ConfusionCounts(tp=6, fp=1, tn=7, fn=2))
        assert value == pytest.approx(40 / np.sqrt(7 * 8 * 8 * 9), abs=1e-15)
        # 40 / sqrt(4032) = 0.629941, i.e. 0.6299 to four places
        assert round(value, 4) == 0.6299

    def test_zero_denominator(self):
        assert mcc(ConfusionCounts(tp=0, fp=0, tn=9, fn=3)) == 0.0
        assert mcc(ConfusionCounts()) == 0.0

    @given(counts, counts, counts, counts)
    def test_direct_formula(self, tp, fp, tn, fn):
        assert abs(mcc(ConfusionCounts(tp, fp, tn, fn)) - mcc_direct(tp, fp, tn, fn)) <= 1e-12

    @given(counts, counts, counts, counts)
    def test_swap_symmetry(self, tp, fp, tn, fn):
        assert mcc(ConfusionCounts(tp, fp, tn, fn)) == pytest.approx(mcc(ConfusionCounts(tn, fn, tp, fp)), abs=1e-15)

    @given(counts, counts, counts, counts)
    def test_bounded(self, tp, fp, tn, fn):
        assert -1.0 - 1e-12 <= mcc(ConfusionCounts(tp, fp, tn, fn)) <= 1.0 + 1e-12


scored_items = st.lists(
    st.tuples(st.integers(-5, 5).map(float), st.booleans()), min_size=2, max_size=50
).filter(lambda xs: any(y for _, y in xs) and not all(y for _, y in xs))


class TestAUC:
    def test_perfect_separation(self):
        assert roc_auc([0.1, 0.2, 0.8, 0.9], [False, False, True, True]).auc == 1.0

    def test_pairs_input(self):
        assert roc_auc([(0.9, True), (0.1, False)]).auc == 1.0

    def test_six_items(self):
        scores = [0.3, 0.7, 0.7, 0.1, 0.5, 0.9]
        labels = [True, False, True, False, False, True]
        assert roc_auc(scores, labels).auc == pair_count_auc(scores, labels)
        # 3 positives x 3 negatives; pairs won: 0.3 beats 0.1; 0.7 beats 0.1, 0.5 and ties 0.7; 0.9 beats all
        assert pair_count_auc(scores, labels) == (1 + 2.5 + 3) / 9

    def test_random_labels(self):
        r = np.random.default_rng(77)
        s = r.normal(size=1000)
        y = r.random(1000) < 0.5
        assert abs(roc_auc(s, y).auc - 0.5) <= 0.05

    def test_single_class(self):
        with pytest.raises(SingleClass):
            roc_auc([1, 2, 3], [True, True, True])

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            roc_auc([1, 2, 3], [True, False])

    def test_infinite_scores(self):
        s = [-np.inf, -np.inf, -1e-6, -2e-6]
        assert roc_auc(s, [False, False, True, True]).auc == 1.0

    @given(scored_items)
    def test_pair_count_oracle(self, items):
        s, y = zip(*items)
        assert roc_auc(s, y).auc == pair_count_auc(s, y)

    @given(scored_items)
    def test_monotone_transform(self, items):
        s, y = zip(*items)
        s = np.array(s)
        base = roc_auc(s, y).auc
        assert roc_auc(np.exp(s / 3), y).auc == base
        assert roc_auc(3 * s - 7, y).auc == base
        assert roc_auc(-s, y).auc == pytest.approx(1 - base, abs=1e-12)

    @given(scored_items)
    def test_curve_shape(self, items):
        s, y = zip(*items)
        curve = roc_auc(s, y)
        assert np.all(np.diff(curve.fpr) >= 0) and np.all(np.diff(curve.tpr) >= 0)
        assert (curve.fpr[0], curve.tpr[0]) == (0.0, 0.0)
        assert (curve.fpr[-1], curve.tpr[-1]) == (1.0, 1.0)
        area = float(np.sum(np.diff(curve.fpr) * (curve.tpr[1:] + curve.tpr[:-1]) / 2))
        assert area == pytest.approx(curve.auc, abs=1e-12)
        assert len(curve.points) == len(curve.thresholds)


class TestConfusionBar:
    def test_exact_prediction(self):
        truth = _truth()
        c = confusion_bar(truth, [truth.duplicated_range]).counts
        assert (c.fn, c.fp, c.tp) == (0, 0, 12)

    def test_missing_right_end(self):
        truth = _truth()
        d = truth.duplicated_range
        c = confusion_bar(truth, [Interval(d.start, d.end - 4)]).counts
        assert c.fn == 4 and c.fp == 0 and c.tp == 8

    def test_empty_prediction(self):
        truth = _truth()
        c = confusion_bar(truth, []).counts
        assert c.tp == 0 and c.fn == 12 and c.fp == 0

    def test_selected_frames_count_negative(self):
        truth = _truth()
        c = confusion_bar(truth, [truth.selected_range]).counts
        assert c.fp == 12 and c.fn == 12

    def test_optout_and_total(self):
        truth = _truth()
        c = confusion_bar(truth, [Interval(0, 5)], optout=[Interval(70, 71)]).counts
        assert c.optout == 2
        assert c.total == len(truth.labels)

    def test_mask_input(self):
        truth = _truth()
        mask = truth.labels == 2
        assert confusion_bar(truth, mask).counts.tp == 12
        with pytest.raises(LengthMismatch):
            confusion_bar(truth, mask[:-1])
        with pytest.raises(LengthMismatch):
            confusion_bar(truth, [Interval(60, 200)])

    @settings(max_examples=40)
    @given(st.integers(0, 71), st.integers(0, 71))
    def test_counts_partition(self, a, b):
        truth = _truth()
        lo, hi = min(a, b), max(a, b)
        c = confusion_bar(truth, [Interval(lo, hi)]).counts
        assert c.total == 72
        assert c.tp + c.fp == hi - lo + 1

    def test_renderings(self):
        truth = _truth()
        bar = confusion_bar(truth, [Interval(40, 47), Interval(0, 1)], optout=[Interval(70, 71)])
        rows = bar.text().splitlines()
        assert len(rows) == 3 and all(len(r) == len(rows[0]) for r in rows)
        svg = bar.svg()
        for colour in ("#ffffff", "#1f4fd8", "#d82020", "#1fa83a", "url(#optout)"):
            assert colour in svg


class TestCorpusHelpers:
    def test_classify(self):
        truth = _truth()
        assert classify_localization(truth, truth.duplicated_range) == "correct"
        assert classify_localization(truth, truth.selected_range) == "incorrect"
        assert classify_localization(truth, None) == "incorrect"

    def test_zero_gap_is_ambiguous(self):
        truth = _truth(start=10, length=12, insert=22)
        assert truth.gap == 0
        assert classify_localization(truth, truth.duplicated_range) == "ambiguous"

    def test_schema_error(self, tmp_path):
        (tmp_path / "m.json").write_text(json.dumps({"items": [{"id": "a", "path": "x"}]}))
        with pytest.raises(SchemaError):
            load_manifest(tmp_path / "m.json")
        (tmp_path / "n.json").write_text("not json")
        with pytest.raises(SchemaError):
            load_manifest(tmp_path / "n.json")

    def test_truth_mask_clean(self):
        assert TruthMask.clean(5).gap is None
