import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fluency.classifiers import ModelSpec
from fluency.errors import ConfigError, EvalError, TrainError
from fluency.evaluation import (ConfusionMatrix, accuracy, compare_extras, confusion, run_protocol,
                                split_train_test, sweep_nmel)

FAST = [ModelSpec("svm"), ModelSpec("rf", trees=15), ModelSpec("mlp", epochs=5, hidden=(16, 16))]


class TestSplit:
    def test_reference_sized_corpus(self):
        s = split_train_test(1424, 0.7, seed=42)
        assert (len(s.train), len(s.test)) == (997, 427)

    def test_half_of_ten(self):
        s = split_train_test(10, 0.5, seed=0)
        assert (len(s.train), len(s.test)) == (5, 5)

    def test_same_seed_same_split(self):
        a, b = split_train_test(300, seed=9), split_train_test(300, seed=9)
        assert np.array_equal(a.train, b.train) and np.array_equal(a.test, b.test)

    @settings(max_examples=100)
    @given(n=st.integers(10, 2000), seed=st.integers(0, 2**32 - 1),
           ratio=st.floats(0.05, 0.95))
    def test_partition(self, n, seed, ratio):
        s = split_train_test(n, ratio, seed)
        assert len(s.train) == round(ratio * n)
        assert np.intersect1d(s.train, s.test).size == 0
        assert np.array_equal(np.sort(np.concatenate([s.train, s.test])), np.arange(n))

    def test_shuffle_is_a_seeded_permutation(self):
        s = split_train_test(50, 0.7, seed=3)
        perm = np.random.default_rng(3).permutation(50)
        assert np.array_equal(s.train, np.sort(perm[:35]))

    @settings(max_examples=50, deadline=None)
    @given(counts=st.lists(st.integers(1, 300), min_size=3, max_size=3),
           seed=st.integers(0, 1000), ratio=st.floats(0.1, 0.9))
    def test_stratified_proportions(self, counts, seed, ratio):
        labels = np.repeat([0, 1, 2], counts)
        if labels.size < 10:
            return
        s = split_train_test(labels.size, ratio, seed, stratified=True, labels=labels)
        assert len(s.train) == round(ratio * labels.size)
        for c, n_c in enumerate(counts):
            got = np.count_nonzero(labels[s.train] == c)
            assert abs(got - ratio * n_c) <= 1 + 1e-9

    @pytest.mark.parametrize("ratio", [0.0, 1.0, -0.1, 1.5])
    def test_bad_ratio(self, ratio):
        with pytest.raises(ConfigError):
            split_train_test(100, ratio)

    def test_too_small(self):
        with pytest.raises(EvalError):
            split_train_test(9)


class TestScores:
    def test_accuracy_extremes(self):
        assert accuracy([0, 1, 2], [0, 1, 2]) == 1.0
        assert accuracy([1, 2, 0], [0, 1, 2]) == 0.0

    def test_accuracy_at_reference_scale(self):
        actual = np.zeros(498, dtype=int)
        pred = actual.copy()
        pred[:27] = 1
        assert accuracy(pred, actual) == pytest.approx(0.9458, abs=5e-5)

    def test_length_mismatch(self):
        with pytest.raises(EvalError):
            accuracy([0, 1], [0])

    def test_confusion_cells(self):
        assert np.array_equal(confusion([0, 1, 2], [0, 1, 2]).counts, np.eye(3, dtype=int))
        c = confusion([2], [0]).counts
        assert c[0, 2] == 1 and c.sum() == 1

    @settings(max_examples=500)
    @given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2)), min_size=1, max_size=60))
    def test_trace_equals_accuracy(self, pairs):
        pred, actual = map(np.array, zip(*pairs))
        cm = confusion(pred, actual)
        assert cm.accuracy == accuracy(pred, actual)
        assert np.array_equal(cm.class_totals(), np.bincount(actual, minlength=3))

    def test_csv_round_trip(self, tmp_path):
        cm = confusion([0, 1, 1, 2, 2, 2], [0, 1, 2, 2, 1, 0])
        cm.to_csv(tmp_path / "c.csv")
        rows = list(csv.reader(open(tmp_path / "c.csv")))
        assert rows[0] == ["true\\predicted", "Low", "Intermediate", "High"]
        assert [r[0] for r in rows[1:]] == ["Low", "Intermediate", "High"]
        assert np.array_equal(ConfusionMatrix.from_csv(tmp_path / "c.csv").counts, cm.counts)


class TestProtocol:
    def test_sweep_shape_and_consistency(self, small_dataset):
        r = sweep_nmel(small_dataset, [5, 10, 12, 20], FAST, seed=3)
        assert len(r.cells) == 12
        split = split_train_test(small_dataset, 0.7, 3)
        for c in r.cells:
            assert 0.0 <= c.accuracy <= 1.0
            assert np.array_equal(c.confusion.class_totals(),
                                  np.bincount(small_dataset.y[split.test], minlength=3))
            assert c.confusion.accuracy == c.accuracy

    def test_single_column_sweep(self, small_dataset):
        r = sweep_nmel(small_dataset, [20], FAST[:1], seed=0)
        assert len(r.cells) == 1 and r.cells[0].n_mfcc == 20

    def test_compare_baseline_equals_sweep_column(self, small_dataset):
        s = sweep_nmel(small_dataset, [20], FAST, seed=5)
        c = compare_extras(small_dataset, 20, FAST, seed=5)
        for kind in ("svm", "rf", "mlp"):
            assert c.cell(kind, 20, False).accuracy == s.cell(kind, 20, False).accuracy
            assert sum(cell.model == kind for cell in c.cells) == 2

    def test_reports_identical_across_runs_and_jobs(self, small_dataset, tmp_path):
        a = run_protocol(small_dataset, [(5, False), (20, True)], FAST, seed=1)
        b = run_protocol(small_dataset, [(5, False), (20, True)], FAST, seed=1, jobs=3)
        a.write(tmp_path / "a", bars=True)
        b.write(tmp_path / "b", bars=True)
        for name in ["report.csv", "bars.csv", "confusion_svm.csv", "confusion_rf_mfcc5.csv"]:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_repeats_report_mean_and_std(self, small_dataset):
        r = run_protocol(small_dataset, [(20, True)], FAST[:1], seed=0, repeats=3)
        c = r.cells[0]
        singles = [run_protocol(small_dataset, [(20, True)], FAST[:1], seed=k).cells[0].accuracy
                   for k in range(3)]
        assert c.accuracies == singles
        assert c.accuracy == pytest.approx(np.mean(singles))

    def test_errors_carry_cell_context(self, small_dataset):
        bad = small_dataset.subset(np.flatnonzero(small_dataset.y == 0))
        with pytest.raises(TrainError, match="model=svm n_mfcc=5"):
            run_protocol(bad, [(5, False)], FAST[:1])

    def test_reference_split_note(self, small_dataset):
        rows = np.resize(np.arange(len(small_dataset)), 1424)
        big = small_dataset.subset(rows)
        r = run_protocol(big, [(5, False)], [ModelSpec("svm")], seed=0)
        assert r.split_sizes == (997, 427)
        assert any("926/498" in n for n in r.notes)
