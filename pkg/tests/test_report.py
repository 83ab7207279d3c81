"""Evaluation report tests: confusion counts, SNR curves, emission."""

import numpy as np
import pytest

from hisariq.report import (EvalReport, accuracy_by_snr, build_report,
                            confusion_matrix, emit_report, merge_reports,
                            parse_report)


class TestConfusion:
    def test_perfect_predictions_diagonal(self):
        y = np.array([0, 1, 1, 2, 2, 2])
        m = confusion_matrix(y, y, 3)
        assert np.array_equal(m, np.diag([1, 2, 3]))

    def test_single_predicted_class(self):
        y_true = np.array([0, 1, 2, 1])
        m = confusion_matrix(y_true, np.zeros(4, dtype=int), 3)
        assert m[:, 0].tolist() == [1, 2, 1]
        assert m[:, 1:].sum() == 0

    def test_row_sums_are_supports(self):
        rng = np.random.default_rng(0)
        y_true = rng.integers(0, 4, 200)
        y_pred = rng.integers(0, 4, 200)
        m = confusion_matrix(y_true, y_pred, 4)
        assert np.array_equal(m.sum(axis=1), np.bincount(y_true, minlength=4))
        assert m.sum() == 200

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            confusion_matrix([0, 1], [0], 2)

    def test_out_of_range_label(self):
        with pytest.raises(ValueError):
            confusion_matrix([0, 3], [0, 1], 3)


class TestAccuracyBySnr:
    def test_all_correct(self):
        snr = np.repeat(np.arange(-20, 20, 2), 3)
        y = np.zeros(snr.size, dtype=int)
        acc = accuracy_by_snr(snr, y, y)
        assert len(acc) == 20
        assert all(v == 1.0 for v in acc.values())

    def test_chance_level_band(self):
        # Random 5-class predictions: accuracy near 0.2 per bin at n = 1e4.
        rng = np.random.default_rng(1)
        n = 10 ** 4
        snr = np.zeros(n, dtype=int)
        y_true = rng.integers(0, 5, n)
        y_pred = rng.integers(0, 5, n)
        acc = accuracy_by_snr(snr, y_true, y_pred)
        assert 0.17 <= acc[0] <= 0.23

    def test_single_bin(self):
        acc = accuracy_by_snr([4, 4], [1, 0], [1, 1])
        assert acc == {4: 0.5}

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            accuracy_by_snr([], [], [])


class TestReport:
    def build(self, seed=0, classes=("a", "b", "c")):
        rng = np.random.default_rng(seed)
        snr = rng.choice([-10, 0, 10], 300)
        y_true = rng.integers(0, len(classes), 300)
        y_pred = rng.integers(0, len(classes), 300)
        return build_report(classes, snr, y_true, y_pred, label_mode="family",
                            dataset_hash="d" * 8, checkpoint_hash="c" * 8)

    def test_trace_identity(self):
        report = self.build()
        for snr, acc in report.accuracy().items():
            m = report.confusion[snr]
            assert acc == pytest.approx(np.trace(m) / m.sum(), abs=1e-12)

    def test_merge_is_elementwise_sum(self):
        a, b = self.build(seed=1), self.build(seed=2)
        merged = merge_reports(a, b)
        for snr in merged.confusion:
            expected = (a.confusion.get(snr, 0) + b.confusion.get(snr, 0))
            assert np.array_equal(merged.confusion[snr], expected)

    @pytest.mark.parametrize("fmt", ["text-table", "structured-text"])
    def test_emit_parse_round_trip(self, fmt, tmp_path):
        report = self.build(seed=3)
        path = tmp_path / "report.txt"
        emit_report(report, path, fmt=fmt)
        loaded = parse_report(path)
        assert loaded.class_names == report.class_names
        assert loaded.label_mode == report.label_mode
        assert set(loaded.confusion) == set(report.confusion)
        for snr in report.confusion:
            assert np.array_equal(loaded.confusion[snr], report.confusion[snr])

    def test_emission_is_byte_deterministic(self, tmp_path):
        report = self.build(seed=4)
        emit_report(report, tmp_path / "a.txt")
        emit_report(report, tmp_path / "b.txt")
        assert (tmp_path / "a.txt").read_bytes() == (tmp_path / "b.txt").read_bytes()

    def test_header_names_hashes_and_mode(self, tmp_path):
        report = self.build(seed=5)
        emit_report(report, tmp_path / "r.txt")
        text = (tmp_path / "r.txt").read_text()
        assert "# dataset_hash=dddddddd" in text
        assert "# checkpoint_hash=cccccccc" in text
        assert "# label_mode=family" in text

    def test_twenty_snr_rows(self, tmp_path):
        rng = np.random.default_rng(6)
        snr = np.repeat(np.arange(-20, 20, 2), 5)
        y = rng.integers(0, 3, snr.size)
        report = build_report(("a", "b", "c"), snr, y, y)
        emit_report(report, tmp_path / "r.txt")
        rows = [l for l in (tmp_path / "r.txt").read_text().splitlines()
                if l and l[0] in "-0123456789"]
        assert len(rows) == 20

    def test_absent_class_keeps_zero_support_row(self, tmp_path):
        # Class "c" never appears; its confusion row must still exist.
        report = build_report(("a", "b", "c"), [0, 0], [0, 1], [0, 1])
        emit_report(report, tmp_path / "r.txt")
        loaded = parse_report(tmp_path / "r.txt")
        assert loaded.confusion[0].shape == (3, 3)
        assert loaded.confusion[0][2].sum() == 0
        assert report.support(0).tolist() == [1, 1, 0]

    def test_overall_accuracy(self):
        report = build_report(("a", "b"), [0, 0, 2, 2], [0, 1, 0, 1],
                              [0, 0, 1, 1])
        assert report.overall_accuracy() == pytest.approx(0.5)
