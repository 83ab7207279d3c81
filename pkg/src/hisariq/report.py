"""Evaluation surfaces: accuracy vs SNR and per-SNR confusion matrices.

Raw integer counts are the stored truth; normalized views are derived at
emission time. Two byte-deterministic text formats are supported:
'text-table' (comma-separated, plot-ready) and 'structured-text'
(key=value lines). Both round-trip exactly through parse_report.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


def confusion_matrix(y_true, y_pred, n_classes: int) -> np.ndarray:
    """Counts matrix; rows are true classes, columns predictions."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError(
            f"label vectors differ in length: {y_true.shape} vs {y_pred.shape}")
    if y_true.size and (min(y_true.min(), y_pred.min()) < 0
                        or max(y_true.max(), y_pred.max()) >= n_classes):
        raise ValueError(f"labels outside [0, {n_classes})")
    matrix = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(matrix, (y_true, y_pred), 1)
    return matrix


def accuracy_by_snr(snr_db, y_true, y_pred) -> dict:
    """Per-SNR-bin accuracy; bins with no support are omitted."""
    snr_db = np.asarray(snr_db, dtype=np.int64)
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if snr_db.size == 0:
        raise ValueError("no records to evaluate")
    out = {}
    for snr in sorted(set(snr_db.tolist())):
        sel = snr_db == snr
        out[int(snr)] = float((y_true[sel] == y_pred[sel]).mean())
    return out


@dataclass
class EvalReport:
    class_names: tuple
    label_mode: str = ""
    dataset_hash: str = ""
    checkpoint_hash: str = ""
    confusion: dict = field(default_factory=dict)  # snr -> int64 matrix

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def accuracy(self) -> dict:
        return {snr: float(np.trace(m) / m.sum())
                for snr, m in sorted(self.confusion.items()) if m.sum()}

    def overall_accuracy(self) -> float:
        total = sum(m.sum() for m in self.confusion.values())
        hits = sum(np.trace(m) for m in self.confusion.values())
        return float(hits / total) if total else 0.0

    def support(self, snr: int) -> np.ndarray:
        return self.confusion[snr].sum(axis=1)


def build_report(class_names, snr_db, y_true, y_pred, label_mode="",
                 dataset_hash="", checkpoint_hash="") -> EvalReport:
    snr_db = np.asarray(snr_db, dtype=np.int64)
    report = EvalReport(class_names=tuple(class_names), label_mode=label_mode,
                        dataset_hash=dataset_hash,
                        checkpoint_hash=checkpoint_hash)
    for snr in sorted(set(snr_db.tolist())):
        sel = snr_db == snr
        report.confusion[int(snr)] = confusion_matrix(
            np.asarray(y_true)[sel], np.asarray(y_pred)[sel],
            len(report.class_names))
    return report


def merge_reports(a: EvalReport, b: EvalReport) -> EvalReport:
    """Elementwise-sum two reports over disjoint evaluation batches."""
    if a.class_names != b.class_names:
        raise ValueError("cannot merge reports with different class names")
    merged = EvalReport(class_names=a.class_names, label_mode=a.label_mode,
                        dataset_hash=a.dataset_hash,
                        checkpoint_hash=a.checkpoint_hash)
    for snr in sorted(set(a.confusion) | set(b.confusion)):
        zero = np.zeros((a.n_classes, a.n_classes), dtype=np.int64)
        merged.confusion[snr] = (a.confusion.get(snr, zero)
                                 + b.confusion.get(snr, zero))
    return merged


def _header_lines(report: EvalReport):
    return [
        f"# dataset_hash={report.dataset_hash}",
        f"# checkpoint_hash={report.checkpoint_hash}",
        f"# label_mode={report.label_mode}",
        "# classes=" + ",".join(report.class_names),
    ]


def emit_report(report: EvalReport, path, fmt: str = "text-table") -> None:
    """Serialize deterministically; counts survive a parse round trip."""
    lines = _header_lines(report)
    if fmt == "text-table":
        lines.append("snr_db,accuracy")
        for snr, acc in report.accuracy().items():
            lines.append(f"{snr},{acc!r}")
        lines.append(f"overall,{report.overall_accuracy()!r}")
        for snr in sorted(report.confusion):
            lines.append(f"confusion,snr_db={snr}")
            lines.append("true\\pred," + ",".join(report.class_names))
            for i, name in enumerate(report.class_names):
                row = report.confusion[snr][i]
                lines.append(name + "," + ",".join(str(int(v)) for v in row))
    elif fmt == "structured-text":
        lines.append(f"label_mode={report.label_mode}")
        lines.append("classes=" + ",".join(report.class_names))
        for snr in sorted(report.confusion):
            matrix = report.confusion[snr]
            for i in range(report.n_classes):
                for j in range(report.n_classes):
                    lines.append(f"confusion.{snr}.{i}.{j}={int(matrix[i, j])}")
    else:
        raise ValueError(
            f"format must be 'text-table' or 'structured-text', got {fmt!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def parse_report(path) -> EvalReport:
    """Read either emission format back into raw counts."""
    text = Path(path).read_text(encoding="utf-8")
    meta = {}
    for line in text.splitlines():
        if line.startswith("# ") and "=" in line:
            key, value = line[2:].split("=", 1)
            meta[key] = value
    class_names = tuple(n for n in meta.get("classes", "").split(",") if n)
    report = EvalReport(class_names=class_names,
                        label_mode=meta.get("label_mode", ""),
                        dataset_hash=meta.get("dataset_hash", ""),
                        checkpoint_hash=meta.get("checkpoint_hash", ""))
    n = report.n_classes
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    i = 0
    while i < len(lines):
        line = lines[i]
        if line.startswith("confusion,snr_db="):
            snr = int(line.split("=", 1)[1])
            matrix = np.zeros((n, n), dtype=np.int64)
            for r in range(n):
                cells = lines[i + 2 + r].split(",")
                matrix[r] = [int(v) for v in cells[1:n + 1]]
            report.confusion[snr] = matrix
            i += 2 + n
        elif line.startswith("confusion.") and "=" in line:
            key, value = line.split("=", 1)
            _, snr, r, c = key.split(".")
            snr = int(snr)
            if snr not in report.confusion:
                report.confusion[snr] = np.zeros((n, n), dtype=np.int64)
            report.confusion[snr][int(r), int(c)] = int(value)
            i += 1
        else:
            i += 1
    return report
