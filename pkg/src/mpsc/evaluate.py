"""Classification metrics and the model-comparison report.

SUSPICIOUS is the positive class: recall measures the share of
suspicious statements a model catches.  Zero-denominator metrics come
back as 0.0 with the metric name flagged as degenerate so comparison
tables always render.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Sequence

from .corpus import Label


class LengthMismatch(ValueError):
    """Prediction and label lists have different lengths."""


class EmptyInput(ValueError):
    """No predictions to evaluate."""


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


@dataclass(frozen=True)
class MetricsReport:
    model_name: str
    accuracy: float
    precision: float
    recall: float
    f1: float
    matrix: ConfusionMatrix
    degenerate: frozenset[str] = field(default_factory=frozenset)

    def to_dict(self) -> dict:
        return {
            "model": self.model_name,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "matrix": self.matrix.to_dict(),
            "degenerate": sorted(self.degenerate),
        }


def _verdict(prediction) -> Label:
    return Label(getattr(prediction, "verdict", prediction))


def confusion(predictions: Sequence, labels: Sequence[Label]) -> ConfusionMatrix:
    """Count tp/fp/fn/tn with SUSPICIOUS as the positive class.

    ``predictions`` may be Prediction objects (their ``verdict`` is used)
    or plain labels.
    """
    if len(predictions) != len(labels):
        raise LengthMismatch(f"{len(predictions)} predictions vs {len(labels)} labels")
    if not predictions:
        raise EmptyInput("nothing to evaluate")
    tp = fp = fn = tn = 0
    for pred, truth in zip(predictions, labels):
        got = _verdict(pred)
        truth = Label(truth)
        if got is Label.SUSPICIOUS and truth is Label.SUSPICIOUS:
            tp += 1
        elif got is Label.SUSPICIOUS:
            fp += 1
        elif truth is Label.SUSPICIOUS:
            fn += 1
        else:
            tn += 1
    return ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=tn)


def metrics(cm: ConfusionMatrix, model_name: str = "") -> MetricsReport:
    """Accuracy, precision, recall, and F1 from a confusion matrix."""
    if cm.total <= 0:
        raise EmptyInput("confusion matrix is empty")
    degenerate = set()
    accuracy = (cm.tp + cm.tn) / cm.total
    if cm.tp + cm.fp > 0:
        precision = cm.tp / (cm.tp + cm.fp)
    else:
        precision = 0.0
        degenerate.add("precision")
    if cm.tp + cm.fn > 0:
        recall = cm.tp / (cm.tp + cm.fn)
    else:
        recall = 0.0
        degenerate.add("recall")
    if precision + recall > 0:
        f1 = 2.0 * precision * recall / (precision + recall)
    else:
        f1 = 0.0
        degenerate.add("f1")
    return MetricsReport(
        model_name=model_name,
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        f1=f1,
        matrix=cm,
        degenerate=frozenset(degenerate),
    )


def format_percent(value: float) -> str:
    """Render a [0, 1] value as a percentage, 2 decimals, rounding half up."""
    return str((Decimal(repr(value)) * 100).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class ComparisonReport:
    text: str
    data: dict

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2) + "\n"


def comparison_report(reports: Sequence[MetricsReport]) -> ComparisonReport:
    """Format a model-comparison table (text) plus its JSON counterpart.

    Rows keep their given order; percentages show 2 decimals; the JSON
    carries full-precision values and the confusion matrix per row.
    """
    if not reports:
        raise EmptyInput("at least one metrics report is required")
    headers = ["Model", "Accuracy", "Precision", "Recall", "F1-Score"]
    rows = [
        [
            r.model_name,
            format_percent(r.accuracy),
            format_percent(r.precision),
            format_percent(r.recall),
            format_percent(r.f1),
        ]
        for r in reports
    ]
    widths = [max(len(h), *(len(row[i]) for row in rows)) for i, h in enumerate(headers)]
    lines = [
        "  ".join(h.ljust(widths[i]) if i == 0 else h.rjust(widths[i])
                  for i, h in enumerate(headers)),
        "  ".join("-" * w for w in widths),
    ]
    for row in rows:
        lines.append("  ".join(
            cell.ljust(widths[i]) if i == 0 else cell.rjust(widths[i])
            for i, cell in enumerate(row)
        ))
    data = {"rows": [r.to_dict() for r in reports]}
    return ComparisonReport(text="\n".join(lines) + "\n", data=data)
