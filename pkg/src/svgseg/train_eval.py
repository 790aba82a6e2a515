"""Evaluation metrics, dataset splitting, and prediction export.

Reports follow the usual classification-report layout: one row per
category with precision, recall, F1 and support, then accuracy, macro and
support-weighted averages. Zero-denominator metrics are defined as 0, so
absent categories print as 0.00/0.00/0.00 with support 0.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional, Sequence

import numpy as np

from .gat_network import ArcSet, GatModel, model_forward
from .graph_builder import DrawingGraph
from .svg_ingest import NormalizedPath, StyleAttributes, write_flat_svg


class LengthMismatch(ValueError):
    """y_true and y_pred have different lengths."""


class EmptyReport(ValueError):
    """No samples to report on."""


@dataclass
class ConfusionAccumulator:
    """Per-category TP/FP/FN tallies; merges associatively."""

    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    total: int = 0

    @staticmethod
    def empty(n_categories: int) -> "ConfusionAccumulator":
        z = np.zeros(n_categories, dtype=np.int64)
        return ConfusionAccumulator(z.copy(), z.copy(), z.copy(), 0)

    def add(self, y_true, y_pred):
        y_true = np.asarray(y_true, dtype=int)
        y_pred = np.asarray(y_pred, dtype=int)
        if y_true.shape != y_pred.shape:
            raise LengthMismatch(f"{y_true.shape} vs {y_pred.shape}")
        n = len(self.tp)
        if len(y_true) and (y_true.min() < 0 or y_true.max() >= n
                            or y_pred.min() < 0 or y_pred.max() >= n):
            raise ValueError("category id out of range")
        hit = y_true == y_pred
        np.add.at(self.tp, y_true[hit], 1)
        np.add.at(self.fp, y_pred[~hit], 1)
        np.add.at(self.fn, y_true[~hit], 1)
        self.total += len(y_true)
        return self

    def merge(self, other: "ConfusionAccumulator") -> "ConfusionAccumulator":
        return ConfusionAccumulator(self.tp + other.tp, self.fp + other.fp,
                                    self.fn + other.fn, self.total + other.total)


@dataclass
class Report:
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    accuracy: float
    total: int
    names: Optional[list[str]] = None

    @property
    def macro_precision(self) -> float:
        return float(self.precision.mean())

    @property
    def macro_recall(self) -> float:
        return float(self.recall.mean())

    @property
    def macro_f1(self) -> float:
        return float(self.f1.mean())

    def _weighted(self, values: np.ndarray) -> float:
        total = self.support.sum()
        if total == 0:
            return 0.0
        return float((values * self.support).sum() / total)

    @property
    def weighted_precision(self) -> float:
        return self._weighted(self.precision)

    @property
    def weighted_recall(self) -> float:
        return self._weighted(self.recall)

    @property
    def weighted_f1(self) -> float:
        return self._weighted(self.f1)

    def to_dict(self) -> dict:
        rows = []
        for c in range(len(self.precision)):
            rows.append({
                "category": c,
                "name": self.names[c] if self.names else str(c),
                "precision": float(self.precision[c]),
                "recall": float(self.recall[c]),
                "f1": float(self.f1[c]),
                "support": int(self.support[c]),
            })
        return {
            "categories": rows,
            "accuracy": self.accuracy,
            "macro": {"precision": self.macro_precision, "recall": self.macro_recall,
                      "f1": self.macro_f1},
            "weighted": {"precision": self.weighted_precision,
                         "recall": self.weighted_recall, "f1": self.weighted_f1},
            "total": self.total,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def report_from_accumulator(acc: ConfusionAccumulator,
                            names: Optional[Sequence[str]] = None) -> Report:
    if acc.total == 0:
        raise EmptyReport("no samples")
    tp, fp, fn = acc.tp.astype(float), acc.fp.astype(float), acc.fn.astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(tp + fp > 0, tp / np.maximum(tp + fp, 1), 0.0)
        recall = np.where(tp + fn > 0, tp / np.maximum(tp + fn, 1), 0.0)
        pr = precision + recall
        f1 = np.where(pr > 0, 2 * precision * recall / np.maximum(pr, 1e-300), 0.0)
    support = (acc.tp + acc.fn).astype(np.int64)
    accuracy = float(acc.tp.sum() / acc.total)
    return Report(precision, recall, f1, support, accuracy, acc.total,
                  list(names) if names else None)


def classification_report(y_true, y_pred, n_categories: int,
                          names: Optional[Sequence[str]] = None) -> Report:
    """Per-category precision/recall/F1/support plus accuracy and macro and
    support-weighted averages."""
    acc = ConfusionAccumulator.empty(n_categories).add(y_true, y_pred)
    return report_from_accumulator(acc, names)


def weighted_f1(report: Report) -> float:
    """Support-weighted mean of per-category F1 scores."""
    if report.total == 0:
        raise EmptyReport("no samples")
    return report.weighted_f1


def report_to_text(report: Report) -> str:
    """Aligned text table: category rows then accuracy / macro / weighted."""
    names = report.names or [str(c) for c in range(len(report.precision))]
    width = max(12, max(len(n) for n in names) + 2)
    header = (f"{'Class':<{width}}{'Precision':>10}{'Recall':>10}"
              f"{'F1-score':>10}{'Support':>10}")
    lines = [header, "-" * len(header)]
    for c, name in enumerate(names):
        lines.append(f"{name:<{width}}{report.precision[c]:>10.2f}"
                     f"{report.recall[c]:>10.2f}{report.f1[c]:>10.2f}"
                     f"{report.support[c]:>10d}")
    lines.append("-" * len(header))
    lines.append(f"{'accuracy':<{width}}{'':>10}{'':>10}"
                 f"{report.accuracy:>10.2f}{report.total:>10d}")
    lines.append(f"{'macro avg':<{width}}{report.macro_precision:>10.2f}"
                 f"{report.macro_recall:>10.2f}{report.macro_f1:>10.2f}"
                 f"{report.total:>10d}")
    lines.append(f"{'weighted avg':<{width}}{report.weighted_precision:>10.2f}"
                 f"{report.weighted_recall:>10.2f}{report.weighted_f1:>10.2f}"
                 f"{report.total:>10d}")
    return "\n".join(lines) + "\n"


def split_dataset(drawing_ids: Sequence[str], ratios: tuple[float, float, float],
                  seed: int):
    """Shuffle drawings and split at drawing granularity.

    Counts follow the ratios by largest remainder, so exact fractions give
    exact counts. Returns (train, val, test) id lists.
    """
    if not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    ids = sorted(drawing_ids)
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(ids))
    shuffled = [ids[i] for i in order]
    n = len(ids)
    raw = [r * n for r in ratios]
    counts = [int(math.floor(x)) for x in raw]
    remainders = sorted(range(3), key=lambda i: (raw[i] - counts[i], -i),
                        reverse=True)
    for i in remainders[: n - sum(counts)]:
        counts[i] += 1
    a, b = counts[0], counts[0] + counts[1]
    return shuffled[:a], shuffled[a:b], shuffled[b:]


def predict_labels(model: GatModel, graph: DrawingGraph,
                   arcs: Optional[ArcSet] = None) -> np.ndarray:
    """Argmax prediction per head: (V, 3) label triples."""
    trace = model_forward(model, graph, arcs)
    return np.column_stack([p.argmax(axis=1) for p in trace.head_probs])


def evaluate(model: GatModel, graphs: Sequence[DrawingGraph], level: int,
             names: Optional[Sequence[str]] = None) -> Report:
    """Classification report at hierarchy level 1, 2 or 3 over a labeled
    dataset. Drawings accumulate independently and merge in sorted order."""
    if level not in (1, 2, 3):
        raise ValueError("level must be 1, 2 or 3")
    k = level - 1
    acc = ConfusionAccumulator.empty(model.level_sizes[k])
    for g in sorted(graphs, key=lambda g: g.drawing_id):
        if g.labels is None:
            raise ValueError(f"{g.drawing_id}: unlabeled drawing")
        pred = predict_labels(model, g)
        acc.add(g.labels[:, k], pred[:, k])
    return report_from_accumulator(acc, names)


# --- prediction export -------------------------------------------------------

def load_palette() -> list[tuple[float, float, float]]:
    """Fixed category palette shipped with the package (hex per line)."""
    text = resources.files("svgseg.data").joinpath("palette.txt") \
        .read_text(encoding="utf-8")
    colors = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        colors.append(tuple(int(line[i:i + 2], 16) / 255.0 for i in (0, 2, 4)))
    return colors


def recolored_svg(paths: Sequence[NormalizedPath], categories: Sequence[int],
                  viewbox=None) -> str:
    """The input drawing with each path's stroke replaced by its predicted
    category color, for side-by-side visual comparison."""
    palette = load_palette()
    out = []
    for p, cat in zip(paths, categories):
        color = palette[int(cat) % len(palette)]
        style = StyleAttributes(p.style.has_fill, color, p.style.stroke_width)
        out.append(NormalizedPath(p.path_id, p.commands, style, p.source_layer))
    return write_flat_svg(out, viewbox)
