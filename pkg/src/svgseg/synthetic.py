"""Rule-based synthetic drawing corpus.

Generates floor-plan-like SVG drawings whose line categories follow simple
geometric rules (long straight strokes are walls, small arcs are doors,
closed rectangles are furniture, ...). The two rare categories are
deliberately confusable with a common sibling of the same intermediate
group: partitions look like short walls and windows sit between door-sized
and dimension-sized strokes. Labels ride along as data-layer attributes, so
the corpus exercises the whole ingest -> graph -> training pipeline.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .graph_builder import DrawingGraph, GraphConfig, build_graph
from .label_hierarchy import LabelMap, builtin_label_map, map_leaf
from .svg_ingest import (
    NormalizedPath,
    PathCommand,
    StyleAttributes,
    write_flat_svg,
)

CANVAS = 10.0

# Per-drawing expected instance counts. Rare classes appear in a minority of
# drawings: ~8 walls per drawing vs ~0.4 partitions gives the corpus a 20:1
# common-to-rare imbalance.
COMMON_COUNTS = {"wall": 8, "dimension": 8, "door": 6, "furniture": 5}
RARE_PROBABILITY = {"partition": 0.4, "window": 0.4}

_GRAY = (0.35, 0.35, 0.35)
_BLACK = (0.0, 0.0, 0.0)


def _line(x0, y0, x1, y1):
    return (PathCommand("M", (x0, y0)), PathCommand("L", (x1, y1)))


def _rect(x, y, w, h):
    return (
        PathCommand("M", (x, y)),
        PathCommand("L", (x, y + h)),
        PathCommand("L", (x + w, y + h)),
        PathCommand("L", (x + w, y)),
        PathCommand("Z"),
    )


def _quarter_arc(cx, cy, r, quadrant):
    """Door swing: one quarter of a circle starting on the +x axis."""
    starts = [(cx + r, cy), (cx, cy + r), (cx - r, cy), (cx, cy - r)]
    x0, y0 = starts[quadrant % 4]
    x1, y1 = starts[(quadrant + 1) % 4]
    return (PathCommand("M", (x0, y0)),
            PathCommand("A", (r, r, 0.0, 0.0, 1.0, x1, y1)))


def _make_instance(kind: str, rng: np.random.Generator):
    x, y = rng.uniform(0.5, CANVAS - 0.5, size=2)
    angle = rng.uniform(0, 2 * math.pi)

    def along(length):
        return (x, y, x + length * math.cos(angle), y + length * math.sin(angle))

    if kind == "wall":
        length = rng.uniform(4.0, 8.0)
        cmds = _line(*along(length))
        style = StyleAttributes(False, _BLACK, round(rng.uniform(2.6, 3.4), 3))
    elif kind == "partition":
        # Rare: overlaps the short-wall regime in both length and width.
        length = rng.uniform(2.0, 4.5)
        cmds = _line(*along(length))
        style = StyleAttributes(False, _BLACK, round(rng.uniform(2.2, 3.0), 3))
    elif kind == "dimension":
        length = rng.uniform(1.5, 4.0)
        cmds = _line(*along(length))
        style = StyleAttributes(False, _GRAY, round(rng.uniform(0.4, 0.6), 3))
    elif kind == "door":
        r = rng.uniform(0.5, 1.1)
        cmds = _quarter_arc(x, y, r, int(rng.integers(0, 4)))
        style = StyleAttributes(False, _BLACK, round(rng.uniform(0.9, 1.3), 3))
    elif kind == "window":
        # Rare: a straight stroke in the door-size range with door-like width.
        length = rng.uniform(0.7, 1.6)
        cmds = _line(*along(length))
        style = StyleAttributes(False, _BLACK, round(rng.uniform(0.9, 1.3), 3))
    elif kind == "furniture":
        w, h = rng.uniform(0.5, 1.4, size=2)
        cmds = _rect(x, y, w, h)
        style = StyleAttributes(True, _BLACK, round(rng.uniform(0.7, 1.0), 3))
    else:
        raise ValueError(f"unknown synthetic kind {kind!r}")
    return cmds, style


def drawing_paths(drawing_seed: int) -> list[NormalizedPath]:
    """Deterministic path list of one synthetic drawing, labels attached as
    source layers."""
    rng = np.random.default_rng(drawing_seed)
    instances: list[tuple[str, tuple, StyleAttributes]] = []
    for kind, count in COMMON_COUNTS.items():
        for _ in range(count):
            cmds, style = _make_instance(kind, rng)
            instances.append((kind, cmds, style))
    for kind, prob in RARE_PROBABILITY.items():
        if rng.random() < prob:
            cmds, style = _make_instance(kind, rng)
            instances.append((kind, cmds, style))
    order = rng.permutation(len(instances))
    return [NormalizedPath(pid, instances[i][1], instances[i][2], instances[i][0])
            for pid, i in enumerate(order)]


def drawing_svg(drawing_seed: int) -> str:
    return write_flat_svg(drawing_paths(drawing_seed), viewbox=(0, 0, CANVAS, CANVAS))


def write_corpus(out_dir, n_drawings: int, seed: int = 0) -> list[Path]:
    """Write n synthetic drawings as SVG files named synth_<i>.svg."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for i in range(n_drawings):
        p = out / f"synth_{i:03d}.svg"
        p.write_text(drawing_svg(seed * 100003 + i), encoding="utf-8")
        files.append(p)
    return files


def label_triples(paths: Sequence[NormalizedPath],
                  label_map: Optional[LabelMap] = None) -> dict[int, tuple[int, int, int]]:
    label_map = label_map or builtin_label_map("synthetic")
    return {p.path_id: map_leaf(p.source_layer, label_map)
            for p in paths if p.source_layer is not None}


def corpus_graphs(n_drawings: int, seed: int = 0,
                  cfg: Optional[GraphConfig] = None) -> list[DrawingGraph]:
    """Labeled drawing graphs of a synthetic corpus, ready for training."""
    cfg = cfg or GraphConfig(k=4, n_max=8, seed=seed)
    graphs = []
    for i in range(n_drawings):
        paths = drawing_paths(seed * 100003 + i)
        graphs.append(build_graph(paths, cfg, labels=label_triples(paths),
                                  drawing_id=f"synth_{i:03d}"))
    return graphs
