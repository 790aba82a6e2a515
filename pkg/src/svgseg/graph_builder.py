"""Drawing-to-graph assembly.

Each path becomes a node carrying style, scalar geometry, curvature
statistics, its median point, and a fixed-size command tensor. Edges come
from a K-nearest-neighbor rule on median points plus a seeded random
augmentation, deduplicated to undirected, and carry a 10-component pairwise
descriptor.

All geometric features are computed in bbox-normalized coordinates (longest
bounding-box side scaled to 1) so that uniformly scaled or translated
drawings produce identical graphs.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from . import path_geometry as pg
from .svg_ingest import AffineTransform2D, NormalizedPath, apply_affine

log = logging.getLogger(__name__)


class EmptyDrawing(ValueError):
    """A drawing with no paths cannot become a graph."""


# Command-kind indices inside the command tensor.
_KIND_INDEX = {k: i for i, k in enumerate("MLHVCSQTAZ")}
TENSOR_COLS = 8  # kind slot + 7 parameter slots
PAD_VALUE = -1.0


class EdgeFeature(IntEnum):
    """Column layout of the 10-component edge descriptor."""

    same_length = 0
    from_knn = 1
    log_length_ratio = 2
    inv_length_ratio = 3
    theta_norm = 4
    log_min_dist = 5
    containment = 6
    intersection_count = 7
    same_style = 8
    contiguous = 9


EDGE_DIM = len(EdgeFeature)

# Scalar node-feature blocks preceding the flattened command tensor.
_NODE_SCALAR_BLOCKS = (
    ("has_fill", 1),
    ("stroke_rgb", 3),
    ("stroke_width", 1),
    ("is_closed", 1),
    ("log_area", 1),
    ("log_length", 1),
    ("command_count", 1),
    ("curvature_stats", 4),
    ("median_xy", 2),
)
NODE_SCALAR_DIM = sum(size for _, size in _NODE_SCALAR_BLOCKS)  # 15


def node_feature_dim(n_max: int) -> int:
    return NODE_SCALAR_DIM + TENSOR_COLS * n_max


def feature_layout(n_max: int) -> dict:
    """Component names and offsets of the node and edge feature vectors."""
    node = []
    offset = 0
    for name, size in _NODE_SCALAR_BLOCKS:
        node.append({"name": name, "offset": offset, "size": size})
        offset += size
    node.append({"name": "command_tensor", "offset": offset, "size": TENSOR_COLS * n_max})
    edge = [{"name": f.name, "offset": f.value, "size": 1} for f in EdgeFeature]
    return {"node": node, "edge": edge, "node_dim": node_feature_dim(n_max),
            "edge_dim": EDGE_DIM, "n_max": n_max}


@dataclass(frozen=True)
class GraphConfig:
    k: int = 6
    random_fraction: float = 0.05
    n_max: int = 32
    contiguity_tol: float = 1e-3   # fraction of the bbox diagonal
    seed: int = 0
    samples: int = pg.NODE_SAMPLES
    curvature_intervals: int = pg.CURVATURE_INTERVALS
    same_length_rtol: float = 1e-6


@dataclass
class DrawingGraph:
    drawing_id: str
    node_features: np.ndarray            # (V, node_dim)
    edge_index: np.ndarray               # (E, 2) int, src < dst, lexsorted
    edge_features: np.ndarray            # (E, EDGE_DIM)
    labels: Optional[np.ndarray] = None  # (V, 3) int, -1 = unlabeled row
    meta: dict = field(default_factory=dict)

    @property
    def node_count(self) -> int:
        return len(self.node_features)

    @property
    def edge_count(self) -> int:
        return len(self.edge_index)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.node_count, dtype=int)
        for s, d in self.edge_index:
            deg[s] += 1
            deg[d] += 1
        return deg


def drawing_bbox(paths: Sequence[NormalizedPath], samples: int = 64):
    """Axis-aligned bounds (min-x, min-y, width, height) of the sampled
    geometry."""
    lo = np.array([math.inf, math.inf])
    hi = -np.array([math.inf, math.inf])
    for p in paths:
        pts = pg.sample_equal_arclength(p, samples).points
        lo = np.minimum(lo, pts.min(axis=0))
        hi = np.maximum(hi, pts.max(axis=0))
    return (float(lo[0]), float(lo[1]), float(hi[0] - lo[0]), float(hi[1] - lo[1]))


def _normalizing_transform(bbox) -> AffineTransform2D:
    minx, miny, w, h = bbox
    scale = max(w, h)
    if scale <= 0:
        scale = 1.0
    return AffineTransform2D.scaling(1.0 / scale).compose(
        AffineTransform2D.translation(-minx, -miny))


class _NodeGeometry:
    """Per-node precomputation shared by node and edge feature extraction."""

    def __init__(self, npath: NormalizedPath, cfg: GraphConfig):
        self.path = npath
        self.compiled = pg.compile_path(npath)
        self.poly = pg.sample_equal_arclength(self.compiled, cfg.samples)
        self.length = self.compiled.length
        self.closed = self.compiled.closed
        self.area = pg.path_area(self.compiled)
        self.median = pg.median_point(self.poly)
        self.endpoints = self.compiled.endpoints()
        self.kappa = pg.curvature_profile(self.compiled, cfg.curvature_intervals).samples
        self.style_key = (npath.style.has_fill, npath.style.stroke_rgb,
                          npath.style.stroke_width)


def tokenize_path(path: NormalizedPath, n_max: int) -> np.ndarray:
    """Encode up to n_max commands as an (n_max, 8) tensor.

    Row = [kind index, 7 parameter slots]; unused parameter slots and pad
    rows are -1. Commands beyond n_max are dropped.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    tensor = np.full((n_max, TENSOR_COLS), PAD_VALUE)
    for row, cmd in zip(range(n_max), path.commands):
        tensor[row, 0] = _KIND_INDEX[cmd.kind]
        for j, p in enumerate(cmd.params):
            tensor[row, 1 + j] = p
    return tensor


def _node_vector(geom: _NodeGeometry, cfg: GraphConfig) -> np.ndarray:
    npath = geom.path
    style = npath.style
    kappa = geom.kappa
    parts = [
        [1.0 if style.has_fill else 0.0],
        list(style.stroke_rgb),
        [style.stroke_width],
        [1.0 if geom.closed else 0.0],
        [math.log1p(geom.area) if (geom.closed and geom.area is not None) else 0.0],
        [math.log1p(geom.length)],
        [float(len(npath.commands))],
        [float(kappa.mean()), float(kappa.min()), float(kappa.max()),
         float(np.abs(kappa).mean())],
        list(geom.median),
    ]
    scalars = np.concatenate([np.asarray(p, dtype=float) for p in parts])
    return np.concatenate([scalars, tokenize_path(npath, cfg.n_max).ravel()])


def node_features(path: NormalizedPath, bbox, cfg: GraphConfig = GraphConfig()) -> np.ndarray:
    """Feature vector of a single path, normalized to the given bbox."""
    if max(bbox[2], bbox[3]) <= 0 and pg.path_length(path) > 0:
        raise ValueError("bbox must have positive extent")
    npath = apply_affine(path, _normalizing_transform(bbox))
    return _node_vector(_NodeGeometry(npath, cfg), cfg)


def knn_edges(medians: np.ndarray, k: int) -> set[tuple[int, int]]:
    """Directed edges to each node's K nearest others by median point.

    Distance ties break toward the lower path id. K is clamped to V-1.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    v = len(medians)
    if v < 2:
        return set()
    k = min(k, v - 1)
    medians = np.asarray(medians, dtype=float)
    out: set[tuple[int, int]] = set()
    if v <= 4096:
        diff = medians[:, None, :] - medians[None, :, :]
        dist = np.hypot(diff[..., 0], diff[..., 1])
        ids = np.arange(v)
        for i in range(v):
            order = np.lexsort((ids, dist[i]))
            picked = [j for j in order if j != i][:k]
            out.update((i, int(j)) for j in picked)
    else:
        from scipy.spatial import cKDTree

        tree = cKDTree(medians)
        dist, idx = tree.query(medians, k=k + 1)
        for i in range(v):
            cand = sorted(
                ((float(d), int(j)) for d, j in zip(dist[i], idx[i]) if j != i))
            out.update((i, j) for _, j in cand[:k])
    return out


def random_edges(node_count: int, count: int, seed: int,
                 existing: Iterable[tuple[int, int]]) -> set[tuple[int, int]]:
    """Uniform non-duplicate undirected pairs not already present.

    Deterministic for a given seed; returns fewer than `count` pairs when
    the graph has no room left.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    taken = {(min(s, d), max(s, d)) for s, d in existing}
    candidates = [(i, j) for i in range(node_count) for j in range(i + 1, node_count)
                  if (i, j) not in taken]
    if count == 0 or not candidates:
        return set()
    rng = np.random.default_rng(seed)
    count = min(count, len(candidates))
    picked = rng.choice(len(candidates), size=count, replace=False)
    return {candidates[i] for i in picked}


def dedup_undirected(pairs: Iterable[tuple[int, int]]) -> list[tuple[int, int]]:
    """Collapse directed pairs to unique (min, max) pairs, lexsorted."""
    return sorted({(min(s, d), max(s, d)) for s, d in pairs if s != d})


def _edge_vector(a: _NodeGeometry, b: _NodeGeometry, from_knn: bool,
                 cfg: GraphConfig, tol: float) -> np.ndarray:
    la, lb = a.length, b.length
    if la <= 0 or lb <= 0:
        log.warning("zero-length path in edge (%s); substituting epsilon",
                    "src" if la <= 0 else "dst")
    la_safe = la if la > 0 else 1e-9
    lb_safe = lb if lb > 0 else 1e-9

    dx = a.median[0] - b.median[0]
    dy = a.median[1] - b.median[1]
    theta = math.degrees(math.atan2(dy, dx)) % 360.0

    min_dist = pg.min_pairwise_distance(a.poly, b.poly)

    containment = 0.0
    if a.closed and pg.contains(a.compiled, b.compiled):
        containment = 1.0
    elif b.closed and pg.contains(b.compiled, a.compiled):
        containment = 1.0

    feat = np.empty(EDGE_DIM)
    feat[EdgeFeature.same_length] = float(
        abs(la - lb) <= cfg.same_length_rtol * max(la, lb))
    feat[EdgeFeature.from_knn] = float(from_knn)
    feat[EdgeFeature.log_length_ratio] = math.log(la_safe / lb_safe)
    feat[EdgeFeature.inv_length_ratio] = lb_safe / la_safe
    feat[EdgeFeature.theta_norm] = theta / 360.0
    feat[EdgeFeature.log_min_dist] = math.log1p(min_dist)
    feat[EdgeFeature.containment] = containment
    feat[EdgeFeature.intersection_count] = float(
        pg.count_intersections(a.poly, b.poly))
    feat[EdgeFeature.same_style] = float(a.style_key == b.style_key)
    feat[EdgeFeature.contiguous] = float(cdist(a.endpoints, b.endpoints).min() <= tol)
    return feat


def edge_features(a: NormalizedPath, b: NormalizedPath, from_knn: bool,
                  cfg: GraphConfig = GraphConfig(), bbox=None) -> np.ndarray:
    """10-component descriptor for the canonical pair orientation a=src.

    `a` must have the lower path id; features are computed in
    bbox-normalized coordinates (bbox derived from the pair when absent).
    """
    if a.path_id >= b.path_id:
        raise ValueError("canonical orientation requires a.path_id < b.path_id")
    if bbox is None:
        bbox = drawing_bbox([a, b])
    norm = _normalizing_transform(bbox)
    ga = _NodeGeometry(apply_affine(a, norm), cfg)
    gb = _NodeGeometry(apply_affine(b, norm), cfg)
    tol = cfg.contiguity_tol * _normalized_diagonal(bbox)
    return _edge_vector(ga, gb, from_knn, cfg, tol)


def _normalized_diagonal(bbox) -> float:
    scale = max(bbox[2], bbox[3])
    if scale <= 0:
        return 1.0
    return math.hypot(bbox[2], bbox[3]) / scale


def build_graph(paths: Sequence[NormalizedPath], cfg: GraphConfig = GraphConfig(),
                labels: Optional[dict[int, tuple[int, int, int]]] = None,
                drawing_id: str = "drawing") -> DrawingGraph:
    """Assemble the full drawing graph. Deterministic for a given seed."""
    if not paths:
        raise EmptyDrawing(drawing_id)
    bbox = drawing_bbox(paths)
    norm = _normalizing_transform(bbox)
    geoms = [_NodeGeometry(apply_affine(p, norm), cfg) for p in paths]

    node_mat = np.vstack([_node_vector(g, cfg) for g in geoms])

    medians = np.array([g.median for g in geoms])
    knn_directed = knn_edges(medians, cfg.k) if len(paths) >= 2 else set()
    knn_undirected = dedup_undirected(knn_directed)
    n_random = math.ceil(cfg.random_fraction * len(knn_undirected))
    extra = random_edges(len(paths), n_random, cfg.seed, knn_undirected)

    tol = cfg.contiguity_tol * _normalized_diagonal(bbox)
    knn_set = set(knn_undirected)
    all_pairs = sorted(knn_set | extra)
    edge_mat = np.zeros((len(all_pairs), EDGE_DIM))
    for row, (s, d) in enumerate(all_pairs):
        edge_mat[row] = _edge_vector(geoms[s], geoms[d], (s, d) in knn_set, cfg, tol)

    label_mat = None
    if labels is not None:
        label_mat = np.full((len(paths), 3), -1, dtype=int)
        for pid, triple in labels.items():
            label_mat[pid] = triple

    meta = {"k": cfg.k, "random_edges": len(extra), "n_max": cfg.n_max,
            "seed": cfg.seed, "bbox": list(bbox)}
    return DrawingGraph(
        drawing_id=drawing_id,
        node_features=node_mat,
        edge_index=np.array(all_pairs, dtype=int).reshape(-1, 2),
        edge_features=edge_mat,
        labels=label_mat,
        meta=meta,
    )


def filter_edges(graph: DrawingGraph,
                 predicate: Callable[[np.ndarray], bool]) -> DrawingGraph:
    """Same nodes, edges restricted to those whose features satisfy the
    predicate."""
    keep = np.array([bool(predicate(f)) for f in graph.edge_features], dtype=bool)
    return DrawingGraph(
        drawing_id=graph.drawing_id,
        node_features=graph.node_features,
        edge_index=graph.edge_index[keep].reshape(-1, 2),
        edge_features=graph.edge_features[keep],
        labels=graph.labels,
        meta=dict(graph.meta),
    )


# --- serialization -----------------------------------------------------------

def _round9(x: float) -> float:
    return float(f"{x:.9g}")


def graph_to_json(graph: DrawingGraph) -> str:
    """Canonical UTF-8 JSON: nodes sorted by id, edges sorted (s, d),
    reals at 9 significant digits. Byte-stable for identical graphs."""
    nodes = []
    for i in range(graph.node_count):
        y = None
        if graph.labels is not None and graph.labels[i][0] >= 0:
            y = [int(v) for v in graph.labels[i]]
        nodes.append({"id": i, "x": [_round9(v) for v in graph.node_features[i]],
                      "y": y})
    edges = [{"s": int(s), "d": int(d),
              "f": [_round9(v) for v in graph.edge_features[row]]}
             for row, (s, d) in enumerate(graph.edge_index)]
    meta = dict(graph.meta)
    meta["bbox"] = [_round9(v) for v in meta.get("bbox", [])]
    doc = {"drawing_id": graph.drawing_id, "meta": meta, "nodes": nodes,
           "edges": edges}
    return json.dumps(doc, separators=(",", ":")) + "\n"


def graph_from_json(text: str) -> DrawingGraph:
    doc = json.loads(text)
    nodes = sorted(doc["nodes"], key=lambda n: n["id"])
    node_mat = np.array([n["x"] for n in nodes], dtype=float)
    labels = None
    if any(n.get("y") is not None for n in nodes):
        labels = np.full((len(nodes), 3), -1, dtype=int)
        for n in nodes:
            if n.get("y") is not None:
                labels[n["id"]] = n["y"]
    edges = doc["edges"]
    edge_index = np.array([[e["s"], e["d"]] for e in edges], dtype=int).reshape(-1, 2)
    edge_mat = np.array([e["f"] for e in edges], dtype=float).reshape(-1, EDGE_DIM)
    return DrawingGraph(doc["drawing_id"], node_mat, edge_index, edge_mat,
                        labels, doc.get("meta", {}))


def write_dataset(graphs: Sequence[DrawingGraph], out_dir, n_max: int) -> Path:
    """Write one JSON file per drawing plus a manifest with the feature
    layout. Returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = []
    for g in graphs:
        name = f"{g.drawing_id}.json"
        (out / name).write_text(graph_to_json(g), encoding="utf-8")
        names.append(name)
    manifest = {"files": sorted(names), "feature_layout": feature_layout(n_max)}
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


def read_dataset(dataset_dir) -> list[DrawingGraph]:
    """Load every graph listed in a dataset manifest."""
    root = Path(dataset_dir)
    manifest = json.loads((root / "manifest.json").read_text(encoding="utf-8"))
    return [graph_from_json((root / name).read_text(encoding="utf-8"))
            for name in manifest["files"]]
