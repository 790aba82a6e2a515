"""Graph attention network with hierarchical heads, in plain numpy.

Two stacked attention layers with a ReLU between them update node features
by attention-weighted aggregation over neighbors (undirected edges expanded
to both directed arcs plus a self arc per node):

    out_i = alpha_ii * Phi_s x_i + sum_j alpha_ij * Phi_t x_j

with attention scores

    alpha_ij = softmax_j  attn . LeakyReLU(Phi_s x_i + Phi_t x_j + Phi_e e_ij)

normalized over j in N(i) and i itself (self arcs carry a zero edge
feature). Three parallel linear+softmax heads read the shared trunk output
and predict the coarse, intermediate, and fine label of every node.

All gradients are exact reverse-mode accumulation written out by hand;
there is no autograd framework underneath.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .graph_builder import EDGE_DIM, DrawingGraph


class NonFiniteInput(ValueError):
    """Inputs or parameters contain NaN or infinity."""


class DimensionMismatch(ValueError):
    """Feature or parameter dimensions are inconsistent."""


class UnlabeledNode(ValueError):
    """Loss requested on a graph with unlabeled nodes."""


class DivergedLoss(RuntimeError):
    """Training produced a non-finite loss; carries the last good model."""

    def __init__(self, model, history):
        self.model = model
        self.history = history
        super().__init__("training loss diverged")


@dataclass
class GatLayerParams:
    phi_s: np.ndarray            # (d_out, d_in) self/source transform
    phi_t: np.ndarray            # (d_out, d_in) neighbor/target transform
    phi_e: np.ndarray            # (d_out, EDGE_DIM) edge transform
    attn: np.ndarray             # (d_out,) attention vector
    leaky_slope: float = 0.2

    @property
    def d_in(self) -> int:
        return self.phi_s.shape[1]

    @property
    def d_out(self) -> int:
        return self.phi_s.shape[0]

    def check(self):
        if self.phi_t.shape != self.phi_s.shape:
            raise DimensionMismatch("phi_s and phi_t shapes differ")
        if self.phi_e.shape != (self.d_out, EDGE_DIM):
            raise DimensionMismatch("phi_e must be (d_out, 10)")
        if self.attn.shape != (self.d_out,):
            raise DimensionMismatch("attn must be (d_out,)")
        for arr in (self.phi_s, self.phi_t, self.phi_e, self.attn):
            if not np.isfinite(arr).all():
                raise NonFiniteInput("non-finite layer parameters")

    def arrays(self) -> dict[str, np.ndarray]:
        return {"phi_s": self.phi_s, "phi_t": self.phi_t, "phi_e": self.phi_e,
                "attn": self.attn}


@dataclass
class GatModel:
    layer1: GatLayerParams
    layer2: GatLayerParams
    head_weights: list[np.ndarray]       # per level: (|L_k|, d_hidden)
    head_biases: list[np.ndarray]        # per level: (|L_k|,)
    level_sizes: tuple[int, ...]

    @property
    def d_in(self) -> int:
        return self.layer1.d_in

    @property
    def d_hidden(self) -> int:
        return self.layer2.d_out

    def arrays(self) -> dict[str, np.ndarray]:
        out = {}
        for prefix, layer in (("layer1", self.layer1), ("layer2", self.layer2)):
            out.update({f"{prefix}.{k}": v for k, v in layer.arrays().items()})
        for k, (w, b) in enumerate(zip(self.head_weights, self.head_biases), 1):
            out[f"head{k}.weight"] = w
            out[f"head{k}.bias"] = b
        return out

    def clone(self) -> "GatModel":
        return copy.deepcopy(self)


def init_model(d_in: int, d_hidden: int, level_sizes: Sequence[int],
               seed: int = 0, leaky_slope: float = 0.2) -> GatModel:
    """Glorot-uniform initialization, deterministic for a given seed."""
    rng = np.random.default_rng(seed)

    def glorot(rows, cols):
        bound = np.sqrt(6.0 / (rows + cols))
        return rng.uniform(-bound, bound, size=(rows, cols))

    def layer(di, do):
        return GatLayerParams(
            phi_s=glorot(do, di), phi_t=glorot(do, di),
            phi_e=glorot(do, EDGE_DIM),
            attn=rng.uniform(-1, 1, size=do) * np.sqrt(3.0 / do),
            leaky_slope=leaky_slope,
        )

    heads_w = [glorot(n, d_hidden) for n in level_sizes]
    heads_b = [np.zeros(n) for n in level_sizes]
    return GatModel(layer(d_in, d_hidden), layer(d_hidden, d_hidden),
                    heads_w, heads_b, tuple(int(n) for n in level_sizes))


def parameter_count(model: GatModel) -> int:
    return int(sum(a.size for a in model.arrays().values()))


# --- arc structure -----------------------------------------------------------

class ArcSet:
    """Directed arcs of a graph: both directions of every undirected edge
    plus one self arc per node, sorted by center node.

    Precompute once per graph; reused across epochs.
    """

    def __init__(self, edge_index: np.ndarray, edge_features: np.ndarray,
                 node_count: int):
        v = node_count
        e = len(edge_index)
        centers = np.concatenate([edge_index[:, 0], edge_index[:, 1],
                                  np.arange(v)])
        neighbors = np.concatenate([edge_index[:, 1], edge_index[:, 0],
                                    np.arange(v)])
        efeat = np.concatenate([edge_features, edge_features,
                                np.zeros((v, EDGE_DIM))])
        is_self = np.zeros(2 * e + v, dtype=bool)
        is_self[2 * e:] = True

        order = np.lexsort((neighbors, centers))
        self.centers = centers[order]
        self.neighbors = neighbors[order]
        self.efeat = efeat[order]
        self.is_self = is_self[order]
        self.node_count = v
        # Every node owns at least its self arc, so all segments are
        # non-empty and reduceat boundaries are simply the first arc of
        # each center.
        self.seg_starts = np.searchsorted(self.centers, np.arange(v))

    @staticmethod
    def from_graph(graph: DrawingGraph) -> "ArcSet":
        return ArcSet(graph.edge_index, graph.edge_features, graph.node_count)


def _segment_sum(values: np.ndarray, arcs: ArcSet) -> np.ndarray:
    return np.add.reduceat(values, arcs.seg_starts, axis=0)


def _segment_max(values: np.ndarray, arcs: ArcSet) -> np.ndarray:
    return np.maximum.reduceat(values, arcs.seg_starts)


@dataclass
class _LayerCache:
    x: np.ndarray
    xs: np.ndarray
    xt: np.ndarray
    z: np.ndarray
    h: np.ndarray
    score: np.ndarray
    alpha: np.ndarray
    base: np.ndarray
    order: np.ndarray        # score-sorted arc order used for reductions
    inv_order: np.ndarray
    out: np.ndarray


@dataclass
class ForwardTrace:
    """Everything the backward pass (and the tests) need to see."""

    layer_pre: list[np.ndarray]          # per-layer pre-ReLU outputs
    alphas: list[np.ndarray]             # per-layer attention per directed arc
    arc_centers: np.ndarray
    arc_neighbors: np.ndarray
    head_logits: list[np.ndarray]
    head_probs: list[np.ndarray]
    caches: list = field(default_factory=list, repr=False)
    relu_out: Optional[np.ndarray] = None
    trunk: Optional[np.ndarray] = None


class _SortedArcs:
    """View of an ArcSet whose arcs are reordered inside each center segment
    by attention score. Summing in value order makes the reductions
    independent of node numbering, so relabeling a graph permutes outputs
    bit-exactly."""

    def __init__(self, arcs: ArcSet, score: np.ndarray):
        self.order = np.lexsort((score, arcs.centers))
        self.centers = arcs.centers[self.order]
        self.seg_starts = arcs.seg_starts  # center multiset is unchanged
        self.node_count = arcs.node_count


def _layer_forward(layer: GatLayerParams, x: np.ndarray, arcs: ArcSet) -> _LayerCache:
    if x.shape[1] != layer.d_in:
        raise DimensionMismatch(
            f"layer expects d_in={layer.d_in}, got {x.shape[1]}")
    if not np.isfinite(x).all():
        raise NonFiniteInput("non-finite node features")
    layer.check()

    xs = x @ layer.phi_s.T
    xt = x @ layer.phi_t.T
    z = xs[arcs.centers] + xt[arcs.neighbors] + arcs.efeat @ layer.phi_e.T
    h = np.where(z > 0, z, layer.leaky_slope * z)
    score = h @ layer.attn

    sorted_view = _SortedArcs(arcs, score)
    order, inv = sorted_view.order, np.argsort(sorted_view.order)
    s_sorted = score[order]
    smax = _segment_max(s_sorted, sorted_view)
    expd = np.exp(s_sorted - smax[sorted_view.centers])
    denom = _segment_sum(expd, sorted_view)
    alpha_sorted = expd / denom[sorted_view.centers]

    base = np.where(arcs.is_self[:, None], xs[arcs.centers], xt[arcs.neighbors])
    msg_sorted = alpha_sorted[:, None] * base[order]
    out = _segment_sum(msg_sorted, sorted_view)

    return _LayerCache(x=x, xs=xs, xt=xt, z=z, h=h, score=score,
                       alpha=alpha_sorted[inv], base=base, order=order,
                       inv_order=inv, out=out)


def _layer_backward(layer: GatLayerParams, cache: _LayerCache, arcs: ArcSet,
                    gout: np.ndarray):
    """Returns (dx, grads dict) for one attention layer."""
    alpha = cache.alpha
    dmsg = gout[arcs.centers]
    dalpha = np.einsum("ad,ad->a", dmsg, cache.base)
    dbase = alpha[:, None] * dmsg

    # Softmax backward per center segment (sorted order for determinism).
    order = cache.order
    weighted = (alpha * dalpha)[order]
    seg_dot = np.add.reduceat(weighted, arcs.seg_starts)
    dscore = alpha * (dalpha - seg_dot[arcs.centers])

    dh = dscore[:, None] * layer.attn[None, :]
    dattn = cache.h.T @ dscore
    dz = dh * np.where(cache.z > 0, 1.0, layer.leaky_slope)

    v, d_out = arcs.node_count, layer.d_out
    dxs = np.zeros((v, d_out))
    dxt = np.zeros((v, d_out))
    np.add.at(dxs, arcs.centers, dz)
    np.add.at(dxt, arcs.neighbors, dz)
    self_mask = arcs.is_self
    np.add.at(dxs, arcs.centers[self_mask], dbase[self_mask])
    np.add.at(dxt, arcs.neighbors[~self_mask], dbase[~self_mask])

    grads = {
        "phi_s": dxs.T @ cache.x,
        "phi_t": dxt.T @ cache.x,
        "phi_e": dz.T @ arcs.efeat,
        "attn": dattn,
    }
    dx = dxs @ layer.phi_s + dxt @ layer.phi_t
    return dx, grads


def attention_coefficients(layer: GatLayerParams, x: np.ndarray,
                           arcs: ArcSet) -> np.ndarray:
    """Attention weight of every directed arc (self arcs included), in the
    arc set's storage order. Rows grouped by center sum to 1."""
    return _layer_forward(layer, np.asarray(x, dtype=float), arcs).alpha


def layer_forward(layer: GatLayerParams, x: np.ndarray, arcs: ArcSet) -> np.ndarray:
    """One attention layer update of all node features."""
    return _layer_forward(layer, np.asarray(x, dtype=float), arcs).out


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def model_forward(model: GatModel, graph, arcs: Optional[ArcSet] = None) -> ForwardTrace:
    """Full forward pass: two attention layers with a ReLU between, then the
    three softmax heads."""
    if isinstance(graph, DrawingGraph):
        x = graph.node_features
        arcs = arcs or ArcSet.from_graph(graph)
    else:
        x = np.asarray(graph, dtype=float)
        if arcs is None:
            raise ValueError("arcs required when passing a raw feature matrix")
    c1 = _layer_forward(model.layer1, x, arcs)
    relu_out = np.maximum(c1.out, 0.0)
    c2 = _layer_forward(model.layer2, relu_out, arcs)
    logits = [c2.out @ w.T + b
              for w, b in zip(model.head_weights, model.head_biases)]
    probs = [_softmax_rows(l) for l in logits]
    return ForwardTrace(
        layer_pre=[c1.out, c2.out],
        alphas=[c1.alpha, c2.alpha],
        arc_centers=arcs.centers,
        arc_neighbors=arcs.neighbors,
        head_logits=logits,
        head_probs=probs,
        caches=[c1, c2],
        relu_out=relu_out,
        trunk=c2.out,
    )


@dataclass
class Gradients:
    layer1: dict[str, np.ndarray]
    layer2: dict[str, np.ndarray]
    head_weights: list[np.ndarray]
    head_biases: list[np.ndarray]

    def arrays(self) -> dict[str, np.ndarray]:
        out = {f"layer1.{k}": v for k, v in self.layer1.items()}
        out.update({f"layer2.{k}": v for k, v in self.layer2.items()})
        for k, (w, b) in enumerate(zip(self.head_weights, self.head_biases), 1):
            out[f"head{k}.weight"] = w
            out[f"head{k}.bias"] = b
        return out

    def scaled(self, factor: float) -> "Gradients":
        return Gradients(
            {k: v * factor for k, v in self.layer1.items()},
            {k: v * factor for k, v in self.layer2.items()},
            [w * factor for w in self.head_weights],
            [b * factor for b in self.head_biases],
        )


LOG_CLAMP = 1e-12


def loss_and_gradients(model: GatModel, graph: DrawingGraph,
                       head_weights: Sequence[float] = (1.0, 1.0, 1.0),
                       arcs: Optional[ArcSet] = None,
                       trace: Optional[ForwardTrace] = None):
    """Weighted sum of per-head mean cross-entropies and its exact gradient
    with respect to every parameter."""
    if graph.labels is None or (graph.labels < 0).any():
        raise UnlabeledNode(graph.drawing_id)
    arcs = arcs or ArcSet.from_graph(graph)
    trace = trace or model_forward(model, graph, arcs)
    v = graph.node_count

    loss = 0.0
    dtrunk = np.zeros_like(trace.trunk)
    head_w_grads, head_b_grads = [], []
    for k, (w_k, probs) in enumerate(zip(head_weights, trace.head_probs)):
        y = graph.labels[:, k]
        if (y >= model.level_sizes[k]).any():
            raise DimensionMismatch(
                f"label level {k + 1} exceeds head size {model.level_sizes[k]}")
        picked = probs[np.arange(v), y]
        loss += w_k * float(-np.log(np.clip(picked, LOG_CLAMP, None)).mean())
        dlogits = probs.copy()
        dlogits[np.arange(v), y] -= 1.0
        dlogits *= w_k / v
        head_w_grads.append(dlogits.T @ trace.trunk)
        head_b_grads.append(dlogits.sum(axis=0))
        dtrunk += dlogits @ model.head_weights[k]

    c1, c2 = trace.caches
    dr, grads2 = _layer_backward(model.layer2, c2, arcs, dtrunk)
    dh1 = dr * (c1.out > 0)
    _, grads1 = _layer_backward(model.layer1, c1, arcs, dh1)
    return loss, Gradients(grads1, grads2, head_w_grads, head_b_grads)


# --- optimizers and the training loop ---------------------------------------

class SgdOptimizer:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, model: GatModel, grads: Gradients):
        g = grads.arrays()
        for name, param in model.arrays().items():
            param -= self.lr * g[name]


class AdamOptimizer:
    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, model: GatModel, grads: Gradients):
        self.t += 1
        g = grads.arrays()
        for name, param in model.arrays().items():
            if name not in self.m:
                self.m[name] = np.zeros_like(param)
                self.v[name] = np.zeros_like(param)
            self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g[name]
            self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * g[name] ** 2
            m_hat = self.m[name] / (1 - self.beta1 ** self.t)
            v_hat = self.v[name] / (1 - self.beta2 ** self.t)
            param -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    epochs: int = 100
    seed: int = 0
    optimizer: str = "adam"              # "adam" or "sgd"
    head_loss_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    shuffle: bool = True


def make_optimizer(cfg: TrainConfig):
    if cfg.optimizer == "adam":
        return AdamOptimizer(cfg.lr)
    if cfg.optimizer == "sgd":
        return SgdOptimizer(cfg.lr)
    raise ValueError(f"unknown optimizer {cfg.optimizer!r}")


def train_loop(model: GatModel, graphs: Sequence[DrawingGraph], cfg: TrainConfig,
               epoch_callback: Optional[Callable[[GatModel, int], dict]] = None):
    """Per-graph gradient steps over a dataset, deterministic for a seed.

    Graphs are visited in seeded shuffled order each epoch (sorted by
    drawing id when shuffling is off). `epoch_callback` may return extra
    metrics (e.g. validation wF1) merged into that epoch's history entry.
    Raises DivergedLoss with the last finite-loss model attached.
    """
    if not graphs:
        raise ValueError("empty dataset")
    ordered = sorted(graphs, key=lambda g: g.drawing_id)
    arc_sets = [ArcSet.from_graph(g) for g in ordered]
    optimizer = make_optimizer(cfg)
    rng = np.random.default_rng(cfg.seed)
    history: list[dict] = []
    last_good = model.clone()

    for epoch in range(cfg.epochs):
        order = rng.permutation(len(ordered)) if cfg.shuffle else np.arange(len(ordered))
        losses = []
        for idx in order:
            try:
                loss, grads = loss_and_gradients(model, ordered[idx],
                                                 cfg.head_loss_weights, arc_sets[idx])
            except NonFiniteInput:
                raise DivergedLoss(last_good, history) from None
            if not np.isfinite(loss):
                raise DivergedLoss(last_good, history)
            optimizer.step(model, grads)
            losses.append(loss)
        entry = {"epoch": epoch, "loss": float(np.mean(losses))}
        if epoch_callback is not None:
            entry.update(epoch_callback(model, epoch))
        history.append(entry)
        if all(np.isfinite(a).all() for a in model.arrays().values()):
            last_good = model.clone()
    return model, history


def sgd_step(model: GatModel, grads: Gradients, lr: float):
    """Single plain gradient-descent update, in place."""
    SgdOptimizer(lr).step(model, grads)


# --- checkpoints -------------------------------------------------------------

CHECKPOINT_VERSION = 1


def save_checkpoint(model: GatModel, path):
    """Self-describing npz container: parameter arrays plus a JSON header
    with dims, level sizes, and a format version."""
    meta = {
        "format_version": CHECKPOINT_VERSION,
        "d_in": model.d_in,
        "d_hidden": model.d_hidden,
        "level_sizes": list(model.level_sizes),
        "leaky_slope": model.layer1.leaky_slope,
    }
    np.savez(path, __meta__=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
             **model.arrays())


def load_checkpoint(path) -> GatModel:
    with np.load(path) as data:
        meta = json.loads(bytes(data["__meta__"]).decode())
        if meta.get("format_version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('format_version')}")
        slope = float(meta["leaky_slope"])

        def layer(prefix):
            return GatLayerParams(
                phi_s=data[f"{prefix}.phi_s"].copy(),
                phi_t=data[f"{prefix}.phi_t"].copy(),
                phi_e=data[f"{prefix}.phi_e"].copy(),
                attn=data[f"{prefix}.attn"].copy(),
                leaky_slope=slope,
            )

        sizes = tuple(int(n) for n in meta["level_sizes"])
        heads_w = [data[f"head{k}.weight"].copy() for k in range(1, len(sizes) + 1)]
        heads_b = [data[f"head{k}.bias"].copy() for k in range(1, len(sizes) + 1)]
        return GatModel(layer("layer1"), layer("layer2"), heads_w, heads_b, sizes)
