"""Graph network core: 4 mean-aggregation SAGE layers, average readout,
a dimension-halving MLP head with log-softmax, exact hand-written
backpropagation, and Adam.

Everything is float64 on a fixed computation graph (dense math in numpy,
neighborhood aggregation as a sparse matrix product):

    features (N, 2)
      -> 4 x [H @ W_self + mean_pred(H) @ W_neigh, LeakyReLU]
      -> per-graph weighted mean readout (B, nhid)
      -> Dense(nhid/2) -> LeakyReLU -> Dense(nhid/4) -> LeakyReLU -> Dense(C)
      -> log-softmax -> mean negative log-likelihood.

Aggregation runs over each node's predecessors by default ("forward"
messages, past to future); empty neighborhoods contribute a zero vector.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .visibility import VisGraph

DEFAULT_ALPHA = 1e-2  # LeakyReLU negative slope

NUM_SAGE_LAYERS = 4
NUM_MLPP_LAYERS = 3


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class SageLayer:
    w_self: np.ndarray   # (d_in, d_out)
    w_neigh: np.ndarray  # (d_in, d_out)

    def __post_init__(self):
        if self.w_self.shape != self.w_neigh.shape:
            raise ValueError("w_self and w_neigh must share dimensions")


@dataclass(eq=False)
class DenseLayer:
    w: np.ndarray  # (d_in, d_out)
    b: np.ndarray  # (d_out,)

    def __post_init__(self):
        if self.b.shape != (self.w.shape[1],):
            raise ValueError("bias length must match output dimension")


@dataclass(eq=False)
class ModelParams:
    sage: list[SageLayer]
    mlpp: list[DenseLayer]
    nhid: int
    num_classes: int
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        dims = [2] + [self.nhid] * NUM_SAGE_LAYERS
        for layer, (di, do) in zip(self.sage, zip(dims, dims[1:])):
            if layer.w_self.shape != (di, do):
                raise ValueError(f"SAGE dimension chain broken at {layer.w_self.shape}")
        mdims = [self.nhid, self.nhid // 2, self.nhid // 4, self.num_classes]
        for layer, (di, do) in zip(self.mlpp, zip(mdims, mdims[1:])):
            if layer.w.shape != (di, do):
                raise ValueError(f"MLPP dimension chain broken at {layer.w.shape}")


def iter_tensors(params: ModelParams):
    """All trainable tensors as (name, array), in a fixed order."""
    for k, layer in enumerate(params.sage):
        yield f"sage.{k}.w_self", layer.w_self
        yield f"sage.{k}.w_neigh", layer.w_neigh
    for k, layer in enumerate(params.mlpp):
        yield f"mlpp.{k}.w", layer.w
        yield f"mlpp.{k}.b", layer.b


def param_count(nhid: int, num_classes: int) -> int:
    dims = [2] + [nhid] * NUM_SAGE_LAYERS
    total = sum(2 * di * do for di, do in zip(dims, dims[1:]))
    mdims = [nhid, nhid // 2, nhid // 4, num_classes]
    total += sum(di * do + do for di, do in zip(mdims, mdims[1:]))
    return total


def init_params(nhid: int, num_classes: int, seed: int,
                alpha: float = DEFAULT_ALPHA) -> ModelParams:
    """Glorot-uniform weights, zero biases, reproducible from the seed."""
    if nhid % 4 != 0 or nhid < 4:
        raise ValueError(f"nhid must be a positive multiple of 4, got {nhid}")
    if num_classes < 2:
        raise ValueError(f"need at least 2 classes, got {num_classes}")
    rng = np.random.default_rng(seed)

    def glorot(d_in: int, d_out: int) -> np.ndarray:
        bound = np.sqrt(6.0 / (d_in + d_out))
        return rng.uniform(-bound, bound, size=(d_in, d_out))

    dims = [2] + [nhid] * NUM_SAGE_LAYERS
    sage = [SageLayer(glorot(di, do), glorot(di, do))
            for di, do in zip(dims, dims[1:])]
    mdims = [nhid, nhid // 2, nhid // 4, num_classes]
    mlpp = [DenseLayer(glorot(di, do), np.zeros(do))
            for di, do in zip(mdims, mdims[1:])]
    return ModelParams(sage=sage, mlpp=mlpp, nhid=nhid,
                       num_classes=num_classes, alpha=alpha)


# ---------------------------------------------------------------------------
# Batched graphs (disjoint union; nodes of one graph stay contiguous)
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class BatchedGraph:
    num_nodes: int
    num_graphs: int
    features: np.ndarray       # (N, 2)
    labels: np.ndarray         # (B,)
    graph_id: np.ndarray       # (N,)
    graph_offsets: np.ndarray  # (B+1,) node ranges per graph
    agg_indptr: np.ndarray     # (N+1,) aggregation neighborhoods
    agg_indices: np.ndarray    # (E',)
    agg_counts: np.ndarray     # (N,) neighborhood sizes
    mean_op: sp.csr_matrix     # (N, N), row u holds 1/|N(u)| at its neighbors
    mean_op_t: sp.csr_matrix   # transpose, for the backward scatter
    readout_weights: np.ndarray  # (N,) per-node readout weight, sums to 1 per graph

    @classmethod
    def from_graphs(cls, graphs: list[VisGraph], features: list[np.ndarray],
                    labels, direction: str = "forward",
                    readout: str = "uniform") -> "BatchedGraph":
        if not graphs:
            raise ValueError("cannot batch zero graphs")
        sizes = np.array([g.n for g in graphs], dtype=np.int64)
        offsets = np.zeros(len(graphs) + 1, dtype=np.int64)
        np.cumsum(sizes, out=offsets[1:])
        n_total = int(offsets[-1])

        indptr_parts = []
        indices_parts = []
        weight_parts = []
        for g, base in zip(graphs, offsets[:-1]):
            ptr, idx = g.neighbor_csr(direction)
            indptr_parts.append(np.diff(ptr))
            indices_parts.append(idx + base)
            if readout == "uniform":
                weight_parts.append(np.full(g.n, 1.0 / g.n))
            elif readout == "degree":
                deg = (g.in_degrees() + g.out_degrees()).astype(np.float64)
                weight_parts.append(deg / deg.sum())
            else:
                raise ValueError(f"unknown readout mode {readout!r}")

        counts = np.concatenate(indptr_parts)
        agg_indptr = np.zeros(n_total + 1, dtype=np.int64)
        np.cumsum(counts, out=agg_indptr[1:])
        agg_indices = (np.concatenate(indices_parts) if counts.sum()
                       else np.empty(0, dtype=np.int64))

        counts_f = counts.astype(np.float64)
        data = np.repeat(1.0 / np.maximum(counts_f, 1.0), counts)
        mean_op = sp.csr_matrix((data, agg_indices, agg_indptr),
                                shape=(n_total, n_total))
        feats = np.vstack(features)
        if feats.shape[0] != n_total:
            raise ValueError("feature rows do not match total node count")
        return cls(
            num_nodes=n_total, num_graphs=len(graphs),
            features=np.ascontiguousarray(feats, dtype=np.float64),
            labels=np.asarray(labels, dtype=np.int64),
            graph_id=np.repeat(np.arange(len(graphs), dtype=np.int64), sizes),
            graph_offsets=offsets,
            agg_indptr=agg_indptr, agg_indices=agg_indices,
            agg_counts=counts_f,
            mean_op=mean_op, mean_op_t=mean_op.T.tocsr(),
            readout_weights=np.concatenate(weight_parts),
        )


def _segment_sum(rows: np.ndarray, indptr: np.ndarray, n_out: int) -> np.ndarray:
    """Sum contiguous row segments; empty segments yield zero rows."""
    out = np.zeros((n_out, rows.shape[1]))
    if rows.shape[0] == 0:
        return out
    counts = np.diff(indptr)
    nz = counts > 0
    out[nz] = np.add.reduceat(rows, indptr[:-1][nz], axis=0)
    return out


def neighbor_mean(h: np.ndarray, g: BatchedGraph) -> np.ndarray:
    """Mean of neighbor rows per node; nodes without neighbors get zeros."""
    return g.mean_op @ h


def neighbor_mean_adjoint(grad: np.ndarray, g: BatchedGraph) -> np.ndarray:
    """Backward of :func:`neighbor_mean`: scatter grad/|N(u)| to neighbors."""
    return g.mean_op_t @ grad


# ---------------------------------------------------------------------------
# Forward
# ---------------------------------------------------------------------------

def leaky_relu(x: np.ndarray, alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    return np.where(x >= 0, x, alpha * x)


def leaky_relu_grad(x: np.ndarray, alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    """Derivative w.r.t. the input; the x == 0 boundary takes slope 1."""
    return np.where(x >= 0, 1.0, alpha)


def sage_forward(h: np.ndarray, g: BatchedGraph, layer: SageLayer,
                 alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    """One SAGE layer: LeakyReLU(h W_self + mean_neigh(h) W_neigh)."""
    if h.shape[0] != g.num_nodes:
        raise ValueError(f"expected {g.num_nodes} rows, got {h.shape[0]}")
    if h.shape[1] != layer.w_self.shape[0]:
        raise ValueError(f"feature dim {h.shape[1]} != layer d_in {layer.w_self.shape[0]}")
    pre = h @ layer.w_self + neighbor_mean(h, g) @ layer.w_neigh
    return leaky_relu(pre, alpha)


def mean_readout(h: np.ndarray, g: BatchedGraph) -> np.ndarray:
    """Weighted mean of node rows per graph (uniform weights by default)."""
    if h.shape[0] != g.num_nodes:
        raise ValueError(f"expected {g.num_nodes} rows, got {h.shape[0]}")
    return _segment_sum(h * g.readout_weights[:, None], g.graph_offsets, g.num_graphs)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def mlpp_forward(z: np.ndarray, params: ModelParams) -> np.ndarray:
    """Halving-width head: Dense -> LReLU -> Dense -> LReLU -> Dense -> log-softmax."""
    if params.nhid % 4 != 0:
        raise ValueError("nhid must be divisible by 4")
    a = z @ params.mlpp[0].w + params.mlpp[0].b
    a = leaky_relu(a, params.alpha) @ params.mlpp[1].w + params.mlpp[1].b
    logits = leaky_relu(a, params.alpha) @ params.mlpp[2].w + params.mlpp[2].b
    return log_softmax(logits)


def nll_loss(logp: np.ndarray, labels: np.ndarray) -> float:
    """Mean over the batch of -logp[b, label_b]."""
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() >= logp.shape[1]:
        raise ValueError("label out of range")
    return float(-logp[np.arange(logp.shape[0]), labels].mean())


@dataclass(eq=False)
class ForwardCache:
    h: list[np.ndarray]        # per-layer node embeddings, h[0] = input features
    pre: list[np.ndarray]      # SAGE pre-activations
    neigh: list[np.ndarray]    # SAGE neighbor means
    z: np.ndarray              # readout
    mlp_in: list[np.ndarray]   # inputs to each dense layer
    mlp_pre: list[np.ndarray]  # dense pre-activations
    logp: np.ndarray


def forward(params: ModelParams, g: BatchedGraph) -> ForwardCache:
    h = [g.features]
    pre, neigh = [], []
    for layer in params.sage:
        m = neighbor_mean(h[-1], g)
        s = h[-1] @ layer.w_self + m @ layer.w_neigh
        neigh.append(m)
        pre.append(s)
        h.append(leaky_relu(s, params.alpha))
    z = mean_readout(h[-1], g)
    mlp_in, mlp_pre = [], []
    cur = z
    for k, layer in enumerate(params.mlpp):
        mlp_in.append(cur)
        a = cur @ layer.w + layer.b
        mlp_pre.append(a)
        if k < NUM_MLPP_LAYERS - 1:
            cur = leaky_relu(a, params.alpha)
    logp = log_softmax(mlp_pre[-1])
    return ForwardCache(h=h, pre=pre, neigh=neigh, z=z,
                        mlp_in=mlp_in, mlp_pre=mlp_pre, logp=logp)


def predict_logp(params: ModelParams, g: BatchedGraph) -> np.ndarray:
    return forward(params, g).logp


# ---------------------------------------------------------------------------
# Backward
# ---------------------------------------------------------------------------

def backward(params: ModelParams, g: BatchedGraph,
             cache: ForwardCache) -> dict[str, np.ndarray]:
    """Exact gradients of the mean NLL for every tensor in ``params``.

    Reverse traversal of the fixed pipeline; the neighbor-mean adjoint
    scatters 1/|N(u)| to each aggregated node and the readout adjoint
    scatters each graph's row back through its node weights.
    """
    grads: dict[str, np.ndarray] = {}
    batch = g.num_graphs
    alpha = params.alpha

    d_logits = np.exp(cache.logp)
    d_logits[np.arange(batch), g.labels] -= 1.0
    d_logits /= batch

    d_up = d_logits
    for k in range(NUM_MLPP_LAYERS - 1, -1, -1):
        if k < NUM_MLPP_LAYERS - 1:
            d_up = d_up * leaky_relu_grad(cache.mlp_pre[k], alpha)
        grads[f"mlpp.{k}.w"] = cache.mlp_in[k].T @ d_up
        grads[f"mlpp.{k}.b"] = d_up.sum(axis=0)
        d_up = d_up @ params.mlpp[k].w.T

    d_h = g.readout_weights[:, None] * d_up[g.graph_id]
    for k in range(NUM_SAGE_LAYERS - 1, -1, -1):
        d_s = d_h * leaky_relu_grad(cache.pre[k], alpha)
        grads[f"sage.{k}.w_self"] = cache.h[k].T @ d_s
        grads[f"sage.{k}.w_neigh"] = cache.neigh[k].T @ d_s
        d_h = d_s @ params.sage[k].w_self.T
        d_h += neighbor_mean_adjoint(d_s @ params.sage[k].w_neigh.T, g)
    return grads


def loss_and_grads(params: ModelParams, g: BatchedGraph):
    cache = forward(params, g)
    loss = nll_loss(cache.logp, g.labels)
    return loss, cache.logp, backward(params, g, cache)


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]

    @classmethod
    def for_params(cls, params: ModelParams) -> "AdamState":
        return cls(m={name: np.zeros_like(t) for name, t in iter_tensors(params)},
                   v={name: np.zeros_like(t) for name, t in iter_tensors(params)})


def adam_step(params: ModelParams, grads: dict[str, np.ndarray], state: AdamState,
              lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8, t: int = 1) -> tuple[ModelParams, AdamState]:
    """Bias-corrected Adam update, applied in place; t is the 1-based step."""
    if t < 1:
        raise ValueError("Adam step index t must be >= 1")
    for name, tensor in iter_tensors(params):
        grad = grads[name]
        if grad.shape != tensor.shape:
            raise ValueError(f"gradient shape mismatch for {name}")
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1 - beta1) * grad
        v *= beta2
        v += (1 - beta2) * grad * grad
        m_hat = m / (1 - beta1 ** t)
        v_hat = v / (1 - beta2 ** t)
        tensor -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return params, state


# ---------------------------------------------------------------------------
# Checkpoints (JSON; values round-trip at full repr precision)
# ---------------------------------------------------------------------------

def save_checkpoint(path, params: ModelParams, seed: int) -> None:
    tensors = {}
    for name, t in iter_tensors(params):
        mat = t if t.ndim == 2 else t[None, :]
        tensors[name] = {"rows": mat.shape[0], "cols": mat.shape[1],
                         "data": [float(x) for x in mat.ravel()]}
    doc = {"nhid": params.nhid, "num_classes": params.num_classes,
           "alpha": params.alpha, "seed": seed, "tensors": tensors}
    with open(path, "w", encoding="ascii") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path) -> tuple[ModelParams, int]:
    with open(path, "r", encoding="ascii") as fh:
        doc = json.load(fh)
    params = init_params(doc["nhid"], doc["num_classes"], seed=0, alpha=doc["alpha"])
    for name, t in iter_tensors(params):
        entry = doc["tensors"][name]
        arr = np.array(entry["data"], dtype=np.float64).reshape(entry["rows"], entry["cols"])
        t[...] = arr if t.ndim == 2 else arr[0]
    return params, int(doc["seed"])
