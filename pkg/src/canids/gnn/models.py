"""The four node classifiers: gcnn, sage, gat, transformer.

All four map a batch's (N, 2) feature matrix to (N, 2) class scores
through `layers` hidden blocks of width `hidden_dim`, then a linear head.
They differ only in how a block mixes neighbor information:

* gcnn: H <- relu(A_norm @ H @ W + b) with the degree-normalized
  adjacency (self-connections added).
* sage: H <- relu(H @ W_self + mean_in_neighbors(H) @ W_neigh + b); nodes
  without in-neighbors use a zero mean.
* gat: attention logits leaky_relu(a_src . Wh_u + a_dst . Wh_v) per edge
  u->v, softmax over each node's in-edges; a node with no in-edge attends
  to itself.  Note a node's own features only enter through explicit
  self-loop edges, so the update is driven by its in-neighborhood.
* transformer: scaled dot-product self-attention over every node pair of
  a window (no adjacency mask), with residual connections around the
  attention and feed-forward sub-blocks; the input is first embedded to
  hidden width so residuals line up.

None of the blocks uses positional information, so every forward commutes
with node permutations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import ShapeError
from . import autodiff as ad
from .autodiff import Tensor
from .batching import GraphBatch

MODEL_KINDS = ("gcnn", "gat", "sage", "transformer")

_MASKED = -1e30


@dataclass(frozen=True, slots=True)
class Hyperparams:
    hidden_dim: int = 16
    layers: int = 2
    heads: int = 1
    learning_rate: float = 1e-2
    epochs: int = 300
    class_weights: tuple[float, float] | None = None  # None: infer from data

    def validate(self) -> None:
        if self.hidden_dim < 1 or self.layers < 1:
            raise ShapeError("hidden_dim and layers must be >= 1")
        if self.heads != 1:
            raise ShapeError("only single-head attention is supported")
        if self.learning_rate <= 0:
            raise ShapeError("learning_rate must be positive")
        if self.epochs < 0:
            raise ShapeError("epochs must be >= 0")


@dataclass(slots=True)
class ModelParams:
    kind: str
    hyper: Hyperparams
    seed: int
    tensors: dict[str, Tensor] = field(default_factory=dict)
    # Input standardization fitted on the training features; identity until
    # training sets it.  Not trainable.
    input_mean: np.ndarray = field(default_factory=lambda: np.zeros(2))
    input_scale: np.ndarray = field(default_factory=lambda: np.ones(2))

    def trainable(self) -> list[Tensor]:
        return list(self.tensors.values())

    def named_arrays(self) -> list[tuple[str, np.ndarray]]:
        return [(name, t.data) for name, t in self.tensors.items()]


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_params(
    kind: str, hyper: Hyperparams, seed: int, in_dim: int = 2, n_classes: int = 2
) -> ModelParams:
    """Seeded glorot-uniform weights, zero biases; layout depends on kind."""
    if kind not in MODEL_KINDS:
        raise ShapeError(f"unknown model kind {kind!r}; choose from {MODEL_KINDS}")
    hyper.validate()
    rng = np.random.default_rng([seed])
    h = hyper.hidden_dim
    tensors: dict[str, np.ndarray] = {}

    def linear(prefix: str, fan_in: int, fan_out: int, bias: bool = True):
        tensors[f"{prefix}.W"] = _glorot(rng, fan_in, fan_out, (fan_in, fan_out))
        if bias:
            tensors[f"{prefix}.b"] = np.zeros((1, fan_out))

    dim = in_dim
    for l in range(hyper.layers):
        if kind == "gcnn":
            linear(f"layer{l}", dim, h)
        elif kind == "sage":
            tensors[f"layer{l}.W_self"] = _glorot(rng, dim, h, (dim, h))
            tensors[f"layer{l}.W_neigh"] = _glorot(rng, dim, h, (dim, h))
            tensors[f"layer{l}.b"] = np.zeros((1, h))
        elif kind == "gat":
            tensors[f"layer{l}.W"] = _glorot(rng, dim, h, (dim, h))
            tensors[f"layer{l}.a_src"] = _glorot(rng, h, 1, (h, 1))
            tensors[f"layer{l}.a_dst"] = _glorot(rng, h, 1, (h, 1))
        else:  # transformer
            if l == 0:
                linear("embed", dim, h)
            for name in ("Wq", "Wk", "Wv"):
                tensors[f"block{l}.{name}"] = _glorot(rng, h, h, (h, h))
            linear(f"block{l}.ffn1", h, h)
            linear(f"block{l}.ffn2", h, h)
        dim = h
    linear("head", dim, n_classes)
    return ModelParams(
        kind=kind,
        hyper=hyper,
        seed=seed,
        tensors={k: Tensor(v, requires_grad=True) for k, v in tensors.items()},
    )


def _check_finite(t: Tensor, where: str) -> Tensor:
    if not np.isfinite(t.data).all():
        raise ShapeError(f"non-finite values coming out of {where}")
    return t


def _x_tensor(params: ModelParams, batch: GraphBatch) -> Tensor:
    first = {"transformer": "embed.W", "sage": "layer0.W_self"}.get(params.kind, "layer0.W")
    expected = params.tensors[first].shape[0]
    if batch.x.shape[1] != expected:
        raise ShapeError(
            f"batch has {batch.x.shape[1]} features, model expects {expected}"
        )
    return Tensor((batch.x - params.input_mean) / params.input_scale)


def _gcn_forward(params: ModelParams, batch: GraphBatch) -> Tensor:
    a_norm = Tensor(batch.adj_norm)
    h = _x_tensor(params, batch)
    for l in range(params.hyper.layers):
        h = ad.relu(a_norm @ h @ params.tensors[f"layer{l}.W"] + params.tensors[f"layer{l}.b"])
        _check_finite(h, f"gcnn layer {l}")
    return _head(params, h)


def _sage_forward(params: ModelParams, batch: GraphBatch) -> Tensor:
    # mean_matrix[v, u] = 1/indeg(v) for each in-neighbor u, zero rows when
    # the in-neighborhood is empty
    indeg = batch.adj.sum(axis=0).astype(np.float64)
    scale = np.divide(1.0, indeg, out=np.zeros_like(indeg), where=indeg > 0)
    mean_matrix = Tensor(batch.adj.T.astype(np.float64) * scale[:, None])
    h = _x_tensor(params, batch)
    for l in range(params.hyper.layers):
        own = h @ params.tensors[f"layer{l}.W_self"]
        agg = (mean_matrix @ h) @ params.tensors[f"layer{l}.W_neigh"]
        h = ad.relu(own + agg + params.tensors[f"layer{l}.b"])
        _check_finite(h, f"sage layer {l}")
    return _head(params, h)


def _gat_forward(params: ModelParams, batch: GraphBatch) -> Tensor:
    allowed = batch.adj.copy()
    no_in = ~allowed.any(axis=0)
    allowed[no_in, no_in] = True  # fall back to self-attention
    mask = np.where(allowed, 0.0, _MASKED)
    h = _x_tensor(params, batch)
    for l in range(params.hyper.layers):
        hw = h @ params.tensors[f"layer{l}.W"]
        src = hw @ params.tensors[f"layer{l}.a_src"]  # (N, 1)
        dst = hw @ params.tensors[f"layer{l}.a_dst"]  # (N, 1)
        logits = ad.leaky_relu(src + dst.T, 0.2)  # logits[u, v] for edge u->v
        alpha = ad.softmax(logits, axis=0, additive_mask=mask)
        h = ad.relu(alpha.T @ hw)
        _check_finite(h, f"gat layer {l}")
    return _head(params, h)


def _transformer_forward(params: ModelParams, batch: GraphBatch) -> Tensor:
    same_window = batch.window_ids[:, None] == batch.window_ids[None, :]
    mask = np.where(same_window, 0.0, _MASKED)
    scale = 1.0 / math.sqrt(params.hyper.hidden_dim)
    h = _x_tensor(params, batch) @ params.tensors["embed.W"] + params.tensors["embed.b"]
    for l in range(params.hyper.layers):
        q = h @ params.tensors[f"block{l}.Wq"]
        k = h @ params.tensors[f"block{l}.Wk"]
        v = h @ params.tensors[f"block{l}.Wv"]
        attn = ad.softmax((q @ k.T) * scale, axis=1, additive_mask=mask)
        h = h + attn @ v
        ff = ad.relu(h @ params.tensors[f"block{l}.ffn1.W"] + params.tensors[f"block{l}.ffn1.b"])
        h = h + ff @ params.tensors[f"block{l}.ffn2.W"] + params.tensors[f"block{l}.ffn2.b"]
        _check_finite(h, f"transformer block {l}")
    return _head(params, h)


def _head(params: ModelParams, h: Tensor) -> Tensor:
    return _check_finite(h @ params.tensors["head.W"] + params.tensors["head.b"], "head")


_FORWARDS = {
    "gcnn": _gcn_forward,
    "sage": _sage_forward,
    "gat": _gat_forward,
    "transformer": _transformer_forward,
}


def forward(params: ModelParams, batch: GraphBatch) -> Tensor:
    """Per-node class scores, shape (N, 2)."""
    return _FORWARDS[params.kind](params, batch)


def clone_params(params: ModelParams) -> ModelParams:
    return replace(
        params,
        tensors={k: Tensor(t.data.copy(), requires_grad=True) for k, t in params.tensors.items()},
        input_mean=params.input_mean.copy(),
        input_scale=params.input_scale.copy(),
    )


def fit_input_standardization(params: ModelParams, batches) -> None:
    """Set the input affine transform from the given training batches.

    Features live on very different scales (rank values sit near the
    isolated-node floor, densities span [0, 1]); standardizing keeps the
    shared first-layer gradients well conditioned.  Constant columns keep
    scale 1 to avoid dividing by zero.
    """
    x = np.concatenate([b.x for b in batches], axis=0)
    params.input_mean = x.mean(axis=0)
    scale = x.std(axis=0)
    params.input_scale = np.where(scale > 1e-12, scale, 1.0)
